"""Scoring and ranking metrics for a trained item-item model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import InteractionMatrix
from .weights import WeightMatrix


def _as_array(W) -> np.ndarray:
    return W.w if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)


def score_user(input_items, W) -> np.ndarray:
    """Scores ``x @ W`` for the binary row with ones at ``input_items``; input items get -inf."""
    W = _as_array(W)
    items = np.asarray(sorted(set(int(i) for i in input_items)), dtype=np.int64)
    scores = W[items].sum(axis=0) if items.size else np.zeros(W.shape[1])
    scores[items] = -np.inf
    return scores


def rank_items(scores, k: int | None = None) -> np.ndarray:
    """Item indices by descending score; ties go to the smaller index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return order if k is None else order[:k]


def _dcg_discounts(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2))


def recall_at_k(scores, target_items, k: int) -> float:
    target = set(int(i) for i in target_items)
    if k < 1 or not target:
        raise ValueError("need k >= 1 and a nonempty target")
    hits = sum(1 for i in rank_items(scores, k).tolist() if i in target)
    return hits / min(k, len(target))


def ndcg_at_k(scores, target_items, k: int) -> float:
    target = set(int(i) for i in target_items)
    if k < 1 or not target:
        raise ValueError("need k >= 1 and a nonempty target")
    top = rank_items(scores, k)
    disc = _dcg_discounts(k)
    dcg = math.fsum(disc[r] for r, i in enumerate(top.tolist()) if i in target)
    idcg = math.fsum(disc[:min(k, len(target))])
    return dcg / idcg


def mse(R: InteractionMatrix, W, holdout: InteractionMatrix, include_zeros: bool = False) -> float:
    """Hold-out MSE: squared residuals of (D * R) W over held-out cells, divided by nnz(D).

    D marks the retained interactions (entries of R not in ``holdout``). By
    default the numerator runs over the held-out entries only. With
    ``include_zeros`` it runs over every cell with D = 0, which adds the
    squared predictions at the zeros of R.
    """
    W = _as_array(W)
    held = holdout.entries
    if not held <= R.entries:
        raise ValueError("holdout must be a subset of R's entries")
    Rd = R.to_dense()
    Hd = holdout.to_dense()
    kept = Rd - Hd
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise ValueError("no retained entries")
    mask = (1.0 - kept) if include_zeros else Hd
    residual = (Rd - kept @ W) * mask
    return math.fsum((residual * residual).ravel()) / n_kept


def diag_histogram(W, num_bins: int = 20, value_range: tuple[float, float] = (-0.1, 0.3)):
    """Counts of diag(W) in ``num_bins`` equal bins; out-of-range values go to the end bins."""
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("empty histogram range")
    edges = np.linspace(lo, hi, num_bins + 1)
    d = np.diag(_as_array(W))
    idx = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, num_bins - 1)
    counts = np.bincount(idx, minlength=num_bins)
    return [(float(edges[b]), int(counts[b])) for b in range(num_bins)]


@dataclass
class EvalReport:
    recall_at_k: dict[int, float]
    ndcg_at_k: dict[int, float]
    num_users_evaluated: int
    skipped_users: int
    mse: float | None = None
    diag_histogram: list | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = {
            "K": sorted(self.recall_at_k),
            "recall": {str(k): v for k, v in sorted(self.recall_at_k.items())},
            "ndcg": {str(k): v for k, v in sorted(self.ndcg_at_k.items())},
            "num_users_evaluated": self.num_users_evaluated,
            "skipped_users": self.skipped_users,
        }
        if self.mse is not None:
            out["mse"] = self.mse
        return out


def evaluate(W, inputs: InteractionMatrix, targets: InteractionMatrix, ks=(20,),
             with_mse: bool = False) -> EvalReport:
    """Average Recall@K / NDCG@K over users with a nonempty target.

    Users are scored from their ``inputs`` row (fold-in history under strong
    generalization, the training row under weak). Users with input but no
    target are counted as skipped.
    """
    W = _as_array(W)
    ks = sorted(set(int(k) for k in ks))
    in_rows = inputs.user_items()
    tg_rows = targets.user_items()
    recalls = {k: [] for k in ks}
    ndcgs = {k: [] for k in ks}
    skipped = 0
    evaluated = []
    for u in range(inputs.num_users):
        if tg_rows[u].size == 0:
            if in_rows[u].size:
                skipped += 1
            continue
        evaluated.append(u)
        scores = score_user(in_rows[u], W)
        for k in ks:
            recalls[k].append(recall_at_k(scores, tg_rows[u], k))
            ndcgs[k].append(ndcg_at_k(scores, tg_rows[u], k))
    n_eval = len(evaluated)

    def _avg(vals):
        return math.fsum(vals) / len(vals) if vals else 0.0

    report = EvalReport({k: _avg(recalls[k]) for k in ks}, {k: _avg(ndcgs[k]) for k in ks},
                        n_eval, skipped)
    if with_mse and n_eval:
        keep = np.isin(inputs.users, evaluated)
        tkeep = np.isin(targets.users, evaluated)
        full = InteractionMatrix(inputs.num_users, inputs.num_items,
                                 np.concatenate([inputs.users[keep], targets.users[tkeep]]),
                                 np.concatenate([inputs.items[keep], targets.items[tkeep]]))
        held = InteractionMatrix(targets.num_users, targets.num_items,
                                 targets.users[tkeep], targets.items[tkeep])
        report.mse = mse(full, W, held)
    return report
