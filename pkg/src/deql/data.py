"""Interaction data: ingestion, train/test splitting and the item Gram matrix."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParseError


@dataclass(frozen=True)
class InteractionMatrix:
    """Binary m x n user-item matrix stored as sorted, de-duplicated (user, item) pairs."""

    num_users: int
    num_items: int
    users: np.ndarray
    items: np.ndarray

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64).ravel()
        items = np.asarray(self.items, dtype=np.int64).ravel()
        if users.shape != items.shape:
            raise DataError("users and items must have equal length")
        if self.num_users < 1 or self.num_items < 1:
            raise DataError("matrix dimensions must be positive")
        if users.size:
            if users.min() < 0 or users.max() >= self.num_users:
                raise DataError("user index out of bounds")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of bounds")
        # canonical order: row-major, duplicates dropped
        keys = np.unique(users * self.num_items + items)
        users, items = np.divmod(keys, self.num_items)
        users.setflags(write=False)
        items.setflags(write=False)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)

    @classmethod
    def from_pairs(cls, pairs, num_users: int, num_items: int) -> "InteractionMatrix":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(num_users, num_items, arr[:, 0], arr[:, 1])

    @classmethod
    def from_dense(cls, dense) -> "InteractionMatrix":
        dense = np.asarray(dense)
        u, i = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], u, i)

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_users, self.num_items

    @property
    def nnz(self) -> int:
        return int(self.users.size)

    @property
    def entries(self) -> set[tuple[int, int]]:
        return set(zip(self.users.tolist(), self.items.tolist()))

    def to_csr(self, dtype=np.int64) -> sp.csr_matrix:
        data = np.ones(self.nnz, dtype=dtype)
        return sp.csr_matrix((data, (self.users, self.items)), shape=self.shape)

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        out = np.zeros(self.shape, dtype=dtype)
        out[self.users, self.items] = 1
        return out

    def user_items(self) -> list[np.ndarray]:
        """Sorted item indices per user."""
        bounds = np.searchsorted(self.users, np.arange(self.num_users + 1))
        return [self.items[bounds[u]:bounds[u + 1]] for u in range(self.num_users)]

    def item_counts(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.num_items).astype(np.int64)

    def select_items(self, keep: np.ndarray) -> "InteractionMatrix":
        """Restrict to the given item indices, remapped to 0..len(keep)-1 in the given order."""
        keep = np.asarray(keep, dtype=np.int64)
        remap = np.full(self.num_items, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        new_items = remap[self.items]
        mask = new_items >= 0
        return InteractionMatrix(self.num_users, max(int(keep.size), 1),
                                 self.users[mask], new_items[mask])


@dataclass
class IdMap:
    """Bidirectional string id <-> dense index table, in first-appearance order."""

    ids: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def add(self, key: str) -> int:
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.ids)
            self.index[key] = idx
            self.ids.append(key)
        return idx

    def __len__(self) -> int:
        return len(self.ids)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for idx, key in enumerate(self.ids):
                fh.write(f"{key}\t{idx}\n")

    @classmethod
    def load(cls, path) -> "IdMap":
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or int(parts[1]) != len(out.ids):
                    raise ParseError(f"{path}:{lineno}: malformed id map line {line!r}")
                out.add(parts[0])
        return out


@dataclass(frozen=True)
class Dataset:
    matrix: InteractionMatrix
    user_ids: IdMap
    item_ids: IdMap


def _read_pairs(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 tab-separated fields, "
                                 f"got {len(parts)}: {line!r}", lineno=lineno)
            pairs.append((parts[0], parts[1]))
    return pairs


def load_interactions(path, format: str = "pair_tsv", user_ids: IdMap | None = None,
                      item_ids: IdMap | None = None) -> Dataset:
    """Read a ``user<TAB>item`` file.

    Ids are assigned dense indices in first-appearance order. When id maps are
    passed (e.g. to read a test file against the training vocabulary) they are
    extended in place with any unseen ids.
    """
    if format != "pair_tsv":
        raise DataError(f"unsupported format {format!r}")
    pairs = _read_pairs(path)
    if not pairs and user_ids is None:
        raise DataError(f"{path}: no interactions")
    user_ids = IdMap() if user_ids is None else user_ids
    item_ids = IdMap() if item_ids is None else item_ids
    users = np.fromiter((user_ids.add(u) for u, _ in pairs), dtype=np.int64, count=len(pairs))
    items = np.fromiter((item_ids.add(i) for _, i in pairs), dtype=np.int64, count=len(pairs))
    matrix = InteractionMatrix(max(len(user_ids), 1), max(len(item_ids), 1), users, items)
    return Dataset(matrix, user_ids, item_ids)


def save_interactions(path, matrix: InteractionMatrix, user_ids: IdMap, item_ids: IdMap) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, i in zip(matrix.users.tolist(), matrix.items.tolist()):
            fh.write(f"{user_ids.ids[u]}\t{item_ids.ids[i]}\n")


@dataclass(frozen=True)
class SplitSpec:
    mode: str
    test_fraction: float
    holdout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("strong", "weak"):
            raise DataError(f"split mode must be 'strong' or 'weak', got {self.mode!r}")
        for name in ("test_fraction", "holdout_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DataError(f"{name} must lie strictly inside (0, 1), got {value}")
        if not 0 <= int(self.seed) < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Split:
    train: InteractionMatrix
    test_input: InteractionMatrix
    test_target: InteractionMatrix
    spec: SplitSpec
    skipped_users: int = 0

    def metadata(self) -> dict:
        return {
            "mode": self.spec.mode,
            "test_fraction": self.spec.test_fraction,
            "holdout_fraction": self.spec.holdout_fraction,
            "seed": int(self.spec.seed),
            "skipped_users": self.skipped_users,
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(R: InteractionMatrix, spec: SplitSpec) -> Split:
    """Train/test split under strong (by user) or weak (by interaction) generalization.

    All three matrices keep R's m x n shape and user indexing. In strong mode
    the held-out users' rows are absent from ``train``; each is split into a
    fold-in part (``test_input``) and a ranking target (``test_target``) with a
    shuffle seeded by (seed, user index). Selected users with fewer than two
    interactions cannot be split; they are counted in ``skipped_users`` and
    their rows go to ``test_input`` only.
    """
    if R.nnz == 0:
        raise DataError("cannot split an empty interaction matrix")
    seed = int(spec.seed)
    users, items = R.users, R.items

    if spec.mode == "weak":
        rng = np.random.default_rng([seed, 0])
        n_test = min(max(_round_half_up(spec.test_fraction * R.nnz), 1), R.nnz - 1)
        order = rng.permutation(R.nnz)
        test_mask = np.zeros(R.nnz, dtype=bool)
        test_mask[order[:n_test]] = True
        train = InteractionMatrix(R.num_users, R.num_items, users[~test_mask], items[~test_mask])
        target = InteractionMatrix(R.num_users, R.num_items, users[test_mask], items[test_mask])
        return Split(train, train, target, spec, 0)

    active = np.unique(users)
    rng = np.random.default_rng([seed, 1])
    n_test_users = min(max(_round_half_up(spec.test_fraction * active.size), 1), active.size)
    test_users = np.sort(rng.permutation(active)[:n_test_users])
    is_test = np.zeros(R.num_users, dtype=bool)
    is_test[test_users] = True

    per_user = R.user_items()
    in_u, in_i, tg_u, tg_i = [], [], [], []
    skipped = 0
    for u in test_users.tolist():
        row = per_user[u]
        if row.size < 2:
            skipped += 1
            in_u.append(np.full(row.size, u))
            in_i.append(row)
            continue
        n_hold = min(max(_round_half_up(spec.holdout_fraction * row.size), 1), row.size - 1)
        perm = np.random.default_rng([seed, 2, u]).permutation(row.size)
        hold = np.sort(row[perm[:n_hold]])
        keep = np.sort(row[perm[n_hold:]])
        tg_u.append(np.full(hold.size, u))
        tg_i.append(hold)
        in_u.append(np.full(keep.size, u))
        in_i.append(keep)

    def _cat(parts):
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    train_mask = ~is_test[users]
    train = InteractionMatrix(R.num_users, R.num_items, users[train_mask], items[train_mask])
    test_input = InteractionMatrix(R.num_users, R.num_items, _cat(in_u), _cat(in_i))
    test_target = InteractionMatrix(R.num_users, R.num_items, _cat(tg_u), _cat(tg_i))
    return Split(train, test_input, test_target, spec, skipped)


def save_split(out_dir, result: Split, user_ids: IdMap, item_ids: IdMap) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_interactions(out / "train.tsv", result.train, user_ids, item_ids)
    save_interactions(out / "test_input.tsv", result.test_input, user_ids, item_ids)
    save_interactions(out / "test_target.tsv", result.test_target, user_ids, item_ids)
    user_ids.save(out / "users.tsv")
    item_ids.save(out / "items.tsv")
    with open(out / "split.json", "w", encoding="utf-8") as fh:
        json.dump(result.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_split(split_dir) -> tuple[Split, IdMap, IdMap]:
    """Read back a directory written by :func:`save_split`."""
    d = Path(split_dir)
    user_ids = IdMap.load(d / "users.tsv")
    item_ids = IdMap.load(d / "items.tsv")
    n_users, n_items = len(user_ids), len(item_ids)
    mats = []
    for name in ("train", "test_input", "test_target"):
        ds = load_interactions(d / f"{name}.tsv", user_ids=user_ids, item_ids=item_ids)
        if len(user_ids) != n_users or len(item_ids) != n_items:
            raise DataError(f"{name}.tsv references ids missing from the id maps")
        m = ds.matrix
        mats.append(InteractionMatrix(n_users, n_items, m.users, m.items))
    with open(d / "split.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    spec = SplitSpec(meta["mode"], meta["test_fraction"], meta["holdout_fraction"], meta["seed"])
    return Split(*mats, spec, meta.get("skipped_users", 0)), user_ids, item_ids


@dataclass(frozen=True)
class GramBundle:
    """Dense item-item co-occurrence matrix R^T R with its diagonal as integer counts."""

    gram: np.ndarray
    item_counts: np.ndarray

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    @classmethod
    def from_matrix(cls, gram) -> "GramBundle":
        """Wrap an externally built symmetric Gram matrix (used by tests and benchmarks)."""
        g = np.array(gram, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DataError("gram must be square")
        g = np.triu(g) + np.triu(g, 1).T
        g.setflags(write=False)
        counts = np.rint(np.diag(g)).astype(np.int64)
        return cls(g, counts)


def gram(R: InteractionMatrix) -> GramBundle:
    """Integer-exact R^T R, converted to float64 only after accumulation."""
    csr = R.to_csr(np.int64)
    counts = (csr.T @ csr).toarray()
    # integer products are exact, so mirroring the upper triangle changes nothing
    # numerically; it just makes the symmetry structural
    counts = np.triu(counts) + np.triu(counts, 1).T
    g = counts.astype(np.float64)
    g.setflags(write=False)
    diag = np.diag(counts).copy()
    diag.setflags(write=False)
    return GramBundle(g, diag)


def check_no_zero_columns(R: InteractionMatrix) -> list[int]:
    """Indices of items nobody interacted with; empty means every H^(i) can be PD for b > 0."""
    return np.flatnonzero(R.item_counts() == 0).tolist()
