"""Train / grid-search / benchmark routines shared by the CLI and the experiment scripts."""

from __future__ import annotations

import itertools
import logging
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import Hyperparameters
from .data import InteractionMatrix, Split, SplitSpec, check_no_zero_columns, gram, split
from .errors import DEQLError
from .metrics import EvalReport, evaluate
from .solvers import solve, solve_direct, solve_fast
from .synthetic import random_interactions
from .weights import WeightMatrix

log = logging.getLogger(__name__)

DEFAULT_B_GRID = (0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
DEFAULT_LAMBDA_GRID = (10.0, 20.0, 30.0, 40.0, 50.0, 100.0, 300.0, 500.0)
DEFAULT_P_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.8)


@dataclass
class FitResult:
    model: WeightMatrix
    wall_time: float
    dropped_items: list[int] = field(default_factory=list)

    @property
    def fallback_count(self) -> int:
        return len(self.model.provenance.fallback_columns)

    def record(self) -> dict:
        prov = self.model.provenance
        return {
            "n": self.model.n,
            "hyperparameters": {k: v for k, v in prov.to_json().items()
                                if k not in ("solver", "fallback_columns")},
            "solver": prov.solver,
            "fallback_count": self.fallback_count,
            "dropped_items": self.dropped_items,
            "wall_time": self.wall_time,
        }


def fit(train: InteractionMatrix, hp: Hyperparameters, solver: str = "auto",
        drop_zero_items: bool = False) -> FitResult:
    """Solve on ``train``. With ``drop_zero_items`` items without interactions are
    removed before solving and come back as all-zero rows/columns of W."""
    t0 = time.perf_counter()
    zeros = check_no_zero_columns(train)
    n = train.num_items
    if zeros and drop_zero_items:
        keep = np.setdiff1d(np.arange(n), zeros)
        if keep.size == 0:
            raise DEQLError("every item has zero interactions")
        sub = solve(gram(train.select_items(keep)), hp, solver)
        W = np.zeros((n, n))
        W[np.ix_(keep, keep)] = sub.w
        fallback = tuple(int(keep[i]) for i in sub.provenance.fallback_columns)
        model = WeightMatrix(W, replace(sub.provenance, fallback_columns=fallback))
    else:
        model = solve(gram(train), hp, solver)
        zeros = []
    return FitResult(model, time.perf_counter() - t0, list(zeros))


def derived_seed(seed: int, salt: int) -> int:
    """Deterministic 64-bit seed for an auxiliary split."""
    ss = np.random.SeedSequence([int(seed), int(salt)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class GridRow:
    b: float
    lam: float
    p: float
    status: str
    report: EvalReport | None = None
    error: str = ""

    def metric(self, name: str, k: int = 20) -> float:
        if self.report is None:
            return float("nan")
        return (self.report.ndcg_at_k if name == "ndcg" else self.report.recall_at_k)[k]


def rank_rows(rows: list[GridRow]) -> list[GridRow]:
    """NDCG@20 descending, then Recall@20 descending, then smaller (b, lambda, p); failures last."""
    ok = [r for r in rows if r.status == "ok"]
    bad = [r for r in rows if r.status != "ok"]
    ok.sort(key=lambda r: (-r.metric("ndcg"), -r.metric("recall"), r.b, r.lam, r.p))
    bad.sort(key=lambda r: (r.b, r.lam, r.p))
    return ok + bad


def validation_split(data: Split, fraction: float | None = None) -> Split:
    spec = data.spec
    vspec = SplitSpec(spec.mode, fraction or spec.test_fraction, spec.holdout_fraction,
                      derived_seed(spec.seed, 1))
    return split(data.train, vspec)


def grid_search(data: Split, a: float, b_grid, lambda_grid, p_grid, variant: str = "l2",
                ks=(20,), solver: str = "auto", drop_zero_items: bool = False,
                validation_fraction: float | None = None, rank_k=None) -> list[GridRow]:
    """Fit every (b, lambda, p) point on a validation split carved from ``data.train``."""
    val = validation_split(data, validation_fraction)
    ks = sorted(set(ks) | {20})
    rows = []
    for b, lam, p in itertools.product(sorted(b_grid), sorted(lambda_grid), sorted(p_grid)):
        try:
            hp = Hyperparameters(a, b, p, lam, variant, rank_k)
            model = fit(val.train, hp, solver, drop_zero_items).model
            rows.append(GridRow(b, lam, p, "ok", evaluate(model, val.test_input, val.test_target, ks)))
        except DEQLError as exc:
            log.warning("grid point b=%g lambda=%g p=%g failed: %s", b, lam, p, exc)
            rows.append(GridRow(b, lam, p, "failed", error=str(exc)))
    return rank_rows(rows)


def _median_time(fn, repeats: int) -> float:
    fn()  # untimed warm-up: first-call allocation and BLAS thread start-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench(n_list, density: float, hp: Hyperparameters, seed: int = 0, repeats: int = 3,
          m_factor: float = 2.0) -> list[tuple[int, float, float, float]]:
    """Median wall time of the direct and fast solvers on random instances of each size."""
    rows = []
    for n in n_list:
        R = random_interactions(max(int(round(m_factor * n)), 2), n, density, seed=[seed, n])
        g = gram(R)
        t_direct = _median_time(lambda: solve_direct(g, hp), repeats)
        t_fast = _median_time(lambda: solve_fast(g, hp), repeats)
        rows.append((int(n), t_direct, t_fast, t_direct / t_fast))
    return rows
