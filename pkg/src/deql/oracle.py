"""Independent checks on solver outputs: sampled objective, analytic expected loss,
perturbation probes and positive-definiteness certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import Hyperparameters, build_H_v, coefficients
from .data import GramBundle, InteractionMatrix
from .weights import WeightMatrix

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x):
    # arithmetic is mod 2**64 by design
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def cell_uniforms(seed: int, samples: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) variates keyed on (seed, sample index, cell index).

    Counter-based: each value is a pure hash of its key, so results do not
    depend on batch size or the order in which samples are visited.
    """
    base = _splitmix64(np.uint64(seed))
    per_sample = _splitmix64(base ^ _splitmix64(np.asarray(samples, dtype=np.uint64)))
    z = _splitmix64(per_sample[:, None] + np.asarray(cells, dtype=np.uint64)[None, :] * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class LossEstimate:
    mean: float
    std_error: float
    num_samples: int
    seed: int


def _sample_losses(R: InteractionMatrix, W: np.ndarray, hp: Hyperparameters, num_samples: int,
                   seed: int, batch_cells: int = 2_000_000) -> np.ndarray:
    m, n = R.shape
    Rd = R.to_dense()
    cells = np.arange(m * n, dtype=np.uint64)
    batch = max(1, batch_cells // (m * n))
    out = np.empty(num_samples)
    for start in range(0, num_samples, batch):
        idx = np.arange(start, min(start + batch, num_samples), dtype=np.uint64)
        keep = (cell_uniforms(seed, idx, cells) >= hp.p).reshape(-1, m, n)
        residual = Rd - (keep * Rd) @ W
        weight = np.where(keep, hp.b, hp.a)
        out[start:start + idx.size] = np.square(weight * residual).sum(axis=(1, 2))
    return out


def sample_loss(R: InteractionMatrix, W, hp: Hyperparameters, num_samples: int, seed: int
                ) -> LossEstimate:
    """Monte-Carlo estimate of E ||A * (R - (D * R) W)||_F^2 with D ~ Bernoulli(1 - p) per cell."""
    if num_samples < 2:
        raise ValueError("num_samples must be at least 2")
    W = W.w if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    if W.shape != (R.num_items, R.num_items):
        raise ValueError("W does not match the item dimension of R")
    losses = _sample_losses(R, W, hp, num_samples, seed)
    # fsum is exactly rounded, so the reduction is independent of ordering
    mean = math.fsum(losses) / num_samples
    var = math.fsum(np.square(losses - mean)) / (num_samples - 1)
    return LossEstimate(mean, math.sqrt(var / num_samples), num_samples, seed)


def _column_system(gram: GramBundle, hp: Hyperparameters, coeffs, i: int):
    """(H, v, const) of the per-column quadratic W_i^T H W_i - 2 W_i^T v + const."""
    if hp.variant == "ease":
        G = gram.gram
        return G.copy(), G[:, i].copy(), G[i, i]
    H, v = build_H_v(gram, coeffs, i)
    return H, v, coeffs.c0 * gram.gram[i, i]


def expected_loss(gram: GramBundle, W, hp: Hyperparameters) -> float:
    """Analytic value of the dropout objective (no L2 term) at W.

    For ``variant='ease'`` this is the plain reconstruction error ||R - RW||_F^2.
    """
    W = W.w if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    coeffs = coefficients(hp)
    total = 0.0
    for i in range(gram.n):
        H, v, const = _column_system(gram, hp, coeffs, i)
        w = W[:, i]
        total += w @ H @ w - 2.0 * (w @ v) + const
    return float(total)


def objective(gram: GramBundle, W, hp: Hyperparameters) -> float:
    W = W.w if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    return expected_loss(gram, W, hp) + hp.lam * float(np.sum(W * W))


def objective_change(gram: GramBundle, W, D, hp: Hyperparameters) -> float:
    """objective(W + D) - objective(W), expanded so the large constant terms cancel exactly."""
    coeffs = coefficients(hp)
    total = 0.0
    for i in range(gram.n):
        H, v, _ = _column_system(gram, hp, coeffs, i)
        d = D[:, i]
        total += 2.0 * (d @ (H @ W[:, i] - v)) + d @ H @ d
    total += hp.lam * (2.0 * float(np.sum(W * D)) + float(np.sum(D * D)))
    return float(total)


def stationarity_residual(gram: GramBundle, W, hp: Hyperparameters) -> float:
    """max_i ||(H^(i) + lambda I) W_i - v^(i)||_inf / max_i ||v^(i)||_inf.

    For ``zero_diag_l2`` the i-th component of column i is excluded: at the
    constrained optimum the gradient is a multiple of the unit vector l^(i).
    """
    W = W.w if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    coeffs = coefficients(hp)
    worst, scale = 0.0, 0.0
    for i in range(gram.n):
        H, v = build_H_v(gram, coeffs, i)
        r = H @ W[:, i] + hp.lam * W[:, i] - v
        if hp.variant == "zero_diag_l2":
            r[i] = 0.0
        worst = max(worst, float(np.max(np.abs(r))))
        scale = max(scale, float(np.max(np.abs(v))))
    return worst / scale if scale else worst


ZERO_DIAG_VARIANTS = ("zero_diag_l2", "ease")


@dataclass
class ProbeReport:
    margins: list[float]
    bound: float
    epsilon: float
    violations: list[int] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else float("inf")

    @property
    def passed(self) -> bool:
        return not self.violations


def _is_zero_diagonal(W: WeightMatrix, hp: Hyperparameters) -> bool:
    if hp.variant in ZERO_DIAG_VARIANTS:
        return True
    # b_zero with lambda > 0 is solved with the diagonal pinned at zero
    return hp.variant == "b_zero" and hp.lam > 0


def minimality_probe(gram: GramBundle, W_star: WeightMatrix, hp: Hyperparameters,
                     num_perturbations: int = 20, epsilon: float = 1e-3, seed: int = 0,
                     tol: float = 1e-12) -> ProbeReport:
    """Check that no random feasible step of size epsilon lowers the objective.

    Directions have unit Frobenius norm. They are zero-diagonal for the
    zero-diagonal variants, and of the form W* Z for ``low_rank`` so the
    perturbed matrix keeps rank <= k. With lambda > 0 the objective is strongly
    convex and every margin must reach lambda * epsilon**2.
    """
    W = W_star.w
    n = W.shape[0]
    zero_diag = _is_zero_diagonal(W_star, hp)
    bound = (hp.lam * epsilon * epsilon if hp.variant != "low_rank" else 0.0) - tol
    report = ProbeReport([], bound, epsilon)
    for k in range(num_perturbations):
        rng = np.random.default_rng([seed, k])
        E = rng.standard_normal((n, n))
        if hp.variant == "low_rank":
            E = W @ E
        if zero_diag:
            E[np.diag_indices(n)] = 0.0
        norm = np.linalg.norm(E)
        if norm == 0:
            report.margins.append(0.0)
            continue
        E /= norm
        margin = objective_change(gram, W, epsilon * E, hp)
        report.margins.append(margin)
        if margin < bound:
            report.violations.append(k)
    return report


@dataclass(frozen=True)
class PDCertificate:
    is_pd: bool
    min_pivot: float


def pd_certificate(H, rel_tol: float = 1e-12) -> PDCertificate:
    """Unpivoted symmetric elimination; PD iff every pivot exceeds rel_tol * max diagonal.

    Written out by hand rather than calling LAPACK so it stays independent
    of the factorization the solvers use.
    """
    A = np.array(H, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("H must be square")
    threshold = rel_tol * max(float(np.max(np.diag(A))), 0.0)
    min_pivot = math.inf
    for j in range(n):
        pivot = A[j, j]
        min_pivot = min(min_pivot, pivot)
        if not pivot > threshold:
            return PDCertificate(False, float(pivot))
        col = A[j + 1:, j] / pivot
        A[j + 1:, j + 1:] -= np.outer(col, A[j, j + 1:])
    return PDCertificate(True, float(min_pivot))
