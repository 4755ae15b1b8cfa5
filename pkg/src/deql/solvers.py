"""Closed-form minimizers of the emphasized-dropout LAE objective.

Every solver consumes a :class:`GramBundle` only; the user dimension never
enters the solve path.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla

from .coefficients import Hyperparameters, coefficients, pattern
from .data import GramBundle
from .errors import HyperparameterError, NotPositiveDefiniteError, PreconditionError
from .miller import DENOM_TOL
from .weights import Provenance, WeightMatrix

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-12


def _cholesky(A: np.ndarray, column=None):
    """Lower Cholesky factor, rejecting pivots below PIVOT_TOL * max diagonal."""
    what = "H0" if column is None else f"H^({column})"
    try:
        c, lower = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite", column) from exc
    pivots = np.diag(c) ** 2
    scale = np.max(np.diag(A))
    if not np.all(pivots > PIVOT_TOL * scale):
        raise NotPositiveDefiniteError(
            f"{what} is numerically singular (min pivot {pivots.min():.3e})", column)
    return c, lower


def _spd_solve(A, rhs, column=None):
    return sla.cho_solve(_cholesky(A, column), rhs, check_finite=False)


def _spd_inverse(A, column=None):
    c, _ = _cholesky(A, column)
    inv, info = sla.lapack.dpotri(c, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError("inverse from Cholesky factor failed", column)
    # potri fills the lower triangle only
    return np.tril(inv) + np.tril(inv, -1).T


def _zero_items(gram: GramBundle) -> list[int]:
    return np.flatnonzero(gram.item_counts == 0).tolist()


def _require_nonzero_columns(gram: GramBundle, what: str):
    zeros = _zero_items(gram)
    if zeros:
        shown = ", ".join(map(str, zeros[:10])) + (" ..." if len(zeros) > 10 else "")
        raise PreconditionError(
            f"{what}: {len(zeros)} item(s) have no interactions ({shown}); the per-column "
            "systems are singular. Drop these items or use lambda > 0.")


def _check_full_system(gram: GramBundle, hp: Hyperparameters):
    if hp.variant not in ("plain", "l2", "zero_diag_l2"):
        raise HyperparameterError(f"variant {hp.variant!r} is not a full-system variant")
    if hp.lam <= 0:
        _require_nonzero_columns(gram, hp.variant)


def _provenance(hp: Hyperparameters, solver: str, fallback=()) -> Provenance:
    return Provenance(hp.variant, float(hp.a), float(hp.b), float(hp.p), float(hp.lam), solver,
                      hp.rank_k, tuple(int(i) for i in fallback))


class _ColumnSystems:
    """H^(i) (+ lambda I) and v^(i) for every i, generated from the shared H0.

    H^(i) differs from H0 = G0 * R^T R only in row and column i, so each
    system is a copy of H0 with that cross overwritten.
    """

    def __init__(self, gram: GramBundle, hp: Hyperparameters):
        c = coefficients(hp)
        n = gram.n
        G = gram.gram
        self.hp = hp
        self.G = G
        self.H0 = pattern(n, c.g0_diag, c.g0_off) * G
        if hp.lam:
            self.H0[np.diag_indices(n)] += hp.lam
        self.cross_off = c.g0_off + c.g1_off
        self.cross_diag = c.g0_diag + c.g1_diag
        self.u_off, self.u_diag = c.u_off, c.u_diag

    def column(self, i: int):
        G = self.G
        H = self.H0.copy()
        cross = self.cross_off * G[:, i]
        cross[i] = self.cross_diag * G[i, i] + self.hp.lam
        H[:, i] = cross
        H[i, :] = cross
        v = self.u_off * G[:, i]
        v[i] = self.u_diag * G[i, i]
        return H, v


def _potrf(H, column):
    """In-place lower Cholesky via LAPACK, with the same pivot test as _cholesky."""
    scale = np.max(np.diag(H))
    c, info = sla.lapack.dpotrf(H, lower=1, clean=0, overwrite_a=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"H^({column}) is not positive definite", column)
    pivots = np.diag(c) ** 2
    if not np.all(pivots > PIVOT_TOL * scale):
        raise NotPositiveDefiniteError(
            f"H^({column}) is numerically singular (min pivot {pivots.min():.3e})", column)
    return c


def _direct_column(systems: _ColumnSystems, i: int):
    H, v = systems.column(i)
    c = _potrf(H, i)
    if systems.hp.variant != "zero_diag_l2":
        x, _ = sla.lapack.dpotrs(c, v, lower=1)
        return x
    rhs = np.zeros((v.size, 2))
    rhs[:, 0] = v
    rhs[i, 1] = 1.0
    st, _ = sla.lapack.dpotrs(c, rhs, lower=1)
    s, t = st[:, 0], st[:, 1]
    if t[i] == 0:
        raise NotPositiveDefiniteError(f"degenerate zero-diagonal pivot in column {i}", i)
    x = s - (s[i] / t[i]) * t
    x[i] = 0.0
    return x


def solve_direct(gram: GramBundle, hp: Hyperparameters) -> WeightMatrix:
    """Reference O(n^4) solver: one Cholesky solve of H^(i) (+ lambda I) per column."""
    _check_full_system(gram, hp)
    systems = _ColumnSystems(gram, hp)
    W = np.empty((gram.n, gram.n))
    for i in range(gram.n):
        W[:, i] = _direct_column(systems, i)
    return WeightMatrix(W, _provenance(hp, "direct"))


def _rank_one_columns(Rm, Wm, H0inv, E2, flip_sign=False):
    """Both rank-1 inverse updates for every column at once.

    Column i of ``Rm`` is H0^-1 times the right-hand side, column i of ``Wm`` is
    H0^-1 e1^(i) and row i of ``E2`` is e2^(i). Returns H^(i)^-1 rhs^(i) as the
    columns of the result, plus a mask of columns whose denominators are too
    small to trust.
    """
    wd = np.diag(Wm)
    d1 = (1.0 - wd) if flip_sign else (1.0 + wd)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = Rm - Wm * (np.diag(Rm) / d1)
        T = H0inv - Wm * (np.diag(H0inv) / d1)
        e2s = (E2 * S.T).sum(axis=1)
        e2t = (E2 * T.T).sum(axis=1)
        d2 = 1.0 + e2t
        X = S - T * (e2s / d2)
    bad = (np.abs(d1) < DENOM_TOL) | (np.abs(d2) < DENOM_TOL) | ~np.isfinite(X).all(axis=0)
    return X, bad


def solve_fast(gram: GramBundle, hp: Hyperparameters, *, flip_denominator_sign: bool = False
               ) -> WeightMatrix:
    """O(n^3) solver: one shared inverse of H0 (+ lambda I), then two rank-1 updates per column.

    H^(i) = H0 + E1^(i) + E2^(i), where E1^(i) touches only column i and E2^(i)
    only row i. Columns whose update denominators fall below 1e-12 are
    recomputed with the direct solver and listed in the provenance.
    ``flip_denominator_sign`` deliberately corrupts the first update; it exists
    so the verification battery can prove it detects a broken solver.
    """
    _check_full_system(gram, hp)
    c = coefficients(hp)
    n = gram.n
    G = gram.gram
    H0 = pattern(n, c.g0_diag, c.g0_off) * G
    if hp.lam:
        H0[np.diag_indices(n)] += hp.lam
    H0inv = _spd_inverse(H0)
    Wm = H0inv @ (pattern(n, c.g1_diag, c.g1_off) * G)
    E2 = pattern(n, 0.0, c.g2_off) * G
    Rm = H0inv @ (pattern(n, c.u_diag, c.u_off) * G)

    X, bad = _rank_one_columns(Rm, Wm, H0inv, E2, flip_denominator_sign)
    if hp.variant == "zero_diag_l2":
        # second pass with v^(i) replaced by the unit vector l^(i): H0^-1 l^(i) = H0^-1[:, i]
        Tl, bad_l = _rank_one_columns(H0inv, Wm, H0inv, E2, flip_denominator_sign)
        bad |= bad_l
        t_ii = np.diag(Tl)
        with np.errstate(divide="ignore", invalid="ignore"):
            X = X - Tl * (np.diag(X) / t_ii)
        bad |= (t_ii == 0) | ~np.isfinite(X).all(axis=0)
        X[np.diag_indices(n)] = 0.0

    fallback = np.flatnonzero(bad)
    if fallback.size:
        systems = _ColumnSystems(gram, hp)
        for i in fallback:
            log.warning("fast solver: column %d has a near-singular update; using direct solve", i)
            X[:, i] = _direct_column(systems, int(i))
    return WeightMatrix(X, _provenance(hp, "fast", fallback))


def solve_b_zero(gram: GramBundle, hp: Hyperparameters, diag_values=None) -> WeightMatrix:
    """b = 0 minimizer: off-diagonals from the (n-1) x (n-1) system with row/column i removed.

    The diagonal is not determined by the objective; it is set to
    ``diag_values`` (zeros by default). With lambda > 0 the problem is routed
    through the full-system zero-diagonal L2 path instead, since H^(i) + lambda I
    is positive definite even though H^(i) is singular.
    """
    if hp.variant != "b_zero":
        raise HyperparameterError("solve_b_zero needs variant 'b_zero'")
    if hp.lam > 0:
        if diag_values is not None:
            raise HyperparameterError("diag_values cannot be combined with lambda > 0")
        routed = Hyperparameters(hp.a, 0.0, hp.p, hp.lam, "zero_diag_l2")
        out = solve_fast(gram, routed)
        return WeightMatrix(out.w, _provenance(hp, "fast", out.provenance.fallback_columns))
    _require_nonzero_columns(gram, "b_zero")
    c = coefficients(hp)
    n = gram.n
    G = gram.gram
    Gminus = pattern(n, c.g_minus_diag, c.g_minus_off) * G
    W = np.zeros((n, n))
    for i in range(n):
        keep = np.r_[0:i, i + 1:n]
        H = Gminus[np.ix_(keep, keep)]
        v = c.u_minus * G[keep, i]
        W[keep, i] = _spd_solve(H, v, i)
    if diag_values is not None:
        d = np.asarray(diag_values, dtype=np.float64)
        if d.shape != (n,):
            raise HyperparameterError(f"diag_values must have length {n}")
        W[np.diag_indices(n)] = d
    return WeightMatrix(W, _provenance(hp, "direct"))


def solve_steck(gram: GramBundle, p: float, a: float = 1.0) -> WeightMatrix:
    """Zero-diagonal b = 0 solution from a single inverse C = (R^T R + p/(1-p) diag(R^T R))^-1."""
    if not 0.0 < p < 1.0:
        raise HyperparameterError(f"p must lie strictly inside (0, 1), got {p}")
    _require_nonzero_columns(gram, "steck")
    n = gram.n
    G = gram.gram
    Cinv = G + (p / (1.0 - p)) * np.diag(np.diag(G))
    C = _spd_inverse(Cinv)
    W = (np.eye(n) - C / np.diag(C)[None, :]) / (1.0 - p)
    W[np.diag_indices(n)] = 0.0
    hp = Hyperparameters(a, 0.0, p, 0.0, "b_zero")
    return WeightMatrix(W, _provenance(hp, "closed_form"))


def solve_ease(gram: GramBundle, lam: float) -> WeightMatrix:
    """EASE: P = (R^T R + lambda I)^-1, W = I - P diag(P)^-1, zero diagonal."""
    if lam <= 0:
        raise HyperparameterError("EASE needs lambda > 0")
    n = gram.n
    A = gram.gram + lam * np.eye(n)
    P = _spd_inverse(A)
    W = -P / np.diag(P)[None, :]
    W[np.diag_indices(n)] = 0.0
    return WeightMatrix(W, Provenance("ease", 0.0, 0.0, 0.0, float(lam), "closed_form"))


EIG_TOL = 1e-10


def solve_low_rank(gram: GramBundle, hp: Hyperparameters) -> WeightMatrix:
    """Best rank-k solution for a == b, where H^(i) no longer depends on i.

    W = S^-1/2 [S^-1/2 V]_k with S the shared H (+ lambda I), V the stacked v^(i)
    and [.]_k the truncated SVD keeping the k largest singular values.
    """
    if hp.variant != "low_rank":
        raise HyperparameterError("solve_low_rank needs variant 'low_rank'")
    n = gram.n
    k = int(hp.rank_k)
    if k > n:
        raise HyperparameterError(f"rank_k={k} exceeds n={n}")
    c = coefficients(hp)
    G = gram.gram
    Sxx = pattern(n, c.g0_diag, c.g0_off) * G
    if hp.lam:
        Sxx[np.diag_indices(n)] += hp.lam
    Sxy = pattern(n, c.u_diag, c.u_off) * G
    evals, Q = np.linalg.eigh(Sxx)
    if evals[0] <= EIG_TOL * evals[-1]:
        raise NotPositiveDefiniteError(
            f"shared H is near-singular (eigenvalue ratio {evals[0] / evals[-1]:.3e})")
    S_inv_half = (Q / np.sqrt(evals)) @ Q.T
    U, s, Vt = np.linalg.svd(S_inv_half @ Sxy)
    W = S_inv_half @ ((U[:, :k] * s[:k]) @ Vt[:k])
    return WeightMatrix(W, _provenance(hp, "closed_form"))


def solve(gram: GramBundle, hp: Hyperparameters, solver: str = "auto", diag_values=None
          ) -> WeightMatrix:
    """Dispatch to the solver matching ``hp.variant``.

    ``solver`` is one of direct/fast/auto. For full-system variants auto means
    fast. For b_zero, fast/auto use the single-inverse closed form unless
    explicit diagonal values are requested.
    """
    if solver not in ("direct", "fast", "auto"):
        raise HyperparameterError(f"unknown solver {solver!r}")
    v = hp.variant
    if v in ("plain", "l2", "zero_diag_l2"):
        return solve_direct(gram, hp) if solver == "direct" else solve_fast(gram, hp)
    if v == "b_zero":
        if solver != "direct" and diag_values is None and hp.lam == 0:
            return solve_steck(gram, hp.p, hp.a)
        return solve_b_zero(gram, hp, diag_values)
    if v == "ease":
        return solve_ease(gram, hp.lam)
    return solve_low_rank(gram, hp)
