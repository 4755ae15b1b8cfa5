"""Hyperparameters of the emphasized-dropout objective and the scalar coefficients derived from them."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .data import GramBundle
from .errors import HyperparameterError

VARIANTS = ("plain", "l2", "zero_diag_l2", "b_zero", "ease", "low_rank")


@dataclass(frozen=True)
class Hyperparameters:
    """Emphasis weights ``a`` (dropped cells) and ``b`` (retained cells), dropout
    probability ``p``, L2 strength ``lam`` and the solution family ``variant``."""

    a: float = 1.0
    b: float = 0.0
    p: float = 0.5
    lam: float = 0.0
    variant: str = "plain"
    rank_k: int | None = None

    def __post_init__(self):
        a, b, p, lam = self.a, self.b, self.p, self.lam
        v = self.variant
        if v not in VARIANTS:
            raise HyperparameterError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        if not np.isfinite([a, b, p, lam]).all():
            raise HyperparameterError("hyperparameters must be finite")
        if a < 0 or b < 0 or lam < 0:
            raise HyperparameterError("a, b and lambda must be nonnegative")
        if not 0.0 < p < 1.0:
            raise HyperparameterError(f"p must lie strictly inside (0, 1), got {p}")
        if v == "plain":
            if b <= 0:
                raise HyperparameterError("variant 'plain' needs b > 0")
            if lam != 0:
                raise HyperparameterError("variant 'plain' takes no L2 term; use 'l2'")
        elif v in ("l2", "zero_diag_l2"):
            # b = 0 is admitted only when lambda > 0 restores a PD system
            if b <= 0 and lam <= 0:
                raise HyperparameterError(f"variant {v!r} needs b > 0, or b = 0 with lambda > 0")
        elif v == "b_zero":
            if b != 0 or a <= 0:
                raise HyperparameterError("variant 'b_zero' needs b == 0 and a > 0")
        elif v == "ease":
            if lam <= 0:
                raise HyperparameterError("variant 'ease' needs lambda > 0")
        elif v == "low_rank":
            if not (a == b and b > 0):
                raise HyperparameterError("variant 'low_rank' needs a == b > 0")
            if self.rank_k is None or self.rank_k < 1:
                raise HyperparameterError("variant 'low_rank' needs rank_k >= 1")

    def scaled(self, alpha: float) -> "Hyperparameters":
        """Same model with (a, b) scaled by alpha; lambda scales by alpha**2 to stay equivalent."""
        return Hyperparameters(self.a * alpha, self.b * alpha, self.p, self.lam * alpha * alpha,
                               self.variant, self.rank_k)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class EmphasisCoefficients:
    g0_diag: float
    g0_off: float
    g1_diag: float
    g1_off: float
    g2_off: float
    u_diag: float
    u_off: float
    g_minus_diag: float
    g_minus_off: float
    u_minus: float
    c0: float


def coefficients(hp: Hyperparameters) -> EmphasisCoefficients:
    """Per-cell expectations E[D_zk D_zl A_zi^2] and friends, as closed-form polynomials in (a, b, p).

    ``g0_*`` is the i-independent part of G^(i); ``g1_*`` the correction on
    column i; ``g2_off`` the correction on row i off the diagonal; ``u_*`` the
    entries of u^(i); ``g_minus_*``/``u_minus`` their b = 0 counterparts on the
    system with row/column i removed; ``c0`` is E[A_zi^2].
    """
    a2, b2, p = hp.a * hp.a, hp.b * hp.b, hp.p
    q = 1.0 - p
    diff = a2 - b2
    return EmphasisCoefficients(
        g0_diag=q * p * a2 + q * q * b2,
        g0_off=q * q * p * a2 + q * q * q * b2,
        g1_diag=-q * p * diff,
        g1_off=-q * q * p * diff,
        g2_off=-q * q * p * diff,
        u_diag=q * b2,
        u_off=q * p * a2 + q * q * b2,
        g_minus_diag=q * p * a2,
        g_minus_off=q * q * p * a2,
        u_minus=q * p * a2,
        c0=p * a2 + q * b2,
    )


def g_matrix(c: EmphasisCoefficients, n: int, i: int) -> np.ndarray:
    """G^(i) assembled from the four-case table (self, row/column i, diagonal, elsewhere)."""
    g = np.full((n, n), c.g0_off)
    np.fill_diagonal(g, c.g0_diag)
    g[:, i] += c.g1_off
    g[i, :] += c.g2_off
    g[i, i] = c.g0_diag + c.g1_diag
    return g


def u_vector(c: EmphasisCoefficients, n: int, i: int) -> np.ndarray:
    u = np.full(n, c.u_off)
    u[i] = c.u_diag
    return u


def pattern(n: int, diag: float, off: float) -> np.ndarray:
    """n x n matrix with ``diag`` on the diagonal and ``off`` elsewhere."""
    out = np.full((n, n), off, dtype=np.float64)
    np.fill_diagonal(out, diag)
    return out


def build_H_v(gram: GramBundle, coeffs: EmphasisCoefficients, i: int):
    """H^(i) = G^(i) * R^T R (Hadamard) and v^(i) = u^(i) * R^T R[:, i]."""
    n = gram.n
    if not 0 <= i < n:
        raise IndexError(f"item index {i} out of range for n={n}")
    G = gram.gram
    H = g_matrix(coeffs, n, i) * G
    v = u_vector(coeffs, n, i) * G[:, i]
    return H, v
