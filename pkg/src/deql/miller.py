"""Rank-1 inverse update (Miller's trace form of Sherman-Morrison)."""

import numpy as np

from .errors import SingularUpdateError

DENOM_TOL = 1e-12


def miller_update(P_inv, col, row, tol: float = DENOM_TOL) -> np.ndarray:
    """Inverse of ``P + col @ row.T`` given ``P_inv``.

    With E = col row^T, tr(P^-1 E) = row^T P^-1 col, so the update is
    P^-1 - (P^-1 col)(row^T P^-1) / (1 + row^T P^-1 col).
    """
    P_inv = np.asarray(P_inv, dtype=np.float64)
    col = np.asarray(col, dtype=np.float64)
    row = np.asarray(row, dtype=np.float64)
    left = P_inv @ col
    right = row @ P_inv
    denom = 1.0 + row @ left
    if abs(denom) < tol:
        raise SingularUpdateError(f"rank-1 update denominator {denom:.3e} below {tol:g}")
    return P_inv - np.outer(left, right) / denom
