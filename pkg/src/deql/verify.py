"""Randomized property battery behind the ``verify`` command."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict

import numpy as np

from .coefficients import Hyperparameters, build_H_v, coefficients
from .data import gram
from .miller import miller_update
from .oracle import (expected_loss, minimality_probe, pd_certificate, sample_loss,
                     stationarity_residual)
from .solvers import solve_b_zero, solve_direct, solve_fast, solve_low_rank, solve_steck
from .synthetic import random_interactions


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _le(name, measured, tol):
    return Check(name, bool(measured <= tol), float(measured), float(tol))


def run_checks(n: int = 30, m: int = 50, density: float = 0.2, seed: int = 0,
               mc_samples: int = 20_000, flip_denominator_sign: bool = False) -> list[Check]:
    R = random_interactions(m, n, density, seed=[seed, 0])
    g = gram(R)
    checks = []

    full_points = [
        Hyperparameters(1.0, b, 0.3, lam, v)
        for b, (v, lam) in itertools.product(
            (0.5, 1.5), (("plain", 0.0), ("l2", 10.0), ("zero_diag_l2", 0.0), ("zero_diag_l2", 10.0)))
    ]
    diff, stat = 0.0, 0.0
    for hp in full_points:
        Wd = solve_direct(g, hp)
        Wf = solve_fast(g, hp, flip_denominator_sign=flip_denominator_sign)
        diff = max(diff, float(np.max(np.abs(Wf.w - Wd.w))))
        stat = max(stat, stationarity_residual(g, Wd, hp), stationarity_residual(g, Wf, hp))
    checks.append(_le("fast_equals_direct", diff, 1e-8))
    checks.append(_le("stationarity", stat, 1e-9))

    worst = 0.0
    for p in (0.1, 0.5, 0.8):
        hp = Hyperparameters(1.0, 0.0, p, 0.0, "b_zero")
        worst = max(worst, float(np.max(np.abs(solve_steck(g, p).w - solve_b_zero(g, hp).w))))
    checks.append(_le("steck_equals_b_zero", worst, 1e-8))

    min_pivot = np.inf
    for hp in (Hyperparameters(1.0, 0.5, 0.3), Hyperparameters(1.0, 2.0, 0.7)):
        c = coefficients(hp)
        for i in range(n):
            min_pivot = min(min_pivot, pd_certificate(build_H_v(g, c, i)[0]).min_pivot)
    c0 = coefficients(Hyperparameters(1.0, 0.0, 0.3, variant="b_zero"))
    singular = sum(not pd_certificate(build_H_v(g, c0, i)[0]).is_pd for i in range(n))
    checks.append(Check("pd_b_positive", bool(min_pivot > 0), float(min_pivot), 0.0))
    checks.append(Check("singular_b_zero", singular == n, float(singular), float(n)))

    rng = np.random.default_rng([seed, 1])
    miller = 0.0
    for _ in range(20):
        A = rng.standard_normal((10, 10))
        P = A @ A.T + 10 * np.eye(10)
        col, row = rng.standard_normal(10), rng.standard_normal(10)
        out = miller_update(np.linalg.inv(P), col, row)
        miller = max(miller, float(np.max(np.abs(out @ (P + np.outer(col, row)) - np.eye(10)))))
    checks.append(_le("miller_identity", miller, 1e-10))

    scal = 0.0
    for hp in (Hyperparameters(1.0, 0.5, 0.3), Hyperparameters(1.0, 0.5, 0.3, 10.0, "l2"),
               Hyperparameters(1.0, 0.5, 0.3, 10.0, "zero_diag_l2")):
        scal = max(scal, float(np.max(np.abs(solve_fast(g, hp.scaled(2.0)).w - solve_fast(g, hp).w))))
    hp0 = Hyperparameters(1.0, 0.0, 0.3, variant="b_zero")
    scal = max(scal, float(np.max(np.abs(solve_b_zero(g, hp0.scaled(2.0)).w - solve_b_zero(g, hp0).w))))
    checks.append(_le("scalar_invariance", scal, 1e-10))

    W0 = solve_b_zero(g, hp0).w
    base = expected_loss(g, W0, hp0)
    rel = 0.0
    for _ in range(5):
        W1 = W0.copy()
        W1[np.diag_indices(n)] = rng.standard_normal(n)
        rel = max(rel, abs(expected_loss(g, W1, hp0) - base) / abs(base))
    checks.append(_le("diag_independence_b_zero", rel, 1e-10))

    hp = Hyperparameters(1.0, 0.5, 0.3)
    W = solve_fast(g, hp)
    est = sample_loss(R, W, hp, mc_samples, seed)
    z = abs(est.mean - expected_loss(g, W, hp)) / est.std_error
    checks.append(_le("monte_carlo_sigma", z, 4.0))

    probe = 0.0
    worst_margin = np.inf
    for hp in full_points[:4]:
        rep = minimality_probe(g, solve_fast(g, hp), hp, 20, 1e-3, seed)
        worst_margin = min(worst_margin, rep.min_margin - rep.bound)
        probe += len(rep.violations)
    checks.append(Check("minimality", probe == 0, float(worst_margin), 0.0))

    small = gram(random_interactions(m, min(n, 12), density, seed=[seed, 2]))
    hp = Hyperparameters(1.0, 1.0, 0.3, variant="low_rank", rank_k=1)
    losses = [expected_loss(small, solve_low_rank(small, Hyperparameters(1.0, 1.0, 0.3, 0.0,
                                                                          "low_rank", k)), hp)
              for k in range(1, small.n + 1)]
    increase = max(0.0, max(b - a for a, b in zip(losses, losses[1:])))
    checks.append(_le("low_rank_monotone", increase / abs(losses[0]), 1e-10))
    return checks
