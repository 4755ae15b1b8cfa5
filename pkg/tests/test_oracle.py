import numpy as np
import pytest

from deql.coefficients import Hyperparameters, build_H_v, coefficients
from deql.data import InteractionMatrix, gram
from deql.oracle import (cell_uniforms, expected_loss, minimality_probe, objective,
                         objective_change, pd_certificate, sample_loss)
from deql.solvers import solve, solve_b_zero, solve_fast, solve_low_rank
from deql.synthetic import random_interactions
from deql.weights import Provenance, WeightMatrix


def brute_expected_loss(R, W, hp):
    """Exact expectation by enumerating every dropout mask (tiny R only)."""
    D = R.to_dense()
    m, n = D.shape
    total = 0.0
    for bits in range(2 ** n):
        keep = np.array([(bits >> j) & 1 for j in range(n)], dtype=float)
        prob = np.prod(np.where(keep == 1, 1 - hp.p, hp.p))
        A = np.where(keep == 1, hp.b, hp.a)
        # rows are independent, so one mask per row gives the per-row expectation
        resid = (D - (D * keep) @ W) * A
        total += prob * np.sum(resid ** 2)
    return total


def test_uniforms_are_counter_based():
    full = cell_uniforms(5, np.arange(4, dtype=np.uint64), np.arange(6, dtype=np.uint64))
    part = cell_uniforms(5, np.array([2], dtype=np.uint64), np.arange(6, dtype=np.uint64))
    np.testing.assert_array_equal(full[2], part[0])
    assert np.all((full >= 0) & (full < 1))
    assert not np.array_equal(full, cell_uniforms(6, np.arange(4, dtype=np.uint64),
                                                  np.arange(6, dtype=np.uint64)))


def test_single_entry_loss_is_deterministic():
    R = InteractionMatrix.from_pairs([(0, 0)], 1, 1)
    est = sample_loss(R, np.zeros((1, 1)), Hyperparameters(1.0, 1.0, 0.5), 100, seed=3)
    assert est.mean == 1.0
    assert est.std_error == 0.0


def test_sample_loss_seeded():
    R = random_interactions(10, 5, 0.4, seed=1)
    W = np.random.default_rng(0).standard_normal((5, 5)) * 0.1
    hp = Hyperparameters(1.0, 0.5, 0.3)
    assert sample_loss(R, W, hp, 500, 9) == sample_loss(R, W, hp, 500, 9)
    assert sample_loss(R, W, hp, 500, 9) != sample_loss(R, W, hp, 500, 10)


def test_zero_W_loss():
    R = random_interactions(12, 6, 0.4, seed=2)
    hp = Hyperparameters(1.0, 0.5, 0.3)
    assert expected_loss(gram(R), np.zeros((6, 6)), hp) == pytest.approx(coefficients(hp).c0 * R.nnz)


@pytest.mark.parametrize("a,b,p", [(1.0, 0.5, 0.3), (1.0, 0.0, 0.6), (0.5, 2.0, 0.2)])
def test_expected_loss_matches_enumeration(a, b, p):
    R = random_interactions(6, 4, 0.5, seed=3)
    W = np.random.default_rng(1).standard_normal((4, 4))
    hp = Hyperparameters(a, b, p, variant="b_zero" if b == 0 else "plain")
    assert expected_loss(gram(R), W, hp) == pytest.approx(brute_expected_loss(R, W, hp), rel=1e-12)


@pytest.mark.parametrize("num_samples", [1_000, 10_000, 100_000])
def test_monte_carlo_within_4_sigma(num_samples):
    R = random_interactions(12, 6, 0.4, seed=4)
    hp = Hyperparameters(1.0, 0.5, 0.3)
    W = solve_fast(gram(R), hp)
    est = sample_loss(R, W, hp, num_samples, seed=1)
    assert abs(est.mean - expected_loss(gram(R), W, hp)) <= 4 * est.std_error


def test_b_zero_loss_ignores_diagonal(small_gram):
    hp = Hyperparameters(1.0, 0.0, 0.3, variant="b_zero")
    W = solve_b_zero(small_gram, hp).w
    base = expected_loss(small_gram, W, hp)
    rng = np.random.default_rng(2)
    for _ in range(5):
        W2 = W.copy()
        W2[np.diag_indices(small_gram.n)] = rng.standard_normal(small_gram.n)
        assert abs(expected_loss(small_gram, W2, hp) - base) <= 1e-10 * abs(base)


def test_objective_change_matches_difference(small_gram):
    hp = Hyperparameters(1.0, 0.5, 0.3, 7.0, "l2")
    rng = np.random.default_rng(3)
    W = rng.standard_normal((30, 30)) * 0.05
    D = rng.standard_normal((30, 30)) * 0.1
    direct = objective(small_gram, W + D, hp) - objective(small_gram, W, hp)
    assert objective_change(small_gram, W, D, hp) == pytest.approx(direct, rel=1e-9)


def test_probe_epsilon_zero(small_gram):
    hp = Hyperparameters(1.0, 0.5, 0.3)
    rep = minimality_probe(small_gram, solve_fast(small_gram, hp), hp, 5, 0.0)
    assert rep.margins == [0.0] * 5
    assert rep.passed


@pytest.mark.parametrize("hp", [
    Hyperparameters(1.0, 0.5, 0.3),
    Hyperparameters(1.0, 0.5, 0.3, 10.0, "l2"),
    Hyperparameters(1.0, 1.5, 0.1, 100.0, "zero_diag_l2"),
    Hyperparameters(1.0, 0.0, 0.5, variant="b_zero"),
    Hyperparameters(1.0, 0.0, 0.5, 30.0, "b_zero"),
    Hyperparameters(lam=20.0, variant="ease"),
    Hyperparameters(1.0, 1.0, 0.3, variant="low_rank", rank_k=4),
])
def test_probe_passes_on_solver_outputs(small_gram, hp):
    rep = minimality_probe(small_gram, solve(small_gram, hp), hp, 20, 1e-3, seed=4)
    assert rep.passed, rep.violations
    assert rep.min_margin >= hp.lam * 1e-6 - 1e-12 if hp.variant != "low_rank" else True


def test_probe_catches_non_minimizer(small_gram):
    hp = Hyperparameters(1.0, 0.5, 0.3)
    W = solve_fast(small_gram, hp)
    shifted = WeightMatrix(W.w + 0.01, W.provenance)
    rep = minimality_probe(small_gram, shifted, hp, 20, 1e-3)
    assert not rep.passed


def test_pd_certificate_identity():
    cert = pd_certificate(np.eye(4))
    assert cert.is_pd and cert.min_pivot == 1.0


def test_pd_certificate_b_positive_and_zero(small_gram):
    c = coefficients(Hyperparameters(1.0, 0.5, 0.3))
    c0 = coefficients(Hyperparameters(1.0, 0.0, 0.3, variant="b_zero"))
    for i in range(small_gram.n):
        assert pd_certificate(build_H_v(small_gram, c, i)[0]).is_pd
        assert not pd_certificate(build_H_v(small_gram, c0, i)[0]).is_pd


def test_pd_certificate_indefinite():
    assert not pd_certificate([[1.0, 2.0], [2.0, 1.0]]).is_pd
