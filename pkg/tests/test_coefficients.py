import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deql.coefficients import Hyperparameters, build_H_v, coefficients, g_matrix
from deql.data import GramBundle
from deql.errors import HyperparameterError


def four_case_G(a, b, p, n, i):
    """G^(i) written straight from the per-case expectations."""
    q = 1 - p
    G = np.empty((n, n))
    for k in range(n):
        for l in range(n):
            if k == i and l == i:
                G[k, l] = q * b * b
            elif k == i or l == i:
                G[k, l] = q * q * b * b
            elif k == l:
                G[k, l] = q * p * a * a + q * q * b * b
            else:
                G[k, l] = q * q * p * a * a + q ** 3 * b * b
    return G


def mc_moments(a, b, p, draws, seed):
    """Sample E[D_k D_l A_i^2], E[D_k A_i^2] and E[A_i^2] with i, k, l distinct cells."""
    rng = np.random.default_rng(seed)
    keep = rng.random((draws, 3)) >= p          # columns: i, k, l
    A2 = np.where(keep[:, 0], b * b, a * a)
    Di, Dk, Dl = keep.T.astype(float)
    return {
        "ii": Di * A2,            # G_ii
        "ki": Dk * Di * A2,       # G_ki, k != i
        "kk": Dk * A2,            # G_kk, k != i; also u_k
        "kl": Dk * Dl * A2,       # G_kl, all distinct
        "c0": A2,
    }


def within_3_sigma(samples, value):
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - value) <= 3 * se + 1e-15


@pytest.mark.parametrize("a,b,p", [(1.0, 1.0, 0.5), (1.0, 0.0, 0.5), (1.0, 0.5, 0.3), (0.7, 1.6, 0.8)])
def test_coefficients_match_monte_carlo(a, b, p):
    c = coefficients(Hyperparameters(a, b, p, variant="b_zero" if b == 0 else "plain"))
    s = mc_moments(a, b, p, 1_000_000, seed=[17, int(p * 10)])
    assert within_3_sigma(s["ii"], c.g0_diag + c.g1_diag)
    assert within_3_sigma(s["ki"], c.g0_off + c.g1_off)
    assert within_3_sigma(s["ki"], c.g0_off + c.g2_off)
    assert within_3_sigma(s["kk"], c.g0_diag)
    assert within_3_sigma(s["kl"], c.g0_off)
    assert within_3_sigma(s["kk"], c.u_off)
    assert within_3_sigma(s["ii"], c.u_diag)
    assert within_3_sigma(s["c0"], c.c0)


def test_example_a1_b1_p05():
    c = coefficients(Hyperparameters(1.0, 1.0, 0.5))
    assert c.g0_diag == 0.5
    assert c.g0_off == 0.25
    assert c.g1_diag == 0.0 and c.g1_off == 0.0 and c.g2_off == 0.0
    assert c.u_diag == 0.5 and c.u_off == 0.5
    assert c.c0 == 1.0


def test_example_b_zero():
    c = coefficients(Hyperparameters(1.0, 0.0, 0.5, variant="b_zero"))
    assert c.u_minus == 0.25
    assert c.g_minus_diag == 0.25
    assert c.g_minus_off == 0.125
    assert c.u_diag == 0.0
    assert c.c0 == 0.5


@settings(max_examples=50, deadline=None)
@given(b=st.floats(0.01, 5.0), p=st.floats(0.01, 0.99))
def test_equal_weights_kill_corrections(b, p):
    c = coefficients(Hyperparameters(b, b, p))
    assert c.g1_diag == 0.0 and c.g1_off == 0.0 and c.g2_off == 0.0


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.0, 3.0), b=st.floats(0.01, 3.0), p=st.floats(0.01, 0.99),
       n=st.integers(1, 6), data=st.data())
def test_decomposition_matches_four_case_table(a, b, p, n, data):
    i = data.draw(st.integers(0, n - 1))
    c = coefficients(Hyperparameters(a, b, p))
    np.testing.assert_allclose(g_matrix(c, n, i), four_case_G(a, b, p, n, i), rtol=1e-13, atol=1e-15)


def test_build_H_v_example():
    c = coefficients(Hyperparameters(1.0, 1.0, 0.5))
    H, v = build_H_v(GramBundle.from_matrix(np.eye(2)), c, 0)
    np.testing.assert_array_equal(H, np.diag([0.5, 0.5]))
    np.testing.assert_array_equal(v, [0.5, 0.0])


def test_build_H_v_b_zero_cross_is_zero(small_gram):
    c = coefficients(Hyperparameters(1.0, 0.0, 0.3, variant="b_zero"))
    for i in (0, 7, 29):
        H, v = build_H_v(small_gram, c, i)
        assert not H[i, :].any() and not H[:, i].any()
        assert v[i] == 0.0
        assert np.array_equal(H, H.T)


@pytest.mark.parametrize("kwargs", [
    dict(b=0.0, variant="plain"),
    dict(b=0.5, lam=1.0, variant="plain"),
    dict(b=0.0, lam=0.0, variant="l2"),
    dict(b=0.5, variant="b_zero"),
    dict(a=0.0, b=0.0, variant="b_zero"),
    dict(lam=0.0, variant="ease"),
    dict(a=1.0, b=0.5, rank_k=2, variant="low_rank"),
    dict(a=1.0, b=1.0, variant="low_rank"),
    dict(p=0.0, b=0.5),
    dict(p=1.0, b=0.5),
    dict(b=-1.0),
    dict(variant="slim"),
])
def test_invalid_hyperparameters(kwargs):
    with pytest.raises(HyperparameterError):
        Hyperparameters(**kwargs)


def test_scaled_keeps_ratio():
    hp = Hyperparameters(1.0, 0.5, 0.3, 10.0, "l2").scaled(2.0)
    assert (hp.a, hp.b, hp.lam) == (2.0, 1.0, 40.0)
