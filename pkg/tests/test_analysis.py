import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gnc.analysis import (
    AnalyticModel,
    alpha_condition,
    alpha_star,
    and_or_step,
    and_or_value,
    pk_bounds,
    pk_enumerate,
    pk_exact,
    poisson_eta,
    psi_lambda,
)


def test_pk_is_one_below_B():
    m = AnalyticModel(64, 16, 16, 16)
    assert all(pk_exact(m, k) == 1.0 for k in range(16))


def test_pk_small_case_hand_value():
    m = AnalyticModel(4, 0, 2, 2)
    assert m.Lprime == 2
    assert pk_exact(m, 2) == pytest.approx(0.75, abs=1e-15)
    assert pk_enumerate(2, 2, 2) == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("Lp", [1, 2, 3, 4])
@pytest.mark.parametrize("B", [1, 2, 3, 4])
def test_binomial_identity_matches_enumeration(Lp, B):
    m = AnalyticModel(Lp * B, 0, B, B)
    assert m.Lprime == Lp
    for k in range(13):
        assert pk_exact(m, k) == pytest.approx(pk_enumerate(Lp, B, k), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(M=st.integers(16, 512), B=st.integers(2, 32), S=st.integers(0, 40))
def test_pk_monotone_and_precoding_helps(M, B, S):
    B = min(B, M)
    m = AnalyticModel(M, S, B, B)
    k = np.arange(0, 2 * M)
    p = pk_exact(m, k)
    assert np.all(np.diff(p) <= 1e-15)
    if S and m.Lprime > AnalyticModel(M, 0, B, B).Lprime:
        p0 = pk_exact(AnalyticModel(M, 0, B, B), k)
        assert np.all(p[B:] >= p0[B:] - 1e-15)


def test_pk_bounds():
    m = AnalyticModel(64, 16, 16, 16)
    lo, hi = pk_bounds(m, np.arange(30, 64))
    assert np.array_equal(lo, hi)
    m = AnalyticModel(64, 16, 16, 20)
    lo, hi = pk_bounds(m, np.arange(16, 64))
    assert np.all(lo < hi)
    lo, hi = pk_bounds(m, 10**5)
    assert lo < 1e-9 and hi < 1e-9


def test_psi_no_overlap():
    d = psi_lambda(AnalyticModel(256, 0, 32, 32))
    assert d.Psi[0] == pytest.approx(1.0)
    x = np.linspace(0, 1, 11)
    assert np.allclose(d.lambda_asym(x), 1.0)
    assert np.allclose(d.lambda_exact(x), 1.0)


@settings(max_examples=30, deadline=None)
@given(B=st.integers(2, 40), extra=st.integers(0, 30), L=st.integers(2, 60))
def test_psi_normalized_and_lambda_at_one(B, extra, L):
    d = psi_lambda(AnalyticModel(B * L, 0, B, B + min(extra, B * L - B)))
    assert d.Psi.sum() == pytest.approx(1.0)
    assert d.lambda_asym(1.0) == pytest.approx(1.0)
    assert d.lambda_exact(1.0) == pytest.approx(1.0)


def test_lambda_exact_vs_asymptotic():
    x = np.linspace(0, 1, 101)
    devs = []
    for n in (128, 1088, 4160):  # L' = 4, 34, 130 at B = 32
        d = psi_lambda(AnalyticModel(n, 0, 32, 41))
        devs.append(np.max(np.abs(d.lambda_exact(x) - d.lambda_asym(x))))
    assert devs[1] < 0.01
    assert devs[0] > devs[1] > devs[2]


def test_and_or_edge_cases():
    d = psi_lambda(AnalyticModel(1024, 59, 32, 41))
    # nothing received
    eta = np.zeros(41)
    eta[0] = 1.0
    assert and_or_value(0.3, eta, 41) == pytest.approx(1.0)
    # every generation holds at least G packets
    assert and_or_value(0.3, np.zeros(41), 41) == 0.0
    y = and_or_step(d, 41, 1.0, tau=1024 / 34)
    assert 0.0 <= y <= 1.0


def test_and_or_monte_carlo():
    model = AnalyticModel(1024, 59, 32, 41)
    d = psi_lambda(model)
    rng = np.random.default_rng(5)
    y_prev = 0.4
    n = 200_000
    z = float(d.lambda_asym(y_prev))
    u = rng.poisson(model.tau, n)
    k = rng.binomial(40, z, n)
    # a right node stays unknown when its known-edge count k cannot cover the
    # u packets' deficit; u >= G means decodable
    mc = np.mean((u <= 40) & (k >= u))
    assert and_or_step(d, 41, y_prev, model.tau) == pytest.approx(mc, abs=0.005)


def test_and_or_nonincreasing_on_acceptance_params():
    for M, S, G in [(1024, 59, 41), (4096, 137, 45)]:
        model = AnalyticModel(M, S, 32, G)
        a = alpha_star(M, S, 32, G)
        Gp = G - a.alpha * M / model.Lprime
        d = psi_lambda(model)
        ys = [1.0]
        for _ in range(30):
            ys.append(and_or_step(d, Gp, ys[-1], model.tau))
        assert all(b <= a_ + 1e-12 for a_, b in zip(ys, ys[1:]))


def test_alpha_grid_self_consistent():
    a1 = alpha_star(1024, 59, 32, 41, grid=1000)
    a2 = alpha_star(1024, 59, 32, 41, grid=2000)
    assert abs(a1.alpha - a2.alpha) <= 0.001 + 1e-12
    assert a1.predicted_MI(1024) == pytest.approx((a1.alpha + 59 / 1024) * 1024)


def test_alpha_no_overlap_no_precode_degenerates():
    # the condition only holds once G' rounds to zero: everything inactivated
    res = alpha_star(256, 0, 32, 32, delta_alpha=0.01)
    assert res.converged and res.alpha >= 0.95
    # f is constant (lambda = 1) and equal to Pr{Poisson <= G-1}
    eta = poisson_eta(8.0, 32)
    assert and_or_value(1.0, eta, 32) == pytest.approx(eta.sum())


def test_alpha_validation():
    with pytest.raises(ValueError):
        alpha_star(64, 0, 16, 16, delta_alpha=0)
    assert alpha_condition(AnalyticModel(64, 8, 16, 20), 1.0)
    # tiny search range that never reaches the degenerate end
    assert not alpha_star(256, 0, 32, 32, delta_alpha=0.6).converged
