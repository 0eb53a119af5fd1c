import numpy as np
import pytest

from fadingmac import DomainError, FadingLaw, LookConfig, c1, look_capacity, simulate
from fadingmac.look import LookMidpointStrategy, look_strategy, random_active_sets
from fadingmac.strategies import midpoint_strategy


def test_all_active_reduces_to_midpoint(rayleigh):
    for K in (1, 2, 4):
        cfg = LookConfig(K, K, rayleigh, 1.0)
        assert look_capacity(cfg) == pytest.approx(midpoint_strategy(K, rayleigh, 1.0).throughput_, abs=1e-9)


def test_single_active_of_two(rayleigh):
    assert look_capacity(LookConfig(2, 1, rayleigh, 1.0)) == pytest.approx(c1(rayleigh, 2.0), abs=1e-9)


def test_grows_without_bound_in_K(rayleigh):
    Ks = [2, 4, 8, 16, 64, 256, 1024]
    v = np.array([look_capacity(LookConfig(K, 2, rayleigh, 1.0)) for K in Ks])
    assert np.all(np.diff(v) > 0)
    assert v[-1] > 4.0


def test_independent_of_L(rayleigh):
    vals = [look_capacity(LookConfig(8, L, rayleigh, 0.5)) for L in (1, 2, 4, 8)]
    np.testing.assert_allclose(vals, vals[0], atol=1e-12)


def test_config_validation(rayleigh):
    with pytest.raises(DomainError):
        LookConfig(2, 3, rayleigh, 1.0)
    with pytest.raises(DomainError):
        LookConfig(2, 1, rayleigh, 0.0)
    with pytest.raises(DomainError):
        LookConfig(0, 0, rayleigh, 1.0)
    assert LookConfig(8, 2, rayleigh, 0.5).banked_budget == pytest.approx(2.0)


def test_active_sets_are_exact_and_uniform():
    rng = np.random.default_rng(1)
    m = random_active_sets(40_000, 6, 2, rng)
    assert np.all(m.sum(axis=1) == 2)
    np.testing.assert_allclose(m.mean(axis=0), 2 / 6, atol=0.01)


@pytest.mark.parametrize("K,L", [(4, 2), (8, 2), (16, 3)])
def test_monte_carlo_consistency(rayleigh, K, L):
    s = look_strategy(LookConfig(K, L, rayleigh, 1.0))
    rep = simulate(s, rayleigh, 60_000, seed=K)
    assert rep.outage_count == 0
    assert rep.within(look_capacity(LookConfig(K, L, rayleigh, 1.0)))
    for m, se in zip(rep.power_mean, rep.power_stderr):
        assert m <= 1.0 + 3 * se
    np.testing.assert_allclose(s.mean_power(), 1.0, rtol=1e-9)


def test_predict_is_seeded(rayleigh):
    s = LookMidpointStrategy(5, 2, 1.0).fit(rayleigh)
    g = np.full((3, 5), 1.5)
    a = s.predict(g, rng=np.random.default_rng(4))
    b = s.predict(g, rng=np.random.default_rng(4))
    np.testing.assert_array_equal(a[0], b[0])
    with pytest.raises(DomainError):
        LookMidpointStrategy(2, 1, 1.0).fit([rayleigh, FadingLaw.rayleigh(2.0)])
