import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import bruteforce_c1, grid_c1_rayleigh, rayleigh_c1
from sklearn.base import clone

from fadingmac import DomainError, FadingLaw, InfeasibleError, WaterFilling, c1, solve_level
from fadingmac.waterfill import WaterfillCurve
from test_fading import discrete_laws

# frozen from oracles.bruteforce_c1 / oracles.grid_c1_rayleigh
ORACLE_DISCRETE = [
    ([(1.0, 0.5), (4.0, 0.5)], 1.0, 0.8502198590705461),
    ([(0.5, 0.2), (1.0, 0.3), (2.0, 0.1), (5.0, 0.4)], 1.0, 0.8495629157338833),
    ([(0.1, 0.5), (0.2, 0.5)], 0.3, 0.04087468307071989),
    ([(1.0, 0.3), (2.0, 0.3), (3.0, 0.4)], 2.0, 1.1516094049770909),
    ([(0.3, 0.6), (2.0, 0.4)], 0.05, 0.06438561897747247),
]
ORACLE_RAYLEIGH_GRID_1E6 = 0.5142694474079359


def test_point_mass():
    sol = solve_level(FadingLaw.discrete([(1.0, 1.0)]), 3.0)
    assert sol.level == pytest.approx(0.25, rel=1e-12)
    assert sol.power(1.0) == pytest.approx(3.0)
    assert sol.capacity == pytest.approx(1.0, abs=1e-12)


def test_two_state_closed_form(two_state):
    sol = solve_level(two_state, 1.0)
    assert 1 / sol.level == pytest.approx(1.625, abs=1e-9)
    np.testing.assert_allclose(sol.power([1.0, 4.0]), [0.625, 1.375], atol=1e-9)
    want = 0.25 * np.log2(1.625) + 0.25 * np.log2(6.5)
    assert sol.capacity == pytest.approx(want, abs=1e-9)


def test_two_state_level_by_grid_search(two_state):
    lam = np.linspace(0.5, 0.7, 200001)
    spend = 0.5 * np.maximum(1 / lam - 1, 0) + 0.5 * np.maximum(1 / lam - 0.25, 0)
    best = lam[np.argmin(np.abs(spend - 1.0))]
    assert solve_level(two_state, 1.0).level == pytest.approx(best, abs=2e-6)


def test_zero_budget(rayleigh):
    sol = solve_level(rayleigh, 0.0)
    assert sol.capacity == 0.0 and sol.level is None
    np.testing.assert_array_equal(sol.power([0.5, 2.0]), 0.0)


def test_infeasible_and_domain_errors():
    with pytest.raises(InfeasibleError):
        c1(FadingLaw.discrete([(0.0, 1.0)]), 1.0)
    with pytest.raises(DomainError):
        c1(FadingLaw.rayleigh(), -1.0)


@pytest.mark.parametrize("atoms,P,frozen", ORACLE_DISCRETE)
def test_discrete_oracle(atoms, P, frozen):
    gains, probs = zip(*atoms)
    value = c1(FadingLaw.discrete(atoms), P)
    assert value == pytest.approx(frozen, abs=1e-6)
    assert value == pytest.approx(bruteforce_c1(gains, probs, P), abs=1e-6)


def test_rayleigh_matches_fine_grid_oracle(rayleigh):
    assert grid_c1_rayleigh(1.0) == pytest.approx(ORACLE_RAYLEIGH_GRID_1E6, abs=1e-12)
    assert abs(c1(rayleigh, 1.0) - ORACLE_RAYLEIGH_GRID_1E6) < 1e-6


def test_rayleigh_exact_closed_form_convergence(rayleigh):
    # default grid: within the oracle tolerance to the grid oracle; exact error shrinks with n
    exact = rayleigh_c1(1.0)
    errs = [abs(c1(rayleigh, 1.0, grid=n) - exact) for n in (2000, 20000, 200000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] < 2e-6


@given(discrete_laws(), st.floats(1e-3, 50.0))
def test_budget_is_spent(law, P):
    sol = solve_level(law, P)
    g, w = law.support()
    assert abs(w @ sol.power(g) - P) <= 1e-9 * max(1.0, P)
    assert sol.capacity > 0


@given(discrete_laws(), st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_monotone_and_concave(law, a, b):
    lo, hi = sorted((a, b))
    assert c1(law, hi) >= c1(law, lo) - 1e-12
    assert c1(law, 0.5 * (a + b)) >= 0.5 * (c1(law, a) + c1(law, b)) - 1e-9


@given(discrete_laws(), st.floats(1e-3, 20.0))
def test_beats_constant_power(law, P):
    g, w = law.support()
    assert c1(law, P) >= 0.5 * w @ np.log2(1 + g * P) - 1e-12


@given(discrete_laws(4), st.floats(0.01, 10.0))
def test_oracle_equivalence_small_laws(law, P):
    gains, probs = law.atoms
    assert c1(law, P) == pytest.approx(bruteforce_c1(gains, probs, P), abs=1e-6)


def test_curve_matches_direct_solve(rayleigh):
    g, w = rayleigh.support()
    curve = WaterfillCurve(g, w)
    for P in (0.01, 0.3, 1.0, 7.0, 100.0):
        assert curve.capacity(P) == pytest.approx(c1(rayleigh, P), abs=1e-12)


def test_estimator_api(two_state):
    est = WaterFilling(budget=1.0)
    assert est.get_params() == {"budget": 1.0, "grid": 20000}
    fitted = clone(est).fit(two_state)
    assert fitted.capacity_ == pytest.approx(0.8502198590705461, abs=1e-12)
    np.testing.assert_allclose(fitted.predict([1.0, 4.0]), [0.625, 1.375])
