import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fadingmac import ContractError, DomainError, FadingLaw, LayeredStrategy, simulate
from fadingmac.ratesplit import (build_layering, fraction_sweep, greedy_schedule, layer_rates,
                                 layered_rate, midpoint_rate)
from fadingmac.strategies import midpoint_strategy


def test_single_layer():
    lay = build_layering(1.0, 2, 1)
    assert lay.rates[0] == pytest.approx(0.5 * math.log2(1.5), abs=1e-12)


def test_two_layers_by_hand():
    lay = build_layering(1.0, 2, 2)
    np.testing.assert_allclose(lay.rates, [0.5 * math.log2(4 / 3), 0.5 * math.log2(1.2)], atol=1e-12)
    assert lay.sum_rate == pytest.approx(0.5 * math.log2(1.6), abs=1e-12)


def test_single_user_layering():
    assert build_layering(3.0, 1, 1).sum_rate == pytest.approx(0.5 * math.log2(4.0))
    sched = greedy_schedule([build_layering(2.0, 1, 3)])
    assert sched.order() == [(0, 3), (0, 2), (0, 1)]
    for step in sched.steps:
        assert step.actual == pytest.approx(step.designed, rel=1e-12)


def test_layering_invariants():
    lay = build_layering(2.7, 3, 7)
    assert lay.powers.sum() == pytest.approx(2.7, abs=1e-12)
    assert np.all(lay.rates > 0)
    np.testing.assert_allclose(lay.rates, layer_rates(lay.powers, 3), atol=1e-12)


def test_example_schedule():
    a = build_layering(2.0, 2, 2, user=0)
    b = build_layering(0.5, 2, 2, user=1)
    sched = greedy_schedule([a, b])
    assert sched.order() == [(0, 2), (0, 1), (1, 2), (1, 1)]
    assert sched.steps[0].actual == pytest.approx(2.5)
    assert sched.steps[0].designed == pytest.approx(4.0)
    assert sched.feasible and len(sched) == 4


def test_symmetric_ties_go_to_lowest_index():
    lays = [build_layering(1.0, 2, 3, user=i) for i in range(2)]
    users = [u for u, _ in greedy_schedule(lays).order()]
    assert users == [0, 1, 0, 1, 0, 1]


def test_errors():
    with pytest.raises(DomainError):
        build_layering(0.0, 2, 1)
    with pytest.raises(DomainError):
        build_layering(1.0, 2, 0)
    with pytest.raises(ContractError):
        greedy_schedule([build_layering(1.0, 2, 1), build_layering(1.0, 3, 1)])


def test_fraction_sweep():
    rows = fraction_sweep([1.0, 1.0], [1, 2, 10, 100, 10_000])
    assert rows[0].fraction == pytest.approx(0.7382, abs=1e-4)
    assert rows[-1].fraction >= 0.999
    fr = [r.fraction for r in rows]
    assert all(b >= a for a, b in zip(fr, fr[1:]))
    assert all(r.schedule_feasible and 0 < r.fraction <= 1 for r in rows)


@pytest.mark.parametrize("L", [2, 3, 5])
def test_gap_decays_like_one_over_layers(L):
    for gamma in (0.1, 1.0, 10.0):
        n = np.array([100, 1000, 10_000])
        gap = float(midpoint_rate(gamma, L)) - np.array([float(layered_rate(gamma, L, k)) for k in n])
        scaled = gap * n
        assert np.all(gap > 0)
        # C/N_v decay: the product settles to a constant
        assert abs(scaled[2] - scaled[1]) <= 0.02 * scaled[2]
        assert gap[-1] < 1e-3


@given(st.integers(1, 5).flatmap(lambda L: st.tuples(
    st.lists(st.floats(-2, 2), min_size=L, max_size=L),
    st.lists(st.integers(1, 64), min_size=L, max_size=L))))
def test_greedy_always_feasible(data):
    logs, layers = data
    L = len(logs)
    gammas = [10.0 ** x for x in logs]
    lays = [build_layering(g, L, n, user=i) for i, (g, n) in enumerate(zip(gammas, layers))]
    sched = greedy_schedule(lays)
    assert sched.feasible
    assert len(sched) == sum(layers)
    assert sorted(sched.order()) == sorted((i, l) for i, n in enumerate(layers) for l in range(1, n + 1))
    total = sum(lay.sum_rate for lay in lays)
    assert total <= 0.5 * math.log2(1 + sum(gammas)) + 1e-9


def test_layered_strategy_outage_free_and_converges():
    law = FadingLaw.rayleigh(1.0)
    base = midpoint_strategy(2, law, 1.0)
    prev = 0.0
    for n in (1, 4, 64):
        s = LayeredStrategy(base, n).fit(law)
        assert simulate(s, law, 20_000, seed=n).outage_count == 0
        assert prev < s.throughput_ <= base.throughput_
        prev = s.throughput_
    assert base.throughput_ - prev < 0.01
