import numpy as np
import pytest

from fadingmac import (AlphaMidpointStrategy, ContractError, DomainError, FadingLaw,
                       GroupCsiStrategy, LayeredStrategy, MidpointStrategy, ZeroStrategy, c1,
                       simulate, verify_outage_free)
from fadingmac.strategies import midpoint_strategy


class InflatedMidpoint(MidpointStrategy):
    """Midpoint powers with rates scaled up by 1.5."""

    def predict(self, gains, block_index=None, rng=None):
        p, r = super().predict(gains, block_index, rng)
        return p, 1.5 * r


def test_zero_strategy(rayleigh):
    rep = simulate(ZeroStrategy(3).fit(rayleigh), rayleigh, 5000, seed=1)
    assert rep.throughput_mean == 0.0 and rep.outage_count == 0 and rep.first_violation is None


@pytest.mark.slow
def test_midpoint_million_blocks(rayleigh):
    rep = simulate(midpoint_strategy(2, rayleigh, 1.0), rayleigh, 10**6, seed=0)
    assert rep.within(c1(rayleigh, 2.0))
    assert rep.outage_count == 0


def test_determinism_across_workers(rayleigh):
    s = midpoint_strategy(2, rayleigh, 1.0)
    a = simulate(s, rayleigh, 50_000, seed=9, workers=1)
    b = simulate(s, rayleigh, 50_000, seed=9, workers=8)
    assert a == b
    assert a.throughput_mean == b.throughput_mean and a.power_stderr == b.power_stderr
    assert simulate(s, rayleigh, 50_000, seed=10) != a


def test_inflated_rates_are_caught():
    law = FadingLaw.discrete([(0.5, 0.5), (2.0, 0.5)])
    s = InflatedMidpoint(2, 1.0).fit(law)
    out = verify_outage_free(s, law, 20_000, seed=3)
    assert out.count > 0
    v = out.first_violation
    assert set(v) == {"block", "gains", "powers", "rates"}
    assert sum(v["rates"]) > 0.5 * np.log2(1 + np.dot(v["gains"], v["powers"]))


def test_stderr_halves_when_blocks_double(rayleigh):
    s = midpoint_strategy(2, rayleigh, 1.0)
    ratios = [simulate(s, rayleigh, n, seed=s0).throughput_stderr ** 2
              / simulate(s, rayleigh, 2 * n, seed=s0 + 100).throughput_stderr ** 2
              for n, s0 in ((20_000, 1), (50_000, 2))]
    for r in ratios:
        assert 2 / 1.5 <= r <= 2 * 1.5


def test_stderr_definition(rayleigh):
    s = midpoint_strategy(2, rayleigh, 1.0)
    rep = simulate(s, rayleigh, 3000, seed=4, chunk_blocks=1000)
    from fadingmac.fading import sample_blocks
    chunks = []
    for c in range(3):
        rng = np.random.default_rng(np.random.SeedSequence(4, spawn_key=(c,)))
        g = sample_blocks([rayleigh] * 2, 1000, rng)
        chunks.append(s.predict(g)[1].sum(axis=1))
    x = np.concatenate(chunks)
    assert rep.throughput_mean == pytest.approx(x.mean(), rel=1e-12)
    assert rep.throughput_stderr == pytest.approx(x.std(ddof=1) / np.sqrt(x.size), rel=1e-9)


def test_outage_free_strategies(rayleigh):
    assert verify_outage_free(AlphaMidpointStrategy((1.0, 1.0)).fit(rayleigh), rayleigh, 10**5) == 0
    assert verify_outage_free(GroupCsiStrategy(2, 1.0, (1.0,)).fit(rayleigh), rayleigh, 10**5) == 0


def test_layered_cross_check(rayleigh):
    base = midpoint_strategy(2, rayleigh, 1.0)
    rep = simulate(LayeredStrategy(base, 64).fit(rayleigh), rayleigh, 50_000, seed=8)
    assert rep.outage_count == 0
    assert rep.throughput_mean <= simulate(base, rayleigh, 50_000, seed=8).throughput_mean


def test_argument_checks(rayleigh):
    s = midpoint_strategy(2, rayleigh, 1.0)
    with pytest.raises(DomainError):
        simulate(s, rayleigh, 0)
    with pytest.raises(DomainError):
        simulate(s, rayleigh, 10, seed=-1)
    with pytest.raises(DomainError):
        simulate(s, rayleigh, 10, workers=0)
    with pytest.raises(ContractError):
        simulate(s, [rayleigh] * 3, 10)
    row = simulate(s, rayleigh, 100).as_row()
    assert {"throughput_mean", "power_mean_1", "outage_count"} <= set(row)
