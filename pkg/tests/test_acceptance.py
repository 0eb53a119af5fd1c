"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from oracles import bruteforce_c1

from fadingmac import (AlphaMidpointStrategy, FadingLaw, GroupCsiStrategy, LookConfig,
                       MidpointStrategy, VirtualSplitStrategy, c1, look_capacity, otdma_benchmark,
                       simulate, verify_relaxation, verify_outage_free)
from fadingmac.look import look_strategy
from fadingmac.nonident import alpha_lower_bound, scaled_shortcut, solve_upper_bound
from fadingmac.partial_csi import group_weights, psi_prime, sandwich, zeta
from fadingmac.ratesplit import build_layering, fraction_sweep, greedy_schedule, layered_rate, midpoint_rate
from fadingmac.strategies import midpoint_strategy
from fadingmac.waterfill import solve_level

from test_waterfill import ORACLE_DISCRETE

EXP = FadingLaw.rayleigh(1.0)


@pytest.fixture
def report(capsys):
    @contextmanager
    def run(label):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            with capsys.disabled():
                print(f"\n[{'PASS' if ok else 'FAIL'}] {label} ({time.perf_counter() - t0:.1f} s)")
    return run


def test_criterion_1_alpha_midpoint_tightness(report):
    with report("1 alpha-midpoint meets c1(sum of budgets), analytic and Monte Carlo"):
        t0 = time.perf_counter()
        for budgets in ((1.0, 2.0), (1.0, 2.0, 3.0)):
            s = AlphaMidpointStrategy(budgets).fit(EXP)
            target = c1(EXP, sum(budgets))
            assert abs(s.throughput_ - target) <= 1e-6
            rep = simulate(s, EXP, 10**6, seed=len(budgets))
            assert rep.within(target, 3.0), (rep.throughput_mean, rep.throughput_stderr, target)
        assert time.perf_counter() - t0 < 60


def test_criterion_2_outage_freeness(report):
    with report("2 outage-free strategies and feasible greedy schedules"):
        t0 = time.perf_counter()
        strategies = [
            MidpointStrategy(2, 1.0),
            AlphaMidpointStrategy((1.0, 2.0)),
            VirtualSplitStrategy((1.0, 2.0), 1.0),
            GroupCsiStrategy(2, 1.0, (1.0,)),
        ]
        for i, s in enumerate(strategies):
            s.fit(EXP)
            assert verify_outage_free(s, EXP, 10**5, seed=i) == 0, type(s).__name__
        look = look_strategy(LookConfig(8, 2, EXP, 1.0))
        assert verify_outage_free(look, EXP, 10**5, seed=7) == 0
        rng = np.random.default_rng(2024)
        for _ in range(10**4):
            L = int(rng.integers(1, 6))
            gammas = 10.0 ** rng.uniform(-2, 2, L)
            layers = rng.integers(1, 65, L)
            sched = greedy_schedule([build_layering(g, L, int(n), user=k)
                                     for k, (g, n) in enumerate(zip(gammas, layers))])
            assert sched.feasible and len(sched) == layers.sum()
        assert time.perf_counter() - t0 < 120


def test_criterion_3_waterfilling_oracle(report):
    with report("3 c1 matches brute force on discrete laws; two-state closed form"):
        for atoms, P, _ in ORACLE_DISCRETE:
            g, p = zip(*atoms)
            assert abs(c1(FadingLaw.discrete(atoms), P) - bruteforce_c1(g, p, P)) <= 1e-6
        law = FadingLaw.discrete([(1.0, 0.5), (4.0, 0.5)])
        sol = solve_level(law, 1.0)
        assert abs(sol.water_level - 1.625) <= 1e-9
        closed = 0.25 * math.log2(1.625) + 0.25 * math.log2(4 * 1.625)
        assert abs(sol.capacity - closed) <= 1e-9
        assert abs(closed - 0.8502) < 5e-5


def test_criterion_4_rate_splitting_convergence(report):
    with report("4 layered fraction 0.7382 at one layer, >= 0.999 at 1e4, C/N_v decay"):
        rows = fraction_sweep([1.0, 1.0], [1, 10_000])
        assert abs(rows[0].fraction - 0.7382) <= 1e-4
        assert rows[1].fraction >= 0.999
        for gamma in (0.1, 1.0, 10.0):
            c = [(float(midpoint_rate(gamma, 2)) - float(layered_rate(gamma, 2, n))) * n
                 for n in (100, 1000, 10_000)]
            assert all(v > 0 for v in c)
            # gap * N_v settles, so the gap falls at least like C / N_v
            assert c[2] <= c[1] * 1.02 and abs(c[2] - c[1]) <= 0.02 * c[2]


def test_criterion_5_partial_csi_sandwich(report):
    with report("5 c_sum < c_psi < otdma; relaxation agreement; normalization"):
        for P in (0.5, 1.0, 2.0, 5.0, 10.0):
            lo, mid, hi = sandwich(EXP, 1.0, 2, P)
            assert lo < mid < hi
            assert verify_relaxation(EXP, 1.0, P).agrees(1e-6)
        for L in range(2, 7):
            for mu_b in (0.1, 0.5, 0.9):
                assert abs(mu_b ** L + (1 - mu_b) * (1 + zeta(L, mu_b)) - 1) <= 1e-12
                w = group_weights(L, np.array([mu_b, 1 - mu_b]))
                assert abs(w[0] * mu_b + w[1] * (1 - mu_b) - 1) <= 1e-12
            assert abs(psi_prime(EXP, 1.0, L).atoms[1].sum() - 1) <= 1e-12


def test_criterion_6_nonidentical_bounds(report):
    with report("6 upper >= lower on scaled exponentials; reductions; two solvers agree"):
        laws = [EXP, EXP.scaled(2.0)]
        for P in (0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
            up = solve_upper_bound(laws, [P / 2, P / 2]).value
            lo = alpha_lower_bound(laws, [P / 2, P / 2])[0]
            assert up >= lo - 1e-6
            assert abs(up - scaled_shortcut(EXP, (1.0, 2.0), (P / 2, P / 2))) <= 1e-5
            up_id = solve_upper_bound([EXP, EXP], [P / 2, P / 2]).value
            lo_id = alpha_lower_bound([EXP, EXP], [P / 2, P / 2])[0]
            assert abs(up_id - lo_id) <= 1e-5


def test_criterion_7_figure2_dominance(report):
    with report("7 otdma benchmark dominates midpoint with a bounded gap"):
        P = np.logspace(-1, 2, 20)
        mid = np.array([midpoint_strategy(2, EXP, p).throughput_ for p in P])
        ot = np.array([otdma_benchmark(EXP, 2, 2 * p) for p in P])
        gap = ot - mid
        assert np.all(gap >= 0)
        # the gap levels off at high power instead of growing with it
        assert gap.max() < 0.5 and abs(gap[-1] - gap[-2]) < 0.01


def test_criterion_8_look_consistency(report):
    with report("8 LOOK reduces to the midpoint value; Monte Carlo within 3 s.e."):
        for K in (1, 2, 3):
            v = look_capacity(LookConfig(K, K, EXP, 1.0))
            assert abs(v - midpoint_strategy(K, EXP, 1.0).throughput_) <= 1e-9
        cfg = LookConfig(8, 2, EXP, 1.0)
        rep = simulate(look_strategy(cfg), EXP, 10**5, seed=8)
        assert rep.outage_count == 0
        assert rep.within(look_capacity(cfg), 3.0)
        assert all(m <= 1.0 + 3 * se for m, se in zip(rep.power_mean, rep.power_stderr))


def test_criterion_9_determinism(report):
    with report("9 identical reports for 1, 2 and 8 workers"):
        strategies = [AlphaMidpointStrategy((1.0, 2.0)).fit(EXP),
                      look_strategy(LookConfig(8, 2, EXP, 1.0))]
        for s in strategies:
            reps = [simulate(s, EXP, 100_000, seed=13, workers=w) for w in (1, 2, 8)]
            assert reps[0] == reps[1] == reps[2]
            assert reps[0].first_violation == reps[2].first_violation
