"""Outage-free power-rate strategies with individual CSI.

Every strategy is an estimator: ``fit(laws)`` solves the water-filling
problem behind it, ``predict(gains)`` maps a ``(n_blocks, L)`` matrix of
realized gains to ``(powers, rates)`` of the same shape, and the fitted
``throughput_`` attribute holds the analytic average sum rate.

Strategies built from individual CSI only implement :meth:`Strategy.rule`,
the per-user map from the user's own gain to ``(power, rate)``.  Strategies
that also read shared information (a slot index, partial CSI of other links,
an active set) override :meth:`Strategy.predict` directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (check_block_index, check_budget, check_budgets, check_gains,
                          check_laws, check_n_users)
from .exceptions import DomainError, InfeasibleError
from .fading import DEFAULT_GRID, midpoint_grid
from .waterfill import solve_level, water_level, waterfill_rate

__all__ = [
    "Strategy",
    "ZeroStrategy",
    "MidpointStrategy",
    "AlphaMidpointStrategy",
    "PlainTdmaStrategy",
    "VirtualSplitStrategy",
    "OtdmaStrategy",
    "midpoint_strategy",
    "alpha_midpoint_strategy",
    "plain_tdma_strategy",
    "virtual_split_strategy",
    "max_law_support",
    "otdma_benchmark",
    "throughput",
]


class Strategy(BaseEstimator):
    """Base class; subclasses set ``family`` and implement ``_fit``."""

    family = None
    grid = DEFAULT_GRID

    def fit(self, laws, y=None):
        self._fit(laws)
        self.throughput_ = float(self._analytic_throughput())
        return self

    # -- individual-CSI protocol -----------------------------------------
    def rule(self, user, gains):
        """Power and rate of ``user`` at its own gains; returns two arrays."""
        raise NotImplementedError

    def predict(self, gains, block_index=None, rng=None):
        """Per-block powers and rates, each of shape ``(n_blocks, L)``.

        ``block_index`` and ``rng`` carry shared side information and are
        ignored by individual-CSI strategies.
        """
        check_is_fitted(self, "throughput_")
        gains = check_gains(gains, self.n_users_)
        powers = np.empty_like(gains)
        rates = np.empty_like(gains)
        for i in range(self.n_users_):
            powers[:, i], rates[:, i] = self.rule(i, gains[:, i])
        return powers, rates

    def mean_power(self):
        """Analytic average transmit power per user."""
        check_is_fitted(self, "throughput_")
        out = []
        for i, law in enumerate(self.laws_):
            g, w = law.support(self.grid)
            out.append(float(w @ self.rule(i, g)[0]))
        return np.array(out)

    def _analytic_throughput(self):
        total = 0.0
        for i, law in enumerate(self.laws_):
            g, w = law.support(self.grid)
            total += float(w @ self.rule(i, g)[1])
        return total


class ZeroStrategy(Strategy):
    """Every user silent."""

    family = "zero"

    def __init__(self, n_users=2):
        self.n_users = n_users

    def _fit(self, laws):
        self.n_users_ = check_n_users(self.n_users)
        self.laws_ = check_laws(laws, self.n_users_)

    def rule(self, user, gains):
        z = np.zeros_like(np.asarray(gains, dtype=float))
        return z, z.copy()


class AlphaMidpointStrategy(Strategy):
    """Weighted midpoint rates, ``R_i = a_i/2 log2(1 + g P_i(g)/a_i)``.

    Parameters
    ----------
    budgets : sequence of float
        Per-user average power budgets.
    alpha : sequence of float, optional
        Nonnegative weights summing to one.  Defaults to the budget
        proportions, which makes every user's power ``a_i P*(g)`` with
        ``P*`` the water-fill at the total budget.
    grid : int

    Attributes
    ----------
    alpha_ : ndarray
    solutions_ : list of WaterfillSolution or None
        Water-fill of user ``i``'s law at budget ``budget_i / alpha_i``.
    """

    family = "alpha-midpoint"

    def __init__(self, budgets=(1.0, 1.0), alpha=None, grid=DEFAULT_GRID):
        self.budgets = budgets
        self.alpha = alpha
        self.grid = grid

    def _fit(self, laws):
        budgets = check_budgets(self.budgets)
        self._fit_weighted(laws, budgets, self._resolve_alpha(budgets))

    def _fit_weighted(self, laws, budgets, alpha):
        self.n_users_ = budgets.size
        self.laws_ = check_laws(laws, self.n_users_)
        self.alpha_ = alpha
        self.solutions_ = []
        for law, p, a in zip(self.laws_, budgets, self.alpha_):
            if a > 0 and p > 0:
                self.solutions_.append(solve_level(law, p / a, self.grid))
            else:
                self.solutions_.append(None)

    def _resolve_alpha(self, budgets):
        if self.alpha is None:
            total = budgets.sum()
            if total == 0:
                return np.zeros_like(budgets)
            return budgets / total
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        if alpha.size != budgets.size:
            raise DomainError("alpha and budgets must have equal length")
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-12:
            raise DomainError("alpha must be nonnegative and sum to 1")
        return alpha

    def rule(self, user, gains):
        gains = np.asarray(gains, dtype=float)
        sol = self.solutions_[user]
        if sol is None:
            z = np.zeros_like(gains)
            return z, z.copy()
        a = self.alpha_[user]
        return a * sol.power(gains), a * waterfill_rate(gains, sol.water_level)


class MidpointStrategy(AlphaMidpointStrategy):
    """Identical users: ``R(g) = 1/(2L) log2(1 + L g P(g))``.

    The power rule is ``P(g) = P*(g)/L`` where ``P*`` water-fills the law at
    the total budget ``L * budget``; this is the power that maximizes the
    average midpoint rate, and it makes the throughput equal to
    ``C1(law, L * budget)``.
    """

    family = "midpoint"

    def __init__(self, n_users=2, budget=1.0, grid=DEFAULT_GRID):
        self.n_users = n_users
        self.budget = budget
        self.grid = grid

    def _fit(self, laws):
        n = check_n_users(self.n_users)
        budgets = np.full(n, check_budget(self.budget))
        self._fit_weighted(laws, budgets, np.full(n, 1.0 / n))


class PlainTdmaStrategy(MidpointStrategy):
    """Users take turns: in block ``b`` only user ``b mod L`` transmits.

    The active user spends ``L P(g) = P*(g)`` and sends at
    ``1/2 log2(1 + g P*(g))``; averaged over the rotation each user gets the
    midpoint rate and spends its budget.
    """

    family = "plain-tdma"

    def predict(self, gains, block_index=None, rng=None):
        check_is_fitted(self, "throughput_")
        gains = check_gains(gains, self.n_users_)
        block_index = check_block_index(block_index, gains.shape[0])
        L = self.n_users_
        active = np.mod(block_index, L)
        powers = np.zeros_like(gains)
        rates = np.zeros_like(gains)
        rows = np.arange(gains.shape[0])
        g = gains[rows, active]
        for i in range(L):
            sel = active == i
            sol = self.solutions_[i]
            if sol is None or not np.any(sel):
                continue
            powers[rows[sel], i] = sol.power(g[sel])
            rates[rows[sel], i] = waterfill_rate(g[sel], sol.water_level)
        return powers, rates

    def mean_power(self):
        check_is_fitted(self, "throughput_")
        out = []
        for law, sol in zip(self.laws_, self.solutions_):
            g, w = law.support(self.grid)
            out.append(0.0 if sol is None else float(w @ sol.power(g)) / self.n_users_)
        return np.array(out)

    def _analytic_throughput(self):
        total = 0.0
        for law, sol in zip(self.laws_, self.solutions_):
            if sol is not None:
                total += sol.capacity / self.n_users_
        return total


class VirtualSplitStrategy(AlphaMidpointStrategy):
    """Split user ``k`` into ``N_k = floor(P_k / P_v)`` virtual users.

    All ``L' = sum N_k`` virtual users run the midpoint strategy at budget
    ``P_v``; user ``k`` collects ``N_k`` of them, which is the alpha-midpoint
    strategy with ``alpha_k = N_k / L'``.  Budget left over by the rounding is
    reported in ``unused_power_``.
    """

    family = "virtual-split"

    def __init__(self, budgets=(1.0, 1.0), virtual_budget=1.0, grid=DEFAULT_GRID):
        self.budgets = budgets
        self.virtual_budget = virtual_budget
        self.grid = grid

    def _fit(self, laws):
        budgets = check_budgets(self.budgets)
        pv = float(self.virtual_budget)
        if not pv > 0:
            raise DomainError(f"virtual budget must be positive, got {pv}")
        counts = np.floor(budgets / pv + 1e-9).astype(int)
        if np.any(counts == 0):
            bad = np.flatnonzero(counts == 0).tolist()
            raise InfeasibleError(f"users {bad} cannot host a single virtual user of budget {pv}")
        self.n_virtual_ = counts
        self.n_virtual_total_ = int(counts.sum())
        self.unused_power_ = np.maximum(budgets - counts * pv, 0.0)
        self.effective_budgets_ = counts * pv
        self.n_users_ = budgets.size
        self.laws_ = check_laws(laws, self.n_users_)
        self.alpha_ = counts / self.n_virtual_total_
        total = self.n_virtual_total_ * pv
        self.solutions_ = [solve_level(law, total, self.grid) for law in self.laws_]


class OtdmaStrategy(Strategy):
    """Full-CSI opportunistic TDMA: only the strongest user transmits.

    Not distributed; serves as the reference curve.  The active user
    water-fills the law of the maximum of ``L`` gains at the total budget.
    """

    family = "otdma-benchmark"

    def __init__(self, n_users=2, budget=1.0, grid=DEFAULT_GRID):
        self.n_users = n_users
        self.budget = budget
        self.grid = grid

    def _fit(self, laws):
        self.n_users_ = check_n_users(self.n_users)
        laws = check_laws(laws, self.n_users_)
        if any(law != laws[0] for law in laws):
            raise DomainError("benchmark assumes identical laws")
        self.laws_ = laws
        g, w = max_law_support(laws[0], self.n_users_, self.grid)
        self._support = (g, w)
        self.water_level_ = water_level(g, w, self.n_users_ * check_budget(self.budget))

    def _analytic_throughput(self):
        g, w = self._support
        return float(w @ waterfill_rate(g, self.water_level_))

    def predict(self, gains, block_index=None, rng=None):
        check_is_fitted(self, "throughput_")
        gains = check_gains(gains, self.n_users_)
        best = np.argmax(gains, axis=1)
        rows = np.arange(gains.shape[0])
        g = gains[rows, best]
        mu = self.water_level_
        with np.errstate(divide="ignore"):
            p = np.where(g > 0, np.maximum(mu - 1.0 / np.where(g > 0, g, 1.0), 0.0), 0.0)
        powers = np.zeros_like(gains)
        rates = np.zeros_like(gains)
        powers[rows, best] = p
        rates[rows, best] = waterfill_rate(g, mu)
        return powers, rates

    def mean_power(self):
        check_is_fitted(self, "throughput_")
        g, w = self._support
        mu = self.water_level_
        total = float(w @ np.maximum(mu - 1.0 / np.where(g > 0, g, np.inf), 0.0)) if mu else 0.0
        return np.full(self.n_users_, total / self.n_users_)


def max_law_support(law, n_users, grid=DEFAULT_GRID):
    """Quadrature support of the maximum of ``n_users`` i.i.d. gains.

    Discrete laws are handled exactly through the cdf ``F^L``; continuous
    laws through the quantile transform ``x -> Q(x^(1/L))`` on the midpoint
    grid.
    """
    if law.kind == "discrete":
        gains, masses = law.atoms
        cdf = np.cumsum(masses) ** n_users
        w = np.diff(np.concatenate([[0.0], cdf]))
        keep = w > 0
        return gains[keep], w[keep] / w[keep].sum()
    x = midpoint_grid(grid) ** (1.0 / n_users)
    x = np.minimum(x, np.nextafter(1.0, 0.0))
    return law.quantile(x), np.full(grid, 1.0 / grid)


def otdma_benchmark(law, n_users, total_budget, grid=DEFAULT_GRID):
    """Full-CSI sum capacity ``C1(law_max, P_sum)``."""
    g, w = max_law_support(law, int(n_users), grid)
    return float(w @ waterfill_rate(g, water_level(g, w, float(total_budget))))


def midpoint_strategy(n_users, law, budget, grid=DEFAULT_GRID):
    return MidpointStrategy(n_users, budget, grid).fit(law)


def alpha_midpoint_strategy(laws, budgets, alpha=None, grid=DEFAULT_GRID):
    budgets = tuple(np.asarray(budgets, dtype=float).ravel())
    return AlphaMidpointStrategy(budgets, alpha, grid).fit(laws)


def plain_tdma_strategy(n_users, law, budget, grid=DEFAULT_GRID):
    return PlainTdmaStrategy(n_users, budget, grid).fit(law)


def virtual_split_strategy(laws, budgets, virtual_budget, grid=DEFAULT_GRID):
    budgets = tuple(np.asarray(budgets, dtype=float).ravel())
    return VirtualSplitStrategy(budgets, virtual_budget, grid).fit(laws)


def throughput(strategy):
    """Analytic average sum rate of a fitted strategy."""
    check_is_fitted(strategy, "throughput_")
    return strategy.throughput_
