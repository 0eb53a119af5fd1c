"""Single-user water-filling over a fading law.

The optimal power profile under an average budget ``P_a`` is
``P(g) = (1/lam - 1/g)^+`` with ``lam`` chosen so that ``E[P(G)] = P_a``;
the resulting capacity is ``C1 = 1/2 E[log2(1 + G P(G))]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError, InfeasibleError
from .fading import DEFAULT_GRID

__all__ = ["WaterfillCurve", "WaterfillSolution", "WaterFilling", "law_curve", "water_level",
           "solve_level", "c1", "waterfill_rate"]


class WaterfillCurve:
    """Water-filling of one weighted support at any budget.

    Sorting and prefix sums are done once; each budget then costs a binary
    search.  With gains in decreasing order the active set is a prefix, and
    on the correct prefix the budget equation is linear in the water level.
    Entries with zero gain or zero weight never receive power.
    """

    def __init__(self, gains, weights):
        gains = np.asarray(gains, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if gains.shape != weights.shape:
            raise DomainError("gains and weights must have equal length")
        keep = (gains > 0) & (weights > 0)
        g = gains[keep]
        order = np.argsort(-g, kind="stable")
        g = g[order]
        w = weights[keep][order]
        inv = 1.0 / g
        self._w_cum = np.cumsum(w)
        self._s_cum = np.cumsum(w * inv)
        self._log_cum = np.cumsum(w * np.log2(g))
        # budget at which entry k starts to receive power
        self._onset = inv * np.concatenate([[0.0], self._w_cum[:-1]]) \
            - np.concatenate([[0.0], self._s_cum[:-1]])
        self.size = g.size

    def _active(self, budget):
        if budget < 0 or not np.isfinite(budget):
            raise DomainError(f"budget must be finite and nonnegative, got {budget}")
        if budget > 0 and self.size == 0:
            raise InfeasibleError("law has no mass on positive gains; budget cannot be spent")
        return max(int(np.searchsorted(self._onset, budget, side="left")), 1)

    def level(self, budget):
        """Water level ``mu = 1/lam``; ``0.0`` at zero budget."""
        if budget == 0:
            return 0.0
        k = self._active(budget)
        return float((budget + self._s_cum[k - 1]) / self._w_cum[k - 1])

    def capacity(self, budget):
        """``1/2 sum_j w_j log2(1 + g_j P(g_j))`` at the given budget."""
        if budget == 0:
            return 0.0
        k = self._active(budget)
        mu = (budget + self._s_cum[k - 1]) / self._w_cum[k - 1]
        return 0.5 * float(self._log_cum[k - 1] + self._w_cum[k - 1] * np.log2(mu))


def law_curve(law, grid=DEFAULT_GRID):
    """Cached :class:`WaterfillCurve` of a law's quadrature support."""
    key = ("curve", int(grid))
    if key not in law._cache:
        law._cache[key] = WaterfillCurve(*law.support(grid))
    return law._cache[key]


def water_level(gains, weights, budget):
    """Water level ``mu = 1/lam`` meeting ``sum_j w_j (mu - 1/g_j)^+ = budget``.

    Returns ``0.0`` when ``budget == 0``.
    """
    if budget < 0 or not np.isfinite(budget):
        raise DomainError(f"budget must be finite and nonnegative, got {budget}")
    if budget == 0:
        return 0.0
    return WaterfillCurve(gains, weights).level(budget)


def waterfill_rate(gains, mu):
    """``1/2 log2(1 + g (mu - 1/g)^+)`` evaluated without cancellation."""
    gains = np.asarray(gains, dtype=float)
    return 0.5 * np.log2(np.maximum(gains * mu, 1.0))


@dataclass(frozen=True)
class WaterfillSolution:
    """Result of :func:`solve_level`.

    ``level`` is the multiplier ``lam``; it is ``None`` when the budget is
    zero (no finite level spends zero power on a law with positive gains).
    """

    level: float | None
    budget: float
    capacity: float

    @property
    def water_level(self):
        return 0.0 if self.level is None else 1.0 / self.level

    def power(self, g):
        """Power profile ``(1/lam - 1/g)^+``."""
        g = np.asarray(g, dtype=float)
        if self.level is None:
            return np.zeros_like(g)
        with np.errstate(divide="ignore"):
            inv = np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), np.inf)
        return np.maximum(self.water_level - inv, 0.0)

    def rate(self, g):
        """Single-user rate ``1/2 log2(1 + g P(g))``."""
        return waterfill_rate(g, self.water_level)


def solve_level(law, budget, grid=DEFAULT_GRID):
    """Water-fill ``law`` at average power ``budget``."""
    gains, weights = law.support(grid)
    mu = water_level(gains, weights, budget)
    if mu == 0.0:
        return WaterfillSolution(None, float(budget), 0.0)
    capacity = float(weights @ waterfill_rate(gains, mu))
    return WaterfillSolution(1.0 / mu, float(budget), capacity)


def c1(law, budget, grid=DEFAULT_GRID):
    """Single-user adaptive capacity ``C1(law, budget)`` in bits per channel use."""
    return solve_level(law, budget, grid).capacity


class WaterFilling(BaseEstimator):
    """Estimator wrapper around :func:`solve_level`.

    Parameters
    ----------
    budget : float
        Average transmit power.
    grid : int
        Quantile-grid size for continuous laws.

    Attributes
    ----------
    solution_ : WaterfillSolution
    level_ : float or None
    capacity_ : float
    """

    def __init__(self, budget=1.0, grid=DEFAULT_GRID):
        self.budget = budget
        self.grid = grid

    def fit(self, law, y=None):
        self.solution_ = solve_level(law, self.budget, self.grid)
        self.level_ = self.solution_.level
        self.capacity_ = self.solution_.capacity
        self.law_ = law
        return self

    def predict(self, gains):
        """Power allocated at each gain."""
        check_is_fitted(self, "solution_")
        return self.solution_.power(gains)

    def score(self, law=None, y=None):
        check_is_fitted(self, "solution_")
        return self.capacity_
