"""Capacity with finite-rate threshold CSI about the other links.

Every link broadcasts the index of the threshold bracket its gain falls in.
With one bit (one threshold ``g_T``) and identical users, the sum capacity is
the single-user capacity of a reweighted law at the total budget:

    dPsi'(g) = dPsi(g) * (mu_B^(L-1) 1{g < g_T} + (1 + zeta) 1{g >= g_T})

The group strategy in this module realizes it: users in the highest
nonempty bracket transmit at their K-user midpoint rates, all others stay
silent.  The same rule is available for several thresholds, where only its
own achievable throughput (not a capacity) is known.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ._validation import check_budget, check_gains, check_laws, check_n_users
from .exceptions import DomainError, UnsupportedSizeError
from .fading import DEFAULT_GRID, FadingLaw
from .strategies import MidpointStrategy, Strategy, otdma_benchmark
from .waterfill import c1, water_level, waterfill_rate

__all__ = [
    "ThresholdCsi",
    "zeta",
    "threshold_spread",
    "group_probabilities",
    "group_weights",
    "psi_prime",
    "psi_prime_support",
    "c_psi",
    "GroupCsiStrategy",
    "group_strategy",
    "RelaxationReport",
    "verify_relaxation",
    "sandwich",
]


@dataclass(frozen=True)
class ThresholdCsi:
    """Increasing positive power-gain thresholds defining the CSI brackets."""

    thresholds: tuple

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float).ravel()
        if np.any(~(t > 0)) or np.any(np.diff(t) <= 0):
            raise DomainError("thresholds must be positive and strictly increasing")
        object.__setattr__(self, "thresholds", tuple(t.tolist()))

    @classmethod
    def from_quantiles(cls, law, levels):
        """Thresholds at the given cdf levels of ``law`` (the median is ``0.5``)."""
        return cls(tuple(np.atleast_1d(law.quantile(np.asarray(levels, dtype=float))).tolist()))

    @property
    def n_groups(self):
        return len(self.thresholds) + 1

    @property
    def bits(self):
        return float(np.log2(self.n_groups))

    def groups(self, gains):
        """Bracket index of each gain; ``g >= threshold`` moves a gain up."""
        return np.searchsorted(np.asarray(self.thresholds), gains, side="right")


def zeta(n_users, mu_b):
    """``sum_{m=1}^{L-1} C(L-1, m) mu_B^m mu_G^(L-1-m) m/(L-m)``."""
    L = int(n_users)
    if L < 2:
        raise DomainError(f"zeta needs at least two users, got {L}")
    mu_b = float(mu_b)
    if not 0.0 <= mu_b <= 1.0:
        raise DomainError(f"mu_B must lie in [0, 1], got {mu_b}")
    mu_g = 1.0 - mu_b
    return sum(comb(L - 1, m) * mu_b ** m * mu_g ** (L - 1 - m) * m / (L - m)
               for m in range(1, L))


def group_probabilities(gains, weights, thresholds):
    """Probability of each bracket under the quadrature support."""
    idx = np.searchsorted(np.asarray(thresholds, dtype=float), gains, side="right")
    return np.bincount(idx, weights=weights, minlength=len(thresholds) + 1)


def group_weights(n_users, probs):
    """Reweighting factor of each bracket.

    A user in bracket ``m`` transmits only if nobody is in a higher bracket,
    sharing the block with the ``K`` users of its own bracket.  Its weight is
    ``L * E[1/K; nobody above]``; with one threshold this gives
    ``mu_B^(L-1)`` below and ``1 + zeta`` above.
    """
    L = int(n_users)
    probs = np.asarray(probs, dtype=float)
    below = np.concatenate([[0.0], np.cumsum(probs)[:-1]])
    w = np.zeros_like(probs)
    for m, (q, b) in enumerate(zip(probs, below)):
        w[m] = sum(comb(L - 1, k) * q ** k * b ** (L - 1 - k) * L / (k + 1) for k in range(L))
    return w


def psi_prime_support(law, thresholds, n_users, grid=DEFAULT_GRID):
    """Nodes and reweighted masses of the transformed law.

    Bracket probabilities are taken from the same quadrature support, so
    the masses sum to one up to round-off.
    """
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    g, w = law.support(grid)
    probs = group_probabilities(g, w, thresholds)
    factors = group_weights(n_users, probs)
    idx = np.searchsorted(thresholds, g, side="right")
    return g, w * factors[idx]


def psi_prime(law, threshold, n_users, grid=DEFAULT_GRID):
    """Transformed law for one threshold, as a discrete :class:`FadingLaw`.

    A threshold of zero or above the support leaves the law unchanged.
    """
    g, w = psi_prime_support(law, [threshold] if threshold > 0 else [], n_users, grid)
    keep = w > 0
    g, w = g[keep], w[keep]
    gains, inv = np.unique(g, return_inverse=True)
    masses = np.bincount(inv, weights=w)
    masses = masses / masses.sum()
    return FadingLaw.discrete(zip(gains, masses))


def c_psi(law, threshold, n_users, budget, grid=DEFAULT_GRID):
    """One-bit partial-CSI sum capacity ``C1(Psi', L * budget)``."""
    thresholds = [threshold] if threshold > 0 else []
    g, w = psi_prime_support(law, thresholds, n_users, grid)
    mu = water_level(g, w, n_users * budget)
    return float(w @ waterfill_rate(g, mu))


def sandwich(law, threshold, n_users, budget, grid=DEFAULT_GRID):
    """``(c_sum, c_psi, full_csi)`` for one configuration."""
    return (c1(law, n_users * budget, grid),
            c_psi(law, threshold, n_users, budget, grid),
            otdma_benchmark(law, n_users, n_users * budget, grid))


def threshold_spread(law, n_users, budget, levels=np.linspace(0.25, 0.75, 11), grid=DEFAULT_GRID):
    """Relative spread ``(max - min) / max`` of one-bit ``c_psi`` over threshold quantiles."""
    vals = np.array([c_psi(law, float(law.quantile(np.array([q]))[0]), n_users, budget, grid)
                     for q in np.atleast_1d(levels)])
    return float((vals.max() - vals.min()) / vals.max())


class GroupCsiStrategy(Strategy):
    """Threshold-CSI group strategy for identical users.

    Parameters
    ----------
    n_users : int
    budget : float
        Per-user average power.
    thresholds : sequence of float
        Increasing gain thresholds; empty means plain midpoint.
    grid : int

    Attributes
    ----------
    group_probs_ : ndarray
        Probability of each bracket.
    group_weights_ : ndarray
        Reweighting factor of each bracket.
    water_level_ : float
        Water level of the reweighted law at ``n_users * budget``.
    throughput_ : float
        Analytic throughput of this rule, ``C1(Psi', L * budget)``.  With a
        single threshold this is the partial-CSI capacity; with more it is
        only the value this rule achieves.
    """

    family = "group-partial-csi"

    def __init__(self, n_users=2, budget=1.0, thresholds=(1.0,), grid=DEFAULT_GRID):
        self.n_users = n_users
        self.budget = budget
        self.thresholds = thresholds
        self.grid = grid

    def _fit(self, laws):
        self.n_users_ = check_n_users(self.n_users)
        laws = check_laws(laws, self.n_users_)
        if any(law != laws[0] for law in laws):
            raise DomainError("group strategy assumes identical laws")
        self.laws_ = laws
        self.thresholds_ = np.asarray(
            ThresholdCsi(tuple(self.thresholds)).thresholds if len(self.thresholds) else (),
            dtype=float)
        if self.thresholds_.size == 0:
            self.fallback_ = MidpointStrategy(self.n_users_, self.budget, self.grid).fit(laws)
            return
        self.fallback_ = None
        g, w = laws[0].support(self.grid)
        self.group_probs_ = group_probabilities(g, w, self.thresholds_)
        self.group_weights_ = group_weights(self.n_users_, self.group_probs_)
        idx = np.searchsorted(self.thresholds_, g, side="right")
        self._support = (g, w * self.group_weights_[idx])
        self.water_level_ = water_level(*self._support, self.n_users_ * check_budget(self.budget))

    def _analytic_throughput(self):
        if self.fallback_ is not None:
            return self.fallback_.throughput_
        g, w = self._support
        return float(w @ waterfill_rate(g, self.water_level_))

    def _power(self, g):
        mu = self.water_level_
        with np.errstate(divide="ignore"):
            inv = np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), np.inf)
        return np.maximum(mu - inv, 0.0)

    def predict(self, gains, block_index=None, rng=None):
        """Powers and rates given every link's bracket index.

        Users in the highest occupied bracket spend ``P'(g)/K`` and send at
        ``1/(2K) log2(1 + g P'(g))``, ``K`` being that bracket's size.
        """
        check_is_fitted(self, "throughput_")
        if self.fallback_ is not None:
            return self.fallback_.predict(gains, block_index, rng)
        gains = check_gains(gains, self.n_users_)
        groups = np.searchsorted(self.thresholds_, gains, side="right")
        top = groups.max(axis=1, keepdims=True)
        active = groups == top
        k = active.sum(axis=1, keepdims=True)
        powers = np.where(active, self._power(gains) / k, 0.0)
        rates = np.where(active, waterfill_rate(gains, self.water_level_) / k, 0.0)
        return powers, rates

    def mean_power(self):
        check_is_fitted(self, "throughput_")
        if self.fallback_ is not None:
            return self.fallback_.mean_power()
        g, w = self._support
        return np.full(self.n_users_, float(w @ self._power(g)) / self.n_users_)


def group_strategy(law, thresholds, n_users, budget, grid=DEFAULT_GRID):
    thresholds = tuple(np.atleast_1d(np.asarray(thresholds, dtype=float)).tolist())
    return GroupCsiStrategy(n_users, budget, thresholds, grid).fit(law)


@dataclass(frozen=True)
class RelaxationReport:
    """Two-user one-bit sandwich: achievable value, relaxed optimum, capacity."""

    j_star_lower: float
    j_star_star_upper: float
    c_psi_value: float
    mu_b: float
    power_used: float

    @property
    def spread(self):
        vals = (self.j_star_lower, self.j_star_star_upper, self.c_psi_value)
        return max(vals) - min(vals)

    def agrees(self, tol=1e-6):
        return (self.j_star_lower <= self.c_psi_value + tol
                and self.c_psi_value <= self.j_star_star_upper + tol
                and self.spread <= tol)


def _pieces_waterfill(pieces, budget):
    """Maximize ``sum_j a_j/2 E[log2(1 + c_j g q_j(g))]`` s.t. ``sum_j b_j E[q_j] <= budget``.

    ``pieces`` holds ``(a, b, c, gains, weights)`` tuples.  The KKT
    conditions give ``q_j = (a_j / (b_j nu) - 1/(c_j g))^+`` for a common
    multiplier ``nu``, found by bisection on ``log nu``.
    """
    def spend(nu):
        total = 0.0
        for a, b, c, g, w in pieces:
            if a == 0 or b == 0:
                continue
            q = np.maximum(a / (b * nu) - 1.0 / (c * g), 0.0)
            total += b * float(w @ q)
        return total

    lo, hi = 1e-12, 1e12
    for _ in range(400):
        mid = np.sqrt(lo * hi)
        if spend(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    nu = hi
    value = 0.0
    for a, b, c, g, w in pieces:
        if a == 0 or b == 0:
            continue
        q = np.maximum(a / (b * nu) - 1.0 / (c * g), 0.0)
        value += 0.5 * a * float(w @ np.log2(1.0 + c * g * q))
    return value


def verify_relaxation(law, threshold, budget, n_users=2, grid=DEFAULT_GRID):
    """Check the two-user one-bit capacity three ways.

    ``j_star_lower`` is the throughput of the explicit allocation
    (``P'/2`` to both users when they share a bracket, ``P'`` to the good
    user otherwise) evaluated term by term over the bad and good gain sets.
    ``j_star_star_upper`` maximizes the relaxed objective over the
    per-bracket averaged powers with its own three-piece water-fill.
    ``c_psi_value`` is ``C1(Psi', 2 * budget)``.  Only two users are
    supported.
    """
    if n_users != 2:
        raise UnsupportedSizeError("the three-way check is defined for two users only")
    g, w = law.support(grid)
    good = g >= threshold if threshold > 0 else np.ones(g.shape, dtype=bool)
    mu_b = float(w[~good].sum())
    mu_g = 1.0 - mu_b
    cap = c_psi(law, threshold, 2, budget, grid)

    # explicit allocation from the water-fill of Psi'
    gp, wp = psi_prime_support(law, [threshold] if threshold > 0 else [], 2, grid)
    mu = water_level(gp, wp, 2.0 * budget)
    with np.errstate(divide="ignore"):
        p_prime = np.where(g > 0, np.maximum(mu - 1.0 / np.where(g > 0, g, 1.0), 0.0), 0.0)
    wb, wg = w * ~good, w * good
    lower = (0.5 * mu_b * float(wb @ np.log2(1.0 + g * p_prime))
             + 0.5 * mu_g * float(wg @ np.log2(1.0 + g * p_prime))
             + 0.5 * mu_b * float(wg @ (2.0 * np.log2(1.0 + g * p_prime))))
    power_used = (mu_b * float(wb @ p_prime) + mu_g * float(wg @ p_prime)
                  + mu_b * float(wg @ (2.0 * p_prime)))

    # relaxed objective over P_B on B, P_G on G and P_B on G
    pieces = [
        (mu_b, 2.0 * mu_b, 2.0, g[~good], w[~good]),
        (mu_g, 2.0 * mu_g, 2.0, g[good], w[good]),
        (2.0 * mu_b, 2.0 * mu_b, 1.0, g[good], w[good]),
    ]
    pieces = [(a, b, c, gg[gg > 0], ww[gg > 0]) for a, b, c, gg, ww in pieces]
    upper = _pieces_waterfill(pieces, 2.0 * budget)
    return RelaxationReport(lower, upper, cap, mu_b, power_used)
