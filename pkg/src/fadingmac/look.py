"""Throughput with a variable active set: K users, exactly L active per block.

Each user knows only its own gain and that at most ``L`` users share the
block.  A user is active with probability ``L/K``; power it does not spend
while idle is banked, so while active it may spend ``K/L`` times its
average budget.  Active users play the ``L``-user midpoint rule with power
``P*(g)/L``, where ``P*`` water-fills the law at ``K * P_avg``.  The
expected sum throughput is then ``C1(law, K * P_avg)``, which grows without
bound in ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ._validation import check_budget, check_gains, check_laws, check_n_users
from .exceptions import DomainError
from .fading import DEFAULT_GRID, FadingLaw
from .strategies import Strategy
from .waterfill import solve_level, waterfill_rate

__all__ = ["LookConfig", "look_capacity", "LookMidpointStrategy", "look_strategy",
           "random_active_sets"]


@dataclass(frozen=True)
class LookConfig:
    """``K`` potential users, ``L`` active per block, identical law and budget."""

    K: int
    L: int
    law: FadingLaw
    P_avg: float

    def __post_init__(self):
        K, L = check_n_users(self.K), check_n_users(self.L)
        if L > K:
            raise DomainError(f"active count {L} exceeds user count {K}")
        if not isinstance(self.law, FadingLaw):
            raise DomainError("law must be a FadingLaw")
        if not check_budget(self.P_avg) > 0:
            raise DomainError("budget must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "P_avg", float(self.P_avg))

    @property
    def banked_budget(self):
        """Average power an active user may spend, ``K/L * P_avg``."""
        return self.K * self.P_avg / self.L


def look_capacity(cfg: LookConfig, grid=DEFAULT_GRID):
    """Expected sum throughput of the LOOK midpoint rule, ``C1(law, K P_avg)``."""
    return solve_level(cfg.law, cfg.K * cfg.P_avg, grid).capacity


def random_active_sets(n_blocks, K, L, rng):
    """Boolean ``(n_blocks, K)`` masks, each row a uniform ``L``-subset."""
    keys = rng.random((n_blocks, K))
    idx = np.argpartition(keys, L - 1, axis=1)[:, :L] if L < K else np.tile(np.arange(K), (n_blocks, 1))
    mask = np.zeros((n_blocks, K), dtype=bool)
    np.put_along_axis(mask, idx, True, axis=1)
    return mask


class LookMidpointStrategy(Strategy):
    """Midpoint rule for a random active set of ``active`` out of ``n_users``.

    ``predict`` draws the active set of every block from ``rng``; inactive
    users send nothing.

    Parameters
    ----------
    n_users : int
        ``K``.
    active : int
        ``L``.
    budget : float
        Per-user average power.

    Attributes
    ----------
    solution_ : WaterfillSolution
        Water-fill at ``K * budget``.
    """

    family = "look-midpoint"

    def __init__(self, n_users=4, active=2, budget=1.0, grid=DEFAULT_GRID):
        self.n_users = n_users
        self.active = active
        self.budget = budget
        self.grid = grid

    def _fit(self, laws):
        self.n_users_ = check_n_users(self.n_users)
        laws = check_laws(laws, self.n_users_)
        if any(law != laws[0] for law in laws):
            raise DomainError("LOOK strategy assumes identical laws")
        self.laws_ = laws
        self.config_ = LookConfig(self.n_users_, self.active, laws[0], self.budget)
        self.active_ = self.config_.L
        self.solution_ = solve_level(laws[0], self.n_users_ * self.config_.P_avg, self.grid)

    def _analytic_throughput(self):
        return self.solution_.capacity

    def predict(self, gains, block_index=None, rng=None):
        check_is_fitted(self, "throughput_")
        gains = check_gains(gains, self.n_users_)
        if rng is None:
            rng = np.random.default_rng(0)
        mask = random_active_sets(gains.shape[0], self.n_users_, self.active_, rng)
        L = self.active_
        powers = np.where(mask, self.solution_.power(gains) / L, 0.0)
        rates = np.where(mask, waterfill_rate(gains, self.solution_.water_level) / L, 0.0)
        return powers, rates

    def mean_power(self):
        check_is_fitted(self, "throughput_")
        g, w = self.laws_[0].support(self.grid)
        p = float(w @ self.solution_.power(g)) / self.n_users_
        return np.full(self.n_users_, p)


def look_strategy(cfg: LookConfig, grid=DEFAULT_GRID):
    return LookMidpointStrategy(cfg.K, cfg.L, cfg.P_avg, grid).fit(cfg.law)
