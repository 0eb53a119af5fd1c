"""Rate splitting into layers and greedy successive decoding.

Each user splits its received power ``gamma`` into ``N_v`` equal layers and
designs layer rates as if every other user mirrored it.  The receiver then
decodes, at each step, the topmost undecoded layer of the user holding the
most undecoded received power; that layer always sees no more interference
than it was designed for.  Noise power is normalized to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractError, DomainError
from .strategies import Strategy

__all__ = ["Layering", "DecodeStep", "DecodeSchedule", "build_layering", "layer_rates",
           "greedy_schedule", "midpoint_rate", "fraction_sweep", "SweepRow",
           "layered_rate", "LayeredStrategy"]

_FEAS_RTOL = 1e-12


@dataclass(frozen=True)
class Layering:
    """Layer stack of one user; layer 1 is the bottom, layer ``N_v`` the top."""

    user: int
    gamma: float
    n_users: int
    powers: np.ndarray
    rates: np.ndarray

    @property
    def n_layers(self):
        return self.powers.size

    @property
    def sum_rate(self):
        return float(self.rates.sum())

    def designed_interference(self, layer):
        """Interference (plus noise) layer ``layer`` (1-based) was designed against."""
        below = float(self.powers[: layer - 1].sum())
        return 1.0 + (self.n_users - 1) * float(self.powers[layer - 1]) + self.n_users * below


@dataclass(frozen=True)
class DecodeStep:
    user: int
    layer: int
    designed: float
    actual: float

    @property
    def feasible(self):
        return self.actual <= self.designed * (1.0 + _FEAS_RTOL)


@dataclass(frozen=True)
class DecodeSchedule:
    steps: tuple

    @property
    def feasible(self):
        return all(step.feasible for step in self.steps)

    def __len__(self):
        return len(self.steps)

    def order(self):
        return [(s.user, s.layer) for s in self.steps]


def layer_rates(powers, n_users):
    """Designed layer rates for a bottom-to-top power stack."""
    powers = np.asarray(powers, dtype=float)
    below = np.concatenate([[0.0], np.cumsum(powers)[:-1]])
    denom = 1.0 + (n_users - 1) * powers + n_users * below
    return 0.5 * np.log2(1.0 + powers / denom)


def build_layering(gamma, n_users, n_layers, user=0):
    """Equal-power layering of received power ``gamma`` into ``n_layers``."""
    gamma = float(gamma)
    if not gamma > 0:
        raise DomainError(f"received power must be positive, got {gamma}")
    if int(n_layers) != n_layers or n_layers < 1:
        raise DomainError(f"layer count must be a positive integer, got {n_layers}")
    if int(n_users) != n_users or n_users < 1:
        raise DomainError(f"user count must be a positive integer, got {n_users}")
    powers = np.full(int(n_layers), gamma / n_layers)
    return Layering(user, gamma, int(n_users), powers, layer_rates(powers, int(n_users)))


def greedy_schedule(layerings):
    """Decode order chosen by largest remaining undecoded received power.

    Ties go to the lowest user index.  Each step records the interference
    the decoded layer was designed for and the interference it actually
    sees (noise, its own lower layers, and every other user's undecoded
    layers).
    """
    layerings = list(layerings)
    if not layerings:
        return DecodeSchedule(())
    L = layerings[0].n_users
    if any(lay.n_users != L for lay in layerings):
        raise ContractError("all layerings must be designed for the same user count")
    # prefix[k][l] = received power of user k's layers 1..l
    prefix = [np.concatenate([[0.0], np.cumsum(lay.powers)]).tolist() for lay in layerings]
    powers = [lay.powers.tolist() for lay in layerings]
    top = [lay.n_layers for lay in layerings]
    remaining = [p[t] for p, t in zip(prefix, top)]
    n_steps = sum(top)
    steps = []
    for _ in range(n_steps):
        k = max(range(len(top)), key=lambda j: (remaining[j], -j) if top[j] > 0 else (-1.0, -j))
        layer = top[k]
        gl = powers[k][layer - 1]
        designed = 1.0 + (L - 1) * gl + L * prefix[k][layer - 1]
        actual = 1.0 + sum(remaining) - gl
        steps.append(DecodeStep(layerings[k].user, layer, designed, actual))
        top[k] -= 1
        remaining[k] = prefix[k][top[k]]
    return DecodeSchedule(tuple(steps))


def midpoint_rate(gamma, n_users):
    """Midpoint rate ``1/(2L) log2(1 + L gamma)``."""
    return np.log2(1.0 + n_users * np.asarray(gamma, dtype=float)) / (2.0 * n_users)


@dataclass(frozen=True)
class SweepRow:
    n_layers: int
    sum_rate_bits: float
    midpoint_sum_bits: float
    fraction: float
    schedule_feasible: bool


def fraction_sweep(gammas, layer_counts):
    """Layered sum rate relative to the midpoint sum rate, per layer count.

    The user count is ``len(gammas)``.
    """
    gammas = np.asarray(gammas, dtype=float).ravel()
    if gammas.size == 0 or np.any(~(gammas > 0)):
        raise DomainError("received powers must be positive")
    L = gammas.size
    reference = float(midpoint_rate(gammas, L).sum())
    rows = []
    for n in layer_counts:
        lays = [build_layering(g, L, n, user=i) for i, g in enumerate(gammas)]
        total = sum(lay.sum_rate for lay in lays)
        feasible = greedy_schedule(lays).feasible
        rows.append(SweepRow(int(n), total, reference, total / reference, feasible))
    return rows


def layered_rate(gamma, n_users, n_layers):
    """Sum of designed layer rates for equal-power layering, elementwise in ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    q = gamma[..., None] / n_layers
    below = np.arange(n_layers) * q
    return 0.5 * np.log2(1.0 + q / (1.0 + (n_users - 1) * q + n_users * below)).sum(axis=-1)


class LayeredStrategy(Strategy):
    """Keep a fitted strategy's powers, send its received power as ``n_layers`` layers.

    Each user's rate becomes the layered sum rate of its own received power;
    the greedy decoding order guarantees outage-freeness for any received
    powers, and the rate approaches the midpoint rate as ``n_layers`` grows.

    Parameters
    ----------
    base : Strategy
        Fitted strategy supplying powers.
    n_layers : int
    """

    family = "layered"

    def __init__(self, base=None, n_layers=8):
        self.base = base
        self.n_layers = n_layers

    def _fit(self, laws):
        check_is_fitted(self.base, "throughput_")
        if int(self.n_layers) != self.n_layers or self.n_layers < 1:
            raise DomainError(f"layer count must be a positive integer, got {self.n_layers}")
        self.n_users_ = self.base.n_users_
        self.laws_ = self.base.laws_
        self.grid = self.base.grid

    def _analytic_throughput(self):
        total = 0.0
        for i, law in enumerate(self.laws_):
            g, w = law.support(self.grid)
            p = self.base.rule(i, g)[0]
            total += float(w @ layered_rate(g * p, self.n_users_, int(self.n_layers)))
        return total

    def predict(self, gains, block_index=None, rng=None):
        check_is_fitted(self, "throughput_")
        powers, _ = self.base.predict(gains, block_index, rng)
        return powers, layered_rate(np.asarray(gains) * powers, self.n_users_, int(self.n_layers))

    def mean_power(self):
        return self.base.mean_power()
