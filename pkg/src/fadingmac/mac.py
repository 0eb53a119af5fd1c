"""One realized block of the Gaussian multiple-access channel."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ContractError, DomainError, UnsupportedSizeError

__all__ = ["MacState", "MAX_USERS", "REGION_SLACK", "in_region", "sum_rate_bound",
           "region_violations", "subset_masks"]

MAX_USERS = 20
REGION_SLACK = 1e-9


@dataclass(frozen=True)
class MacState:
    """Gains, transmit powers and noise power of one block."""

    gains: tuple
    powers: tuple
    noise_power: float = 1.0

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float).ravel()
        powers = np.asarray(self.powers, dtype=float).ravel()
        if gains.size < 1 or gains.size != powers.size:
            raise ContractError(
                f"gains and powers must be nonempty and equal length, got "
                f"{gains.size} and {powers.size}")
        if np.any(gains < 0) or np.any(powers < 0):
            raise DomainError("gains and powers must be nonnegative")
        if not self.noise_power > 0:
            raise DomainError("noise_power must be positive")
        object.__setattr__(self, "gains", tuple(gains.tolist()))
        object.__setattr__(self, "powers", tuple(powers.tolist()))

    @property
    def n_users(self):
        return len(self.gains)

    @property
    def snr(self):
        """Received powers over noise, ``g_i P_i / N``."""
        return np.asarray(self.gains) * np.asarray(self.powers) / self.noise_power


@lru_cache(maxsize=None)
def subset_masks(n_users):
    """Boolean matrix of all ``2^L - 1`` nonempty subsets, one row each."""
    if n_users > MAX_USERS:
        raise UnsupportedSizeError(
            f"exact region test supports at most {MAX_USERS} users, got {n_users}")
    codes = np.arange(1, 2 ** n_users, dtype=np.int64)
    masks = (codes[:, None] >> np.arange(n_users)) & 1
    masks = masks.astype(float)
    masks.setflags(write=False)
    return masks


def region_violations(rates, snr, slack=REGION_SLACK):
    """Vectorized region test over many blocks.

    Parameters
    ----------
    rates, snr : ndarray, shape (n_blocks, L)
        Rates in bits per channel use and received SNRs ``g_i P_i / N``.

    Returns
    -------
    ndarray of bool, shape (n_blocks,)
        True where some subset sum-rate constraint is violated.
    """
    rates = np.atleast_2d(rates)
    snr = np.atleast_2d(snr)
    if rates.shape != snr.shape:
        raise ContractError(f"rates {rates.shape} and snr {snr.shape} differ")
    masks = subset_masks(rates.shape[1])
    lhs = rates @ masks.T
    rhs = 0.5 * np.log2(1.0 + snr @ masks.T)
    return np.any(lhs > rhs + slack, axis=1)


def in_region(rates, state):
    """True iff ``rates`` lies in the capacity region of ``state``.

    Every nonempty subset ``S`` must satisfy
    ``sum_{i in S} R_i <= 1/2 log2(1 + sum_{i in S} g_i P_i / N)`` up to a
    slack of ``1e-9`` bits.
    """
    rates = np.asarray(rates, dtype=float).ravel()
    if rates.size != state.n_users:
        raise ContractError(
            f"rate tuple has {rates.size} entries, state has {state.n_users} users")
    if np.any(rates < 0):
        raise DomainError("rates must be nonnegative")
    return not bool(region_violations(rates[None, :], state.snr[None, :])[0])


def sum_rate_bound(state):
    """Full-set sum-rate bound ``1/2 log2(1 + sum g_i P_i / N)``."""
    return 0.5 * float(np.log2(1.0 + state.snr.sum()))
