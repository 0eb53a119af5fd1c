"""Monte Carlo block simulator.

Blocks are cut into fixed-size chunks; chunk ``c`` draws from its own
stream ``SeedSequence(seed, spawn_key=(c,))``.  Chunk statistics are merged
in chunk order, so a report depends on ``(seed, n_blocks, chunk_size)``
only and is bit-identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ._validation import check_laws
from .exceptions import ContractError, DomainError
from .fading import sample_blocks
from .mac import region_violations

__all__ = ["SimReport", "simulate", "verify_outage_free", "OutageReport", "CHUNK_BLOCKS"]

CHUNK_BLOCKS = 8192


@dataclass(frozen=True)
class _Moments:
    """Count, mean and centered sum of squares, merged pairwise."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, x):
        mean = x.mean(axis=0)
        return cls(x.shape[0], mean, ((x - mean) ** 2).sum(axis=0))

    def merge(self, other):
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    def stderr(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass(frozen=True)
class SimReport:
    """Empirical throughput, outage and power statistics of one run.

    ``first_violation`` holds the block index, gains, powers and rates of the
    earliest outage, or ``None``.
    """

    blocks: int
    throughput_mean: float
    throughput_stderr: float
    outage_count: int
    power_mean: tuple
    power_stderr: tuple
    seed: int
    first_violation: dict | None = field(default=None, compare=False)

    def within(self, value, k=3.0):
        """True when ``value`` lies within ``k`` standard errors of the mean."""
        return abs(self.throughput_mean - value) <= k * self.throughput_stderr

    def as_row(self):
        row = {"blocks": self.blocks, "seed": self.seed,
               "throughput_mean": self.throughput_mean,
               "throughput_stderr": self.throughput_stderr,
               "outage_count": self.outage_count}
        for i, (m, s) in enumerate(zip(self.power_mean, self.power_stderr)):
            row[f"power_mean_{i}"] = m
            row[f"power_stderr_{i}"] = s
        return row


@dataclass(frozen=True)
class OutageReport:
    count: int
    first_violation: dict | None

    def __int__(self):
        return self.count

    def __eq__(self, other):
        if isinstance(other, (int, np.integer)):
            return self.count == other
        return NotImplemented

    __hash__ = None


def _chunk_rng(seed, chunk):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _violations(rates, snr):
    """Region test restricted to each block's users with nonzero rate or power.

    Idle users change no subset constraint, so a block with at most ``m``
    busy users needs only ``2^m - 1`` checks.
    """
    busy = (rates > 0) | (snr > 0)
    m = int(busy.sum(axis=1).max()) if busy.size else 0
    if m == 0:
        return np.zeros(rates.shape[0], dtype=bool)
    if m < rates.shape[1]:
        idx = np.argsort(~busy, axis=1, kind="stable")[:, :m]
        rates = np.take_along_axis(rates, idx, axis=1)
        snr = np.take_along_axis(snr, idx, axis=1)
    return region_violations(rates, snr)


def _run_chunk(strategy, laws, seed, chunk, start, stop):
    rng = _chunk_rng(seed, chunk)
    gains = sample_blocks(laws, stop - start, rng)
    powers, rates = strategy.predict(gains, block_index=np.arange(start, stop), rng=rng)
    if powers.shape != gains.shape or rates.shape != gains.shape:
        raise ContractError("strategy returned arrays of the wrong shape")
    bad = _violations(rates, gains * powers)
    first = None
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        first = {"block": start + j, "gains": gains[j].tolist(),
                 "powers": powers[j].tolist(), "rates": rates[j].tolist()}
    x = np.column_stack([rates.sum(axis=1), powers])
    return _Moments.of(x), int(bad.sum()), first


def _check(strategy, laws, n_blocks, seed):
    if int(n_blocks) != n_blocks or n_blocks < 1:
        raise DomainError(f"n_blocks must be a positive integer, got {n_blocks}")
    if int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer, got {seed}")
    check_is_fitted(strategy, "throughput_")
    n_users = getattr(strategy, "n_users_", None)
    laws = check_laws(laws, n_users)
    if len(laws) != n_users:
        raise ContractError(f"strategy has {n_users} users, got {len(laws)} laws")
    return laws


def simulate(strategy, laws, n_blocks, seed=0, workers=1, chunk_blocks=CHUNK_BLOCKS):
    """Simulate a fitted strategy over ``n_blocks`` independent blocks.

    Parameters
    ----------
    strategy : Strategy
        Fitted; ``predict(gains, block_index, rng)`` is called per chunk.
    laws : FadingLaw or sequence of FadingLaw
    n_blocks : int
    seed : int
    workers : int
        Threads used to run chunks; does not affect the result.
    chunk_blocks : int
        Blocks per chunk; part of the random stream layout.

    Returns
    -------
    SimReport
    """
    laws = _check(strategy, laws, n_blocks, seed)
    n_blocks, seed = int(n_blocks), int(seed)
    if int(workers) != workers or workers < 1:
        raise DomainError(f"workers must be a positive integer, got {workers}")
    bounds = [(c, s, min(s + chunk_blocks, n_blocks))
              for c, s in enumerate(range(0, n_blocks, chunk_blocks))]

    def job(b):
        return _run_chunk(strategy, laws, seed, *b)

    if workers == 1 or len(bounds) == 1:
        parts = [job(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(job, bounds))
    moments, outages, first = parts[0][0], parts[0][1], parts[0][2]
    for m, o, f in parts[1:]:
        moments = moments.merge(m)
        outages += o
        first = first or f
    se = moments.stderr()
    return SimReport(
        blocks=n_blocks,
        throughput_mean=float(moments.mean[0]),
        throughput_stderr=float(se[0]),
        outage_count=outages,
        power_mean=tuple(float(v) for v in moments.mean[1:]),
        power_stderr=tuple(float(v) for v in se[1:]),
        seed=seed,
        first_violation=first,
    )


def verify_outage_free(strategy, laws, n_blocks, seed=0, workers=1):
    """Outage count over ``n_blocks``; the first violating block is attached."""
    rep = simulate(strategy, laws, n_blocks, seed, workers)
    return OutageReport(rep.outage_count, rep.first_violation)
