"""Fading laws in the power-gain domain.

A :class:`FadingLaw` describes the distribution of one link's power gain
``g = |h|^2``.  Every integral against a law is computed either exactly (for
discrete laws) or as a plain average over the midpoint-quantile grid
``x_j = (j - 1/2) / n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

__all__ = [
    "DEFAULT_GRID",
    "FadingLaw",
    "quantile",
    "quantize",
    "midpoint_grid",
    "sample_block",
    "sample_blocks",
]

DEFAULT_GRID = 20000

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

_KINDS = ("discrete", "rayleigh", "tabulated")
_MASS_TOL = 1e-12


def midpoint_grid(n):
    """Probability levels ``(j - 1/2)/n`` for ``j = 1..n``."""
    n = int(n)
    if n < 1:
        raise DomainError(f"grid size must be >= 1, got {n}")
    return (np.arange(n, dtype=float) + 0.5) / n


@dataclass(frozen=True)
class FadingLaw:
    """Distribution of a power gain.

    Use the constructors :meth:`discrete`, :meth:`rayleigh` and
    :meth:`tabulated` rather than building instances directly.

    Attributes
    ----------
    kind : {'discrete', 'rayleigh', 'tabulated'}
    params : tuple
        ``((g, p), ...)`` atoms for discrete laws, ``(mean,)`` for Rayleigh
        (exponential power gain), ``((x, ...), (g, ...))`` quantile nodes for
        tabulated laws.
    scale : float
        Positive multiplier applied to every gain.
    """

    kind: str
    params: tuple
    scale: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown law kind {self.kind!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"scale must be positive, got {self.scale}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def discrete(cls, atoms, scale=1.0):
        """Point masses ``[(g_i, p_i), ...]`` with strictly increasing ``g_i``."""
        atoms = [(float(g), float(p)) for g, p in atoms]
        if not atoms:
            raise DomainError("discrete law needs at least one atom")
        gains = np.array([a[0] for a in atoms])
        probs = np.array([a[1] for a in atoms])
        if np.any(gains < 0) or not np.all(np.isfinite(gains)):
            raise DomainError("atom gains must be finite and nonnegative")
        if np.any(np.diff(gains) <= 0):
            raise DomainError("atom gains must be strictly increasing")
        if np.any(probs <= 0):
            raise DomainError("atom masses must be positive")
        if abs(probs.sum() - 1.0) > _MASS_TOL:
            raise DomainError(f"atom masses sum to {probs.sum()!r}, not 1")
        return cls("discrete", tuple(atoms), float(scale))

    @classmethod
    def rayleigh(cls, mean=1.0, scale=1.0):
        """Rayleigh amplitude fading: exponential power gain with the given mean."""
        mean = float(mean)
        if not (np.isfinite(mean) and mean > 0):
            raise DomainError(f"mean must be positive, got {mean}")
        return cls("rayleigh", (mean,), float(scale))

    @classmethod
    def tabulated(cls, probs, gains, scale=1.0):
        """Piecewise-linear quantile curve through ``(probs[i], gains[i])``.

        ``probs`` must run strictly increasing from 0 to 1 and ``gains`` must
        be nonnegative and strictly increasing.
        """
        probs = tuple(float(x) for x in probs)
        gains = tuple(float(g) for g in gains)
        if len(probs) != len(gains) or len(probs) < 2:
            raise DomainError("tabulated law needs >= 2 matching nodes")
        if probs[0] != 0.0 or probs[-1] != 1.0 or np.any(np.diff(probs) <= 0):
            raise DomainError("tabulated probabilities must increase from 0 to 1")
        if gains[0] < 0 or np.any(np.diff(gains) <= 0):
            raise DomainError("tabulated gains must be nonnegative and increasing")
        return cls("tabulated", (probs, gains), float(scale))

    # -- distribution access ---------------------------------------------
    @property
    def atoms(self):
        """Scaled ``(gains, masses)`` arrays of a discrete law."""
        if self.kind != "discrete":
            raise DomainError(f"{self.kind} law has no atoms")
        arr = np.array(self.params, dtype=float)
        return arr[:, 0] * self.scale, arr[:, 1]

    def cdf(self, g):
        g = np.asarray(g, dtype=float)
        if self.kind == "rayleigh":
            m = self.params[0] * self.scale
            return np.where(g < 0, 0.0, -np.expm1(-np.maximum(g, 0.0) / m))
        if self.kind == "discrete":
            gains, masses = self.atoms
            cum = np.cumsum(masses)
            idx = np.searchsorted(gains, g, side="right")
            out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
            return np.minimum(out, 1.0)
        probs, gains = (np.array(p) for p in self.params)
        return np.interp(g, gains * self.scale, probs, left=0.0, right=1.0)

    def quantile(self, x):
        """Generalized inverse ``min{g : F(g) >= x}`` for ``x`` in (0, 1)."""
        x = np.asarray(x, dtype=float)
        if np.any(~(x > 0) | ~(x < 1)):
            raise DomainError("quantile level must lie in the open interval (0, 1)")
        if self.kind == "rayleigh":
            return -self.params[0] * self.scale * np.log1p(-x)
        if self.kind == "discrete":
            gains, masses = self.atoms
            cum = np.cumsum(masses)
            # smallest i with cum[i] >= x, tolerating round-off in the sums
            idx = np.searchsorted(cum, x - 1e-12, side="left")
            return gains[np.minimum(idx, gains.size - 1)]
        probs, gains = (np.array(p) for p in self.params)
        return np.interp(x, probs, gains) * self.scale

    def mean(self):
        if self.kind == "rayleigh":
            return self.params[0] * self.scale
        if self.kind == "discrete":
            gains, masses = self.atoms
            return float(gains @ masses)
        probs, gains = (np.array(p) for p in self.params)
        return float(_trapezoid(gains, probs)) * self.scale

    def scaled(self, c):
        """Same law with every gain multiplied by ``c > 0``."""
        c = float(c)
        if not c > 0:
            raise DomainError(f"scale factor must be positive, got {c}")
        return FadingLaw(self.kind, self.params, self.scale * c)

    # -- numerics -----------------------------------------------------------
    def quantile_grid(self, n=DEFAULT_GRID):
        """Gains at the midpoint-quantile levels; cached per ``n``."""
        key = ("q", int(n))
        if key not in self._cache:
            grid = self.quantile(midpoint_grid(n))
            grid.setflags(write=False)
            self._cache[key] = grid
        return self._cache[key]

    def support(self, n=DEFAULT_GRID):
        """Quadrature nodes and weights for integrals against this law.

        Discrete laws integrate exactly over their atoms; continuous laws use
        the ``n``-point midpoint-quantile grid with equal weights.
        """
        if self.kind == "discrete":
            return self.atoms
        gains = self.quantile_grid(n)
        return gains, np.full(gains.size, 1.0 / gains.size)

    def sample(self, size, rng):
        if self.kind == "rayleigh":
            return rng.exponential(self.params[0] * self.scale, size=size)
        if self.kind == "discrete":
            gains, masses = self.atoms
            return rng.choice(gains, size=size, p=masses)
        probs, gains = (np.array(p) for p in self.params)
        u = rng.random(size=size)
        return np.interp(u, probs, gains) * self.scale

    @property
    def is_degenerate(self):
        """True for a single point mass."""
        return self.kind == "discrete" and len(self.params) == 1


def quantile(law, x):
    """Module-level alias of :meth:`FadingLaw.quantile`."""
    return law.quantile(x)


def quantize(law, n):
    """Discretize ``law`` on the ``n``-point midpoint-quantile grid.

    Each grid level carries mass ``1/n``; coincident gains (always the case
    for discrete laws) are merged into one atom.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not np.isfinite(law.mean()):
        raise DomainError("law must have a finite mean")
    grid = law.quantile(midpoint_grid(n))
    gains, counts = np.unique(grid, return_counts=True)
    masses = counts / n
    return FadingLaw.discrete(zip(gains, masses))


def sample_block(laws, rng):
    """Draw one joint gain vector, one independent entry per law."""
    if len(laws) == 0:
        raise DomainError("need at least one law")
    return np.array([float(law.sample(None, rng)) for law in laws])


def sample_blocks(laws, n_blocks, rng):
    """Draw ``n_blocks`` independent joint gain vectors, shape ``(n_blocks, L)``."""
    if len(laws) == 0:
        raise DomainError("need at least one law")
    return np.column_stack([law.sample(n_blocks, rng) for law in laws])
