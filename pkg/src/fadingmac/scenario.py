"""Scenario files: TOML in, validated :class:`Scenario` out.

A minimal file::

    [users]
    count = 2
    budgets = [1.0, 1.0]

    [[laws]]
    kind = "rayleigh"
    mean = 1.0

Sections and keys (defaults in brackets):

``[users]``
    ``count``, ``budgets`` (one value is broadcast), ``noise`` [1.0].
``[[laws]]``
    One entry for all users or one per user.  ``kind`` is ``rayleigh``
    (``mean`` [1.0]), ``discrete`` (``atoms = [[gain, mass], ...]``) or
    ``tabulated`` (``probs``, ``gains``); every kind takes ``scale`` [1.0].
``[strategy]``
    ``name`` [midpoint], ``alpha``, ``virtual_budget``, ``layers``.
``[partial_csi]``
    ``thresholds`` or ``quantiles`` (cdf levels turned into thresholds).
``[look]``
    ``users``, ``active``.
``[simulation]``
    ``blocks`` [100000], ``seed`` [0], ``workers`` [1].
``[numerics]``
    ``grid`` [20000].
``[output]``
    ``path``.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .exceptions import DomainError, ScenarioError
from .fading import DEFAULT_GRID, FadingLaw

__all__ = ["Scenario", "LawSpec", "parse_scenario", "serialize", "load_scenario",
           "STRATEGY_NAMES"]

STRATEGY_NAMES = ("zero", "midpoint", "alpha-midpoint", "plain-tdma", "virtual-split",
                  "group-csi", "look-midpoint", "otdma", "layered")

_SCHEMA = {
    "users": {"count", "budgets", "noise"},
    "laws": {"kind", "mean", "atoms", "probs", "gains", "scale"},
    "strategy": {"name", "alpha", "virtual_budget", "layers"},
    "partial_csi": {"thresholds", "quantiles"},
    "look": {"users", "active"},
    "simulation": {"blocks", "seed", "workers"},
    "numerics": {"grid"},
    "output": {"path"},
}


@dataclass(frozen=True)
class LawSpec:
    kind: str
    mean: float = 1.0
    atoms: tuple = ()
    probs: tuple = ()
    gains: tuple = ()
    scale: float = 1.0

    def build(self, noise=1.0):
        """The law of ``gain / noise``."""
        s = self.scale / noise
        if self.kind == "rayleigh":
            return FadingLaw.rayleigh(self.mean, s)
        if self.kind == "discrete":
            return FadingLaw.discrete(self.atoms, s)
        return FadingLaw.tabulated(self.probs, self.gains, s)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "rayleigh":
            d["mean"] = self.mean
        elif self.kind == "discrete":
            d["atoms"] = [list(a) for a in self.atoms]
        else:
            d["probs"], d["gains"] = list(self.probs), list(self.gains)
        d["scale"] = self.scale
        return d


@dataclass(frozen=True)
class Scenario:
    n_users: int
    budgets: tuple
    laws: tuple
    noise: float = 1.0
    strategy: str = "midpoint"
    alpha: tuple | None = None
    virtual_budget: float | None = None
    layers: int | None = None
    thresholds: tuple | None = None
    quantiles: tuple | None = None
    look_users: int | None = None
    look_active: int | None = None
    blocks: int = 100_000
    seed: int = 0
    workers: int = 1
    grid: int = DEFAULT_GRID
    output: str | None = None

    def fading_laws(self):
        """One :class:`FadingLaw` per user, normalized by the noise power."""
        specs = self.laws if len(self.laws) == self.n_users else self.laws * self.n_users
        return [s.build(self.noise) for s in specs]

    @property
    def identical(self):
        return len(set(self.laws)) == 1

    def threshold_values(self):
        """Gain thresholds, converting cdf levels through the first law."""
        if self.thresholds is not None:
            return self.thresholds
        if self.quantiles is not None:
            law = self.fading_laws()[0]
            return tuple(float(v) for v in law.quantile(np.asarray(self.quantiles)))
        return None

    def digest(self):
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _line_of(text, section, key=None):
    """1-based line of ``key`` inside ``section`` (or of the section header)."""
    lines = text.splitlines()
    head = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*$")
    start = next((i for i, ln in enumerate(lines) if head.match(ln)), None)
    if start is None:
        return None
    if key is None:
        return start + 1
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start + 1, len(lines)):
        if re.match(r"^\s*\[", lines[i]):
            break
        if pat.match(lines[i]):
            return i + 1
    return start + 1


class _Reader:
    def __init__(self, text):
        self.text = text

    def fail(self, msg, section, key=None):
        name = f"{section}.{key}" if key else section
        raise ScenarioError(msg, key=name, line=_line_of(self.text, section, key))

    def number(self, table, section, key, default=None, integer=False, positive=False,
               nonneg=False):
        if key not in table:
            return default
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail("expected a number", section, key)
        if integer and int(v) != v:
            self.fail("expected an integer", section, key)
        if not np.isfinite(v):
            self.fail("must be finite", section, key)
        if positive and not v > 0:
            self.fail("must be positive", section, key)
        if nonneg and v < 0:
            self.fail("must be nonnegative", section, key)
        return int(v) if integer else float(v)

    def numbers(self, table, section, key, nonneg=False):
        v = table.get(key)
        if v is None:
            return None
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [v]
        if not isinstance(v, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.fail("expected a list of numbers", section, key)
        arr = tuple(float(x) for x in v)
        if not all(np.isfinite(arr)):
            self.fail("must be finite", section, key)
        if nonneg and any(x < 0 for x in arr):
            self.fail("must be nonnegative", section, key)
        return arr


def parse_scenario(text, command=None):
    """Parse and validate scenario TOML.

    Parameters
    ----------
    text : str
    command : str, optional
        When given, section use is checked against it (partial-CSI
        thresholds only with ``partial-csi`` or a ``group-csi`` strategy).

    Raises
    ------
    ScenarioError
        Naming the offending key and its line.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"malformed TOML: {exc}", line=int(m.group(1)) if m else None) from None
    r = _Reader(text)
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ScenarioError("unknown section", key=section, line=_line_of(text, section))
        entries = body if isinstance(body, list) else [body]
        for entry in entries:
            if not isinstance(entry, dict):
                raise ScenarioError("expected a table", key=section, line=_line_of(text, section))
            for key in entry:
                if key not in _SCHEMA[section]:
                    r.fail("unknown key", section, key)

    users = doc.get("users")
    if users is None:
        raise ScenarioError("missing section", key="users")
    if "count" not in users:
        raise ScenarioError("missing key", key="users.count", line=_line_of(text, "users"))
    n = r.number(users, "users", "count", integer=True, positive=True)
    budgets = r.numbers(users, "users", "budgets", nonneg=True)
    if budgets is None:
        r.fail("missing key", "users", "budgets")
    if len(budgets) == 1:
        budgets = budgets * n
    if len(budgets) != n:
        r.fail(f"has {len(budgets)} entries for {n} users", "users", "budgets")
    noise = r.number(users, "users", "noise", 1.0, positive=True)

    raw_laws = doc.get("laws")
    if raw_laws is None:
        raise ScenarioError("missing section", key="laws")
    if isinstance(raw_laws, dict):
        raw_laws = [raw_laws]
    if len(raw_laws) not in (1, n):
        raise ScenarioError(f"{len(raw_laws)} law entries for {n} users", key="laws",
                            line=_line_of(text, "laws"))
    laws = tuple(_parse_law(r, entry) for entry in raw_laws)

    st = doc.get("strategy", {})
    name = st.get("name", "midpoint")
    if name not in STRATEGY_NAMES:
        r.fail(f"unknown strategy {name!r}", "strategy", "name")
    alpha = r.numbers(st, "strategy", "alpha", nonneg=True)
    if alpha is not None and (len(alpha) != n or abs(sum(alpha) - 1.0) > 1e-9):
        r.fail("must have one weight per user summing to 1", "strategy", "alpha")
    vb = r.number(st, "strategy", "virtual_budget", positive=True)
    layers = r.number(st, "strategy", "layers", integer=True, positive=True)

    pc = doc.get("partial_csi", {})
    thresholds = r.numbers(pc, "partial_csi", "thresholds", nonneg=True)
    quantiles = r.numbers(pc, "partial_csi", "quantiles")
    if thresholds is not None and quantiles is not None:
        r.fail("give thresholds or quantiles, not both", "partial_csi", "quantiles")
    if thresholds is not None and any(np.diff(thresholds) <= 0):
        r.fail("must be strictly increasing", "partial_csi", "thresholds")
    if quantiles is not None and (any(q <= 0 or q >= 1 for q in quantiles) or any(np.diff(quantiles) <= 0)):
        r.fail("must be strictly increasing levels in (0, 1)", "partial_csi", "quantiles")
    if command is not None and "partial_csi" in doc and command != "partial-csi" \
            and not (command in ("simulate", "capacity") and name == "group-csi"):
        raise ScenarioError(f"thresholds are not used by command {command!r}", key="partial_csi",
                            line=_line_of(text, "partial_csi"))

    lk = doc.get("look", {})
    K = r.number(lk, "look", "users", integer=True, positive=True)
    La = r.number(lk, "look", "active", integer=True, positive=True)
    if K is not None and La is not None and La > K:
        r.fail("exceeds look.users", "look", "active")

    sim = doc.get("simulation", {})
    blocks = r.number(sim, "simulation", "blocks", 100_000, integer=True, positive=True)
    seed = r.number(sim, "simulation", "seed", 0, integer=True, nonneg=True)
    workers = r.number(sim, "simulation", "workers", 1, integer=True, positive=True)
    grid = r.number(doc.get("numerics", {}), "numerics", "grid", DEFAULT_GRID, integer=True, positive=True)
    out = doc.get("output", {}).get("path")
    if out is not None and not isinstance(out, str):
        r.fail("expected a string", "output", "path")

    return Scenario(n, budgets, laws, noise, name, alpha, vb, layers, thresholds, quantiles,
                    K, La, blocks, seed, workers, grid, out)


def _parse_law(r, entry):
    kind = entry.get("kind")
    if kind not in ("rayleigh", "discrete", "tabulated"):
        r.fail(f"unknown law kind {kind!r}", "laws", "kind")
    scale = r.number(entry, "laws", "scale", 1.0, positive=True)
    try:
        if kind == "rayleigh":
            spec = LawSpec("rayleigh", mean=r.number(entry, "laws", "mean", 1.0, positive=True),
                           scale=scale)
        elif kind == "discrete":
            atoms = entry.get("atoms")
            if not isinstance(atoms, list) or not all(isinstance(a, list) and len(a) == 2 for a in atoms):
                r.fail("expected [[gain, mass], ...]", "laws", "atoms")
            spec = LawSpec("discrete", atoms=tuple((float(g), float(p)) for g, p in atoms), scale=scale)
        else:
            probs = r.numbers(entry, "laws", "probs")
            gains = r.numbers(entry, "laws", "gains", nonneg=True)
            if probs is None or gains is None:
                r.fail("tabulated law needs probs and gains", "laws", "probs" if probs is None else "gains")
            spec = LawSpec("tabulated", probs=probs, gains=gains, scale=scale)
        spec.build()
    except DomainError as exc:
        key = {"discrete": "atoms", "tabulated": "gains"}.get(kind, "mean")
        r.fail(f"malformed law: {exc}", "laws", key)
    except (TypeError, ValueError):
        r.fail("malformed law", "laws", "atoms" if kind == "discrete" else "kind")
    return spec


def serialize(s: Scenario):
    """Canonical TOML text for a scenario; ``parse_scenario`` inverts it."""
    doc = {"users": {"count": s.n_users, "budgets": list(s.budgets), "noise": s.noise},
           "laws": [law.to_dict() for law in s.laws]}
    st = {"name": s.strategy}
    if s.alpha is not None:
        st["alpha"] = list(s.alpha)
    if s.virtual_budget is not None:
        st["virtual_budget"] = s.virtual_budget
    if s.layers is not None:
        st["layers"] = s.layers
    doc["strategy"] = st
    if s.thresholds is not None:
        doc["partial_csi"] = {"thresholds": list(s.thresholds)}
    elif s.quantiles is not None:
        doc["partial_csi"] = {"quantiles": list(s.quantiles)}
    lk = {k: v for k, v in (("users", s.look_users), ("active", s.look_active)) if v is not None}
    if lk:
        doc["look"] = lk
    doc["simulation"] = {"blocks": s.blocks, "seed": s.seed, "workers": s.workers}
    doc["numerics"] = {"grid": s.grid}
    if s.output is not None:
        doc["output"] = {"path": s.output}
    return tomli_w.dumps(doc)


def load_scenario(path, command=None):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), command)
