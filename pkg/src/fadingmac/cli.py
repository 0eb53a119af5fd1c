"""Command-line front end: ``fadingmac <command> [options]``.

Every command writes one CSV (to ``--out``, the scenario's output path, or
stdout).  Next to a CSV file a manifest ``<csv>.manifest.json`` records the
command line, the canonical scenario text and hash, the seed and library
versions; ``fadingmac replay <manifest>`` reruns it and compares digests.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
1 replay mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
from dataclasses import replace
from importlib import metadata

import numpy as np

from .exceptions import FadingMacError, NoConvergenceError
from .fading import DEFAULT_GRID, FadingLaw
from .harness import simulate
from .look import LookConfig, LookMidpointStrategy, look_capacity
from .nonident import alpha_lower_bound, stronger_law_construction, solve_upper_bound
from .partial_csi import GroupCsiStrategy, threshold_spread
from .ratesplit import LayeredStrategy, fraction_sweep
from .scenario import STRATEGY_NAMES, LawSpec, Scenario, load_scenario, serialize
from .strategies import (AlphaMidpointStrategy, MidpointStrategy, OtdmaStrategy,
                         PlainTdmaStrategy, VirtualSplitStrategy, ZeroStrategy, otdma_benchmark)
from .waterfill import c1

__all__ = ["main", "build_strategy", "HEADERS"]

HEADERS = {
    "capacity": ["strategy", "n_users", "P_total", "throughput_bits", "c_sum_bits"],
    "ratesplit": ["N_v", "sum_rate_bits", "midpoint_sum_bits", "fraction"],
    "partial-csi": ["P_avg", "c_sum", "c_psi", "full_csi"],
    "nonident": ["P_total", "upper_bound", "lower_bound"],
    "look": ["K", "L", "P_avg", "c_look", "mc_estimate", "mc_stderr"],
    "figure2": ["P_avg", "midpoint", "otdma_benchmark", "gap"],
    "figure4": ["P_avg", "c_sum", "c_psi", "full_csi", "threshold_spread"],
}

_ALIASES = {"alpha": "alpha-midpoint", "tdma": "plain-tdma"}

_FIG3_LAYERS = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)
_FIG4_POWERS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
_FIG5_TOTALS = (0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)


class _UsageError(FadingMacError, ValueError):
    pass


def _floats(text):
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text):
    vals = _floats(text)
    if any(int(v) != v for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _default_scenario(n_users=2):
    return Scenario(n_users, (1.0,) * n_users, (LawSpec("rayleigh"),))


def _scenario(args, command):
    scn = load_scenario(args.config, command) if args.config else _default_scenario()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.grid is not None:
        updates["grid"] = args.grid
    if updates:
        scn = replace(scn, **updates)
    return scn


def _equal_budget(scn):
    b = set(scn.budgets)
    if len(b) != 1:
        raise _UsageError(f"strategy {scn.strategy!r} needs equal budgets, got {scn.budgets}")
    return scn.budgets[0]


def build_strategy(scn: Scenario):
    """Unfitted strategy described by a scenario."""
    n, name = scn.n_users, scn.strategy
    if name == "zero":
        return ZeroStrategy(n)
    if name == "midpoint":
        return MidpointStrategy(n, _equal_budget(scn), scn.grid)
    if name == "plain-tdma":
        return PlainTdmaStrategy(n, _equal_budget(scn), scn.grid)
    if name == "otdma":
        return OtdmaStrategy(n, _equal_budget(scn), scn.grid)
    if name == "alpha-midpoint":
        return AlphaMidpointStrategy(scn.budgets, scn.alpha, scn.grid)
    if name == "virtual-split":
        if scn.virtual_budget is None:
            raise _UsageError("virtual-split needs strategy.virtual_budget")
        return VirtualSplitStrategy(scn.budgets, scn.virtual_budget, scn.grid)
    if name == "group-csi":
        thr = scn.threshold_values()
        return GroupCsiStrategy(n, _equal_budget(scn), thr if thr is not None else (1.0,), scn.grid)
    if name == "look-midpoint":
        if scn.look_active is None:
            raise _UsageError("look-midpoint needs look.active")
        return LookMidpointStrategy(n, scn.look_active, _equal_budget(scn), scn.grid)
    if name == "layered":
        base = AlphaMidpointStrategy(scn.budgets, scn.alpha, scn.grid).fit(scn.fading_laws())
        return LayeredStrategy(base, scn.layers or 8)
    raise _UsageError(f"unknown strategy {name!r}")


# -- commands ----------------------------------------------------------------

def _cmd_capacity(args, scn):
    laws = scn.fading_laws()
    strat = build_strategy(scn).fit(laws)
    total = float(sum(scn.budgets))
    c_sum = c1(laws[0], total, scn.grid) if scn.identical else ""
    return HEADERS["capacity"], [[scn.strategy, scn.n_users, total, strat.throughput_, c_sum]]


def _cmd_simulate(args, scn):
    laws = scn.fading_laws()
    strat = build_strategy(scn).fit(laws)
    blocks = args.blocks if args.blocks is not None else scn.blocks
    rep = simulate(strat, laws, blocks, scn.seed, scn.workers)
    row = {"strategy": scn.strategy, "analytic_throughput": strat.throughput_, **rep.as_row()}
    print(f"{scn.strategy}: {rep.throughput_mean:.6f} +- {rep.throughput_stderr:.2g} bits "
          f"(analytic {strat.throughput_:.6f}) over {rep.blocks} blocks, "
          f"{rep.outage_count} outages", file=sys.stderr)
    return list(row), [list(row.values())]


def _cmd_ratesplit(args, scn):
    gammas = args.gammas or (1.0, 1.0)
    layers = args.layers or (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)
    rows = fraction_sweep(gammas, layers)
    return HEADERS["ratesplit"], [[r.n_layers, r.sum_rate_bits, r.midpoint_sum_bits, r.fraction]
                                  for r in rows]


def _identical_law(scn):
    if not scn.identical:
        raise _UsageError("this command needs identical laws")
    return scn.fading_laws()[0]


def _thresholds(args, scn, law):
    if args.threshold is not None:
        text = args.threshold.strip()
        try:
            if text.startswith("q:"):
                return tuple(float(v) for v in law.quantile(np.array([float(text[2:])])))
            return (float(text),)
        except ValueError:
            raise _UsageError(f"bad threshold {args.threshold!r}; use a gain or q:<level>") from None
    if args.thresholds:
        return args.thresholds
    if args.bits is not None:
        if args.bits < 0:
            raise _UsageError(f"--bits must be nonnegative, got {args.bits}")
        # zero bits: no feedback, the group rule is plain midpoint
        n = 2 ** args.bits
        return tuple(float(v) for v in law.quantile(np.arange(1, n) / n))
    return scn.threshold_values() or (1.0,)


def _cmd_partial_csi(args, scn):
    """One bit: analytic ``C1(Psi', L P)``.  More bits: the group rule simulated."""
    law = _identical_law(scn)
    thr = _thresholds(args, scn, law)
    powers = args.powers or scn.budgets[:1]
    L, rows = scn.n_users, []
    if len(thr) > 1:
        print("c_psi is a simulated group-rule throughput (no analytic capacity for more "
              "than one bit)", file=sys.stderr)
    for p in powers:
        group = GroupCsiStrategy(L, p, thr, scn.grid).fit(law)
        if len(thr) > 1:
            blocks = args.blocks if args.blocks is not None else scn.blocks
            value = simulate(group, law, blocks, scn.seed, scn.workers).throughput_mean
        else:
            value = group.throughput_
        rows.append([p, c1(law, L * p, scn.grid), value, otdma_benchmark(law, L, L * p, scn.grid)])
    return HEADERS["partial-csi"], rows


def _cmd_nonident(args, scn):
    if args.means or args.config is None:
        specs = [LawSpec("rayleigh", mean=m) for m in (args.means or (1.0, 2.0))]
        shares = np.full(len(specs), 1.0 / len(specs))
    else:
        specs = list(scn.laws) * (scn.n_users if len(scn.laws) == 1 else 1)
        b = np.asarray(scn.budgets)
        shares = b / b.sum() if b.sum() > 0 else np.full(b.size, 1.0 / b.size)
    laws = [s.build(scn.noise) for s in specs]
    totals = args.powers or _FIG5_TOTALS
    header = list(HEADERS["nonident"])
    if args.strong_law_curve:
        if any(s.kind != "rayleigh" for s in specs):
            raise _UsageError("--strong-law-curve needs Rayleigh laws")
        means = np.array([s.mean * s.scale for s in specs])
        header.append("strong_law_alpha")
    rows = []
    for total in totals:
        budgets = total * shares
        upper = solve_upper_bound(laws, budgets, scn.grid).value
        lower = alpha_lower_bound(laws, budgets, scn.grid)[0]
        row = [total, upper, lower]
        if args.strong_law_curve:
            strong = FadingLaw.rayleigh(float(means.max()), 1.0 / scn.noise)
            row.append(stronger_law_construction(strong, total, 1.0, means / means.sum(), scn.grid))
        rows.append(row)
    return header, rows


def _cmd_look(args, scn):
    law = _identical_law(scn)
    Ks = args.users or ((scn.look_users,) if scn.look_users else (8,))
    L = args.active if args.active is not None else (scn.look_active or 2)
    p = args.power if args.power is not None else scn.budgets[0]
    blocks = args.blocks if args.blocks is not None else scn.blocks
    if blocks < 0:
        raise _UsageError(f"--blocks must be nonnegative, got {blocks}")
    rows = []
    for K in Ks:
        cfg = LookConfig(K, L, law, p)
        value = look_capacity(cfg, scn.grid)
        if blocks > 0:
            strat = LookMidpointStrategy(K, L, p, scn.grid).fit(law)
            rep = simulate(strat, law, blocks, scn.seed, scn.workers)
            rows.append([K, L, p, value, rep.throughput_mean, rep.throughput_stderr])
        else:
            rows.append([K, L, p, value, "", ""])
    return HEADERS["look"], rows


def _cmd_figure(args, scn):
    which = args.which
    if which == "2":
        law = FadingLaw.rayleigh(1.0)
        rows = []
        for p in np.logspace(-1, 2, 20):
            p = float(p)
            mid = c1(law, 2 * p, scn.grid)
            full = otdma_benchmark(law, 2, 2 * p, scn.grid)
            rows.append([p, mid, full, full - mid])
        return HEADERS["figure2"], rows
    if which == "3":
        args.gammas, args.layers = (1.0, 1.0), _FIG3_LAYERS
        return _cmd_ratesplit(args, scn)
    if which == "4":
        args.threshold, args.powers = "1.0", _FIG4_POWERS
        scn4 = _default_scenario(2)
        law = scn4.fading_laws()[0]
        _, rows = _cmd_partial_csi(args, scn4)
        # spread of c_psi as the threshold sweeps the quartile band
        return HEADERS["figure4"], [r + [threshold_spread(law, 2, r[0], grid=scn4.grid)] for r in rows]
    args.means, args.powers = (1.0, 2.0), _FIG5_TOTALS
    return _cmd_nonident(args, scn)


_COMMANDS = {
    "capacity": _cmd_capacity,
    "simulate": _cmd_simulate,
    "ratesplit": _cmd_ratesplit,
    "partial-csi": _cmd_partial_csi,
    "nonident": _cmd_nonident,
    "look": _cmd_look,
    "figure": _cmd_figure,
}


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _render(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("fadingmac", "scipy", "scikit-learn"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _manifest(path, args, argv, scn, text):
    data = {
        "command": args.command,
        "argv": list(argv),
        "scenario": None if scn is None else serialize(scn),
        "scenario_sha256": None if scn is None else scn.digest(),
        "seed": None if scn is None else scn.seed,
        "versions": _versions(),
        "csv": os.path.basename(path),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _replay(args):
    with open(args.manifest, encoding="utf-8") as fh:
        data = json.load(fh)
    argv = _strip_option(_strip_option(list(data["argv"]), "--out"), "--config")
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.manifest)),
                                   "replay-" + data["csv"])
    with tempfile.TemporaryDirectory() as tmp:
        if data.get("scenario"):
            cfg = os.path.join(tmp, "scenario.toml")
            with open(cfg, "w", encoding="utf-8") as fh:
                fh.write(data["scenario"])
            argv = argv[:1] + ["--config", cfg] + argv[1:]
        code = main(argv + ["--out", out])
    if code != 0:
        return code
    with open(out, encoding="utf-8") as fh:
        digest = hashlib.sha256(fh.read().encode()).hexdigest()
    same = digest == data["csv_sha256"]
    print(f"replay {'matches' if same else 'DIFFERS from'} {data['csv']}", file=sys.stderr)
    return 0 if same else 1


def _strip_option(argv, flag):
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == flag:
            skip = True
            continue
        if tok.startswith(flag + "="):
            continue
        out.append(tok)
    return out


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario TOML file")
    common.add_argument("--out", help="CSV output path (default: scenario output or stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--grid", type=int, help=f"quantile grid size (default {DEFAULT_GRID})")

    p = argparse.ArgumentParser(prog="fadingmac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("capacity", parents=[common], help="analytic throughput of the scenario strategy")
    s.add_argument("--strategy", help="override strategy.name (alpha, tdma accepted)")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo run of the scenario strategy")
    s.add_argument("--strategy", help="override strategy.name (alpha, tdma accepted)")
    s.add_argument("--blocks", type=int)
    s = sub.add_parser("ratesplit", parents=[common], help="layered fraction sweep")
    s.add_argument("--gammas", type=_floats, help="received powers, one per user")
    s.add_argument("--layers", type=_ints, help="layer counts")
    s = sub.add_parser("partial-csi", parents=[common], help="threshold-CSI throughput sweep")
    s.add_argument("--threshold", help="gain threshold, or q:<level> for a quantile")
    s.add_argument("--thresholds", type=_floats, help="several gain thresholds")
    s.add_argument("--bits", type=int, help="feedback bits; 2^bits equally likely groups")
    s.add_argument("--powers", type=_floats, help="per-user budgets")
    s.add_argument("--blocks", type=int, help="Monte Carlo blocks for more than one bit")
    s = sub.add_parser("nonident", parents=[common], help="upper and lower bounds, non-identical laws")
    s.add_argument("--means", type=_floats, help="Rayleigh means, one per user (equal budgets)")
    s.add_argument("--powers", type=_floats, help="total budgets")
    s.add_argument("--strong-law-curve", action="store_true",
                   help="add the symmetric stronger-law comparison column")
    s = sub.add_parser("look", parents=[common], help="variable active set throughput")
    s.add_argument("--users", type=_ints, help="K values")
    s.add_argument("--active", type=int, help="L")
    s.add_argument("--power", type=float, help="per-user budget")
    s.add_argument("--blocks", type=int, help="Monte Carlo blocks (0 skips simulation)")
    s = sub.add_parser("figure", parents=[common], help="figure presets")
    s.add_argument("which", choices=["2", "3", "4", "5"])
    s.add_argument("--strong-law-curve", action="store_true")
    s = sub.add_parser("replay", help="rerun a manifest and compare CSV digests")
    s.add_argument("manifest")
    s.add_argument("--out")
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return _replay(args)
        cmd = "partial-csi" if args.command == "figure" and args.which == "4" else args.command
        scn = _scenario(args, cmd)
        if getattr(args, "strategy", None):
            name = _ALIASES.get(args.strategy, args.strategy)
            if name not in STRATEGY_NAMES:
                raise _UsageError(f"unknown strategy {args.strategy!r}")
            scn = replace(scn, strategy=name)
        for name in ("means", "strong_law_curve", "gammas", "layers", "threshold", "thresholds", "bits",
                     "powers", "users", "active", "power", "blocks"):
            if not hasattr(args, name):
                setattr(args, name, None)
        header, rows = _COMMANDS[args.command](args, scn)
        text = _render(header, rows)
        out = args.out or scn.output
        if out:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            _manifest(out, args, argv, scn if args.config else None, text)
        else:
            sys.stdout.write(text)
        return 0
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FadingMacError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
