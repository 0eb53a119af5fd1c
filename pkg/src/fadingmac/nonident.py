"""Bounds on the adaptive sum-capacity under non-identical fading laws.

The upper bound couples all users at a common cdf level ``x``: user ``k``
sees ``H_k(x) = F_k^{-1}(x)``, and at each level the channel is time-shared
with fractions ``alpha_k(x)``.  Maximizing

    sum_k int alpha_k(x) 1/2 log2(1 + H_k(x) P_k(x)) dx
    s.t.  int alpha_k(x) P_k(x) dx = P_k,   sum_k alpha_k(x) = 1

is a concave program.  Its Lagrange dual in the water levels ``lam_k`` is

    D(lam) = int phi(max_k H_k(x)/lam_k) dx + c sum_k lam_k P_k,

with ``c = 1/(2 ln 2)`` and ``phi(u) = 1/2 log2 u - c (1 - 1/u)`` for
``u > 1`` (zero otherwise).  The dual is minimized numerically, and a primal
solution is rebuilt from its argmax structure.  Where several users attain
the maximum on a set of positive measure (identical or scaled laws, atoms),
the split of ``alpha`` is found by a bounded least-squares fit to the
budgets.  A final weighted water-fill per user makes each budget exact, and
the dual value certifies the result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, lsq_linear, minimize, minimize_scalar

from ._validation import check_budgets, check_laws
from .exceptions import ContractError, DomainError, InfeasibleError, NoConvergenceError
from .fading import DEFAULT_GRID, midpoint_grid
from .mac import MacState
from .waterfill import WaterfillCurve, law_curve, waterfill_rate

__all__ = ["CoupledBoundSolution", "coupling_grid", "TimeShare", "coupled_bound", "solve_upper_bound",
           "scaled_shortcut", "alpha_lower_bound", "timeshare_fractions",
           "stronger_law_construction"]

_C = 0.5 / np.log(2.0)
TIE_RTOL = 1e-7
SNAP_RTOLS = (TIE_RTOL, 1e-5, 1e-3)
GAP_TOL = 1e-6


@dataclass(frozen=True)
class CoupledBoundSolution:
    """Optimized quantile-coupled upper bound.

    Attributes
    ----------
    multipliers : ndarray, shape (L,)
        Water-filling multipliers ``lam_k`` (``inf`` for a zero budget).
    alpha : ndarray, shape (n, L)
        Time fractions on the quantile grid; rows sum to one.
    value : float
        Primal bound in bits per channel use.
    powers : ndarray, shape (n, L)
        ``P_k(x) = (1/lam_k - 1/H_k(x))^+``.
    gains : ndarray, shape (n, L)
        Coupled gains ``H_k(x)``.
    budgets : ndarray
    dual_value : float
        Dual objective at the returned multipliers; ``dual_value >= value``.
    levels, weights : ndarray, shape (n,)
        Cell midpoints and widths of the coupling grid.
    """

    multipliers: np.ndarray
    alpha: np.ndarray
    value: float
    powers: np.ndarray
    gains: np.ndarray
    budgets: np.ndarray
    dual_value: float
    levels: np.ndarray
    weights: np.ndarray

    @property
    def x(self):
        return self.levels

    @property
    def gap(self):
        return self.dual_value - self.value

    def spent(self):
        """Average power spent by each user, ``int alpha_k P_k dx``."""
        return self.weights @ (self.alpha * self.powers)

    def budget_residuals(self):
        return self.spent() - self.budgets


@dataclass(frozen=True)
class TimeShare:
    """Time-sharing fractions reaching the sum-rate bound of one MAC state."""

    fractions: np.ndarray
    degenerate: bool = False

    def solo_powers(self, state):
        """Power of user ``i`` while it transmits alone for fraction ``beta_i``."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(self.fractions > 0, state.powers / self.fractions, 0.0)

    def solo_rates(self, state):
        """Fraction-weighted single-user rates; they sum to the sum-rate bound."""
        total = float(state.snr.sum())
        return self.fractions * 0.5 * np.log2(1.0 + total)


def coupling_grid(laws, grid=DEFAULT_GRID):
    """Shared quantile grid ``(levels, weights, H)`` for a set of laws.

    ``grid`` equal cells are cut at every atom boundary of a discrete law,
    so a discrete quantile is constant on each cell and integrates exactly.
    Without discrete laws this is the plain midpoint grid.
    """
    cuts = [np.cumsum(law.atoms[1])[:-1] for law in laws if law.kind == "discrete"]
    if not cuts:
        x = midpoint_grid(grid)
        H = np.column_stack([law.quantile_grid(grid) for law in laws])
        return x, np.full(x.size, 1.0 / x.size), H
    e = np.unique(np.concatenate([np.linspace(0.0, 1.0, int(grid) + 1), *cuts]))
    # drop slivers left by round-off in the cumulative masses
    e = e[np.concatenate([[True], np.diff(e) > 1e-9])]
    e[-1] = 1.0
    x = 0.5 * (e[:-1] + e[1:])
    H = np.column_stack([law.quantile(x) for law in laws])
    return x, np.diff(e), H


def _phi(u):
    out = np.zeros_like(u)
    on = u > 1.0
    out[on] = 0.5 * np.log2(u[on]) - _C * (1.0 - 1.0 / u[on])
    return out


def coupled_bound(laws, power_maps, budgets, grid=DEFAULT_GRID, rtol=1e-6):
    """Coupled sum-rate ``int 1/2 log2(1 + sum_k H_k(x) P_k(x)) dx``.

    Parameters
    ----------
    laws : sequence of FadingLaw
    power_maps : sequence
        Per-user power as a function of the cdf level ``x``: either a
        vectorized callable or an array already sampled on the levels of
        :func:`coupling_grid`.
    budgets : array_like
        Per-user average budgets the maps must respect.
    """
    budgets = check_budgets(budgets)
    laws = check_laws(laws, budgets.size)
    if len(power_maps) != len(laws):
        raise ContractError(f"got {len(power_maps)} power maps for {len(laws)} users")
    x, w, H = coupling_grid(laws, grid)
    P = np.empty_like(H)
    for k, pm in enumerate(power_maps):
        col = pm(x) if callable(pm) else pm
        col = np.broadcast_to(np.asarray(col, dtype=float), x.shape)
        if np.any(col < 0) or not np.all(np.isfinite(col)):
            raise DomainError(f"power map of user {k} must be finite and nonnegative")
        P[:, k] = col
    spent = w @ P
    over = spent > budgets + rtol * np.maximum(1.0, budgets)
    if np.any(over):
        k = int(np.flatnonzero(over)[0])
        raise ContractError(f"power map of user {k} spends {spent[k]:.6g} over budget {budgets[k]:.6g}")
    return float(w @ (0.5 * np.log2(1.0 + (H * P).sum(axis=1))))


def _dual(lam, H, budgets, w):
    u = (H / lam).max(axis=1)
    return float(w @ _phi(u) + _C * lam @ budgets)


def _minimize_dual(H, budgets, lam0, weights, max_restarts=12):
    def f(t):
        return _dual(np.exp(t), H, budgets, weights)

    t = np.log(lam0)
    best = f(t)
    for _ in range(max_restarts):
        res = minimize(f, t, method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000 * t.size,
                                "adaptive": t.size > 2})
        improved = best - res.fun
        if res.fun < best:
            t, best = res.x, res.fun
        if improved < 1e-14:
            break
    return np.exp(t), best


def _split_ties(H, lam, budgets, w, rtol=TIE_RTOL):
    """Time fractions for multipliers ``lam`` with tied maxima fit to the budgets."""
    n, L = H.shape
    u = H / lam
    umax = u.max(axis=1)
    tied = u >= umax[:, None] * (1.0 - rtol)
    P = np.maximum(1.0 / lam - 1.0 / np.where(H > 0, H, np.inf), 0.0)
    alpha = tied / tied.sum(axis=1, keepdims=True)
    multi = tied.sum(axis=1) > 1
    if not np.any(multi & (umax > 1.0)):
        return alpha, P
    patterns, inverse = np.unique(tied[multi], axis=0, return_inverse=True)
    inverse = inverse.ravel()
    rows = np.flatnonzero(multi)
    # unknowns: one fraction per (pattern, member)
    cols = [(p, k) for p in range(len(patterns)) for k in np.flatnonzero(patterns[p])]
    fixed = w[~multi] @ (alpha * P)[~multi]
    A = np.zeros((L, len(cols)))
    for j, (p, k) in enumerate(cols):
        sel = rows[inverse == p]
        A[k, j] = w[sel] @ P[sel, k]
    b = budgets - fixed
    # simplex equalities, weighted heavily
    E = np.zeros((len(patterns), len(cols)))
    for j, (p, _) in enumerate(cols):
        E[p, j] = 1.0
    w = 1e3 * max(1.0, float(np.abs(A).max()))
    sol = lsq_linear(np.vstack([A, w * E]), np.concatenate([b, w * np.ones(len(patterns))]),
                     bounds=(0.0, 1.0), lsmr_tol="auto", tol=1e-14, method="bvls")
    f = sol.x
    sums = E @ f
    for j, (p, k) in enumerate(cols):
        alpha[rows[inverse == p], k] = f[j] / sums[p] if sums[p] > 0 else 1.0 / patterns[p].sum()
    return alpha, P


def _tie_components(tied, L):
    parent = list(range(L))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for pattern in np.unique(tied[tied.sum(axis=1) > 1], axis=0):
        members = np.flatnonzero(pattern)
        for k in members[1:]:
            parent[find(k)] = find(members[0])
    comps = {}
    for k in range(L):
        comps.setdefault(find(k), []).append(k)
    return [c for c in comps.values() if len(c) > 1]


def _tie_ratios(H, tied, comp):
    """Multiplier ratios ``rho_k`` that keep every tied pair of ``comp`` tied.

    Walks the tie graph from ``comp[0]``; each pair must have a constant gain
    ratio on its joint tie set, and the ratios must agree around cycles.
    """
    rho = np.ones(H.shape[1])
    seen, queue = {comp[0]}, [comp[0]]
    pairs = []
    while queue:
        i = queue.pop(0)
        for j in comp:
            both = tied[:, i] & tied[:, j]
            if j == i or not np.any(both):
                continue
            ratio = H[both, j] / H[both, i]
            if np.ptp(ratio) > 1e-9 * ratio.max():
                return None
            pairs.append((i, j, float(np.median(ratio))))
            if j not in seen:
                rho[j] = rho[i] * pairs[-1][2]
                seen.add(j)
                queue.append(j)
    if any(abs(rho[j] / rho[i] - q) > 1e-9 * q for i, j, q in pairs):
        return None
    return rho


def _snap_ties(H, lam, budgets, w, rtol=TIE_RTOL):
    """Make near-ties exact and refit budgets; ``None`` if that fails.

    Inside a component of tied users the multiplier ratios are fixed by the
    gain ratios on the tie sets, ``lam_k = t rho_k``.  At tied points
    ``rho_k P_k`` is the same for every member, so the spend
    ``sum_k rho_k int alpha_k P_k`` does not depend on the split and fixes
    ``t``; the split then follows from the individual budgets.
    """
    n, L = H.shape
    u = H / lam
    umax = u.max(axis=1)
    tied = (u >= umax[:, None] * (1.0 - rtol)) & (umax[:, None] > 1.0)
    lam = lam.copy()
    for comp in _tie_components(tied, L):
        rho = _tie_ratios(H, tied, comp)
        if rho is None:
            return None
        r = comp[0]
        target = float(sum(rho[k] * budgets[k] for k in comp))
        others = [k for k in range(L) if k not in comp]
        uo = (H[:, others] / lam[others]).max(axis=1) if others else np.zeros(n)
        # member k contributes rho_k P_k = mu - 1/G_k with G_k = H_k/rho_k
        G = (H[:, comp] / rho[comp]).max(axis=1)
        inv_g = 1.0 / np.where(G > 0, G, np.nan)

        def spend(mu, G=G, inv_g=inv_g, uo=uo, target=target):
            win = (mu * G > uo) & (mu * G > 1.0)
            return float(w[win] @ (mu - inv_g[win])) - target

        lo = hi = 1.0 / lam[r]
        while spend(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                return None
        while spend(lo) > 0:
            lo *= 0.5
        mu = brentq(spend, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        for k in comp:
            lam[k] = rho[k] / mu
    alpha, P = _split_ties(H, lam, budgets, w, rtol=1e-11)
    spent = w @ (alpha * P)
    if np.any(np.abs(spent - budgets) > 1e-9 * np.maximum(1.0, budgets)):
        return None
    return lam, alpha, P


def _polish(H, alpha, budgets, w):
    """Weighted water-fill per user with ``alpha`` fixed; exact budgets."""
    n, L = H.shape
    lam = np.full(L, np.inf)
    value = 0.0
    for k in range(L):
        if budgets[k] == 0:
            continue
        curve = WaterfillCurve(H[:, k], alpha[:, k] * w)
        if curve.size == 0:
            raise InfeasibleError(f"user {k} has no coupled mass with positive gain")
        lam[k] = 1.0 / curve.level(budgets[k])
        value += curve.capacity(budgets[k])
    return lam, value


def solve_upper_bound(laws, budgets, grid=DEFAULT_GRID, gap_tol=GAP_TOL):
    """Optimize the quantile-coupled upper bound over multipliers and fractions.

    Raises
    ------
    NoConvergenceError
        If the certified duality gap stays above ``gap_tol * max(1, value)``;
        the error carries the budget residuals and the gap.
    """
    budgets = check_budgets(budgets)
    laws = check_laws(laws, budgets.size)
    L = budgets.size
    x, w, H = coupling_grid(laws, grid)
    n = H.shape[0]
    for k in range(L):
        if budgets[k] > 0 and not np.any(H[:, k] > 0):
            raise InfeasibleError(f"law of user {k} has no positive-gain mass")
    on = np.flatnonzero(budgets > 0)
    lam = np.full(L, np.inf)
    alpha = np.zeros_like(H)
    if on.size == 0:
        alpha[:, 0] = 1.0
        return CoupledBoundSolution(lam, alpha, 0.0, np.zeros_like(H), H, budgets, 0.0, x, w)
    Hs, bs = H[:, on], budgets[on]
    # start from each user water-filling the total budget alone
    lam0 = np.array([1.0 / law_curve(laws[k], grid).level(bs.sum()) for k in on])
    lam_d, dual = _minimize_dual(Hs, bs, lam0, weights=w)
    a_s, _ = _split_ties(Hs, lam_d, bs, w)
    lam_p, value = _polish(Hs, a_s, bs, w)
    P_s = np.maximum(1.0 / lam_p - 1.0 / np.where(Hs > 0, Hs, np.inf), 0.0)
    # ties are read off the dual multipliers, which polishing can pull apart;
    # widen the tolerance until a snap holds
    for start, rtol in itertools.product((lam_d, lam_p), SNAP_RTOLS):
        snapped = _snap_ties(Hs, start, bs, w, rtol)
        if snapped is None:
            continue
        lam_t, a_t, P_t = snapped
        v_t = float((w @ (a_t * waterfill_rate(Hs, 1.0 / lam_t))).sum())
        if v_t >= value - 1e-12:
            lam_p, a_s, P_s, value = lam_t, a_t, P_t, v_t
            break
    dual = min(dual, _dual(lam_p, Hs, bs, w))
    lam[on] = lam_p
    alpha[:, on] = a_s
    P = np.zeros_like(H)
    P[:, on] = P_s
    sol = CoupledBoundSolution(lam, alpha, float(value), P, H, budgets, float(dual), x, w)
    if sol.gap > gap_tol * max(1.0, value):
        raise NoConvergenceError(
            f"duality gap {sol.gap:.3g} above tolerance after {n}-point coupling",
            residuals=[*sol.budget_residuals(), sol.gap])
    return sol


def scaled_shortcut(base_law, scales, budgets, fractions="matched", grid=DEFAULT_GRID):
    """Upper bound for laws ``scales_k * base_law`` with constant fractions.

    With ``fractions="matched"`` the fractions are ``alpha_k`` proportional
    to ``scales_k * budgets_k``; every user then water-fills at the same
    received budget and the bound equals ``C1(base_law, sum_k s_k P_k)``,
    the optimum of the coupled program.  ``fractions="budget"`` uses
    ``alpha_k`` proportional to ``budgets_k``, which is optimal only for
    equal scales.
    """
    budgets = check_budgets(budgets)
    scales = np.asarray(scales, dtype=float).ravel()
    if scales.shape != budgets.shape:
        raise ContractError("scales and budgets must have equal length")
    if np.any(~(scales > 0)):
        raise DomainError("scales must be positive")
    if fractions == "matched":
        weight = scales * budgets
    elif fractions == "budget":
        weight = budgets.copy()
    else:
        raise DomainError(f"unknown fractions rule {fractions!r}")
    if weight.sum() == 0:
        return 0.0
    alpha = weight / weight.sum()
    total = 0.0
    for s, p, a in zip(scales, budgets, alpha):
        if a > 0:
            total += a * law_curve(base_law.scaled(s), grid).capacity(p / a)
    return float(total)


def _alpha_objective(curves, budgets):
    def f(alpha):
        v = 0.0
        for c, p, a in zip(curves, budgets, alpha):
            if a > 0 and p > 0:
                v += a * c.capacity(p / a)
        return v
    return f


def _simplex_points(L, m):
    for c in itertools.product(range(m + 1), repeat=L - 1):
        if sum(c) <= m:
            yield np.array(list(c) + [m - sum(c)], dtype=float) / m


def alpha_lower_bound(laws, budgets, grid=DEFAULT_GRID, tol=1e-9):
    """Best constant-weight alpha-midpoint throughput for arbitrary laws.

    Maximizes ``sum_i alpha_i C1(law_i, P_i/alpha_i)`` over the simplex.
    The objective is concave; ``L = 2`` uses a bounded Brent search on
    ``alpha_1``, larger ``L`` a coarse simplex grid followed by pairwise
    transfer search with halving steps.

    Returns
    -------
    value : float
    alpha : ndarray
    """
    budgets = check_budgets(budgets)
    laws = check_laws(laws, budgets.size)
    L = budgets.size
    if budgets.sum() == 0:
        return 0.0, np.full(L, 1.0 / L)
    on = np.flatnonzero(budgets > 0)
    curves = [law_curve(laws[k], grid) for k in on]
    bs = budgets[on]
    f = _alpha_objective(curves, bs)
    m = on.size
    if m == 1:
        a = np.array([1.0])
    elif m == 2:
        res = minimize_scalar(lambda t: -f((t, 1.0 - t)), bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": tol})
        a = np.array([res.x, 1.0 - res.x])
        prop = bs / bs.sum()
        if f(prop) > f(a):
            a = prop
    else:
        res_m = {3: 12, 4: 8}.get(m, 6)
        cands = list(_simplex_points(m, res_m)) + [bs / bs.sum()]
        a = max(cands, key=f)
        best = f(a)
        step = 1.0 / res_m
        while step > tol:
            moved = False
            for i, j in itertools.permutations(range(m), 2):
                d = min(step, a[j])
                if d <= 0:
                    continue
                trial = a.copy()
                trial[i] += d
                trial[j] -= d
                v = f(trial)
                if v > best:
                    a, best, moved = trial, v, True
            if not moved:
                step *= 0.5
    alpha = np.zeros(L)
    alpha[on] = a
    return float(f(a)), alpha


def timeshare_fractions(state: MacState):
    """Fractions ``beta_i = h_i P_i / sum_k h_k P_k`` for one block."""
    snr = state.snr
    total = float(snr.sum())
    if total <= 0:
        return TimeShare(np.full(snr.size, 1.0 / snr.size), degenerate=True)
    return TimeShare(snr / total)


def stronger_law_construction(base_law, total_budget, strong_scale=2.0, alpha=(1 / 3, 2 / 3),
                              grid=DEFAULT_GRID):
    """Alpha-midpoint value on a symmetric channel at the stronger user's mean.

    Both users are given the law ``strong_scale * base_law`` and per-user
    budgets ``alpha_k * total_budget``.  A comparison curve only: it
    carries no achievability claim for the asymmetric channel and can
    exceed the coupled upper bound.
    """
    alpha = np.asarray(alpha, dtype=float)
    curve = law_curve(base_law.scaled(strong_scale), grid)
    return float(sum(a * curve.capacity(a * total_budget / a) for a in alpha if a > 0))


def coupled_rates(solution):
    """Per-level rates ``1/2 log2(1 + H_k P_k)`` of a coupled solution."""
    with np.errstate(divide="ignore"):
        mu = np.where(np.isfinite(solution.multipliers), 1.0 / solution.multipliers, 0.0)
    return waterfill_rate(solution.gains, mu)
