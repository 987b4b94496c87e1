"""From spectral-condition functions to eigenvalue lists.

Regular levels come from sign changes of ``G_pm`` between its integer
poles; exceptional levels come from the Judd condition and from the zeros
of ``G^(m)_pm``. Every line can be cross-checked against the oracle.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import gfunctions as gf
from . import oracle
from . import recurrence as rec
from .exceptions import LostBracket, PreconditionViolated
from .params import Parity, RabiParams
from .precision import BASE_BITS
from .recurrence import DEFAULT_TOL, POLE_GUARD

log = logging.getLogger(__name__)

SAMPLES = 64
POLE_MARGIN = 10 * POLE_GUARD
EDGE_POINTS = 12
TOL_INT = 1e-9
TOL_J = 1e-10
MATCH_TOL = 1e-7
XTOL = 1e-12
INNER_GUARD = 1e-14


class LineClass(enum.Enum):
    REGULAR = "regular"
    EXCEPTIONAL_ND = "exceptional-nd"
    EXCEPTIONAL_D = "exceptional-d"


class Method(enum.Enum):
    GFUNCTION = "gfunction"
    ORACLE = "oracle"
    CONTFRAC = "contfrac"


@dataclass(frozen=True)
class SpectralLine:
    energy: float
    x: float
    parity: Parity
    line_class: LineClass
    degeneracy: int
    residual: float
    method: Method = Method.GFUNCTION
    oracle_gap: float | None = None

    @property
    def matched(self) -> bool | None:
        if self.oracle_gap is None:
            return None
        return self.oracle_gap < MATCH_TOL

    def as_row(self) -> dict:
        return {
            "x": self.x,
            "E": self.energy,
            "parity": self.parity.label,
            "class": self.line_class.value,
            "degeneracy": self.degeneracy,
            "residual": self.residual,
            "method": self.method.value,
        }


@dataclass
class IntervalScan:
    """Sign-change brackets of ``G`` inside one pole-free interval.

    Interval ``n`` is ``(n, n+1)``; ``n = -1`` is ``(-Delta, 0)``, the only
    place where ``x = E + g^2`` can be negative.
    """

    n: int
    parity: Parity
    brackets: list = field(default_factory=list)
    suspected_double_roots: list = field(default_factory=list)
    indeterminate: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.brackets)

    def __len__(self):
        return len(self.brackets)


def _interval_bounds(n: int, delta: float, x_max: float | None = None):
    lo = -delta - POLE_MARGIN if n < 0 else n + POLE_MARGIN
    hi = -POLE_MARGIN if n < 0 else n + 1 - POLE_MARGIN
    if x_max is not None:
        hi = min(hi, x_max)
    return lo, hi


def _sample_points(lo: float, hi: float, samples: int, clustered: bool = True) -> np.ndarray:
    """Uniform grid plus points clustered geometrically toward both ends.

    Roots can sit arbitrarily close to a pole when Delta is small; the
    clustered points keep them visible.
    """
    pts = [np.linspace(lo, hi, samples)]
    width = hi - lo
    if clustered and width > 4 * POLE_MARGIN:
        offsets = np.geomspace(POLE_MARGIN, width / (2 * samples), EDGE_POINTS)
        pts += [lo + offsets, hi - offsets]
    x = np.unique(np.concatenate(pts))
    return x[(x >= lo) & (x <= hi)]


def _brackets_from_samples(xs, vals, errs):
    """Sign-change brackets, skipping samples whose sign is not resolved."""
    ok = np.abs(vals) > gf.SIGN_MARGIN * errs
    idx = np.flatnonzero(ok)
    brackets = []
    for i, j in zip(idx[:-1], idx[1:]):
        if np.sign(vals[i]) != np.sign(vals[j]):
            brackets.append((float(xs[i]), float(xs[j])))
    tangent = []
    a = np.abs(vals)
    for i in range(1, len(xs) - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and np.sign(vals[i - 1]) == np.sign(vals[i + 1]) == np.sign(vals[i]):
            if a[i] < 10 * errs[i]:
                tangent.append(float(xs[i]))
    bad = [float(x) for x in xs[~ok]]
    return brackets, tangent, bad


def _pole_sign(m: int, params: RabiParams, side: int, cache: dict) -> int:
    """Sign of ``G`` just right (``side=1``) or left (``side=-1``) of the pole ``m``; 0 if unresolved."""
    key = (m, params.parity)
    if key not in cache:
        res = gf.pole_residue(m, params)
        cache[key] = res.sign
    return side * cache[key]


def _edge_brackets(n, xs, vals, errs, params, x_max, cache):
    """Roots squeezed between a pole and the first or last sample of interval ``n``.

    The sign of ``G`` at the pole side follows from the residue; a
    mismatch with the edge sample means a root inside the pole margin.
    """
    if params.delta == 0 or params.g == 0:
        return []
    out = []
    ends = []
    if n >= 0:
        ends.append((n, 1, 0))
    if x_max is None or n + 1 - POLE_MARGIN <= x_max:
        ends.append((n + 1, -1, -1))
    for pole, side, i in ends:
        edge = vals[i]
        if not abs(edge) > gf.SIGN_MARGIN * errs[i]:
            continue
        limit = _pole_sign(pole, params, side, cache)
        if limit and limit != np.sign(edge):
            inner = pole + side * INNER_GUARD * max(1, pole)
            out.append((float(min(inner, xs[i])), float(max(inner, xs[i]))))
    return out


def _escalate(xs, vals, errs, params):
    bad = np.flatnonzero(~(np.abs(vals) > gf.SIGN_MARGIN * errs))
    for i in bad:
        ev = gf.g_regular(float(xs[i]), params, strict=False)
        vals[i], errs[i] = ev.value, ev.truncation_error
    return vals, errs


def scan_interval(n: int, params: RabiParams, samples: int = SAMPLES, x_max: float | None = None) -> IntervalScan:
    """Bracket the roots of ``G`` in interval ``n`` (see :class:`IntervalScan`).

    A second pass evaluates the midpoints of the first grid, doubling the
    sampling density, so that close root pairs are not lost.
    """
    if samples < 8:
        raise ValueError("samples must be >= 8")
    p = params.reduced()
    lo, hi = _interval_bounds(n, p.delta, x_max)
    out = IntervalScan(n, p.parity)
    if hi <= lo:
        return out
    xs = _sample_points(lo, hi, samples)
    vals, errs = gf.g_regular_grid(xs, p, escalate=False)
    mids = 0.5 * (xs[:-1] + xs[1:])
    mv, me = gf.g_regular_grid(mids, p, escalate=False)
    allx = np.empty(xs.size + mids.size)
    allx[0::2], allx[1::2] = xs, mids
    allv = np.empty_like(allx)
    alle = np.empty_like(allx)
    allv[0::2], allv[1::2] = vals, mv
    alle[0::2], alle[1::2] = errs, me
    allv, alle = _escalate(allx, allv, alle, p)
    out.brackets, out.suspected_double_roots, out.indeterminate = _brackets_from_samples(allx, allv, alle)
    out.brackets = sorted(out.brackets + _edge_brackets(n, allx, allv, alle, p, x_max, {}))
    return out


def scan_all(params: RabiParams, x_max: float, samples: int = SAMPLES, tol: float = DEFAULT_TOL) -> dict:
    """Scan every interval below ``x_max`` for both parities with one vectorised sweep.

    Returns ``{parity: [IntervalScan, ...]}`` ordered by interval index,
    starting with the negative interval ``n = -1``.
    """
    p = params.reduced()
    chunks = []
    for n in range(-1, int(math.ceil(x_max))):
        lo, hi = _interval_bounds(n, p.delta, x_max)
        if n < 0 and p.delta == 0:
            continue
        if hi <= lo:
            continue
        xs = _sample_points(lo, hi, 2 * samples - 1)
        chunks.append((n, xs))
    allx = np.concatenate([c[1] for c in chunks]) if chunks else np.empty(0)
    values, errors = gf.g_regular_grid_both(allx, p, tol=tol)
    result = {}
    for parity in Parity:
        pp = p.with_parity(parity)
        v, e = _escalate(allx, values[parity].copy(), errors[parity].copy(), pp)
        scans = []
        start = 0
        cache = {}
        for n, xs in chunks:
            sl = slice(start, start + xs.size)
            start += xs.size
            s = IntervalScan(n, parity)
            s.brackets, s.suspected_double_roots, s.indeterminate = _brackets_from_samples(xs, v[sl], e[sl])
            s.brackets = sorted(s.brackets + _edge_brackets(n, xs, v[sl], e[sl], pp, x_max, cache))
            scans.append(s)
        result[parity] = scans
    return result


def _bracketed(f, a: float, b: float, xtol: float) -> float:
    """Brent's method; bisection-safeguarded, never leaves ``[a, b]``."""
    return scipy.optimize.brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def refine_root(
    bracket,
    params: RabiParams,
    xtol: float = XTOL,
    tol: float = DEFAULT_TOL,
    precision_bits: int = BASE_BITS,
) -> SpectralLine:
    """Refine a sign-change bracket of ``G`` to a regular spectral line.

    Each evaluation starts at ``precision_bits`` and escalates on its own
    when the sign is not resolved.
    """
    p = params.reduced()
    a, b = map(float, bracket)
    # brackets squeezed against a pole need a finer guard than the default
    guard = min(rec.POLE_GUARD, 0.5 * min(rec.nearest_integer(a)[1], rec.nearest_integer(b)[1]))

    def f(x):
        return gf.g_regular(x, p, tol=tol, precision_bits=precision_bits, strict=False, pole_guard=guard).value

    fa, fb = f(a), f(b)
    if fa == 0:
        return _regular_line(a, p, 0.0, params.omega)
    if fb == 0:
        return _regular_line(b, p, 0.0, params.omega)
    if np.sign(fa) == np.sign(fb):
        raise LostBracket(f"no sign change on [{a}, {b}] for parity {p.parity.label}")
    x = _bracketed(f, a, b, xtol)
    return _regular_line(x, p, abs(f(x)), params.omega)


def _regular_line(x, p, residual, omega):
    return SpectralLine(
        energy=(x - p.g ** 2) * omega,
        x=x,
        parity=p.parity,
        line_class=LineClass.REGULAR,
        degeneracy=1,
        residual=residual,
    )


def _decoupled_lines(p: RabiParams, x_max: float, omega: float):
    """g = 0: E = n pm Delta (-1)^n exactly."""
    lines = []
    for parity in Parity:
        d = p.delta * parity.sign
        for n in range(int(math.ceil(x_max + p.delta)) + 1):
            e = n + d * (-1) ** n
            if e < x_max:
                near = abs(e - round(e)) < TOL_INT and round(e) >= 0
                lines.append(
                    SpectralLine(e * omega, e, parity, LineClass.EXCEPTIONAL_ND if near else LineClass.REGULAR, 1, 0.0)
                )
    return _mark_degeneracies(lines)


def _displaced_lines(p: RabiParams, x_max: float, omega: float):
    """Delta = 0: both parities carry E = n - g^2 for every n."""
    lines = []
    for n in range(int(math.floor(x_max - 1e-12)) + 1):
        for parity in Parity:
            lines.append(
                SpectralLine((n - p.g ** 2) * omega, float(n), parity, LineClass.EXCEPTIONAL_D, 2, 0.0)
            )
    return lines


def _mark_degeneracies(lines):
    out = []
    for ln in lines:
        deg = sum(1 for o in lines if abs(o.energy - ln.energy) < 1e-12)
        out.append(replace(ln, degeneracy=deg))
    return out


def exceptional_lines(params: RabiParams, x_max: float, tol_j: float = TOL_J) -> list:
    """Exceptional lines at ``x = m <= x_max`` for both parities."""
    p = params.reduced()
    lines = []
    for m in range(0, int(math.floor(x_max)) + 1):
        if m >= 1:
            kj = gf.judd_relative(m, p)
            if kj < tol_j:
                for parity in Parity:
                    lines.append(
                        SpectralLine((m - p.g ** 2) * params.omega, float(m), parity, LineClass.EXCEPTIONAL_D, 2, kj)
                    )
                continue
        for parity in Parity:
            ev = gf.g_exceptional_nd(m, p.with_parity(parity))
            if abs(ev.value) < tol_j:
                lines.append(
                    SpectralLine((m - p.g ** 2) * params.omega, float(m), parity, LineClass.EXCEPTIONAL_ND, 1, abs(ev.value))
                )
    return lines


def full_spectrum(
    params: RabiParams,
    x_max: float,
    tol: float = DEFAULT_TOL,
    samples: int = SAMPLES,
    check: bool = True,
    tol_j: float = TOL_J,
    xtol: float = XTOL,
    precision_bits: int = BASE_BITS,
) -> list:
    """All spectral lines of both parities with ``x = E + g^2 < x_max``, sorted by energy.

    ``params.parity`` is ignored. With ``check`` every line carries its
    distance to the nearest oracle eigenvalue of the same parity.
    """
    if not x_max > 0:
        raise ValueError("x_max must be > 0")
    p = params.reduced()
    if p.g == 0:
        lines = _decoupled_lines(p, x_max, params.omega)
    elif p.delta == 0:
        lines = _displaced_lines(p, x_max, params.omega)
    else:
        lines = []
        scans = scan_all(p, x_max, samples, tol)
        for parity, per in scans.items():
            pp = p.with_parity(parity)
            for s in per:
                for br in s.brackets:
                    line = refine_root(br, pp, xtol, tol, precision_bits)
                    lines.append(replace(line, energy=line.energy * params.omega))
        lines += [ln for ln in exceptional_lines(p, x_max, tol_j) if ln.x < x_max]
    lines.sort(key=lambda ln: (ln.energy, ln.parity.value))
    if check:
        lines = attach_oracle_gaps(lines, params, x_max)
    return lines


def attach_oracle_gaps(lines, params: RabiParams, x_max: float, rtol: float = 1e-11):
    p = params.reduced()
    ref = {par: oracle.rabi_levels_below(p.with_parity(par), x_max + 0.5, rtol) for par in Parity}
    out = []
    for ln in lines:
        e = ln.energy / params.omega
        gap = float(np.min(np.abs(ref[ln.parity] - e))) if ref[ln.parity].size else math.inf
        out.append(replace(ln, oracle_gap=gap))
    return out


def compare_with_oracle(lines, params: RabiParams, x_max: float, tol: float = MATCH_TOL, rtol: float = 1e-11) -> dict:
    """One-to-one matching of G-derived energies against oracle energies per parity.

    Returns the maximal deviation and the unmatched entries on both sides.
    """
    p = params.reduced()
    report = {"max_dev": 0.0, "missing": [], "extra": [], "count": 0}
    for par in Parity:
        ref = list(oracle.rabi_levels_below(p.with_parity(par), x_max, rtol))
        mine = sorted(ln.energy / params.omega for ln in lines if ln.parity is par and ln.x < x_max)
        for e in mine:
            if not ref:
                report["extra"].append((par.label, e))
                continue
            j = int(np.argmin(np.abs(np.array(ref) - e)))
            dev = abs(ref[j] - e)
            if dev < tol:
                report["max_dev"] = max(report["max_dev"], dev)
                report["count"] += 1
                ref.pop(j)
            else:
                report["extra"].append((par.label, e))
        # levels sitting right at the window edge are not counted as missing
        report["missing"] += [(par.label, e) for e in ref if e + p.g ** 2 < x_max - 1e-6]
    return report


# ---------------------------------------------------------------- Judd loci and exceptional zeros


def judd_points(m: int, delta: float, g_range=(1e-3, 3.0), samples: int = 400) -> list:
    """Couplings ``g`` at which ``K_m(m; g, Delta) = 0`` for fixed ``Delta``.

    ``g^m K_m`` is a polynomial in ``g``, so a sign scan plus Brent suffices.
    """
    if m < 1:
        raise PreconditionViolated("m must be >= 1")

    def h(g):
        return gf.judd_condition(m, RabiParams(g, delta)) * g ** m

    gs = np.linspace(g_range[0], g_range[1], samples)
    hv = np.array([h(g) for g in gs])
    roots = []
    for i in range(len(gs) - 1):
        if hv[i] == 0:
            roots.append(float(gs[i]))
        elif np.sign(hv[i]) != np.sign(hv[i + 1]):
            roots.append(float(scipy.optimize.brentq(h, gs[i], gs[i + 1], xtol=1e-15)))
    return roots


def exceptional_nd_zeros(m: int, parity, g_grid, delta_max: float = 1.0, samples: int = 200) -> list:
    """Zeros of ``G^(m)`` in ``Delta`` on ``(0, delta_max]`` for each ``g`` of ``g_grid``.

    Returns ``(g, Delta, residual)`` triples. ``G^(m)`` diverges like
    ``-2(m+1)/Delta`` at the origin, so the Delta grid starts at
    ``delta_max / samples``.
    """
    par = Parity.parse(parity)
    out = []
    deltas = np.linspace(delta_max / samples, delta_max, samples)
    for g in np.atleast_1d(np.asarray(g_grid, dtype=float)):
        if not g > 0:
            continue

        def h(d):
            return gf.g_exceptional_nd(m, RabiParams(g, d, parity=par)).value

        vals = np.array([h(d) for d in deltas])
        for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
            d = float(scipy.optimize.brentq(h, deltas[i], deltas[i + 1], xtol=1e-14))
            out.append((float(g), d, abs(h(d))))
    return out


# ---------------------------------------------------------------- sweeps


@dataclass
class Crossing:
    g: float
    energy: float
    levels: tuple
    m: int
    judd_value: float
    g_judd: float | None


@dataclass
class Sweep:
    g_grid: np.ndarray
    curves: dict
    crossings: list = field(default_factory=list)
    ambiguities: list = field(default_factory=list)
    min_same_parity_gap: dict = field(default_factory=dict)


def _levels_at(params, g, x_max):
    lines = full_spectrum(replace(params, g=g), x_max, check=False)
    return {par: np.array(sorted(ln.energy for ln in lines if ln.parity is par)) for par in Parity}


def track_curves(g_grid, levels_per_g, window):
    """Nearest-neighbour continuation between adjacent grid points.

    ``levels_per_g`` is a list of sorted arrays of equal length. Returns
    the tracked matrix (grid x level) and the indices of ambiguous steps.
    """
    n_levels = levels_per_g[0].size
    tracked = np.empty((len(g_grid), n_levels))
    tracked[0] = levels_per_g[0]
    ambiguous = []
    for k in range(1, len(g_grid)):
        prev, cur = tracked[k - 1], levels_per_g[k]
        cost = np.abs(prev[:, None] - cur[None, :])
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        tracked[k, rows] = cur[cols]
        crowded = (cost < window).sum(axis=1) > 1
        if np.any(crowded):
            ambiguous.append((k, np.flatnonzero(crowded).tolist()))
    return tracked, ambiguous


def sweep_coupling(params_base: RabiParams, g_grid, x_max: float, n_levels: int | None = None) -> Sweep:
    """Level curves of both parities over a monotone coupling grid.

    Opposite-parity curves may cross; each crossing is located by linear
    interpolation and paired with the nearest zero of the Judd condition.
    """
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size == 0 or np.any(np.diff(g_grid) <= 0):
        raise ValueError("g_grid must be non-empty and strictly increasing")
    p = params_base.reduced()
    raw = [_levels_at(p, g, x_max) for g in g_grid]
    if n_levels is None:
        n_levels = min(min(r[par].size for par in Parity) for r in raw)
    # Hellmann-Feynman: |dE/dg| <= |<a + a^dag>| <= 2 sqrt(x_max) + 4 g
    dg = float(np.min(np.diff(g_grid))) if g_grid.size > 1 else 0.0
    window = 0.25 * dg
    sweep = Sweep(g_grid, {})
    for par in Parity:
        levels = [r[par][:n_levels] for r in raw]
        tracked, amb = track_curves(g_grid, levels, window)
        sweep.curves[par] = tracked
        sweep.ambiguities += [(par.label, k, idx) for k, idx in amb]
        gaps = np.diff(tracked, axis=1)
        sweep.min_same_parity_gap[par] = float(gaps.min()) if gaps.size else math.inf
    ev, od = sweep.curves[Parity.EVEN], sweep.curves[Parity.ODD]
    for i in range(n_levels):
        for j in range(n_levels):
            diff = ev[:, i] - od[:, j]
            for k in range(len(g_grid) - 1):
                if np.sign(diff[k]) != np.sign(diff[k + 1]) or diff[k] == 0:
                    t = 0.0 if diff[k] == diff[k + 1] else diff[k] / (diff[k] - diff[k + 1])
                    gc = g_grid[k] + t * (g_grid[k + 1] - g_grid[k])
                    ec = ev[k, i] + t * (ev[k + 1, i] - ev[k, i])
                    sweep.crossings.append(_crossing(gc, ec, (i, j), p, g_grid[k], g_grid[k + 1]))
    sweep.crossings.sort(key=lambda c: (c.g, c.energy))
    return sweep


def _crossing(gc, ec, levels, p, g_lo, g_hi):
    m = max(1, int(round(ec / p.omega + gc ** 2)))
    judd = gf.judd_condition(m, RabiParams(max(gc, 1e-12), p.delta))
    g_judd = None
    if gc > 0:
        lo, hi = max(g_lo, 1e-9), g_hi

        def h(g):
            return gf.judd_condition(m, RabiParams(g, p.delta)) * g ** m

        if np.sign(h(lo)) != np.sign(h(hi)):
            g_judd = float(scipy.optimize.brentq(h, lo, hi, xtol=1e-14))
    return Crossing(float(gc), float(ec), levels, m, float(judd), g_judd)


# ---------------------------------------------------------------- census


@dataclass
class ZeroCensus:
    """Root counts of ``G`` per unit interval ``(n, n+1)``.

    ``removed_poles`` lists Judd points ``x = m``: the pole of ``G`` at ``m``
    cancels there and the doubly degenerate level at ``x = m`` is not a zero
    of ``G``, so it is counted in neither neighbouring interval. Findings
    next to a removed pole are tagged ``judd`` in their last entry.
    """

    g: float
    delta: float
    parity: Parity
    counts: dict
    negative_roots: int = 0
    indeterminate: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    removed_poles: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_adjacency(counts: dict) -> list:
    """Forbidden patterns: counts outside {0,1,2}, adjacent (2,2) or (0,0) pairs.

    Entries are ``(kind, n, count)`` with ``n`` the left end of the interval.
    """
    found = []
    keys = sorted(counts)
    for n in keys:
        if counts[n] not in (0, 1, 2):
            found.append(("count", n, counts[n]))
    for a, b in zip(keys[:-1], keys[1:]):
        if b == a + 1 and counts[a] == counts[b] and counts[a] in (0, 2):
            found.append(("adjacent", a, counts[a]))
    return found


def zero_census(params_grid, x_max: float, samples: int = SAMPLES, tol_j: float = TOL_J) -> list:
    """Count roots of ``G_pm`` in every unit interval ``(n, n+1)`` with ``n + 1 <= x_max``.

    ``params_grid`` is an iterable of :class:`RabiParams` (parity ignored;
    both parities are censused). Conjecture violations are reported, never
    raised. Intervals with unresolved samples or suspected double roots are
    listed as indeterminate.
    """
    out = []
    for params in params_grid:
        p = params.reduced()
        top = float(math.floor(x_max))
        scans = scan_all(p, top, samples)
        removed = [m for m in range(1, int(top)) if gf.judd_relative(m, p) < tol_j]
        for parity, per in scans.items():
            counts = {}
            neg = 0
            indeterminate = []
            for s in per:
                if s.n < 0:
                    neg = len(s.brackets)
                    continue
                counts[s.n] = len(s.brackets)
                if s.indeterminate or s.suspected_double_roots:
                    indeterminate.append(s.n)
            c = ZeroCensus(p.g, p.delta, parity, counts, neg, indeterminate, removed_poles=removed)
            c.violations = [
                v + (("judd",) if v[1] in removed or v[1] + 1 in removed or v[1] + 2 in removed else ())
                for v in check_adjacency(counts)
            ]
            if c.violations:
                log.warning("census finding at g=%g delta=%g parity=%s: %s", p.g, p.delta, parity.label, c.violations)
            out.append(c)
    return out
