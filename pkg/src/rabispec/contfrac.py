"""Continued-fraction spectral condition from the minimal solution of the recurrence.

The ratio ``r_1 = K_1/K_0`` of the minimal solution is obtained by running
``r_{n-1} = 1 / (f_{n-1} - n r_n)`` backward from ``r_N = 0``. The spectral
condition is ``F(x) = r_1(x) - f_0(x) = 0``. It does not depend on parity, so
its zeros are the merged spectra of both sectors.

This path exists for cross-checking. It cannot see the non-degenerate
exceptional levels, cannot signal degeneracy, and each zero is accompanied
by a pole that approaches it as the level index grows; :func:`breakdown_study`
measures that approach.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.optimize

from . import gfunctions as gf
from . import recurrence as rec
from .exceptions import NoConvergence, PoleAtInteger, PreconditionViolated
from .params import Parity, RabiParams
from .precision import BASE_BITS, working_precision

FTOL = 1e-12
MAX_DEPTH = 1 << 15


@dataclass(frozen=True)
class ContFracEval:
    x: float
    F_value: float
    depth_used: int
    converged: bool


def _start_depth(x) -> int:
    return max(32, 2 * int(math.ceil(abs(float(x)))) + 32)


def _f_scalar(n, x, g, d2):
    # f_n is infinite at x = n; the backward step then gives r = 0 exactly
    if d2 != 0 and x == n:
        return None
    return 2 * g + (n - x + (d2 / (x - n) if d2 != 0 else 0)) / (2 * g)


def _backward(x, g, d2, depth, num):
    r = num(0)
    for n in range(depth, 1, -1):
        fn = _f_scalar(n - 1, x, g, d2)
        r = num(0) if fn is None else 1 / (fn - n * r)
    return r


def _check(params: RabiParams):
    p = params.reduced()
    if not p.g > 0:
        raise PreconditionViolated("the continued fraction needs g > 0")
    return p


def _ratio_sequence(x, p, depth, ftol, bits, max_depth):
    """Depth-doubling loop; returns (r, depth, converged)."""
    with working_precision(bits) as num:
        xx, g, d2 = num(x), num(p.g), num(p.delta) ** 2
        depth = depth or _start_depth(x)
        prev = _backward(xx, g, d2, depth, num)
        small = 0
        while depth < max_depth:
            depth *= 2
            cur = _backward(xx, g, d2, depth, num)
            if abs(cur - prev) < ftol * max(1, abs(cur)):
                small += 1
                if small == 2:
                    return cur, depth, True
            else:
                small = 0
            prev = cur
        return prev, depth, False


def _default_ftol(bits):
    return FTOL if bits <= BASE_BITS else 2.0 ** (-(bits - 12))


def minimal_ratio(
    x,
    params: RabiParams,
    depth: int | None = None,
    ftol: float | None = None,
    precision_bits: int = BASE_BITS,
    max_depth: int = MAX_DEPTH,
):
    """``K_1/K_0`` of the minimal solution at ``x``.

    The depth doubles until two successive doublings change the ratio by
    less than ``ftol`` (relative to ``max(1, |r|)``).
    """
    p = _check(params)
    r, used, ok = _ratio_sequence(x, p, depth, ftol or _default_ftol(precision_bits), precision_bits, max_depth)
    if not ok:
        raise NoConvergence(f"minimal ratio at x={x} not converged by depth {used}")
    return r


def f_spectral(
    x,
    params: RabiParams,
    ftol: float | None = None,
    precision_bits: int = BASE_BITS,
    depth: int | None = None,
    max_depth: int = MAX_DEPTH,
) -> ContFracEval:
    """``F(x) = r_1(x) - f_0(x)``. Parity of ``params`` is ignored."""
    p = _check(params)
    if x == 0 and p.delta != 0:
        raise PoleAtInteger(x, 0, 0.0)
    r, used, ok = _ratio_sequence(x, p, depth, ftol or _default_ftol(precision_bits), precision_bits, max_depth)
    with working_precision(precision_bits) as num:
        xx, g, d2 = num(x), num(p.g), num(p.delta) ** 2
        value = r - _f_scalar(0, xx, g, d2)
    return ContFracEval(x, value if precision_bits > BASE_BITS else float(value), used, ok)


def f_fixed_depth(x, params: RabiParams, depth: int, precision_bits: int = BASE_BITS):
    """``F(x)`` at a fixed truncation depth, without the convergence loop."""
    p = _check(params)
    with working_precision(precision_bits) as num:
        xx, g, d2 = num(x), num(p.g), num(p.delta) ** 2
        return _backward(xx, g, d2, depth, num) - _f_scalar(0, xx, g, d2)


def f_grid(xs, params: RabiParams, depth: int) -> np.ndarray:
    """Vectorised double-precision ``F`` at fixed depth."""
    p = _check(params)
    xs = np.asarray(xs, dtype=float)
    g, d2 = p.g, p.delta ** 2
    r = np.zeros_like(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        for n in range(depth, 1, -1):
            pole = (xs - (n - 1)) if d2 else np.inf
            fn = 2 * g + ((n - 1) - xs + d2 / pole) / (2 * g)
            r = 1.0 / (fn - n * r)
            if d2:
                r[xs == n - 1] = 0.0
        f0 = 2 * g + (-xs + d2 / xs) / (2 * g) if d2 else 2 * g - xs / (2 * g)
        return r - f0


def converged_depth(x_max: float, params: RabiParams, ftol: float = FTOL, max_depth: int = MAX_DEPTH) -> int:
    """Smallest doubled depth at which ``F`` on a probe grid up to ``x_max`` is stable."""
    probe = np.linspace(-params.reduced().delta - 0.25, x_max, 257) + 1e-3
    depth = _start_depth(x_max)
    prev = f_grid(probe, params, depth)
    while depth < max_depth:
        depth *= 2
        cur = f_grid(probe, params, depth)
        ok = np.abs(cur - prev) < ftol * np.maximum(1, np.abs(cur))
        if np.all(ok[np.isfinite(cur)]):
            return depth
        prev = cur
    raise NoConvergence(f"continued fraction not converged by depth {max_depth}")


@dataclass
class ContFracRoots:
    zeros: list
    poles: list
    depth: int


def _grid(lo, hi, per_unit):
    n = max(16, int(per_unit * (hi - lo)))
    pts = [np.linspace(lo, hi, n)]
    # zero-pole pairs sit close to the integers at higher levels
    for m in range(max(0, int(math.ceil(lo))), int(math.floor(hi)) + 1):
        off = np.geomspace(1e-9, 0.05, 24)
        pts += [m - off, m + off]
    x = np.unique(np.concatenate(pts))
    return x[(x > lo) & (x < hi)]


def contfrac_roots(params: RabiParams, x_max: float, per_unit: int = 2048) -> ContFracRoots:
    """Zeros and poles of ``F`` on ``(-Delta, x_max)`` from a dense sign scan.

    A sign change is refined by Brent's method and classified as a zero
    when ``|F|`` at the converged point is small compared with ``f_0``.
    """
    p = _check(params)
    depth = converged_depth(x_max, p)
    lo = -p.delta - 1e-6
    xs = _grid(lo, x_max, per_unit)
    xs = xs[xs != 0] if p.delta else xs
    vals = f_grid(xs, p, depth)
    good = np.isfinite(vals)
    xs, vals = xs[good], vals[good]
    zeros, poles = [], []

    def f(x):
        return float(f_grid(np.array([x]), p, depth)[0])

    for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        a, b = xs[i], xs[i + 1]
        if a < 0 < b and p.delta:
            # the f_0 pole at x = 0 is a known pole
            poles.append(0.0)
            continue
        x = scipy.optimize.brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        scale = 1 + abs(2 * p.g + (-x + (p.delta ** 2 / x if x else 0)) / (2 * p.g))
        (zeros if abs(f(x)) < 1e-6 * scale else poles).append(x)
    return ContFracRoots(sorted(zeros), sorted(poles), depth)


# ---------------------------------------------------------------- breakdown study


@dataclass
class BreakdownLevel:
    index: int
    x: float
    parity: str
    pole_x: float
    distance: float
    required_bits: int
    resolved: dict


@dataclass
class BreakdownReport:
    g: float
    delta: float
    precisions: tuple
    levels: list = field(default_factory=list)
    resolved_count: dict = field(default_factory=dict)
    capped: dict = field(default_factory=dict)

    def rows(self):
        for lv in self.levels:
            row = {
                "level": lv.index,
                "x": lv.x,
                "parity": lv.parity,
                "pole_x": lv.pole_x,
                "distance": lv.distance,
                "required_bits": lv.required_bits,
            }
            row.update({f"resolved_{b}": lv.resolved[b] for b in self.precisions})
            yield row


def _reference_levels(p: RabiParams, count: int):
    """Float zeros of F, merged over parity, from the G-function path."""
    from .spectrum import LineClass, full_spectrum

    x_max = max(8.0, count / 2 + 4)
    while True:
        lines = full_spectrum(p, x_max, check=False)
        refs, seen = [], set()
        for ln in lines:
            if ln.line_class is LineClass.EXCEPTIONAL_ND:
                continue  # invisible to F
            if ln.line_class is LineClass.EXCEPTIONAL_D:
                if ln.x in seen:
                    continue
                seen.add(ln.x)
            refs.append((ln.x, ln.parity, ln.line_class))
        refs.sort(key=lambda r: r[0])
        if len(refs) >= count + 1:
            return refs[: count + 1]
        x_max *= 1.5


def _refine_zero(x0, parity, p, bits, cls):
    """Zero of ``G`` at ``bits`` starting from a double-precision root."""
    from .spectrum import LineClass

    if cls is LineClass.EXCEPTIONAL_D:
        return mpmath.mpf(round(x0))
    pp = p.with_parity(parity)
    tol = 2.0 ** (-bits + 8)

    def G(x):
        s = rec.regular_series(x, pp, tol=tol, precision_bits=bits, max_bits=bits)
        return gf._g_sum(s)

    with mpmath.workprec(bits):
        target = mpmath.mpf(2) ** (-bits + 16) * max(1, abs(x0))
        w = mpmath.mpf(1e-11) * max(1, abs(x0))
        while True:
            a, b = mpmath.mpf(x0) - w, mpmath.mpf(x0) + w
            fa, fb = G(a)[0], G(b)[0]
            if fa * fb <= 0:
                break
            w *= 16
        # Illinois-modified regula falsi, bracket always kept
        side = 0
        for _ in range(400):
            # increment form: fa, fb are doubles and only set the step size
            c = b - fb * (b - a) / (fb - fa)
            fc, err = G(c)
            if abs(fc) <= err or abs(b - a) < target:
                return c
            if (fc > 0) == (fb > 0):
                b, fb = c, fc
                if side == -1:
                    fa /= 2
                side = -1
            else:
                a, fa = c, fc
                if side == 1:
                    fb /= 2
                side = 1
        return c


def _sign(v):
    return (v > 0) - (v < 0)


def _bisect_event(F, lo, hi, near):
    for _ in range(20):
        mid = mpmath.sqrt(lo * hi)
        if _sign(F(mid)) == near:
            lo = mid
        else:
            hi = mid
    return mpmath.sqrt(lo * hi)


def _float_candidates(z, p, depth, start):
    """First sign flip of double-precision ``F`` on each side of ``z``.

    Returns ``{side: (lo, hi)}`` offset brackets, possibly empty.
    """
    zf = float(z)
    off = np.geomspace(start, 1.0, 720)
    out = {}
    for side in (1, -1):
        v = f_grid(zf + side * off, p, depth)
        s = np.sign(v)
        ok = np.isfinite(v) & (s != 0)
        idx = np.flatnonzero(ok)
        if idx.size < 2:
            continue
        near = s[idx[0]]
        flips = idx[1:][s[idx[1:]] != near]
        if flips.size:
            j = flips[0]
            prev = idx[idx < j][-1]
            out[side] = (off[prev], off[j])
    return out


def _nearest_event(z, p, bits, depth, start, neighbours):
    """Distance from ``z`` to the nearest pole of ``F`` on either side.

    Candidate brackets come from a dense double-precision scan of the
    offset; each is confirmed and bisected in ``bits`` precision. When the
    double-precision scan cannot see the pole, a high-precision scan with
    ratio sqrt(2) takes over. A flip caused by a known neighbouring zero
    ends the search on that side. Returns ``(distance, side)`` or ``(inf, 0)``.
    """
    best = (math.inf, 0)
    with mpmath.workprec(bits):
        t0 = mpmath.mpf(start)
        tiny = mpmath.mpf(2) ** (-bits + 24) * max(1, abs(z))

        def F(side, off):
            return f_fixed_depth(z + side * off, p, depth, bits)

        # a simple zero: opposite signs just left and right of it
        while _sign(F(1, t0)) == _sign(F(-1, t0)) and t0 > tiny:
            t0 /= 256
        cands = _float_candidates(z, p, depth, float(t0)) if float(t0) > 1e-15 * max(1, abs(float(z))) else {}
        for side in (1, -1):
            near = _sign(F(side, t0))
            bracket = None
            if side in cands:
                lo, hi = (mpmath.mpf(v) for v in cands[side])
                if lo >= t0 and _sign(F(side, lo)) == near and _sign(F(side, hi)) != near:
                    bracket = (lo, hi)
            if bracket is None:
                t = t0
                while t < 1:
                    nxt = t * mpmath.sqrt(2)
                    if _sign(F(side, nxt)) != near:
                        bracket = (t, nxt)
                        break
                    t = nxt
            if bracket is None:
                continue
            d = float(_bisect_event(lambda o: F(side, o), bracket[0], bracket[1], near))
            x_ev = float(z) + side * d
            if any(abs(x_ev - n) < max(1e-9, 1e-3 * d) for n in neighbours):
                continue
            if d < best[0]:
                best = (d, side)
    return best


def _resolved_at(z, d, side, p, bits, depth, ref_signs):
    """Do ``bits``-bit evaluations of F separate the zero from its pole?"""
    a = z - side * mpmath.mpf(d) / 2
    c = z + side * mpmath.mpf(d) / 2
    if bits <= BASE_BITS:
        a, c = float(a), float(c)
        if a == c:
            return False
    fa = f_fixed_depth(a, p, depth, bits)
    fc = f_fixed_depth(c, p, depth, bits)
    return _sign(fa) == ref_signs[0] and _sign(fc) == ref_signs[1] and ref_signs[0] != ref_signs[1]


def breakdown_study(
    params: RabiParams,
    level_max: int = 200,
    precision_bits=(53, 212),
    guard_bits: int = 4,
    stop_factor: float = 2.0,
) -> BreakdownReport:
    """Zero-pole separation of ``F`` level by level and the precision it demands.

    For every zero ``z_k`` (both parities merged, ascending) the nearest pole
    of ``F`` is located in high precision at distance ``d_k``.
    ``required_bits = ceil(log2(max(1, |z_k|) / d_k)) + guard_bits`` is the
    model estimate; the ``resolved`` flags come from evaluating ``F`` at each
    requested precision at ``z_k -+ d_k/2`` and comparing signs with the
    high-precision reference. The resolved count of a precision is the
    number of leading consecutive levels it resolves.

    Levels are processed in order until ``level_max``, or until every
    precision but the highest has failed and the highest has resolved
    ``stop_factor`` times the best of the others. A precision that never
    failed is marked ``capped``: its count is then a lower bound.
    """
    p = _check(params)
    precisions = tuple(sorted(precision_bits))
    report = BreakdownReport(p.g, p.delta, precisions)
    failed = {b: None for b in precisions}
    chunk = 32
    refs = _reference_levels(p, chunk)
    prev_d = 0.5
    k = 0
    while k <= level_max:
        if k >= len(refs):
            refs = _reference_levels(p, len(refs) + chunk)
        x0, parity, cls = refs[k]
        zeros_near = [r[0] for r in refs if r[0] != x0]
        est = math.log2(max(1.0, abs(x0)) / prev_d) + 16
        search = 106
        while search < est * 2 + 32:
            search *= 2
        depth = 2 * _start_depth(x0)
        z = _refine_zero(x0, parity, p, search, cls)
        start = min(prev_d, 0.5) / 4096
        d, side = _nearest_event(z, p, search, depth, start, zeros_near)
        if not math.isfinite(d):
            d, side = math.inf, 1
        with mpmath.workprec(search):
            ref = (
                _sign(f_fixed_depth(z - side * mpmath.mpf(d) / 2, p, depth, search)),
                _sign(f_fixed_depth(z + side * mpmath.mpf(d) / 2, p, depth, search)),
            ) if math.isfinite(d) else (1, -1)
        resolved = {}
        for b in precisions:
            if not math.isfinite(d):
                resolved[b] = True
                continue
            with mpmath.workprec(max(b, BASE_BITS)):
                resolved[b] = bool(_resolved_at(z, d, side, p, b, depth, ref))
            if not resolved[b] and failed[b] is None:
                failed[b] = k
        req = guard_bits + (math.ceil(math.log2(max(1.0, abs(x0)) / d)) if math.isfinite(d) and d > 0 else 0)
        report.levels.append(
            BreakdownLevel(k, float(z), parity.label, float(z) + side * d, d, req, resolved)
        )
        if math.isfinite(d):
            prev_d = min(prev_d, d) if k > 2 else prev_d
        k += 1
        lower = precisions[:-1]
        if lower and all(failed[b] is not None for b in lower):
            top = precisions[-1]
            if failed[top] is not None or k >= stop_factor * max(failed[b] for b in lower):
                break
    for b in precisions:
        report.resolved_count[b] = failed[b] if failed[b] is not None else len(report.levels)
        report.capped[b] = failed[b] is None
    return report


def parity_of_zero(x: float, params: RabiParams) -> Parity:
    """Sector whose G-function changes sign across ``x`` (smaller ``|G|`` wins)."""
    p = params.reduced()
    vals = {par: abs(gf.g_regular(x, p.with_parity(par), strict=False).value) for par in Parity}
    return min(vals, key=vals.get)
