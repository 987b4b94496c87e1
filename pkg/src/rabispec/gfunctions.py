"""Spectral-condition functions built on the Frobenius coefficients.

* ``g_regular``         zeros give the regular spectrum, simple poles at x in N_0
* ``g_exceptional_nd``  zeros in (g, Delta) give the non-degenerate level E = m - g^2
* ``judd_condition``    zeros give the doubly degenerate level E = m - g^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import recurrence as rec
from .exceptions import IndeterminateSign, PreconditionViolated
from .params import Parity, RabiParams
from .precision import BASE_BITS, MAX_BITS, unit_roundoff, working_precision

SIGN_MARGIN = 3.0


@dataclass(frozen=True)
class GEvaluation:
    x: float
    value: float
    parity: Parity
    nearest_pole: int
    pole_distance: float
    truncation_error: float
    precision_bits: int
    order: int = 0

    @property
    def indeterminate(self) -> bool:
        return not abs(self.value) > SIGN_MARGIN * self.truncation_error

    @property
    def sign(self) -> int:
        """Sign of the value, or 0 when it is not resolved by the error estimate."""
        if self.indeterminate:
            return 0
        return 1 if self.value > 0 else -1


def _g_sum(series: rec.CoefficientSeries):
    """Sum the regular G-function and a rounding/truncation error estimate."""
    K, E = series.coeffs, series.error_bounds
    bits = series.precision_bits
    u = unit_roundoff(bits)
    with working_precision(bits) as num:
        x, g, d = num(series.x), num(series.g), num(series.delta)
        total = num(0)
        abs_total = 0.0
        err = 0.0
        gn = num(1)
        for n, k in enumerate(K):
            w = 1 - d / (x - n)
            term = k * w * gn
            total += term
            abs_total += float(abs(term))
            err += float(E[n]) * float(abs(w * gn))
            gn *= g
        last = [float(abs(K[j] * g ** j)) for j in (len(K) - 1, len(K) - 2)]
    tail = 2 * sum(last) * max(1.0, abs(float(series.delta)))
    err += u * len(K) * abs_total + tail
    return float(total), err


def g_regular(
    x: float,
    params: RabiParams,
    tol: float = rec.DEFAULT_TOL,
    precision_bits: int = BASE_BITS,
    max_bits: int = MAX_BITS,
    strict: bool = True,
    pole_guard: float = rec.POLE_GUARD,
) -> GEvaluation:
    """Regular G-function ``G_pm(x) = sum K_n (1 - (pm Delta)/(x - n)) g^n``.

    Precision is doubled while the sign is not resolved. With ``strict``
    an unresolved sign at ``max_bits`` raises :class:`IndeterminateSign`;
    otherwise the evaluation is returned and flagged ``indeterminate``.
    """
    p = params.reduced()
    pole, dist = rec.nearest_integer(x)
    bits = precision_bits
    while True:
        s = rec.regular_series(
            x, p, tol=tol, precision_bits=bits, max_bits=bits, pole_guard=pole_guard
        )
        value, err = _g_sum(s)
        ev = GEvaluation(float(x), value, p.parity, pole, dist, err, bits, s.truncation_order)
        if not ev.indeterminate or bits * 2 > max_bits:
            break
        bits *= 2
        tol = tol * 2.0 ** (-bits / 2)
    if strict and ev.indeterminate:
        raise IndeterminateSign(f"|G({x})|={value:.3g} below error estimate {err:.3g}")
    return ev


def g_regular_grid(xs, params: RabiParams, tol: float = rec.DEFAULT_TOL, escalate: bool = True):
    """Evaluate G on an array of spectral parameters.

    Returns ``(values, errors)`` for the parity of ``params``. Points whose
    sign is unresolved in double precision are re-evaluated one by one with
    :func:`g_regular` when ``escalate`` is set.
    """
    values, errors = g_regular_grid_both(xs, params, tol=tol)
    key = params.parity
    v, e = values[key], errors[key]
    if escalate:
        bad = np.flatnonzero(~(np.abs(v) > SIGN_MARGIN * e))
        for i in bad:
            ev = g_regular(float(xs[i]), params, tol=tol, strict=False)
            v[i], e[i] = ev.value, ev.truncation_error
    return v, e


def g_regular_grid_both(xs, params: RabiParams, tol: float = rec.DEFAULT_TOL):
    """Both parities at once from a single coefficient run (they share K_n)."""
    p = params.reduced()
    if not p.g > 0:
        raise PreconditionViolated("G-functions need g > 0")
    xs = np.asarray(xs, dtype=float)
    s = rec.weighted_arrays(xs, p.g, p.delta, tol=tol)
    out_v, out_e = {}, {}
    for parity in Parity:
        d = p.delta * parity.sign
        out_v[parity] = s["A"] - d * s["B"]
        out_e[parity] = s["errA"] + abs(d) * s["errB"] + s["tail"] * max(1.0, p.delta)
    return out_v, out_e


def _gexc_sum(series: rec.CoefficientSeries):
    m = series.m
    K, E = series.coeffs, series.error_bounds
    bits = series.precision_bits
    u = unit_roundoff(bits)
    with working_precision(bits) as num:
        g, d = num(series.g), num(series.delta)
        total = -2 * (m + 1) / d
        abs_total = float(abs(total))
        err = 0.0
        gn = num(1)
        for n in range(m + 1, len(K)):
            w = 1 + d / (n - m)
            term = K[n] * w * gn
            total += term
            abs_total += float(abs(term))
            err += float(E[n]) * float(abs(w * gn))
            gn *= g
        last = float(abs(K[-1] * g ** (len(K) - m - 2)))
    err += u * len(K) * abs_total + 4 * last
    return float(total), err


def g_exceptional_nd(
    m: int,
    params: RabiParams,
    tol: float = rec.DEFAULT_TOL,
    precision_bits: int = BASE_BITS,
) -> GEvaluation:
    """Exceptional G-function

        G^(m)_pm = -2(m+1)/(pm Delta) + sum_{n>m} K_n (1 + (pm Delta)/(n-m)) g^(n-m-1)

    built from the series normalised to ``K_{m+1} = 1``.
    """
    p = params.reduced()
    if not (p.delta > 0 and p.g > 0):
        raise PreconditionViolated("the exceptional G-function needs g > 0 and Delta > 0")
    s = rec.exceptional_nd_series(m, p, tol=tol, precision_bits=precision_bits)
    value, err = _gexc_sum(s)
    return GEvaluation(float(m), value, p.parity, m, 0.0, err, precision_bits, s.truncation_order)


def judd_condition(m: int, params: RabiParams, precision_bits: int = BASE_BITS) -> float:
    """``K_m(m; g, Delta)``; identical for both parities."""
    return float(rec.judd_coefficient(m, params, precision_bits))


def _judd_parts(m: int, p: RabiParams, precision_bits: int = BASE_BITS):
    """``K_m(m)`` and the size of the terms that cancel in its last step."""
    K = rec.judd_series(m, p, precision_bits)
    g, d2 = p.g, p.delta ** 2
    n = m - 1
    fabs = 2 * g + (abs(n - m) + d2 / abs(m - n)) / (2 * g)
    prev2 = float(abs(K[m - 2])) if m >= 2 else 0.0
    return float(K[m]), (fabs * float(abs(K[m - 1])) + prev2) / m


def judd_relative(m: int, params: RabiParams, precision_bits: int = BASE_BITS) -> float:
    """``|K_m(m)|`` divided by the size of the terms that cancel in its last step.

    ``K_m`` shrinks roughly like ``g^m / m!`` regardless of any cancellation,
    so a fixed absolute threshold on :func:`judd_condition` misfires for
    large ``m``. The scale is ``(|f|_{m-1} |K_{m-1}| + |K_{m-2}|) / m``, where
    ``|f|_n`` adds the absolute values of the parts of ``f_n``.
    """
    k, scale = _judd_parts(m, params.reduced(), precision_bits)
    return abs(k) / scale


def pole_residue(m: int, params: RabiParams, tol: float = rec.DEFAULT_TOL) -> GEvaluation:
    """Residue of ``G_pm`` at the pole ``x = m``.

    The pole parts of ``K_n``, ``n > m``, solve the recurrence seeded
    ``0, K_m(m) Delta^2 / (2g(m+1))``, which gives

        Res = K_m(m) g^m Delta^2 / (2(m+1)) * G^(m)_pm

    so the residue vanishes exactly on the two exceptional classes. The
    sign of ``G`` next to the pole is ``sign(Res)`` on the right and
    ``-sign(Res)`` on the left.
    """
    p = params.reduced()
    exc = g_exceptional_nd(m, p, tol=tol)
    if m >= 1:
        k, cancel = _judd_parts(m, p)
        # a few roundings per step, accumulated over m steps
        k_err = 8 * m * unit_roundoff(BASE_BITS) * cancel
    else:
        k, k_err = 1.0, 0.0
    w = p.g ** m * p.delta ** 2 / (2 * (m + 1))
    err = w * (abs(k) * exc.truncation_error + k_err * (abs(exc.value) + exc.truncation_error))
    return GEvaluation(float(m), w * k * exc.value, p.parity, m, 0.0, err, exc.precision_bits, exc.order)


def pole_set(x_max: float) -> list[int]:
    """Integers ``0..floor(x_max)``: the pole positions of ``G_pm`` below ``x_max``."""
    if not x_max > 0:
        raise ValueError("x_max must be > 0")
    return list(range(int(math.floor(x_max)) + 1))
