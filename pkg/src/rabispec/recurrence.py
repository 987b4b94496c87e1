"""Three-term recurrence for the Frobenius coefficients K_n(x).

The local solution analytic at ``y = z + g = 0`` is ``sum K_n y^n`` with

    n K_n = f_{n-1}(x) K_{n-1} - K_{n-2},
    f_n(x) = 2g + (n - x + Delta^2 / (x - n)) / (2g).

The coefficients depend on Delta only through Delta^2, so both parity
sectors share them; parity enters the spectral functions through the sign
of Delta.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NoConvergence, OutsideDomain, PoleAtInteger, PreconditionViolated
from .params import RabiParams
from .precision import BASE_BITS, MAX_BITS, unit_roundoff, working_precision

DEFAULT_TOL = 1e-14
POLE_GUARD = 1e-9
MAX_ORDER = 4000


class SeriesVariant(enum.Enum):
    REGULAR = "regular"
    EXCEPTIONAL_ND = "exceptional-nd"
    EXCEPTIONAL_D = "exceptional-d"


@dataclass(frozen=True)
class CoefficientSeries:
    """Coefficients K_0..K_N together with the data that produced them.

    ``coeffs`` holds floats at 53 bits and ``mpmath.mpf`` values above.
    ``error_bounds`` is a running first-order bound on the absolute
    rounding error of each coefficient.
    """

    x: object
    coeffs: tuple
    variant: SeriesVariant
    truncation_order: int
    precision_bits: int
    g: float
    delta: float
    m: int | None = None
    error_bounds: tuple = field(default=(), repr=False)

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, n):
        return self.coeffs[n]

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def nearest_integer(x) -> tuple[int, float]:
    """Nearest non-negative integer to ``x`` and the distance to it."""
    n = max(0, int(math.floor(float(x) + 0.5)))
    return n, abs(float(x) - n)


def _f(n, x, g, d2):
    return 2 * g + (n - x + d2 / (x - n)) / (2 * g)


def _f_error(n, x, g, d2, u):
    """Rounding bound for :func:`_f`: a few ulps of the magnitudes of its parts."""
    return 4 * u * (2 * g + (abs(n) + abs(x) + d2 / abs(x - n)) / (2 * g))


def _require_coupling(g):
    if not g > 0:
        raise PreconditionViolated("the recurrence needs g > 0")


def f_coefficient(n: int, x, params: RabiParams, pole_guard: float = POLE_GUARD):
    """Recurrence coefficient ``f_n(x)``.

    Raises :class:`PoleAtInteger` when ``|x - n| < pole_guard``.
    """
    p = params.reduced()
    _require_coupling(p.g)
    if abs(x - n) < pole_guard:
        raise PoleAtInteger(x, n, pole_guard)
    return _f(n, x, p.g, p.signed_delta ** 2)


def _check_pole_free(x, max_order, pole_guard):
    n, dist = nearest_integer(x)
    if n <= max_order and dist < pole_guard:
        raise PoleAtInteger(x, n, pole_guard)
    return n, dist


def _run(seed, start, x, g, d2, num, u, stop, max_order, seed_errors=None):
    """Propagate the recurrence from ``K[start-2], K[start-1]`` onward.

    ``seed`` is the list of coefficients up to ``start-1``; ``stop(n, K)``
    decides termination. Returns coefficients and error bounds.
    """
    K = list(seed)
    E = list(seed_errors) if seed_errors is not None else [u * abs(k) for k in K]
    n = start
    while True:
        if n > max_order:
            raise NoConvergence(f"series did not meet tolerance by order {max_order}")
        fn = _f(n - 1, x, g, d2)
        a = fn * K[n - 1]
        k = (a - K[n - 2]) / n
        K.append(k)
        ef = _f_error(n - 1, x, g, d2, u) * abs(K[n - 1])
        e = (abs(fn) * E[n - 1] + ef + E[n - 2] + u * (2 * abs(a) + abs(K[n - 2]))) / n + u * abs(k)
        E.append(e)
        if stop(n, K):
            return K, E
        n += 1


def _tail_stop(x, g, tol, weight, lower):
    gf = float(g)
    xf = float(x)

    def stop(n, K):
        if n < lower or n <= xf + 1:
            return False
        return all(abs(float(K[j])) * gf ** j * weight < tol for j in (n, n - 1, n - 2))

    return stop


def _cancellation(K, E, g):
    """Largest weighted error bound relative to the largest weighted term."""
    gf = float(g)
    big = max(abs(float(k)) * gf ** n for n, k in enumerate(K))
    err = max(float(e) * gf ** n for n, e in enumerate(E))
    return err / big if big > 0 else 0.0


def regular_series(
    x,
    params: RabiParams,
    tol: float = DEFAULT_TOL,
    max_order: int = MAX_ORDER,
    precision_bits: int = BASE_BITS,
    max_bits: int = MAX_BITS,
    pole_guard: float = POLE_GUARD,
) -> CoefficientSeries:
    """Regular-variant series seeded ``K_0 = 1, K_1 = f_0(x)``.

    Truncates once ``|K_N g^N| * max(1, Delta/dist(x, N_0))`` and its two
    predecessors are all below ``tol``. Precision doubles (up to
    ``max_bits``) while the running error bound exceeds ``2**(-bits/2)``
    of the largest weighted term.
    """
    p = params.reduced()
    _require_coupling(p.g)
    _, dist = _check_pole_free(x, max_order, pole_guard)
    weight = max(1.0, p.delta / dist) if dist > 0 else 1.0
    bits = precision_bits
    while True:
        with working_precision(bits) as num:
            xx, g, d2 = num(x), num(p.g), num(p.signed_delta) ** 2
            u = unit_roundoff(bits)
            seed = [num(1), _f(0, xx, g, d2)]
            seed_errors = [num(0), _f_error(0, xx, g, d2, u) + u * abs(seed[1])]
            stop = _tail_stop(x, p.g, tol, weight, lower=2)
            K, E = _run(seed, 2, xx, g, d2, num, u, stop, max_order, seed_errors)
            ratio = _cancellation(K, E, p.g)
        if ratio <= 2.0 ** (-bits / 2) or bits * 2 > max_bits:
            break
        bits *= 2
        tol = tol * 2.0 ** (-bits / 2)
    return CoefficientSeries(
        x=x if bits <= BASE_BITS else xx,
        coeffs=tuple(K),
        variant=SeriesVariant.REGULAR,
        truncation_order=len(K) - 1,
        precision_bits=bits,
        g=p.g,
        delta=p.signed_delta,
        error_bounds=tuple(E),
    )


def exceptional_nd_series(
    m: int,
    params: RabiParams,
    tol: float = DEFAULT_TOL,
    max_order: int = MAX_ORDER,
    precision_bits: int = BASE_BITS,
) -> CoefficientSeries:
    """Series at ``x = m`` seeded ``K_m = 0, K_{m+1} = 1``; earlier slots are zero."""
    if m < 0:
        raise PreconditionViolated("m must be >= 0")
    p = params.reduced()
    _require_coupling(p.g)
    with working_precision(precision_bits) as num:
        xx, g, d2 = num(m), num(p.g), num(p.signed_delta) ** 2
        u = unit_roundoff(precision_bits)
        seed = [num(0)] * (m + 1) + [num(1)]
        stop = _tail_stop(m, p.g, tol * p.g ** (m + 1), 1.0, lower=m + 3)
        K, E = _run(seed, m + 2, xx, g, d2, num, u, stop, max_order + m)
    E = [0.0] * (m + 2) + list(E[m + 2:])
    return CoefficientSeries(
        x=m,
        coeffs=tuple(K),
        variant=SeriesVariant.EXCEPTIONAL_ND,
        truncation_order=len(K) - 1,
        precision_bits=precision_bits,
        g=p.g,
        delta=p.signed_delta,
        m=m,
        error_bounds=tuple(E),
    )


def judd_series(m: int, params: RabiParams, precision_bits: int = BASE_BITS) -> tuple:
    """Exact finite run ``K_0..K_m`` at ``x = m`` from the regular seeds."""
    if m < 1:
        raise PreconditionViolated("the Judd condition needs m >= 1; x = 0 is never degenerate")
    p = params.reduced()
    _require_coupling(p.g)
    with working_precision(precision_bits) as num:
        xx, g, d2 = num(m), num(p.g), num(p.delta) ** 2
        K = [num(1), _f(0, xx, g, d2)]
        for n in range(2, m + 1):
            K.append((_f(n - 1, xx, g, d2) * K[n - 1] - K[n - 2]) / n)
    return tuple(K)


def judd_coefficient(m: int, params: RabiParams, precision_bits: int = BASE_BITS):
    """``K_m(m; g, Delta)``; zero marks a doubly degenerate level at ``E = m - g^2``."""
    return judd_series(m, params, precision_bits)[m]


def extend_series(series: CoefficientSeries, order: int) -> CoefficientSeries:
    """Continue ``series`` with the same recurrence up to ``order``."""
    if order <= series.truncation_order:
        return series
    with working_precision(series.precision_bits) as num:
        xx, g, d2 = num(series.x), num(series.g), num(series.delta) ** 2
        u = unit_roundoff(series.precision_bits)
        K, E = _run(
            list(series.coeffs),
            len(series.coeffs),
            xx,
            g,
            d2,
            num,
            u,
            lambda n, K: n >= order,
            order,
            series.error_bounds or None,
        )
    return CoefficientSeries(
        x=series.x,
        coeffs=tuple(K),
        variant=series.variant,
        truncation_order=len(K) - 1,
        precision_bits=series.precision_bits,
        g=series.g,
        delta=series.delta,
        m=series.m,
        error_bounds=tuple(E),
    )


def recurrence_residual(series: CoefficientSeries) -> float:
    """Largest residual of ``n K_n = f_{n-1} K_{n-1} - K_{n-2}``, relative to the
    magnitude of the terms entering each step, in units of the unit roundoff."""
    K = series.coeffs
    first = 2 if series.variant is not SeriesVariant.EXCEPTIONAL_ND else series.m + 2
    worst = 0.0
    with working_precision(series.precision_bits) as num:
        xx, g, d2 = num(series.x), num(series.g), num(series.delta) ** 2
        for n in range(first, len(K)):
            a = _f(n - 1, xx, g, d2) * K[n - 1]
            res = abs(n * K[n] - a + K[n - 2])
            scale = max(1.0, float(abs(n * K[n])), float(abs(a)), float(abs(K[n - 2])))
            worst = max(worst, float(res) / scale)
    return worst / unit_roundoff(series.precision_bits)


def wavefunction(series: CoefficientSeries, z: complex, tol: float = DEFAULT_TOL) -> tuple[complex, complex]:
    """Evaluate both local expansions of psi(z).

    Returns ``(psi_plus, psi_minus)``: the expansion analytic at ``z = +g``
    and the one analytic at ``z = -g``. At ``z = 0`` their difference is
    the G-function (scaled by ``g^(m+1)`` in the exceptional case).
    """
    g = series.g
    d = series.delta
    z = complex(z)
    r_plus, r_minus = abs(z - g), abs(z + g)
    if not (r_plus < 2 * g and r_minus < 2 * g):
        raise OutsideDomain(f"z={z} is outside the overlap of |z-g|<2g and |z+g|<2g")
    rho = max(r_plus, r_minus)
    # weighted terms decay like (rho / 2g)^n
    ratio = rho / (2 * g)
    extra = int(math.ceil(math.log(tol) / math.log(ratio))) + 10
    s = extend_series(series, max(series.truncation_order, int(math.ceil(float(series.x))) + extra))
    K = [complex(float(k)) for k in s.coeffs]
    w_plus = g - z
    w_minus = z + g
    if s.variant is SeriesVariant.EXCEPTIONAL_ND:
        m = s.m
        sum_plus = sum(K[n] * w_plus ** n for n in range(m + 1, len(K)))
        sum_minus = sum(K[n] * w_minus ** n / (n - m) for n in range(m + 1, len(K)))
        psi_plus = cmath.exp(g * z) * sum_plus
        psi_minus = cmath.exp(-g * z) * (2 * (m + 1) * g / d * w_minus ** m - d * sum_minus)
    else:
        x = float(s.x)
        sum_plus = sum(K[n] * w_plus ** n for n in range(len(K)))
        sum_minus = sum(K[n] * w_minus ** n / (x - n) for n in range(len(K)))
        psi_plus = cmath.exp(g * z) * sum_plus
        psi_minus = cmath.exp(-g * z) * d * sum_minus
    return psi_plus, psi_minus


def weighted_arrays(
    xs, g: float, delta: float, tol: float = DEFAULT_TOL, max_order: int = MAX_ORDER, pole_guard: float = POLE_GUARD
):
    """Vectorised double-precision sums over an array of spectral parameters.

    Returns a dict with the partial sums ``A = sum K_n g^n`` and
    ``B = sum K_n g^n / (x - n)`` (so that ``G_pm = A -+ Delta B``), their
    absolute-value sums, rounding bounds and a tail estimate. Works on the
    weighted coefficients ``W_n = K_n g^n`` to avoid overflow of ``g^n``.
    """
    xs = np.asarray(xs, dtype=float)
    d2 = delta * delta
    u = unit_roundoff(BASE_BITS)
    dist = np.abs(xs - np.clip(np.round(xs), 0, None))
    if xs.size and dist.min() < pole_guard:
        i = int(np.argmin(dist))
        raise PoleAtInteger(float(xs[i]), max(0, int(round(xs[i]))), pole_guard)
    with np.errstate(divide="ignore"):
        weight = np.maximum(1.0, np.where(dist > 0, delta / dist, 1.0))

    def fw(n):
        return g * (2 * g + (n - xs + d2 / (xs - n)) / (2 * g))

    def fw_err(n):
        return 4 * u * g * (2 * g + (n + np.abs(xs) + d2 / np.abs(xs - n)) / (2 * g))

    W0 = np.ones_like(xs)
    W1 = fw(0)
    E0 = np.full_like(xs, u)
    E1 = u * np.abs(W1) + fw_err(0)
    A = W0 + W1
    B = W0 / xs + W1 / (xs - 1)
    absA = np.abs(W0) + np.abs(W1)
    absB = np.abs(W0 / xs) + np.abs(W1 / (xs - 1))
    errA = E0 + E1
    errB = E0 / np.abs(xs) + E1 / np.abs(xs - 1)
    prev2, prev1 = np.abs(W0) * weight, np.abs(W1) * weight
    xmax = float(np.max(xs)) if xs.size else 0.0
    n = 2
    while True:
        if n > max_order:
            raise NoConvergence(f"array series did not converge by order {max_order}")
        fn = fw(n - 1)
        a = fn * W1
        b = g * g * W0
        W2 = (a - b) / n
        E2 = (np.abs(fn) * E1 + fw_err(n - 1) * np.abs(W1) + g * g * E0 + u * (2 * np.abs(a) + np.abs(b))) / n + u * np.abs(W2)
        inv = 1.0 / (xs - n)
        A += W2
        B += W2 * inv
        absA += np.abs(W2)
        absB += np.abs(W2 * inv)
        errA += E2
        errB += E2 * np.abs(inv)
        cur = np.abs(W2) * weight
        if n > xmax + 1 and np.all((cur < tol) & (prev1 < tol) & (prev2 < tol)):
            tail = 2 * (np.abs(W2) + np.abs(W1))
            return {
                "A": A,
                "B": B,
                "absA": absA,
                "absB": absB,
                "errA": errA + u * n * absA,
                "errB": errB + u * n * absB,
                "tail": tail,
                "order": n,
            }
        prev2, prev1 = prev1, cur
        W0, W1, E0, E1 = W1, W2, E1, E2
        n += 1
