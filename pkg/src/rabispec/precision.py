"""Working-precision helpers.

53 bits means native floats; anything larger goes through :mod:`mpmath`.
"""
from __future__ import annotations

import contextlib
import os

import mpmath

BASE_BITS = 53
MAX_BITS = 424


def default_bits() -> int:
    """Starting precision, overridable through ``RABISPEC_PRECISION_BITS``."""
    raw = os.environ.get("RABISPEC_PRECISION_BITS")
    if not raw:
        return BASE_BITS
    bits = int(raw)
    if bits < BASE_BITS:
        raise ValueError(f"RABISPEC_PRECISION_BITS must be >= {BASE_BITS}")
    return bits


def escalation_ladder(start: int = BASE_BITS, cap: int = MAX_BITS):
    bits = start
    while bits <= cap:
        yield bits
        bits *= 2


def unit_roundoff(bits: int) -> float:
    return 2.0 ** (-bits)


@contextlib.contextmanager
def working_precision(bits: int):
    """Yield a number constructor (``float`` or ``mpmath.mpf``) for ``bits`` mantissa bits."""
    if bits <= BASE_BITS:
        yield float
    else:
        with mpmath.workprec(bits):
            yield mpmath.mpf

