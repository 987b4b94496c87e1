"""Two- and three-qubit Dicke models: quasi-exact conditions, the one-photon
exceptional state, and oracle-driven coupling sweeps.

Couplings enter the conditions through ``g = g1 + g2``; with equal couplings
``g1 = g2 = g/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import oracle
from .exceptions import PreconditionViolated
from .params import Dicke2Params, Dicke3Params, Parity

TOL_Q = 1e-12


@dataclass(frozen=True)
class QuasiExactCondition:
    """Value of a quasi-exact condition for photon number ``N`` in one parity.

    ``bracket`` is the coupling-dependent factor, ``factor`` the linear one
    whose zero (``Delta2 = -+Delta1``) is the symmetric-singlet branch.
    """

    photon_number: int
    parity: Parity
    residual: float
    satisfied: bool
    bracket: float
    factor: float
    singlet: bool
    vanished: tuple = ()


def _equal(params: Dicke2Params):
    p = params.reduced()
    if not math.isclose(p.g1, p.g2, rel_tol=1e-14, abs_tol=1e-300):
        raise PreconditionViolated(f"equal couplings required, got g1={p.g1}, g2={p.g2}")
    return p


def _vanished(bracket, factor, tol):
    out = []
    if abs(bracket) < tol:
        out.append("bracket")
    if abs(factor) < tol:
        out.append("singlet")
    return tuple(out)


def n1_condition(params: Dicke2Params, tol_q: float = TOL_Q) -> QuasiExactCondition:
    """One-photon level ``E = 1``: ``(s Delta1 - Delta2) [1 - (Delta2 + s Delta1)^2] = 0``.

    ``s`` is the parity sign. The bracket does not involve ``g``, so the
    level exists for every coupling once it vanishes; ``satisfied`` refers
    to the bracket and the singlet factor is reported on its own.
    """
    p = _equal(params)
    s = p.parity.sign
    bracket = 1 - (p.delta2 + s * p.delta1) ** 2
    factor = s * p.delta1 - p.delta2
    return QuasiExactCondition(
        1, p.parity, bracket, abs(bracket) < tol_q, bracket, factor, abs(factor) < tol_q, _vanished(bracket, factor, tol_q)
    )


def n2_bracket(delta1: float, delta2: float, parity) -> float:
    """``g^2`` at which the two-photon condition's bracket vanishes."""
    s = Parity.parse(parity).sign
    return (2 - (delta2 + s * delta1) ** 2 / 2) * (1 - (delta2 - s * delta1) ** 2)


def n2_condition(params: Dicke2Params, tol_q: float = TOL_Q) -> QuasiExactCondition:
    """Two-photon level ``E = 2``:

        [(2 - (Delta2 + s Delta1)^2 / 2)(1 - (Delta2 - s Delta1)^2) - g^2] (-s Delta1 - Delta2) = 0
    """
    p = _equal(params)
    s = p.parity.sign
    bracket = n2_bracket(p.delta1, p.delta2, p.parity) - p.g ** 2
    factor = -s * p.delta1 - p.delta2
    residual = bracket * factor
    return QuasiExactCondition(
        2, p.parity, residual, abs(residual) < tol_q, bracket, factor, abs(factor) < tol_q, _vanished(bracket, factor, tol_q)
    )


@dataclass(frozen=True)
class ExceptionalState:
    """Normalised components on ``(|0,e,e>, |1,e,g>, |1,g,e>)`` and the full-space check."""

    components: tuple
    energy: float
    residual: float
    vector: np.ndarray = field(repr=False)


BASIS_INDEX = (0, 5, 6)  # |n, s1, s2> -> 4n + 2 s1 + s2 with e = 0, g = 1


def exceptional_state_n1(params: Dicke2Params, cutoff: int = 6) -> ExceptionalState:
    """The even-parity ``E = 1`` state ``(2(Delta1 - Delta2)/g, -1, 1) / norm``.

    ``residual`` is ``||(H - 1) psi||`` with the unreduced Hamiltonian on
    ``cutoff`` Fock levels; since the state holds at most one photon any
    ``cutoff >= 3`` gives the exact residual.
    """
    p = _equal(params).with_parity(Parity.EVEN)
    if not p.g > 0:
        raise PreconditionViolated("g must be > 0")
    cond = n1_condition(p)
    if not (cond.satisfied or cond.singlet):
        raise PreconditionViolated(f"one-photon condition not met (residual {cond.residual:.3g})")
    if cutoff < 3:
        raise ValueError("cutoff must be >= 3")
    c = np.array([2 * (p.delta1 - p.delta2) / p.g, -1.0, 1.0])
    c /= np.linalg.norm(c)
    vec = np.zeros(4 * cutoff)
    vec[list(BASIS_INDEX)] = c
    h = oracle.full_dicke2(p, cutoff)
    res = float(np.linalg.norm(h @ vec - vec))
    return ExceptionalState(tuple(float(v) for v in c), 1.0, res, vec)


def reduced_eigenvector(params: Dicke2Params, energy: float, cutoff: int = 64, k: int = 12):
    """Oracle eigenvector nearest ``energy``, mapped into the full ``|n, s1, s2>`` space."""
    p = params.reduced()
    w, v = oracle.eigensystem(oracle.build_dicke2(p, cutoff), k)
    i = int(np.argmin(np.abs(w - energy)))
    return float(w[i]), oracle.dicke2_embedding(p, cutoff) @ v[:, i]


# ---------------------------------------------------------------- sweeps


@dataclass
class DickeSweep:
    model: str
    g_grid: np.ndarray
    curves: dict
    crossings: list = field(default_factory=list)
    min_same_parity_gap: dict = field(default_factory=dict)
    ground_parity: list = field(default_factory=list)


def _at_coupling(base, g):
    if isinstance(base, Dicke2Params):
        total = base.g1 + base.g2
        share = 0.5 if total == 0 else base.g1 / total
        return replace(base, g1=g * share, g2=g * (1 - share))
    return replace(base, g=g)


def dicke_sweep(params_base, g_grid, k_levels: int, rtol: float = 1e-11) -> DickeSweep:
    """Certified oracle curves for both parities over ``g_grid``.

    For the two-qubit model the grid runs over ``g = g1 + g2`` at the
    coupling ratio of ``params_base`` (equal when it carries none).
    Opposite-parity crossings are located by linear interpolation;
    within a parity only the smallest gap per grid point is recorded.
    """
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size == 0 or np.any(np.diff(g_grid) <= 0):
        raise ValueError("g_grid must be non-empty and strictly increasing")
    model = "dicke2" if isinstance(params_base, Dicke2Params) else "dicke3"
    if not isinstance(params_base, (Dicke2Params, Dicke3Params)):
        raise TypeError("params_base must be Dicke2Params or Dicke3Params")
    curves = {par: np.empty((g_grid.size, k_levels)) for par in Parity}
    for i, g in enumerate(g_grid):
        p = _at_coupling(params_base, g)
        for par in Parity:
            curves[par][i] = oracle.spectrum(model, p.with_parity(par), k_levels, rtol)
    sweep = DickeSweep(model, g_grid, curves)
    for par in Parity:
        sweep.min_same_parity_gap[par] = np.min(np.diff(curves[par], axis=1), axis=1)
    ev, od = curves[Parity.EVEN], curves[Parity.ODD]
    sweep.ground_parity = [Parity.EVEN if ev[i, 0] < od[i, 0] else Parity.ODD for i in range(g_grid.size)]
    for a in range(k_levels):
        for b in range(k_levels):
            diff = ev[:, a] - od[:, b]
            for i in np.flatnonzero(np.sign(diff[:-1]) != np.sign(diff[1:])):
                t = diff[i] / (diff[i] - diff[i + 1])
                gc = g_grid[i] + t * (g_grid[i + 1] - g_grid[i])
                ec = ev[i, a] + t * (ev[i + 1, a] - ev[i, a])
                sweep.crossings.append((float(gc), float(ec), a, b))
    sweep.crossings.sort()
    return sweep
