"""Truncated Fock-space diagonalisation of the parity-reduced Hamiltonians.

This is the independent reference for every spectral result. Matrices are
stored by diagonals; the spin index is interleaved inside each Fock level
so the bandwidth stays at 1 (Rabi) or 2 (two-component models).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceFailure, CutoffExplosion
from .params import Dicke2Params, Dicke3Params, Parity, RabiParams

DENSE_LIMIT = 256
START_CUTOFF = 64
MAX_CUTOFF = 16384


@dataclass(frozen=True)
class BandedSymmetricMatrix:
    """Real symmetric banded matrix.

    ``diagonals[k]`` is the k-th superdiagonal (length ``dimension - k``).
    """

    dimension: int
    bandwidth: int
    diagonals: tuple
    model_tag: str

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dimension, self.dimension))
        for k, d in enumerate(self.diagonals):
            out += np.diag(d, k)
            if k:
                out += np.diag(d, -k)
        return out

    def lower_banded(self) -> np.ndarray:
        """LAPACK lower band storage: row k holds the k-th subdiagonal."""
        ab = np.zeros((self.bandwidth + 1, self.dimension))
        for k, d in enumerate(self.diagonals):
            ab[k, : self.dimension - k] = d
        return ab

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diagonals[0] * v
        for k in range(1, self.bandwidth + 1):
            d = self.diagonals[k]
            out[:-k] += d * v[k:]
            out[k:] += d * v[:-k]
        return out


def build_rabi(params: RabiParams, cutoff: int) -> BandedSymmetricMatrix:
    """``H_pm = a^dag a + g (a + a^dag) pm Delta (-1)^(a^dag a)`` on ``n < cutoff``."""
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    p = params.reduced()
    n = np.arange(cutoff, dtype=float)
    main = n + p.signed_delta * (-1.0) ** n
    off = p.g * np.sqrt(n[1:])
    return BandedSymmetricMatrix(cutoff, 1, (main, off), "rabi")


def build_dicke2(params: Dicke2Params, cutoff: int) -> BandedSymmetricMatrix:
    """Reduced two-qubit Hamiltonian

        H_pm = a^dag a + (g1 + g2 s_z)(a + a^dag) + (Delta2 pm Delta1 (-1)^(a^dag a)) s_x

    in the basis ``|n, s>`` with index ``2n + (0 if s = +1 else 1)``.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    p = params.reduced()
    n = np.arange(cutoff, dtype=float)
    dim = 2 * cutoff
    main = np.repeat(n, 2)
    spin = np.zeros(dim - 1)
    spin[0::2] = p.delta2 + p.parity.sign * p.delta1 * (-1.0) ** n
    hop = np.zeros(dim - 2)
    sq = np.sqrt(n[1:])
    hop[0::2] = (p.g1 + p.g2) * sq
    hop[1::2] = (p.g1 - p.g2) * sq
    return BandedSymmetricMatrix(dim, 2, (main, spin, hop), "dicke2")


def build_dicke3(params: Dicke3Params, cutoff: int) -> BandedSymmetricMatrix:
    """Spin-3/2 sector of the symmetric three-qubit model, one parity:

        H_pm = a^dag a + Delta [[0, sqrt3], [sqrt3, pm 2 (-1)^(a^dag a)]]
               - g diag(3, 1) (a + a^dag)
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    p = params.reduced()
    n = np.arange(cutoff, dtype=float)
    dim = 2 * cutoff
    main = np.repeat(n, 2)
    main[1::2] += p.parity.sign * 2 * p.delta * (-1.0) ** n
    spin = np.zeros(dim - 1)
    spin[0::2] = math.sqrt(3) * p.delta
    hop = np.zeros(dim - 2)
    sq = np.sqrt(n[1:])
    hop[0::2] = -3 * p.g * sq
    hop[1::2] = -p.g * sq
    return BandedSymmetricMatrix(dim, 2, (main, spin, hop), "dicke3")


BUILDERS = {"rabi": build_rabi, "dicke2": build_dicke2, "dicke3": build_dicke3}


def eigenvalues(matrix: BandedSymmetricMatrix, k: int, method: str = "banded") -> np.ndarray:
    """The ``k`` lowest eigenvalues in ascending order.

    ``method="banded"`` uses Sturm-sequence bisection (tridiagonal) or
    band reduction followed by bisection; ``"dense"`` is a full symmetric
    solve, only allowed below ``DENSE_LIMIT``.
    """
    if not 1 <= k <= matrix.dimension:
        raise ValueError(f"k={k} outside 1..{matrix.dimension}")
    try:
        if method == "dense":
            if matrix.dimension >= DENSE_LIMIT:
                raise ValueError(f"dense path limited to dimension < {DENSE_LIMIT}")
            w = scipy.linalg.eigh(matrix.to_dense(), eigvals_only=True, subset_by_index=(0, k - 1))
        elif matrix.bandwidth == 1:
            w = scipy.linalg.eigh_tridiagonal(
                matrix.diagonals[0],
                matrix.diagonals[1],
                eigvals_only=True,
                select="i",
                select_range=(0, k - 1),
                lapack_driver="stebz",
            )
        elif method == "banded":
            w = scipy.linalg.eig_banded(
                matrix.lower_banded(), lower=True, eigvals_only=True, select="i", select_range=(0, k - 1)
            )
        else:
            raise ValueError(f"unknown method {method!r}")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure on symmetric input
        raise ConvergenceFailure(str(exc)) from exc
    return np.sort(np.asarray(w, dtype=float))


def eigensystem(matrix: BandedSymmetricMatrix, k: int):
    """Lowest ``k`` eigenpairs (columns of the returned vector array)."""
    w, v = scipy.linalg.eig_banded(matrix.lower_banded(), lower=True, select="i", select_range=(0, k - 1))
    return w, v


def _coupling(params) -> float:
    if isinstance(params, Dicke2Params):
        return abs(params.g1) + abs(params.g2)
    return params.g


def _spin_norm(params) -> float:
    """Upper bound on the spin part's operator norm (energy units of omega)."""
    p = params.reduced()
    if isinstance(p, RabiParams):
        return p.delta
    if isinstance(p, Dicke2Params):
        return abs(p.delta1) + abs(p.delta2)
    return 3 * p.delta


@dataclass(frozen=True)
class Certified:
    cutoff: int
    values: np.ndarray
    history: tuple = ()


def certify_cutoff(
    builder,
    params,
    k: int,
    rtol: float = 1e-10,
    start: int = START_CUTOFF,
    max_cutoff: int = MAX_CUTOFF,
) -> Certified:
    """Double the Fock cutoff until the ``k`` lowest eigenvalues stop moving.

    Returns the larger cutoff of the first pair of doublings whose
    eigenvalues differ by less than ``rtol * max(1, |E|)``. With the mode
    decoupled (zero coupling) the truncated spectrum is exact once the
    excluded Fock levels lie above the k-th eigenvalue, which is checked
    directly.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(builder, str):
        builder = BUILDERS[builder]
    if _coupling(params) == 0:
        cutoff = k + 1
        while True:
            m = builder(params, cutoff)
            w = eigenvalues(m, k)
            if cutoff - _spin_norm(params) > w[-1]:
                return Certified(cutoff, w, ((cutoff, w),))
            cutoff += 1
    cutoff = max(start, k + 2)
    prev = eigenvalues(builder(params, cutoff), k)
    history = [(cutoff, prev)]
    while True:
        cutoff *= 2
        if cutoff > max_cutoff:
            raise CutoffExplosion(f"no convergence to rtol={rtol} below cutoff {max_cutoff}")
        w = eigenvalues(builder(params, cutoff), k)
        history.append((cutoff, w))
        if np.all(np.abs(w - prev) < rtol * np.maximum(1.0, np.abs(w))):
            return Certified(cutoff, w, tuple(history))
        prev = w


def spectrum(model: str, params, k: int, rtol: float = 1e-11) -> np.ndarray:
    """Certified ``k`` lowest eigenvalues for one parity sector, in units of omega."""
    c = certify_cutoff(BUILDERS[model], params, k, rtol)
    return c.values * params.omega


def rabi_levels_below(params: RabiParams, x_max: float, rtol: float = 1e-11) -> np.ndarray:
    """Certified eigenvalues (omega = 1 units) with ``E + g^2 < x_max``."""
    p = params.reduced()
    # E >= -g^2 - Delta and the n-th level sits near n - g^2, so this many suffice
    k = int(math.ceil(x_max + p.delta)) + 3
    while True:
        w = certify_cutoff(build_rabi, p, k, rtol).values
        if w[-1] + p.g ** 2 >= x_max:
            return w[w + p.g ** 2 < x_max]
        k *= 2


# full-space references used to validate the parity reduction


def full_rabi(params: RabiParams, cutoff: int) -> np.ndarray:
    """Unreduced Rabi Hamiltonian on ``n < cutoff`` times the qubit (dense).

    ``H = a^dag a + Delta sigma_z + g sigma_x (a + a^dag)``.
    """
    p = params.reduced()
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    num = np.diag(np.arange(cutoff, dtype=float))
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye2 = np.eye(2)
    return np.kron(num, eye2) + p.delta * np.kron(np.eye(cutoff), sz) + p.g * np.kron(a + a.T, sx)


def full_dicke2(params: Dicke2Params, cutoff: int) -> np.ndarray:
    """Unreduced two-qubit Hamiltonian on ``|n, s1, s2>`` (dense).

    ``H = a^dag a + g1 s1x (a + a^dag) + g2 s2x (a + a^dag) + D1 s1z + D2 s2z``
    with qubit order ``(e, g)`` so that ``s_z |e> = |e>``.
    """
    p = params.reduced()
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    num = np.diag(np.arange(cutoff, dtype=float))
    x = a + a.T
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    i2 = np.eye(2)
    ic = np.eye(cutoff)
    return (
        np.kron(num, np.eye(4))
        + p.g1 * np.kron(x, np.kron(sx, i2))
        + p.g2 * np.kron(x, np.kron(i2, sx))
        + p.delta1 * np.kron(ic, np.kron(sz, i2))
        + p.delta2 * np.kron(ic, np.kron(i2, sz))
    )


def dicke2_embedding(params: Dicke2Params, cutoff: int) -> np.ndarray:
    """Isometry from the reduced basis ``|n, s>`` into the full ``|n, s1, s2>`` space.

    Reduced state ``|n, s>`` maps to
    ``|n> (|+, s>_x + p (-1)^n |-, -s>_x) / sqrt(2)``, where ``|t1, t2>_x``
    are sigma_x eigenstates and ``p`` is the parity sign.
    """
    p = params.reduced()
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    xs = {1: plus, -1: minus}
    out = np.zeros((4 * cutoff, 2 * cutoff))
    for n in range(cutoff):
        fock = np.zeros(cutoff)
        fock[n] = 1.0
        for j, s in enumerate((1, -1)):
            spin = np.kron(xs[1], xs[s]) + p.parity.sign * (-1) ** n * np.kron(xs[-1], xs[-s])
            out[:, 2 * n + j] = np.kron(fock, spin) / math.sqrt(2)
    return out


def spin32_operators():
    """``(J_z, J_x)`` for spin 3/2 in the ``m = 3/2 .. -3/2`` basis."""
    m = np.array([1.5, 0.5, -0.5, -1.5])
    jz = np.diag(m)
    jp = np.zeros((4, 4))
    for i in range(1, 4):
        jp[i - 1, i] = math.sqrt(1.5 * 2.5 - m[i] * (m[i] + 1))
    jx = (jp + jp.T) / 2
    return jz, jx


def full_dicke3(params: Dicke3Params, cutoff: int) -> np.ndarray:
    """``H = a^dag a + 2 Delta J_z + 2 g (a + a^dag) J_x`` for spin 3/2 (dense)."""
    p = params.reduced()
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    num = np.diag(np.arange(cutoff, dtype=float))
    jz, jx = spin32_operators()
    return (
        np.kron(num, np.eye(4))
        + 2 * p.delta * np.kron(np.eye(cutoff), jz)
        + 2 * p.g * np.kron(a + a.T, jx)
    )


def both_parities(model: str, params, k: int, rtol: float = 1e-11) -> dict:
    """Certified spectra of both parity sectors keyed by :class:`Parity`."""
    return {par: spectrum(model, params.with_parity(par), k, rtol) for par in Parity}
