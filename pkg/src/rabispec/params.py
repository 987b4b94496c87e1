"""Model parameter containers.

All solvers work in units where the mode frequency is one; ``reduced()``
rescales couplings and splittings by ``omega`` and energies are scaled
back by the caller.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class Parity(enum.Enum):
    EVEN = 1
    ODD = -1

    @property
    def sign(self) -> int:
        return self.value

    @property
    def label(self) -> str:
        return "+" if self is Parity.EVEN else "-"

    @classmethod
    def parse(cls, value) -> "Parity":
        if isinstance(value, Parity):
            return value
        key = str(value).strip().lower()
        if key in ("+", "even", "+1", "1", "plus"):
            return cls.EVEN
        if key in ("-", "odd", "-1", "minus"):
            return cls.ODD
        raise ValueError(f"unknown parity {value!r}")


def _check_nonneg(name, value):
    if not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")


def _check_omega(omega):
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega!r}")


@dataclass(frozen=True)
class RabiParams:
    """Quantum Rabi model in one parity sector.

    ``delta`` is the qubit half-splitting. Odd parity is realised by
    flipping the sign of ``delta`` (see :attr:`signed_delta`).
    """

    g: float
    delta: float
    omega: float = 1.0
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        _check_omega(self.omega)
        _check_nonneg("g", self.g)
        _check_nonneg("delta", self.delta)
        object.__setattr__(self, "parity", Parity.parse(self.parity))

    @property
    def signed_delta(self):
        return self.delta * self.parity.sign

    def reduced(self) -> "RabiParams":
        if self.omega == 1:
            return self
        return RabiParams(self.g / self.omega, self.delta / self.omega, 1.0, self.parity)

    def with_parity(self, parity) -> "RabiParams":
        return replace(self, parity=Parity.parse(parity))

    def flipped(self) -> "RabiParams":
        return self.with_parity(Parity.ODD if self.parity is Parity.EVEN else Parity.EVEN)


@dataclass(frozen=True)
class Dicke2Params:
    """Two qubits with individual couplings and half-splittings."""

    g1: float
    g2: float
    delta1: float
    delta2: float
    omega: float = 1.0
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        _check_omega(self.omega)
        _check_nonneg("g1", self.g1)
        _check_nonneg("g2", self.g2)
        object.__setattr__(self, "parity", Parity.parse(self.parity))

    @property
    def g(self):
        return self.g1 + self.g2

    @property
    def g_prime(self):
        return self.g1 - self.g2

    @classmethod
    def equal_coupling(cls, g, delta1, delta2, omega=1.0, parity=Parity.EVEN):
        """Build with ``g1 = g2 = g/2`` so that ``g1 + g2 = g``."""
        return cls(g / 2, g / 2, delta1, delta2, omega, parity)

    def reduced(self) -> "Dicke2Params":
        if self.omega == 1:
            return self
        w = self.omega
        return Dicke2Params(self.g1 / w, self.g2 / w, self.delta1 / w, self.delta2 / w, 1.0, self.parity)

    def with_parity(self, parity) -> "Dicke2Params":
        return replace(self, parity=Parity.parse(parity))


@dataclass(frozen=True)
class Dicke3Params:
    """Spin-3/2 sector of the symmetric three-qubit model.

    Regular singular points of the reduced system sit at ``±g`` and ``±3g``.
    """

    g: float
    delta: float
    omega: float = 1.0
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        _check_omega(self.omega)
        _check_nonneg("g", self.g)
        _check_nonneg("delta", self.delta)
        object.__setattr__(self, "parity", Parity.parse(self.parity))

    def reduced(self) -> "Dicke3Params":
        if self.omega == 1:
            return self
        return Dicke3Params(self.g / self.omega, self.delta / self.omega, 1.0, self.parity)

    def with_parity(self, parity) -> "Dicke3Params":
        return replace(self, parity=Parity.parse(parity))
