"""Exact spectra of the quantum Rabi model and small asymmetric Dicke models.

Regular levels come from zeros of spectral-condition functions built on a
three-term recurrence; every result can be cross-checked against truncated
Fock-space diagonalization and a continued-fraction condition.
"""
from .exceptions import (
    ConvergenceFailure,
    CutoffExplosion,
    IndeterminateSign,
    LostBracket,
    NoConvergence,
    OutsideDomain,
    PoleAtInteger,
    PreconditionViolated,
    RabiSpecError,
    TrackingAmbiguity,
)
from .params import Dicke2Params, Dicke3Params, Parity, RabiParams

__version__ = "0.1.0"

__all__ = [
    "ConvergenceFailure",
    "CutoffExplosion",
    "Dicke2Params",
    "Dicke3Params",
    "IndeterminateSign",
    "LostBracket",
    "NoConvergence",
    "OutsideDomain",
    "Parity",
    "PoleAtInteger",
    "PreconditionViolated",
    "RabiParams",
    "RabiSpecError",
    "TrackingAmbiguity",
]
