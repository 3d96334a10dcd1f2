"""Unsharp-measurement reversal: trajectory simulation and exact walk oracles."""

__version__ = "0.1.0"

from .qubit import (  # noqa: E402
    DomainError,
    MeasurementPair,
    OutcomeCounts,
    PureState,
    build_measurement_pair,
    dilation_unitary,
    effects,
    sequence_probability,
)
from .trajectory import EnsembleSpec, ProtocolConfig, run_campaign  # noqa: E402

__all__ = [
    "DomainError",
    "EnsembleSpec",
    "MeasurementPair",
    "OutcomeCounts",
    "ProtocolConfig",
    "PureState",
    "build_measurement_pair",
    "dilation_unitary",
    "effects",
    "run_campaign",
    "sequence_probability",
]
