"""Shortcut-to-adiabaticity pulse design for three-level Lambda systems."""

from .core import (
    HamiltonianSample,
    TargetState,
    ThreeLevelState,
    ValidationError,
    assemble_hamiltonian,
    bloch_vector,
    fidelity,
)
from .dynamics import (
    DecoherenceModel,
    ErrorChannel,
    IntegrationError,
    PropagationResult,
    decoherence_adjusted_fidelity,
    propagate,
    propagate_batch,
)
from .synthesis import (
    ChsParameters,
    PulseCoefficients,
    PulsePair,
    TaskKind,
    angle_trajectory,
    solve_constraint,
    synthesize_chs,
    synthesize_pulses,
    table_coefficients,
    time_reverse,
)

__version__ = "0.1.0"

__all__ = [
    "ChsParameters",
    "DecoherenceModel",
    "ErrorChannel",
    "HamiltonianSample",
    "IntegrationError",
    "PropagationResult",
    "PulseCoefficients",
    "PulsePair",
    "TargetState",
    "TaskKind",
    "ThreeLevelState",
    "ValidationError",
    "angle_trajectory",
    "assemble_hamiltonian",
    "bloch_vector",
    "decoherence_adjusted_fidelity",
    "fidelity",
    "propagate",
    "propagate_batch",
    "solve_constraint",
    "synthesize_chs",
    "synthesize_pulses",
    "table_coefficients",
    "time_reverse",
]
