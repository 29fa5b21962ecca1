"""State representation, Hamiltonian assembly and fidelity for the Lambda system.

Basis ordering is ``(|1>, |e>, |0>)`` throughout.  Frequencies inside the
library are angular (rad/us) and times are in microseconds; the helpers
:func:`mhz_to_angular` / :func:`angular_to_mhz` convert user-facing ordinary
frequencies.  Energies are expressed in units of hbar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * np.pi
NORM_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def mhz_to_angular(f_mhz):
    if np.isscalar(f_mhz):
        return TWO_PI * float(f_mhz)
    return TWO_PI * np.asarray(f_mhz, dtype=float)


def angular_to_mhz(w):
    if np.isscalar(w):
        return w / TWO_PI
    return np.asarray(w) / TWO_PI


@dataclass(frozen=True)
class ThreeLevelState:
    """Complex amplitudes of ``|1>``, ``|e>`` and ``|0>``."""

    c1: complex
    ce: complex
    c0: complex

    @classmethod
    def from_vector(cls, vec, normalize: bool = False) -> "ThreeLevelState":
        v = np.asarray(vec, dtype=complex).reshape(3)
        if normalize:
            n = np.linalg.norm(v)
            if n == 0:
                raise ValidationError("cannot normalize the zero vector")
            v = v / n
        return cls(complex(v[0]), complex(v[1]), complex(v[2]))

    @classmethod
    def ground_one(cls) -> "ThreeLevelState":
        return cls(1.0 + 0j, 0j, 0j)

    @classmethod
    def ground_zero(cls) -> "ThreeLevelState":
        return cls(0j, 0j, 1.0 + 0j)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.ce, self.c0], dtype=complex)

    @property
    def norm_squared(self) -> float:
        return float(abs(self.c1) ** 2 + abs(self.ce) ** 2 + abs(self.c0) ** 2)

    @property
    def populations(self) -> tuple[float, float, float]:
        return (abs(self.c1) ** 2, abs(self.ce) ** 2, abs(self.c0) ** 2)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared - 1.0) <= tol


@dataclass(frozen=True)
class TargetState:
    """Ground-space superposition ``cos(theta)|1> + sin(theta) e^{i phi}|0>``."""

    theta: float
    phi: float

    @property
    def vector(self) -> np.ndarray:
        return np.array(
            [np.cos(self.theta), 0.0, np.sin(self.theta) * np.exp(1j * self.phi)],
            dtype=complex,
        )

    def as_state(self) -> ThreeLevelState:
        return ThreeLevelState.from_vector(self.vector)


StateLike = Union[ThreeLevelState, TargetState]


def state_vector(state: StateLike) -> np.ndarray:
    """Column representation of either state type."""
    return state.vector


@dataclass(frozen=True)
class HamiltonianSample:
    """Instantaneous drive parameters; all frequencies angular (rad/us)."""

    omega_p: complex
    omega_s: complex
    phase: float = 0.0
    detuning: float = 0.0


def assemble_hamiltonian(sample: HamiltonianSample) -> np.ndarray:
    """Return ``H / hbar`` for one instant.

    Complex envelopes (chirped pulses) are placed on the lower triangle and
    conjugated above the diagonal, so real envelopes reproduce the usual
    symmetric form and the matrix is Hermitian by construction.
    """
    p = complex(sample.omega_p)
    s = complex(sample.omega_s) * np.exp(1j * sample.phase)
    h = np.zeros((3, 3), dtype=complex)
    h[1, 0] = 0.5 * p
    h[0, 1] = np.conj(h[1, 0])
    h[2, 1] = 0.5 * s
    h[1, 2] = np.conj(h[2, 1])
    h[1, 1] = sample.detuning
    return h


def fidelity(final: ThreeLevelState, target: StateLike, tol: float = NORM_TOL) -> float:
    """Squared overlap ``|<target|final>|^2``.

    Raises
    ------
    ValidationError
        If ``final`` is not normalized within ``tol``.
    """
    if not final.is_normalized(tol):
        raise ValidationError(
            f"final state norm^2 = {final.norm_squared!r} differs from 1 by more than {tol}"
        )
    f = abs(np.vdot(state_vector(target), final.vector)) ** 2
    return float(min(max(f, 0.0), 1.0))


def bloch_vector(state) -> tuple[float, float, float]:
    """Bloch coordinates of the ``{|1>, |e>}`` pair.

    ``u = 2 Re(c1 ce*)``, ``v = 2 Im(c1 ce*)``, ``w = |c1|^2 - |ce|^2``.
    """
    if isinstance(state, ThreeLevelState):
        c1, ce = state.c1, state.ce
    else:
        c1, ce = state[0], state[1]
    x = c1 * np.conj(ce)
    return (float(2 * x.real), float(2 * x.imag), float(abs(c1) ** 2 - abs(ce) ** 2))


def bloch_vectors(amplitudes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`bloch_vector` for an ``(n, 3)`` amplitude array."""
    amps = np.asarray(amplitudes)
    x = amps[:, 0] * np.conj(amps[:, 1])
    w = np.abs(amps[:, 0]) ** 2 - np.abs(amps[:, 1]) ** 2
    return np.column_stack([2 * x.real, 2 * x.imag, w])
