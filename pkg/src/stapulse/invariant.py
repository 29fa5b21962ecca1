"""Lewis-Riesenfeld invariant of the Lambda Hamiltonian and its eigenbasis.

Everything is in units of hbar: the invariant has eigenvalues
``{0, +omega0/2, -omega0/2}`` and ``H`` is the matrix returned by
:func:`stapulse.core.assemble_hamiltonian`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import TWO_PI, HamiltonianSample, ValidationError, assemble_hamiltonian

_T_SLACK = 1e-12


@dataclass(frozen=True)
class AngleTrajectory:
    """Mixing angles ``gamma(t)``, ``beta(t)`` with analytic time derivatives.

    All four callables accept scalars or numpy arrays of times (us).
    """

    gamma: Callable
    beta: Callable
    gamma_dot: Callable
    beta_dot: Callable
    phase: float
    duration: float


@dataclass(frozen=True)
class InvariantSpec:
    trajectory: AngleTrajectory
    omega0: float = field(default=TWO_PI)

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValidationError(f"omega0 must be positive, got {self.omega0!r}")


def _check_time(spec: InvariantSpec, t: float) -> float:
    tf = spec.trajectory.duration
    if not (-_T_SLACK * max(tf, 1.0) <= t <= tf * (1 + _T_SLACK)):
        raise ValidationError(f"t={t!r} outside [0, {tf}]")
    return float(t)


def _angles(spec: InvariantSpec, t: float):
    tr = spec.trajectory
    return float(tr.gamma(t)), float(tr.beta(t)), float(tr.gamma_dot(t)), float(tr.beta_dot(t))


def _invariant_shape(g: float, b: float, phi: float) -> np.ndarray:
    # Matrix in brackets; the prefactor omega0/2 is applied by the caller.
    ep = np.exp(1j * phi)
    return np.array(
        [
            [0.0, np.cos(g) * np.sin(b), -1j * np.sin(g) / ep],
            [np.cos(g) * np.sin(b), 0.0, np.cos(g) * np.cos(b) / ep],
            [1j * np.sin(g) * ep, np.cos(g) * np.cos(b) * ep, 0.0],
        ],
        dtype=complex,
    )


def _invariant_shape_derivatives(g: float, b: float, phi: float):
    ep = np.exp(1j * phi)
    d_gamma = np.array(
        [
            [0.0, -np.sin(g) * np.sin(b), -1j * np.cos(g) / ep],
            [-np.sin(g) * np.sin(b), 0.0, -np.sin(g) * np.cos(b) / ep],
            [1j * np.cos(g) * ep, -np.sin(g) * np.cos(b) * ep, 0.0],
        ],
        dtype=complex,
    )
    d_beta = np.array(
        [
            [0.0, np.cos(g) * np.cos(b), 0.0],
            [np.cos(g) * np.cos(b), 0.0, -np.cos(g) * np.sin(b) / ep],
            [0.0, -np.cos(g) * np.sin(b) * ep, 0.0],
        ],
        dtype=complex,
    )
    return d_gamma, d_beta


def invariant_matrix(spec: InvariantSpec, t: float) -> np.ndarray:
    t = _check_time(spec, t)
    g, b, _, _ = _angles(spec, t)
    return 0.5 * spec.omega0 * _invariant_shape(g, b, spec.trajectory.phase)


def invariant_time_derivative(spec: InvariantSpec, t: float) -> np.ndarray:
    """Explicit ``dI/dt`` through the angles (chain rule, no finite differences)."""
    t = _check_time(spec, t)
    g, b, gd, bd = _angles(spec, t)
    d_gamma, d_beta = _invariant_shape_derivatives(g, b, spec.trajectory.phase)
    return 0.5 * spec.omega0 * (gd * d_gamma + bd * d_beta)


def _eigvecs(g: float, b: float, phi: float):
    ep = np.exp(1j * phi)
    phi0 = np.array(
        [np.cos(g) * np.cos(b), -1j * np.sin(g), -np.cos(g) * np.sin(b) * ep], dtype=complex
    )
    plus = np.array(
        [
            np.sin(g) * np.cos(b) + 1j * np.sin(b),
            1j * np.cos(g),
            (-np.sin(g) * np.sin(b) + 1j * np.cos(b)) * ep,
        ],
        dtype=complex,
    ) / np.sqrt(2.0)
    minus = np.array(
        [
            np.sin(g) * np.cos(b) - 1j * np.sin(b),
            1j * np.cos(g),
            (-np.sin(g) * np.sin(b) - 1j * np.cos(b)) * ep,
        ],
        dtype=complex,
    ) / np.sqrt(2.0)
    return phi0, plus, minus


def _eigvec_derivatives(g: float, b: float, gd: float, bd: float, phi: float):
    ep = np.exp(1j * phi)
    d0 = np.array(
        [
            -np.sin(g) * np.cos(b) * gd - np.cos(g) * np.sin(b) * bd,
            -1j * np.cos(g) * gd,
            (np.sin(g) * np.sin(b) * gd - np.cos(g) * np.cos(b) * bd) * ep,
        ],
        dtype=complex,
    )
    out = [d0]
    for sign in (1.0, -1.0):
        out.append(
            np.array(
                [
                    np.cos(g) * np.cos(b) * gd - np.sin(g) * np.sin(b) * bd + sign * 1j * np.cos(b) * bd,
                    -1j * np.sin(g) * gd,
                    (
                        -np.cos(g) * np.sin(b) * gd
                        - np.sin(g) * np.cos(b) * bd
                        - sign * 1j * np.sin(b) * bd
                    )
                    * ep,
                ],
                dtype=complex,
            )
            / np.sqrt(2.0)
        )
    return tuple(out)


def invariant_eigenvalues(spec: InvariantSpec) -> tuple[float, float, float]:
    """Eigenvalues paired with :func:`invariant_eigenstates` (``0, +, -``)."""
    return (0.0, 0.5 * spec.omega0, -0.5 * spec.omega0)


def invariant_eigenstates(spec: InvariantSpec, t: float):
    """Return ``(phi_0, phi_plus, phi_minus)`` at time ``t``."""
    t = _check_time(spec, t)
    g, b, _, _ = _angles(spec, t)
    return _eigvecs(g, b, spec.trajectory.phase)


def _hamiltonian(pulses, t: float, detuning: float = 0.0) -> np.ndarray:
    return assemble_hamiltonian(
        HamiltonianSample(
            omega_p=complex(pulses.omega_p(t)),
            omega_s=complex(pulses.omega_s(t)),
            phase=pulses.phase,
            detuning=detuning,
        )
    )


def invariance_residual(spec: InvariantSpec, pulses, t: float) -> float:
    """Frobenius norm of ``dI/dt + (1/i)[I, H]`` with ``H`` taken at zero detuning."""
    i_mat = invariant_matrix(spec, t)
    h = _hamiltonian(pulses, t)
    total = invariant_time_derivative(spec, t) - 1j * (i_mat @ h - h @ i_mat)
    return float(np.linalg.norm(total))


_BRANCHES = {"0": 0, 0: 0, "+": 1, "plus": 1, "-": 2, "minus": 2}


def lr_phase_rate(spec: InvariantSpec, pulses, t: float, branch="0") -> float:
    """Integrand ``<phi_n| i d/dt - H |phi_n>`` of the LR phase (rad/us)."""
    try:
        idx = _BRANCHES[branch]
    except KeyError:
        raise ValidationError(f"unknown branch {branch!r}; use '0', '+' or '-'") from None
    t = _check_time(spec, t)
    g, b, gd, bd = _angles(spec, t)
    phi = spec.trajectory.phase
    vec = _eigvecs(g, b, phi)[idx]
    dvec = _eigvec_derivatives(g, b, gd, bd, phi)[idx]
    h = _hamiltonian(pulses, t)
    val = np.vdot(vec, 1j * dvec) - np.vdot(vec, h @ vec)
    return float(val.real)
