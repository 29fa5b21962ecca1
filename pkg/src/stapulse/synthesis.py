"""Inverse-engineered shortcut pulses for the three operation tasks.

The mixing angle is a linear ramp plus a sine series,

    gamma(t) = g0 + g1 * t + sum_n a_n sin(n pi t / tf),

and for the three-level tasks ``beta = (pi - theta)/2 * (1 - cos gamma)``.
Requiring the envelopes to vanish at both ends fixes two linear combinations
of the ``a_n`` (one over odd ``n``, one over even ``n``); the right-hand side
of the even one depends on the task.

Envelope callables here are small classes rather than closures so that
pulses can be shipped to worker processes.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import TWO_PI, TargetState, ThreeLevelState, ValidationError
from .invariant import AngleTrajectory

CONSTRAINT_TOL = 1e-12
DEFAULT_TF = 4.0
DEFAULT_K = 4
EXPORT_STEP = 1e-3


class TaskKind(enum.Enum):
    CREATE_ASQS = "create_asqs"
    TWO_LEVEL_TRANSFER = "two_level_transfer"
    RETURN_TO_ONE = "return_to_one"

    @property
    def even_sum(self) -> float:
        """Required value of ``a2 + 2 a4 + 3 a6 + ...``."""
        return _EVEN_SUM[self]

    @property
    def is_three_level(self) -> bool:
        return self is not TaskKind.TWO_LEVEL_TRANSFER

    @classmethod
    def parse(cls, value) -> "TaskKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"create": "create_asqs", "asqs": "create_asqs", "two_level": "two_level_transfer",
                   "transfer": "two_level_transfer", "return": "return_to_one", "reverse": "return_to_one"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValidationError(f"unknown task {value!r}; expected one of {names}") from None


_EVEN_SUM = {
    TaskKind.CREATE_ASQS: -0.5,
    TaskKind.TWO_LEVEL_TRANSFER: 0.25,
    TaskKind.RETURN_TO_ONE: 0.5,
}

# (gamma(0), slope * tf) of the linear part of each ansatz
_RAMP = {
    TaskKind.CREATE_ASQS: (0.0, math.pi),
    TaskKind.TWO_LEVEL_TRANSFER: (0.0, -math.pi / 2),
    TaskKind.RETURN_TO_ONE: (math.pi, -math.pi),
}

EQUAL_SUPERPOSITION = TargetState(math.pi / 4, math.pi / 2)


@dataclass(frozen=True)
class PulseCoefficients:
    """Sine-series coefficients ``a_1 .. a_2k`` plus the task they serve.

    ``target`` holds the angles of the superposition end of the task: the
    final state for ``CREATE_ASQS`` and the initial state for
    ``RETURN_TO_ONE``.  It is ignored by ``TWO_LEVEL_TRANSFER``.
    """

    task: TaskKind
    a: tuple[float, ...]
    tf: float = DEFAULT_TF
    target: TargetState = EQUAL_SUPERPOSITION

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind.parse(self.task))
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if len(self.a) < 2 or len(self.a) % 2:
            raise ValidationError(f"need an even number (2k >= 2) of coefficients, got {len(self.a)}")
        if not self.tf > 0:
            raise ValidationError(f"tf must be positive, got {self.tf!r}")
        odd, even = constraint_sums(self.a)
        if abs(odd) > CONSTRAINT_TOL:
            raise ValidationError(
                f"odd-coefficient constraint a1 + 3a3 + 5a5 + ... = 0 violated (sum = {odd!r})"
            )
        want = self.task.even_sum
        if abs(even - want) > CONSTRAINT_TOL:
            raise ValidationError(
                f"even-coefficient constraint a2 + 2a4 + 3a6 + ... = {want} for task "
                f"{self.task.value} violated (sum = {even!r})"
            )

    @property
    def k(self) -> int:
        return len(self.a) // 2

    def __getitem__(self, name: str) -> float:
        return self.a[_coef_index(name, len(self.a))]

    def as_dict(self) -> dict[str, float]:
        return {f"a{i + 1}": v for i, v in enumerate(self.a)}

    def initial_state(self) -> ThreeLevelState:
        if self.task is TaskKind.RETURN_TO_ONE:
            return self.target.as_state()
        return ThreeLevelState.ground_one()

    def final_state(self) -> ThreeLevelState:
        """State the ideal pulse delivers at ``tf``."""
        if self.task is TaskKind.CREATE_ASQS:
            return self.target.as_state()
        if self.task is TaskKind.TWO_LEVEL_TRANSFER:
            return ThreeLevelState(0j, 1j, 0j)
        return ThreeLevelState.ground_one()


def constraint_sums(a: Sequence[float]) -> tuple[float, float]:
    """``(sum_odd (2j-1) a_{2j-1}, sum_even j a_{2j})``."""
    odd = math.fsum((2 * j + 1) * a[2 * j] for j in range(len(a) // 2))
    even = math.fsum((j + 1) * a[2 * j + 1] for j in range(len(a) // 2))
    return odd, even


def _coef_index(name: str, size: int) -> int:
    m = re.fullmatch(r"a(\d+)", str(name).strip())
    if not m or not 1 <= int(m.group(1)) <= size:
        raise ValidationError(f"unknown coefficient {name!r} (expected a1..a{size})")
    return int(m.group(1)) - 1


def solve_constraint(
    task,
    free: Mapping[str, float],
    *,
    k: int = DEFAULT_K,
    tf: float = DEFAULT_TF,
    target: TargetState = EQUAL_SUPERPOSITION,
) -> PulseCoefficients:
    """Fill in the single missing even coefficient so the task constraint holds.

    Odd coefficients that are not given default to zero.
    """
    task = TaskKind.parse(task)
    size = 2 * k
    a: list[float | None] = [None] * size
    for name, value in free.items():
        a[_coef_index(name, size)] = float(value)
    for i in range(0, size, 2):
        if a[i] is None:
            a[i] = 0.0
    open_even = [i for i in range(1, size, 2) if a[i] is None]
    if len(open_even) != 1:
        given = ", ".join(sorted(free)) or "none"
        raise ValidationError(
            f"exactly one even coefficient must be left open; {len(open_even)} open (given: {given})"
        )
    idx = open_even[0]
    weight = (idx + 1) // 2
    rest = math.fsum((j + 1) * a[2 * j + 1] for j in range(k) if 2 * j + 1 != idx)
    a[idx] = (task.even_sum - rest) / weight
    return PulseCoefficients(task, tuple(a), tf=tf, target=target)


# Published optima (a1, a3, a5, a7 = 0)
TABLE_COEFFICIENTS = {
    TaskKind.CREATE_ASQS: {"a2": -1.10, "a6": 0.06, "a8": 0.02},
    TaskKind.TWO_LEVEL_TRANSFER: {"a2": 0.50, "a6": 0.14, "a8": 0.0},
    TaskKind.RETURN_TO_ONE: {"a2": 1.06, "a6": 0.16, "a8": 0.0},
}


def table_coefficients(task, tf: float = DEFAULT_TF, target: TargetState = EQUAL_SUPERPOSITION):
    """Published coefficient set for ``task`` with ``a4`` re-solved."""
    task = TaskKind.parse(task)
    return solve_constraint(task, TABLE_COEFFICIENTS[task], tf=tf, target=target)


class _Gamma:
    def __init__(self, coeffs: PulseCoefficients):
        g0, span = _RAMP[coeffs.task]
        self.g0 = g0
        self.slope = span / coeffs.tf
        self.a = np.asarray(coeffs.a)
        self.w = np.arange(1, len(coeffs.a) + 1) * math.pi / coeffs.tf

    def value(self, t):
        t = np.asarray(t, dtype=float)
        arg = t[..., None] * self.w
        return self.g0 + self.slope * t + np.sin(arg) @ self.a

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        arg = t[..., None] * self.w
        return self.slope + np.cos(arg) @ (self.a * self.w)


class _Fn:
    """Picklable evaluator for one named quantity of a shortcut pulse."""

    def __init__(self, coeffs: PulseCoefficients, what: str):
        self.gamma = _Gamma(coeffs)
        self.three_level = coeffs.task.is_three_level
        self.span = math.pi - coeffs.target.theta
        self.what = what

    def __call__(self, t):
        g = self.gamma.value(t)
        gd = self.gamma.rate(t)
        if self.what == "gamma":
            out = g
        elif self.what == "gamma_dot":
            out = gd
        elif not self.three_level:
            if self.what == "omega_p":
                out = 2.0 * gd
            else:
                out = np.zeros_like(g)
        else:
            b = 0.5 * self.span * (1.0 - np.cos(g))
            if self.what == "beta":
                out = b
            elif self.what == "beta_dot":
                out = 0.5 * self.span * np.sin(g) * gd
            elif self.what == "omega_p":
                out = gd * (self.span * np.cos(g) * np.sin(b) + 2.0 * np.cos(b))
            elif self.what == "omega_s":
                out = gd * (self.span * np.cos(g) * np.cos(b) - 2.0 * np.sin(b))
            else:
                raise ValueError(self.what)
        return out if np.ndim(out) else float(out)


def angle_trajectory(coeffs: PulseCoefficients) -> AngleTrajectory:
    return AngleTrajectory(
        gamma=_Fn(coeffs, "gamma"),
        beta=_Fn(coeffs, "beta"),
        gamma_dot=_Fn(coeffs, "gamma_dot"),
        beta_dot=_Fn(coeffs, "beta_dot"),
        phase=coeffs.target.phi,
        duration=coeffs.tf,
    )


@dataclass(frozen=True)
class PulsePair:
    """Pump and Stokes envelopes (rad/us) with the static Stokes phase.

    Envelopes may be complex for phase-modulated pulses; they are evaluated
    on scalars or numpy arrays of times in ``[0, tf]``.
    """

    omega_p: Callable
    omega_s: Callable
    phase: float
    tf: float

    def sample(self, step: float = EXPORT_STEP):
        """Envelopes on a uniform grid including both endpoints."""
        n = int(round(self.tf / step))
        t = np.linspace(0.0, self.tf, n + 1)
        return t, np.asarray(self.omega_p(t)), np.asarray(self.omega_s(t))

    @property
    def is_real(self) -> bool:
        t = np.linspace(0.0, self.tf, 257)
        return not (np.iscomplexobj(self.omega_p(t)) or np.iscomplexobj(self.omega_s(t)))

    def scaled(self, factor: float) -> "PulsePair":
        return PulsePair(_Scaled(self.omega_p, factor), _Scaled(self.omega_s, factor), self.phase, self.tf)


class _Scaled:
    def __init__(self, fn, factor):
        self.fn, self.factor = fn, factor

    def __call__(self, t):
        return self.factor * self.fn(t)


class _Zero:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0


class _Reversed:
    def __init__(self, fn, tf):
        self.fn, self.tf = fn, tf

    def __call__(self, t):
        return -self.fn(self.tf - np.asarray(t, dtype=float) if np.ndim(t) else self.tf - t)


def zero_pulses(tf: float = DEFAULT_TF, phase: float = 0.0) -> PulsePair:
    return PulsePair(_Zero(), _Zero(), phase, tf)


def synthesize_pulses(coeffs: PulseCoefficients) -> PulsePair:
    """Closed-form envelopes realizing ``coeffs`` along the dark-path eigenstate."""
    return PulsePair(_Fn(coeffs, "omega_p"), _Fn(coeffs, "omega_s"), coeffs.target.phi, coeffs.tf)


def general_envelopes(trajectory: AngleTrajectory, t):
    """Envelopes from the generic invariant relations.

    ``Omega_p = 2 (beta' cot(gamma) sin(beta) + gamma' cos(beta))``,
    ``Omega_s = 2 (beta' cot(gamma) cos(beta) - gamma' sin(beta))``.
    Singular wherever ``sin(gamma) = 0``.
    """
    g = np.asarray(trajectory.gamma(t))
    b = np.asarray(trajectory.beta(t))
    gd = np.asarray(trajectory.gamma_dot(t))
    bd = np.asarray(trajectory.beta_dot(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = np.cos(g) / np.sin(g)
        op = 2.0 * (bd * cot * np.sin(b) + gd * np.cos(b))
        os_ = 2.0 * (bd * cot * np.cos(b) - gd * np.sin(b))
    return op, os_


def time_reverse(pulses: PulsePair) -> PulsePair:
    """``Omega_new(t) = -Omega(tf - t)`` on both channels."""
    return PulsePair(
        _Reversed(pulses.omega_p, pulses.tf),
        _Reversed(pulses.omega_s, pulses.tf),
        pulses.phase,
        pulses.tf,
    )


@dataclass(frozen=True)
class ChsParameters:
    """Complex hyperbolic secant pulses, one per listed transition.

    Each pulse has amplitude ``omega_max * sech(beta (t - t_c))`` and
    instantaneous frequency offset ``mu * beta * tanh(beta (t - t_c))``.
    ``transitions`` and ``centers`` are paired element-wise; a transition is
    ``"p"`` (|1>-|e>) or ``"s"`` (|0>-|e>).
    """

    omega_max: float
    beta: float
    mu: float
    duration: float
    centers: tuple[float, ...] = field(default=())
    transitions: tuple[str, ...] = ("p",)
    phase: float = 0.0

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers) or (0.5 * self.duration,) * len(self.transitions)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if not (self.omega_max > 0 and self.beta > 0 and self.duration > 0):
            raise ValidationError("CHS omega_max, beta and duration must be positive")
        if self.mu < 0:
            raise ValidationError("CHS chirp ratio mu must be non-negative")
        if len(self.centers) != len(self.transitions):
            raise ValidationError("CHS centers and transitions must have equal length")
        bad = [x for x in self.transitions if x not in ("p", "s")]
        if bad or len(set(self.transitions)) != len(self.transitions):
            raise ValidationError(f"CHS transitions must be distinct entries of 'p', 's'; got {self.transitions}")


class _Sech:
    def __init__(self, omega_max, beta, mu, center):
        self.omega_max, self.beta, self.mu, self.center = omega_max, beta, mu, center

    def __call__(self, t):
        x = self.beta * (np.asarray(t, dtype=float) - self.center)
        amp = self.omega_max / np.cosh(x)
        if self.mu == 0:
            out = amp
        else:
            # phase = integral of mu*beta*tanh = mu*log(cosh)
            log_cosh = np.logaddexp(x, -x) - math.log(2.0)
            out = amp * np.exp(1j * self.mu * log_cosh)
        return out if np.ndim(out) else complex(out) if self.mu else float(out)


def chs_frequency_offset(params: ChsParameters, transition: str, t):
    """Instantaneous frequency offset (rad/us) of the pulse on ``transition``."""
    c = params.centers[params.transitions.index(transition)]
    return params.mu * params.beta * np.tanh(params.beta * (np.asarray(t, dtype=float) - c))


def synthesize_chs(params: ChsParameters) -> PulsePair:
    env = {"p": _Zero(), "s": _Zero()}
    for tr, c in zip(params.transitions, params.centers):
        env[tr] = _Sech(params.omega_max, params.beta, params.mu, c)
    return PulsePair(env["p"], env["s"], params.phase, params.duration)


def write_pulse_csv(pulses: PulsePair, path, step: float = EXPORT_STEP) -> None:
    """Export envelopes as ordinary frequencies (MHz) on a uniform grid."""
    t, op, os_ = pulses.sample(step)
    if np.iscomplexobj(op) or np.iscomplexobj(os_):
        if np.abs(np.imag(op)).max(initial=0) > 0 or np.abs(np.imag(os_)).max(initial=0) > 0:
            raise ValidationError("pulse CSV holds real envelopes only; chirped pulses cannot be exported")
        op, os_ = op.real, os_.real
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "omega_p_MHz", "omega_s_MHz", "phase_rad"])
        for row in zip(t, op / TWO_PI, os_ / TWO_PI):
            w.writerow([repr(float(x)) for x in row] + [repr(float(pulses.phase))])


def read_pulse_csv(path):
    """Inverse of :func:`write_pulse_csv`: ``(t, omega_p, omega_s, phase)`` in rad/us."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1] * TWO_PI, data[:, 2] * TWO_PI, float(data[0, 3])
