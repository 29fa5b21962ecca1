"""Coordinate scan over the free sine coefficients.

Scans one coefficient at a time, holding the others at the best values found
so far, then re-scans ``a8`` for each value in a refinement set of ``a6``.
The even coefficient ``a4`` is re-solved from the task constraint at every
point.  The objective is

    score = (1 - mean F over |detuning| <= window)
            + weight * max(0, max pop0 over cutoff <= |detuning| <= limit - cap)
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .core import TargetState, ThreeLevelState, ValidationError
from .dynamics import DEFAULT_STEP, propagate_batch
from .sweep import off_resonant_axis
from .synthesis import (
    DEFAULT_TF,
    EQUAL_SUPERPOSITION,
    PulseCoefficients,
    TaskKind,
    solve_constraint,
    synthesize_pulses,
)


@dataclass(frozen=True)
class Objective:
    fidelity_window: float = 0.17  # MHz
    excitation_cutoff: float = 3.5  # MHz
    excitation_cap: float = 0.02
    penalty_weight: float = 10.0
    excitation_limit: float = 10.0  # MHz
    window_spacing: float = 0.01  # MHz
    excitation_spacing: float = 0.05  # MHz

    def __post_init__(self):
        for name in ("fidelity_window", "excitation_cutoff", "excitation_cap", "window_spacing", "excitation_spacing"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"objective field {name} must be positive")
        if self.penalty_weight < 0:
            raise ValidationError("penalty_weight must be non-negative")
        if not self.excitation_limit > self.excitation_cutoff:
            raise ValidationError("excitation_limit must exceed excitation_cutoff")

    def window_grid(self) -> np.ndarray:
        n = int(round(self.fidelity_window / self.window_spacing))
        return np.linspace(-self.fidelity_window, self.fidelity_window, 2 * n + 1)

    def excitation_grid(self) -> np.ndarray:
        per_side = int(round((self.excitation_limit - self.excitation_cutoff) / self.excitation_spacing)) + 1
        return off_resonant_axis(self.excitation_cutoff, self.excitation_limit, per_side)

    def combine(self, mean_fidelity: float, max_pop0: float) -> float:
        return (1.0 - mean_fidelity) + self.penalty_weight * max(0.0, max_pop0 - self.excitation_cap)


@dataclass(frozen=True)
class Evaluation:
    coeffs: PulseCoefficients
    mean_infidelity: float
    max_offres_pop0: float
    score: float
    step: str = ""


def evaluate(coeffs: PulseCoefficients, objective: Objective = Objective(), step: float = DEFAULT_STEP) -> Evaluation:
    """Mean infidelity in the window, worst spectator pop0, and the combined score."""
    pulses = synthesize_pulses(coeffs)
    win = objective.window_grid()
    exc = objective.excitation_grid()
    initial = coeffs.initial_state()
    target = coeffs.final_state()
    one = ThreeLevelState.ground_one()
    if initial == one:
        batch = propagate_batch(pulses, np.concatenate([win, exc]), initial=one, target=target, step=step)
        fid = batch.fidelity[: len(win)]
        pop0 = batch.populations[len(win):, 2]
    else:
        fid = propagate_batch(pulses, win, initial=initial, target=target, step=step).fidelity
        pop0 = propagate_batch(pulses, exc, initial=one, step=step).populations[:, 2]
    mean_f = float(fid.mean())
    max_p0 = float(pop0.max())
    return Evaluation(coeffs, 1.0 - mean_f, max_p0, objective.combine(mean_f, max_p0))


def score(coeffs: PulseCoefficients, objective: Objective = Objective(), step: float = DEFAULT_STEP) -> float:
    return evaluate(coeffs, objective, step).score


def range_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive arithmetic range, rounded to 12 decimals to keep grid values clean."""
    if step <= 0:
        raise ValidationError(f"scan step must be positive, got {step}")
    if hi < lo:
        raise ValidationError(f"empty scan range [{lo}, {hi}]")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


@dataclass(frozen=True)
class ScanPlan:
    order: tuple[str, ...] = ("a2", "a6", "a8")
    ranges: dict = field(
        default_factory=lambda: {"a2": (-1.5, -0.7, 0.05), "a6": (0.0, 0.16, 0.02), "a8": (-0.06, 0.06, 0.02)}
    )
    refine_values: tuple[float, ...] = (0.04, 0.06, 0.08, 0.10, 0.12)
    refine_coefficient: str = "a6"
    refine_scan: str = "a8"
    start: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        object.__setattr__(self, "refine_values", tuple(float(v) for v in self.refine_values))
        for name in self.order:
            if name not in self.ranges:
                raise ValidationError(f"no scan range given for {name}")
            if name not in ("a2", "a6", "a8"):
                raise ValidationError(f"only a2, a6, a8 can be scanned, got {name}")
            range_values(*self.ranges[name])
        if self.refine_values and self.refine_scan not in self.ranges:
            raise ValidationError(f"no scan range given for refinement coefficient {self.refine_scan}")

    def values(self, name: str) -> np.ndarray:
        return range_values(*self.ranges[name])

    def evaluation_count(self) -> int:
        n = sum(len(self.values(k)) for k in self.order)
        if self.refine_values:
            n += len(self.refine_values) * len(self.values(self.refine_scan))
        return n


def default_plan(task) -> ScanPlan:
    """Ranges bracketing the published optimum of each task."""
    task = TaskKind.parse(task)
    if task is TaskKind.CREATE_ASQS:
        return ScanPlan()
    if task is TaskKind.TWO_LEVEL_TRANSFER:
        return ScanPlan(ranges={"a2": (0.1, 0.9, 0.05), "a6": (0.0, 0.2, 0.02), "a8": (-0.06, 0.06, 0.02)})
    return ScanPlan(
        ranges={"a2": (0.66, 1.46, 0.05), "a6": (0.0, 0.2, 0.02), "a8": (-0.06, 0.06, 0.02)},
        refine_values=(0.12, 0.14, 0.16, 0.18, 0.20),
    )


@dataclass(frozen=True)
class ScanResult:
    best: Evaluation
    log: list
    best_after_step: list  # (label, best score so far)

    @property
    def coefficients(self) -> PulseCoefficients:
        return self.best.coeffs


def _rank(ev: Evaluation, order) -> tuple:
    return (ev.score,) + tuple(abs(ev.coeffs[k]) for k in order)


def _eval_job(args):
    coeffs, objective, step = args
    return evaluate(coeffs, objective, step)


def coordinate_scan(
    task,
    plan: ScanPlan | None = None,
    objective: Objective = Objective(),
    *,
    tf: float = DEFAULT_TF,
    target: TargetState = EQUAL_SUPERPOSITION,
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> ScanResult:
    """Run the ordered scans plus refinement loop; every evaluation is logged."""
    task = TaskKind.parse(task)
    plan = plan or default_plan(task)
    tie_order = ("a2", "a6", "a8")
    current = {"a2": 0.0, "a6": 0.0, "a8": 0.0}
    current.update({k: float(v) for k, v in plan.start.items()})

    stages = [(f"scan_{name}", name, None) for name in plan.order]
    stages += [
        (f"refine_{plan.refine_coefficient}={v:g}", plan.refine_scan, v) for v in plan.refine_values
    ]

    log: list[Evaluation] = []
    best: Evaluation | None = None
    history = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for label, name, pinned in stages:
            base = dict(current)
            if pinned is not None:
                base[plan.refine_coefficient] = pinned
            points = []
            for v in plan.values(name):
                free = dict(base)
                free[name] = float(v)
                points.append(solve_constraint(task, free, tf=tf, target=target))
            args = [(c, objective, step) for c in points]
            results = list(pool.map(_eval_job, args)) if pool else [_eval_job(a) for a in args]
            for ev in results:
                ev = Evaluation(ev.coeffs, ev.mean_infidelity, ev.max_offres_pop0, ev.score, label)
                log.append(ev)
                if best is None or _rank(ev, tie_order) < _rank(best, tie_order):
                    best = ev
            history.append((label, best.score))
            current = {k: best.coeffs[k] for k in ("a2", "a6", "a8")}
    finally:
        if pool:
            pool.shutdown()
    if best is None:
        raise ValidationError("scan plan produced no feasible points")
    return ScanResult(best, log, history)


def write_scan_log(result: ScanResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "a2", "a4", "a6", "a8", "mean_infidelity", "max_offres_pop0", "score"])
        for ev in result.log:
            c = ev.coeffs
            w.writerow(
                [ev.step]
                + [repr(c[k]) for k in ("a2", "a4", "a6", "a8")]
                + [repr(ev.mean_infidelity), repr(ev.max_offres_pop0), repr(ev.score)]
            )


def coefficients_to_dict(coeffs: PulseCoefficients) -> dict:
    return {
        "task": coeffs.task.value,
        "tf_us": coeffs.tf,
        "target": {"theta": coeffs.target.theta, "phi": coeffs.target.phi},
        "coefficients": coeffs.as_dict(),
    }


def coefficients_from_dict(data: dict) -> PulseCoefficients:
    coefs = data["coefficients"]
    size = len(coefs)
    a = [float(coefs[f"a{i + 1}"]) for i in range(size)]
    tg = data.get("target", {})
    return PulseCoefficients(
        TaskKind.parse(data["task"]),
        tuple(a),
        tf=float(data.get("tf_us", DEFAULT_TF)),
        target=TargetState(float(tg.get("theta", EQUAL_SUPERPOSITION.theta)), float(tg.get("phi", EQUAL_SUPERPOSITION.phi))),
    )


def write_coefficients(coeffs: PulseCoefficients, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(coefficients_to_dict(coeffs), fh, sort_keys=False)


def read_coefficients(path) -> PulseCoefficients:
    with open(path) as fh:
        return coefficients_from_dict(yaml.safe_load(fh))
