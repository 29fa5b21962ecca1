"""Fidelity and population maps over detuning, amplitude error and coefficients."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import StateLike, ThreeLevelState, ValidationError
from .dynamics import DEFAULT_STEP, propagate_batch
from .synthesis import (
    DEFAULT_TF,
    EQUAL_SUPERPOSITION,
    PulsePair,
    TargetState,
    TaskKind,
    solve_constraint,
    synthesize_pulses,
)

WINDOW_SLACK = 1e-9  # MHz; keeps grid points that land on a window edge


@dataclass(frozen=True)
class Axis:
    """Uniform axis; ``name`` is ``detuning_MHz``, ``eta`` or a coefficient name."""

    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValidationError(f"axis {self.name!r} needs count >= 2, got {self.count}")
        if not self.stop > self.start:
            raise ValidationError(f"axis {self.name!r} must be strictly increasing ({self.start} .. {self.stop})")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @property
    def is_detuning(self) -> bool:
        return self.name == DETUNING


DETUNING = "detuning_MHz"
ETA = "eta"


@dataclass(frozen=True)
class SweepGrid:
    """Per-point results; arrays are shaped ``(axis1.count,)`` or ``(axis1.count, axis2.count)``."""

    axis1: Axis
    fidelity: np.ndarray
    pop1: np.ndarray
    pope: np.ndarray
    pop0: np.ndarray
    dwell: np.ndarray
    axis2: Axis | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.axis1.count,) if self.axis2 is None else (self.axis1.count, self.axis2.count)
        for name in ("fidelity", "pop1", "pope", "pop0", "dwell"):
            if np.shape(getattr(self, name)) != shape:
                raise ValidationError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")

    def detuning_axis(self) -> tuple[int, Axis]:
        if self.axis1.is_detuning:
            return 0, self.axis1
        if self.axis2 is not None and self.axis2.is_detuning:
            return 1, self.axis2
        raise ValidationError("grid has no detuning axis")


@dataclass(frozen=True)
class RobustnessReport:
    avg_fidelity: dict  # window (MHz) -> mean fidelity
    max_off_resonant_pop0: float
    max_off_resonant_pope: float
    min_far_pop1: float
    cutoff: float
    limit: float

    def to_text(self) -> str:
        lines = []
        for w, f in sorted(self.avg_fidelity.items()):
            lines.append(f"avg_fidelity_window_{w:g}_MHz: {f:.6f}")
        lines += [
            f"off_resonant_cutoff_MHz: {self.cutoff:g}",
            f"off_resonant_limit_MHz: {self.limit:g}",
            f"max_off_resonant_pop0: {self.max_off_resonant_pop0:.6f}",
            f"max_off_resonant_pope: {self.max_off_resonant_pope:.6f}",
            f"min_far_pop1: {self.min_far_pop1:.6f}",
        ]
        return "\n".join(lines) + "\n"


def _grid_from_batch(axis, batch, axis2=None, shape=None, meta=None) -> SweepGrid:
    pops = batch.populations
    shape = shape or (axis.count,)
    return SweepGrid(
        axis1=axis,
        axis2=axis2,
        fidelity=batch.fidelity.reshape(shape),
        pop1=pops[:, 0].reshape(shape),
        pope=pops[:, 1].reshape(shape),
        pop0=pops[:, 2].reshape(shape),
        dwell=batch.dwell_time.reshape(shape),
        meta=meta or {},
    )


def detuning_sweep(
    pulses: PulsePair,
    target: StateLike,
    start: float,
    stop: float,
    count: int,
    *,
    initial: StateLike | None = None,
    eta: float = 0.0,
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> SweepGrid:
    """Fidelity versus detuning (MHz) on a uniform grid."""
    axis = Axis(DETUNING, start, stop, count)
    batch = propagate_batch(pulses, axis.values, eta, initial=initial, target=target, step=step, jobs=jobs)
    return _grid_from_batch(axis, batch, meta={"eta": eta})


def eta_sweep(
    pulses: PulsePair,
    target: StateLike,
    detuning: float,
    start: float,
    stop: float,
    count: int,
    *,
    initial: StateLike | None = None,
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> SweepGrid:
    """Fidelity versus relative amplitude error at fixed detuning (MHz)."""
    if start <= -1 or stop > 1:
        raise ValidationError(f"eta range must lie within (-1, 1], got [{start}, {stop}]")
    axis = Axis(ETA, start, stop, count)
    batch = propagate_batch(pulses, detuning, axis.values, initial=initial, target=target, step=step, jobs=jobs)
    return _grid_from_batch(axis, batch, meta={"detuning_MHz": detuning})


def off_resonant_axis(cutoff: float, limit: float, count: int) -> np.ndarray:
    """Detunings ``-limit..-cutoff`` then ``cutoff..limit``, ``count`` points per side."""
    if not 0 <= cutoff < limit:
        raise ValidationError(f"need 0 <= cutoff < limit, got cutoff={cutoff}, limit={limit}")
    side = Axis(DETUNING, cutoff, limit, count).values
    return np.concatenate([-side[::-1], side])


@dataclass(frozen=True)
class OffResonantExcitation:
    detuning: np.ndarray
    pop1: np.ndarray
    pope: np.ndarray
    pop0: np.ndarray
    cutoff: float
    limit: float

    @property
    def max_pop0(self) -> float:
        return float(self.pop0.max())

    @property
    def max_pope(self) -> float:
        return float(self.pope.max())

    def min_pop1_beyond(self, detuning: float) -> float:
        mask = np.abs(self.detuning) > detuning
        if not mask.any():
            raise ValidationError(f"no grid points beyond {detuning} MHz")
        return float(self.pop1[mask].min())


def off_resonant_excitation(
    pulses: PulsePair,
    cutoff: float = 3.5,
    limit: float = 10.0,
    count: int = 651,
    *,
    initial: StateLike | None = None,
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> OffResonantExcitation:
    """Final populations of spectator ions with ``cutoff <= |detuning| <= limit``.

    Spectators start in ``|1>`` unless ``initial`` says otherwise.
    """
    det = off_resonant_axis(cutoff, limit, count)
    batch = propagate_batch(pulses, det, 0.0, initial=initial or ThreeLevelState.ground_one(), step=step, jobs=jobs)
    pops = batch.populations
    return OffResonantExcitation(det, pops[:, 0], pops[:, 1], pops[:, 2], cutoff, limit)


def windowed_average(
    grid: SweepGrid, window: float, values: np.ndarray | None = None, gaussian_fwhm: float | None = None
) -> float:
    """Mean of fidelity over grid points with ``|detuning| <= window``.

    The mean is flat unless ``gaussian_fwhm`` (MHz) is given, in which case
    points are weighted by a centred Gaussian of that full width at half
    maximum.  For a 2-D grid the mean runs along the detuning axis and an
    array is returned (one value per point of the other axis).
    """
    which, axis = grid.detuning_axis()
    if window < 0 or window > max(abs(axis.start), abs(axis.stop)) + WINDOW_SLACK:
        raise ValidationError(f"window {window} MHz lies outside the grid {axis.start}..{axis.stop}")
    mask = np.abs(axis.values) <= window + WINDOW_SLACK
    if not mask.any():
        raise ValidationError(f"no grid points within +-{window} MHz")
    data = grid.fidelity if values is None else values
    w = np.ones(int(mask.sum()))
    if gaussian_fwhm is not None:
        if not gaussian_fwhm > 0:
            raise ValidationError(f"gaussian_fwhm must be positive, got {gaussian_fwhm!r}")
        sigma = gaussian_fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        w = np.exp(-0.5 * (axis.values[mask] / sigma) ** 2)
    w = w / w.sum()
    if data.ndim == 1:
        return float(data[mask] @ w)
    return data[:, mask] @ w if which == 1 else w @ data[mask, :]


def coefficient_map(
    task,
    scanned: str,
    scan: tuple[float, float, int],
    fixed: Mapping[str, float],
    detuning: tuple[float, float, int],
    *,
    tf: float = DEFAULT_TF,
    target: TargetState = EQUAL_SUPERPOSITION,
    solve_for: str = "a4",
    step: float = DEFAULT_STEP,
    jobs: int = 1,
) -> SweepGrid:
    """2-D map over (scanned coefficient, detuning) with ``solve_for`` re-solved per column.

    Fidelity is measured against the task's ideal end state; populations are
    those of the same runs, so for the off-resonant part of the detuning axis
    ``pop0`` is the spectator excitation.
    """
    task = TaskKind.parse(task)
    if scanned not in ("a2", "a6", "a8"):
        raise ValidationError(f"scanned coefficient must be one of a2, a6, a8; got {scanned!r}")
    if solve_for in fixed or solve_for == scanned:
        raise ValidationError(f"{solve_for} is re-solved at every point and cannot be fixed or scanned")
    cax = Axis(scanned, *scan)
    dax = Axis(DETUNING, *detuning)
    shape = (cax.count, dax.count)
    out = {k: np.empty(shape) for k in ("fidelity", "pop1", "pope", "pop0", "dwell")}
    solved = []
    for i, value in enumerate(cax.values):
        free = {k: v for k, v in fixed.items() if k != scanned}
        free[scanned] = float(value)
        coeffs = solve_constraint(task, free, tf=tf, target=target)
        solved.append(coeffs[solve_for])
        batch = propagate_batch(
            synthesize_pulses(coeffs),
            dax.values,
            initial=coeffs.initial_state(),
            target=coeffs.final_state(),
            step=step,
            jobs=jobs,
        )
        pops = batch.populations
        out["fidelity"][i] = batch.fidelity
        out["pop1"][i], out["pope"][i], out["pop0"][i] = pops[:, 0], pops[:, 1], pops[:, 2]
        out["dwell"][i] = batch.dwell_time
    return SweepGrid(axis1=cax, axis2=dax, meta={"solved": {solve_for: solved}, "task": task.value}, **out)


def robustness_report(
    grid: SweepGrid,
    offres: OffResonantExcitation,
    windows=(0.17, 0.34),
    far: float = 5.0,
) -> RobustnessReport:
    return RobustnessReport(
        avg_fidelity={w: windowed_average(grid, w) for w in windows},
        max_off_resonant_pop0=offres.max_pop0,
        max_off_resonant_pope=offres.max_pope,
        min_far_pop1=offres.min_pop1_beyond(far) if offres.limit > far else float("nan"),
        cutoff=offres.cutoff,
        limit=offres.limit,
    )


def write_sweep_csv(grid: SweepGrid, path) -> None:
    """Columns: axis1, [axis2,] fidelity, pop1, pope, pop0, t_u_us."""
    header = [grid.axis1.name] + ([grid.axis2.name] if grid.axis2 else [])
    header += ["fidelity", "pop1", "pope", "pop0", "t_u_us"]
    cols = (grid.fidelity, grid.pop1, grid.pope, grid.pop0, grid.dwell)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        if grid.axis2 is None:
            for i, x in enumerate(grid.axis1.values):
                w.writerow([repr(float(x))] + [repr(float(c[i])) for c in cols])
        else:
            for i, x in enumerate(grid.axis1.values):
                for j, y in enumerate(grid.axis2.values):
                    w.writerow([repr(float(x)), repr(float(y))] + [repr(float(c[i, j])) for c in cols])


def write_offres_csv(offres: OffResonantExcitation, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([DETUNING, "pop1", "pope", "pop0"])
        for row in zip(offres.detuning, offres.pop1, offres.pope, offres.pop0):
            w.writerow([repr(float(x)) for x in row])
