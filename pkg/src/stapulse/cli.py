"""Command-line front end.

Commands: ``synth``, ``propagate``, ``sweep``, ``optimize``, ``compare-chs``.
A YAML config file supplies the run; command-line flags override it.
Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import dynamics, optimize, sweep, synthesis
from .core import TWO_PI, TargetState, ValidationError
from .dynamics import DecoherenceModel, ErrorChannel, IntegrationError

log = logging.getLogger("stapulse")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValidationError):
    pass


@dataclass
class RunConfig:
    task: synthesis.TaskKind = synthesis.TaskKind.CREATE_ASQS
    coefficients: dict | str = "table"  # mapping, "table" or "optimize"
    tf: float = synthesis.DEFAULT_TF
    target: TargetState = synthesis.EQUAL_SUPERPOSITION
    channel: ErrorChannel = field(default_factory=ErrorChannel)
    t2: float | None = None
    mixed_overlap: float = 0.5
    detuning_grid: tuple = (-10.0, 10.0, 2001)
    eta_grid: tuple = (-0.2, 0.2, 41)
    eta_detunings: tuple = (0.0, 0.17)
    offres: tuple = (3.5, 10.0, 651)
    windows: tuple = (0.17, 0.34)
    plan: optimize.ScanPlan | None = None
    objective: optimize.Objective = field(default_factory=optimize.Objective)
    chs: synthesis.ChsParameters | None = None
    out: Path = Path("out")
    jobs: int = 1
    plot: bool = False
    step: float = dynamics.DEFAULT_STEP
    reverse: bool = False
    bloch: bool = False

    def resolve_coefficients(self) -> synthesis.PulseCoefficients:
        if self.coefficients == "table":
            return synthesis.table_coefficients(self.task, tf=self.tf, target=self.target)
        if self.coefficients == "optimize":
            res = optimize.coordinate_scan(
                self.task, self.plan, self.objective, tf=self.tf, target=self.target, step=self.step, jobs=self.jobs
            )
            return res.coefficients
        coefs = dict(self.coefficients)
        k = max(synthesis.DEFAULT_K, max(int(n[1:]) + 1 for n in coefs) // 2)
        even_missing = [f"a{2 * j}" for j in range(1, k + 1) if f"a{2 * j}" not in coefs]
        if not even_missing:
            a = [float(coefs.get(f"a{i + 1}", 0.0)) for i in range(2 * k)]
            return synthesis.PulseCoefficients(self.task, tuple(a), tf=self.tf, target=self.target)
        return synthesis.solve_constraint(self.task, coefs, k=k, tf=self.tf, target=self.target)


def _triple(block, name, keys=("start", "stop", "count")):
    try:
        if isinstance(block, dict):
            vals = tuple(block[k] for k in keys)
        else:
            vals = tuple(block)
        if len(vals) != 3:
            raise ValueError
        return (float(vals[0]), float(vals[1]), int(vals[2]) if keys[2] == "count" else float(vals[2]))
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{name}: expected {{{', '.join(keys)}}}, got {block!r}") from None


def _parse_chs(block) -> synthesis.ChsParameters:
    try:
        return synthesis.ChsParameters(
            omega_max=TWO_PI * float(block["omega_max_MHz"]),
            beta=float(block["beta_per_us"]),
            mu=float(block.get("mu", 0.0)),
            duration=float(block["duration_us"]),
            centers=tuple(float(c) for c in block.get("centers_us", ())),
            transitions=tuple(block.get("transitions", ("p",))),
            phase=float(block.get("phase", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"chs: missing field {exc.args[0]}") from None


def _parse_plan(block) -> optimize.ScanPlan:
    kwargs = {}
    if "order" in block:
        kwargs["order"] = tuple(block["order"])
    if "ranges" in block:
        kwargs["ranges"] = {k: _triple(v, f"plan.ranges.{k}", ("min", "max", "step")) for k, v in block["ranges"].items()}
    if "refine_values" in block:
        kwargs["refine_values"] = tuple(block["refine_values"] or ())
    if "start" in block:
        kwargs["start"] = dict(block["start"])
    return optimize.ScanPlan(**kwargs)


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError(f"config: file {path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flags, then validate everything up front."""
    data = load_config(args.config)
    cfg = RunConfig()
    cfg.task = synthesis.TaskKind.parse(args.task or data.get("task", cfg.task))
    cfg.tf = float(args.tf if args.tf is not None else data.get("tf_us", cfg.tf))
    tg = data.get("target", {}) or {}
    cfg.target = TargetState(
        float(args.theta if args.theta is not None else tg.get("theta", cfg.target.theta)),
        float(args.phi if args.phi is not None else tg.get("phi", cfg.target.phi)),
    )
    coefs = data.get("coefficients", "table")
    if isinstance(coefs, str):
        if coefs not in ("table", "optimize"):
            raise ConfigError(f"coefficients: expected a mapping, 'table' or 'optimize', got {coefs!r}")
    elif isinstance(coefs, dict):
        coefs = {str(k): float(v) for k, v in coefs.items()}
    else:
        raise ConfigError(f"coefficients: expected a mapping, got {coefs!r}")
    if args.coef:
        coefs = dict(coefs) if isinstance(coefs, dict) else {}
        for item in args.coef:
            name, _, value = item.partition("=")
            try:
                coefs[name.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"--coef: cannot parse {item!r} (use NAME=VALUE)") from None
    if args.optimize:
        coefs = "optimize"
    cfg.coefficients = coefs

    ch = data.get("channel", {}) or {}
    cfg.channel = ErrorChannel(
        detuning=float(args.detuning if args.detuning is not None else ch.get("detuning_MHz", 0.0)),
        eta=float(args.eta if args.eta is not None else ch.get("eta", 0.0)),
    )
    t2 = args.t2 if args.t2 is not None else data.get("t2_us")
    cfg.t2 = None if t2 is None else float(t2)
    cfg.mixed_overlap = float(data.get("mixed_overlap", 0.5))
    if cfg.t2 is not None:
        DecoherenceModel(cfg.t2, cfg.mixed_overlap)

    sw = data.get("sweep", {}) or {}
    if "detuning" in sw:
        cfg.detuning_grid = _triple(sw["detuning"], "sweep.detuning")
    if "eta" in sw:
        cfg.eta_grid = _triple(sw["eta"], "sweep.eta")
        cfg.eta_detunings = tuple(float(x) for x in sw["eta"].get("detunings_MHz", cfg.eta_detunings))
    if "offres" in sw:
        cfg.offres = _triple(sw["offres"], "sweep.offres", ("cutoff", "limit", "count"))
    if "windows_MHz" in sw:
        cfg.windows = tuple(float(w) for w in sw["windows_MHz"])
    sweep.Axis(sweep.DETUNING, *cfg.detuning_grid)
    sweep.Axis(sweep.ETA, *cfg.eta_grid)
    sweep.off_resonant_axis(*cfg.offres)

    if "plan" in data:
        cfg.plan = _parse_plan(data["plan"] or {})
    if "objective" in data:
        try:
            cfg.objective = optimize.Objective(**data["objective"])
        except TypeError as exc:
            raise ConfigError(f"objective: {exc}") from None
    if "chs" in data:
        cfg.chs = _parse_chs(data["chs"])

    cfg.out = Path(args.out or data.get("out", "out"))
    cfg.jobs = int(args.jobs if args.jobs is not None else data.get("jobs", dynamics.default_jobs()))
    if cfg.jobs < 1:
        raise ConfigError("jobs: must be >= 1")
    cfg.plot = bool(args.plot or data.get("plot", False))
    step_ns = args.step_ns if args.step_ns is not None else data.get("step_ns", 1.0)
    cfg.step = float(step_ns) * 1e-3
    dynamics.step_count(cfg.tf, cfg.step)
    cfg.reverse = bool(getattr(args, "reverse", False))
    cfg.bloch = bool(getattr(args, "bloch", False))

    if cfg.coefficients != "optimize":
        cfg.resolve_coefficients()
    return cfg


def _maybe_plot(cfg: RunConfig, fn, *args):
    if not cfg.plot:
        return
    try:
        fn(*args)
    except ImportError:
        log.warning("matplotlib not available; skipping plot")


def _write_kv(path, items: dict):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}: {v}\n")


def _pulses_for(cfg: RunConfig):
    coeffs = cfg.resolve_coefficients()
    pulses = synthesis.synthesize_pulses(coeffs)
    initial, target = coeffs.initial_state(), coeffs.final_state()
    if cfg.reverse:
        pulses = synthesis.time_reverse(pulses)
        initial, target = target, initial
    return coeffs, pulses, initial, target


def cmd_synth(cfg: RunConfig) -> dict:
    from . import plotting

    coeffs, pulses, _, _ = _pulses_for(cfg)
    path = cfg.out / "pulses.csv"
    synthesis.write_pulse_csv(pulses, path)
    optimize.write_coefficients(coeffs, cfg.out / "coefficients.yaml")
    _, op, os_ = pulses.sample()
    summary = {
        "task": coeffs.task.value,
        "reversed": cfg.reverse,
        "peak_omega_p_MHz": float(np.abs(op).max() / TWO_PI),
        "peak_omega_s_MHz": float(np.abs(os_).max() / TWO_PI),
    }
    _write_kv(cfg.out / "synth_summary.txt", summary)
    _maybe_plot(cfg, plotting.plot_pulses, pulses, cfg.out / "pulses.svg")
    return summary


def cmd_propagate(cfg: RunConfig) -> dict:
    from . import plotting

    coeffs, pulses, initial, target = _pulses_for(cfg)
    res = dynamics.propagate(pulses, target, cfg.channel, initial=initial, step=cfg.step)
    dynamics.write_trajectory_csv(res, cfg.out / "trajectory.csv")
    pops = res.final_state.populations
    summary = {
        "task": coeffs.task.value,
        "detuning_MHz": cfg.channel.detuning,
        "eta": cfg.channel.eta,
        "fidelity": res.fidelity,
        "dwell_time_us": res.dwell_time,
        "pop1": pops[0],
        "pope": pops[1],
        "pop0": pops[2],
        "norm_drift": res.norm_drift,
    }
    if cfg.t2 is not None:
        model = DecoherenceModel(cfg.t2, cfg.mixed_overlap)
        summary["t2_us"] = cfg.t2
        summary["fidelity_t2"] = dynamics.decoherence_adjusted_fidelity(res.fidelity, res.dwell_time, model)
        # ensemble estimate: flat average of the ideal fidelity over the widest
        # reporting window, combined with this run's dwell time
        w = max(cfg.windows)
        n = int(round(2 * w / 0.01)) + 1
        grid = sweep.detuning_sweep(
            pulses, target, -w, w, n, initial=initial, eta=cfg.channel.eta, step=cfg.step, jobs=cfg.jobs
        )
        avg = sweep.windowed_average(grid, w)
        summary[f"avg_fidelity_window_{w:g}_MHz"] = avg
        summary["avg_fidelity_t2"] = dynamics.decoherence_adjusted_fidelity(avg, res.dwell_time, model)
    _write_kv(cfg.out / "summary.txt", summary)
    if cfg.bloch:
        dynamics.write_bloch_csv(res, cfg.out / "bloch.csv")
    _maybe_plot(cfg, plotting.plot_populations, res, cfg.out / "populations.svg")
    return summary


def _eta_grid(cfg, pulses, initial, target):
    grids = [
        sweep.eta_sweep(pulses, target, d, *cfg.eta_grid, initial=initial, step=cfg.step, jobs=cfg.jobs)
        for d in cfg.eta_detunings
    ]
    if len(grids) == 1:
        return grids[0]
    dets = cfg.eta_detunings
    uniform = len(dets) >= 2 and np.allclose(np.diff(dets), (dets[-1] - dets[0]) / (len(dets) - 1)) and dets[-1] > dets[0]
    if not uniform:
        raise ConfigError("sweep.eta.detunings_MHz must be strictly increasing and evenly spaced")
    stack = {k: np.column_stack([getattr(g, k) for g in grids]) for k in ("fidelity", "pop1", "pope", "pop0", "dwell")}
    return sweep.SweepGrid(
        axis1=grids[0].axis1, axis2=sweep.Axis(sweep.DETUNING, dets[0], dets[-1], len(dets)), **stack
    )


def cmd_sweep(cfg: RunConfig) -> dict:
    from . import plotting

    coeffs, pulses, initial, target = _pulses_for(cfg)
    grid = sweep.detuning_sweep(
        pulses, target, *cfg.detuning_grid, initial=initial, eta=cfg.channel.eta, step=cfg.step, jobs=cfg.jobs
    )
    sweep.write_sweep_csv(grid, cfg.out / "detuning_sweep.csv")
    eta = _eta_grid(cfg, pulses, initial, target)
    sweep.write_sweep_csv(eta, cfg.out / "eta_sweep.csv")
    off = sweep.off_resonant_excitation(pulses, *cfg.offres, step=cfg.step, jobs=cfg.jobs)
    sweep.write_offres_csv(off, cfg.out / "offres.csv")
    windows = [w for w in cfg.windows if w <= max(abs(cfg.detuning_grid[0]), abs(cfg.detuning_grid[1]))]
    report = sweep.robustness_report(grid, off, windows=windows)
    (cfg.out / "report.txt").write_text(
        f"task: {coeffs.task.value}\nreversed: {cfg.reverse}\n" + report.to_text()
    )
    x = grid.axis1.values
    _maybe_plot(cfg, plotting.plot_curves, x, {"fidelity": grid.fidelity}, cfg.out / "detuning_sweep.svg")
    if eta.axis2 is None:
        curves = {f"{cfg.eta_detunings[0]:g} MHz": eta.fidelity}
    else:
        curves = {f"{d:g} MHz": eta.fidelity[:, j] for j, d in enumerate(eta.axis2.values)}
    _maybe_plot(cfg, plotting.plot_curves, eta.axis1.values, curves, cfg.out / "eta_sweep.svg", "eta")
    _maybe_plot(
        cfg,
        plotting.plot_curves,
        off.detuning,
        {"|1>": off.pop1, "|e>": off.pope, "|0>": off.pop0},
        cfg.out / "offres.svg",
        "detuning (MHz)",
        "population",
    )
    return {"avg_fidelity": report.avg_fidelity, "max_off_resonant_pop0": report.max_off_resonant_pop0}


def cmd_optimize(cfg: RunConfig) -> dict:
    res = optimize.coordinate_scan(
        cfg.task, cfg.plan, cfg.objective, tf=cfg.tf, target=cfg.target, step=cfg.step, jobs=cfg.jobs
    )
    optimize.write_scan_log(res, cfg.out / "scan_log.csv")
    optimize.write_coefficients(res.coefficients, cfg.out / "coefficients.yaml")
    best = res.best
    summary = {
        "task": cfg.task.value,
        "evaluations": len(res.log),
        **{k: best.coeffs[k] for k in ("a2", "a4", "a6", "a8")},
        "mean_infidelity": best.mean_infidelity,
        "max_offres_pop0": best.max_offres_pop0,
        "score": best.score,
    }
    _write_kv(cfg.out / "optimize_summary.txt", summary)
    return summary


def cmd_compare_chs(cfg: RunConfig) -> dict:
    from . import plotting

    if cfg.chs is None:
        raise ConfigError("compare-chs: config needs a 'chs' block")
    coeffs, pulses, initial, target = _pulses_for(cfg)
    chs = synthesis.synthesize_chs(cfg.chs)
    kw = dict(initial=initial, step=cfg.step, jobs=cfg.jobs)
    stc = sweep.detuning_sweep(pulses, target, *cfg.detuning_grid, **kw)
    ref = sweep.detuning_sweep(chs, target, *cfg.detuning_grid, **kw)
    x = stc.axis1.values
    with open(cfg.out / "compare_chs.csv", "w") as fh:
        fh.write("detuning_MHz,fidelity_shortcut,fidelity_chs,t_u_shortcut_us,t_u_chs_us\n")
        for row in zip(x, stc.fidelity, ref.fidelity, stc.dwell, ref.dwell):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    _maybe_plot(cfg, plotting.plot_curves, x, {"shortcut": stc.fidelity, "CHS": ref.fidelity}, cfg.out / "compare_chs.svg")
    summary = {}
    for w in cfg.windows:
        if w <= max(abs(x[0]), abs(x[-1])):
            summary[f"avg_fidelity_shortcut_{w:g}_MHz"] = sweep.windowed_average(stc, w)
            summary[f"avg_fidelity_chs_{w:g}_MHz"] = sweep.windowed_average(ref, w)
    mid = int(np.argmin(np.abs(x)))
    summary["t_u_shortcut_us"] = float(stc.dwell[mid])
    summary["t_u_chs_us"] = float(ref.dwell[mid])
    _write_kv(cfg.out / "compare_chs_summary.txt", summary)
    return summary


COMMANDS = {
    "synth": cmd_synth,
    "propagate": cmd_propagate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "compare-chs": cmd_compare_chs,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="YAML run configuration")
    shared.add_argument("--out", help="output directory (default: out)")
    shared.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    shared.add_argument("--plot", action="store_true", help="also write SVG plots")
    shared.add_argument("--step-ns", type=float, help="integrator step in ns (default 1)")
    shared.add_argument("--task", help="create_asqs | two_level_transfer | return_to_one")
    shared.add_argument("--tf", type=float, help="pulse duration in us")
    shared.add_argument("--theta", type=float, help="superposition polar angle (rad)")
    shared.add_argument("--phi", type=float, help="superposition phase (rad)")
    shared.add_argument("--coef", action="append", metavar="NAME=VALUE", help="set a coefficient, e.g. a2=-1.1")
    shared.add_argument("--optimize", action="store_true", help="obtain coefficients from a coordinate scan")
    shared.add_argument("--detuning", type=float, help="detuning in MHz")
    shared.add_argument("--eta", type=float, help="relative Rabi amplitude error")
    shared.add_argument("--t2", type=float, help="coherence time in us for the decoherence estimate")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stapulse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[shared])
        if name in ("synth", "propagate", "sweep", "compare-chs"):
            p.add_argument("--reverse", action="store_true", help="time-reverse the pulses")
        if name == "propagate":
            p.add_argument("--bloch", action="store_true", help="also write Bloch coordinates")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = build_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](cfg)
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in summary.items():
        print(f"{k}: {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
