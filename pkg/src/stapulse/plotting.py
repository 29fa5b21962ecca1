"""SVG line charts for the CLI.  Matplotlib is imported lazily."""

from __future__ import annotations

import numpy as np

from .core import TWO_PI


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    fig.clf()


def plot_pulses(pulses, path, step=1e-3):
    plt = _pyplot()
    t, op, os_ = pulses.sample(step)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, np.real(op) / TWO_PI, "r-", label=r"$\Omega_p$")
    ax.plot(t, np.real(os_) / TWO_PI, "b--", label=r"$\Omega_s$")
    ax.set_xlabel("time (μs)")
    ax.set_ylabel("Rabi frequency (MHz)")
    ax.legend()
    _save(fig, path)
    plt.close(fig)


def plot_populations(result, path):
    plt = _pyplot()
    pops = result.populations
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(result.times, pops[:, 0], "r-", label="|1>")
    ax.plot(result.times, pops[:, 1], "b-.", label="|e>")
    ax.plot(result.times, pops[:, 2], "g--", label="|0>")
    ax.set_xlabel("time (μs)")
    ax.set_ylabel("population")
    ax.legend()
    _save(fig, path)
    plt.close(fig)


def plot_curves(x, curves: dict, path, xlabel="detuning (MHz)", ylabel="fidelity"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    _save(fig, path)
    plt.close(fig)


def plot_map(grid, path, field="fidelity"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    data = getattr(grid, field)
    mesh = ax.pcolormesh(grid.axis2.values, grid.axis1.values, data, shading="auto")
    fig.colorbar(mesh, ax=ax, label=field)
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel(grid.axis1.name)
    _save(fig, path)
    plt.close(fig)
