"""Figure builders: eps convergence, trajectory heatmaps, energy trade-off.

Offline post-processing only: inputs are the documented CSV schemas, the
only transforms are plotting ones (log axes, sine-basis evaluation for the
space-time heatmap), and nothing is written unless parsing succeeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, read_sweep, read_trajectory

KINDS = ("convergence", "trajectory", "energy")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: Sequence[str]
    output: str
    title: str = ""
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def render(spec: FigureSpec) -> Path:
    """Build the requested figure; returns the written image path."""
    builder = {
        "convergence": _convergence,
        "trajectory": _trajectory,
        "energy": _energy,
    }[spec.kind]
    fig = builder(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi, bbox_inches="tight")
    plt.close(fig)
    return out


def _convergence(spec: FigureSpec):
    table = read_sweep(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.errorbar(
        table.eps,
        table.error_mean,
        yerr=table.error_ci,
        fmt="o",
        capsize=3,
        label="Monte Carlo",
    )
    gamma1 = table.reference_gamma1
    if gamma1 is not None:
        grid = np.geomspace(table.eps.min(), table.eps.max(), 200)
        ax.plot(
            grid,
            (grid / (grid + gamma1)) ** 2,
            "--",
            color="gray",
            label=r"$(\varepsilon/(\varepsilon+\gamma_1))^2$",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"regularization $\varepsilon$")
    ax.set_ylabel(r"terminal error $\mathbb{E}\,\|q(a)-z\|^2$")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title(spec.title or "Terminal error vs regularization")
    return fig


def _trajectory(spec: FigureSpec):
    tables = [read_trajectory(p) for p in spec.inputs[:2]]
    theta = np.linspace(0.0, np.pi, 129)
    fields = []
    for table in tables:
        modes = np.arange(1, table.coeffs.shape[1] + 1)
        basis = np.sqrt(2.0 / np.pi) * np.sin(np.outer(theta, modes))
        fields.append(table.coeffs @ basis.T)
    vmax = max(np.abs(f).max() for f in fields) or 1.0
    fig, axes = plt.subplots(
        1, len(tables), figsize=(5.0 * len(tables), 3.8), squeeze=False, sharey=True
    )
    for ax, table, f in zip(axes[0], tables, fields):
        mesh = ax.pcolormesh(
            table.t, theta, f.T, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="auto"
        )
        ax.set_xlabel("time $t$")
        ax.set_title(f"{table.label} (path {table.meta.get('path_index', '?')})")
    axes[0][0].set_ylabel(r"position $\theta$")
    fig.colorbar(mesh, ax=axes[0], label=r"temperature $q(t,\theta)$")
    if spec.title:
        fig.suptitle(spec.title)
    return fig


def _energy(spec: FigureSpec):
    table = read_sweep(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.plot(table.energy_mean, table.error_mean, "o-")
    for eps, x, y in zip(table.eps, table.energy_mean, table.error_mean):
        ax.annotate(
            rf"$\varepsilon={eps:g}$", (x, y), textcoords="offset points", xytext=(6, 4)
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"control energy $\mathbb{E}\int_0^a \|u\|^2\,dt$")
    ax.set_ylabel(r"terminal error $\mathbb{E}\,\|q(a)-z\|^2$")
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title(spec.title or "Accuracy vs control energy")
    return fig
