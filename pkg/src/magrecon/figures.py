"""Figure rendering for reconstruction outputs.

Writes the two standard pictures next to a run's data files: the phase map
with the recovered (and, when known, the exact) interface, and the misfit
history on a log scale.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
from matplotlib.colors import ListedColormap  # noqa: E402

from .fem import NodalField

_PHASE_CMAP = ListedColormap(["#3b6fc9", "#c94a3b"])  # air blue, steel red


def _lattice(field: NodalField) -> np.ndarray:
    n = field.grid.dim + 1
    return field.values.reshape(n, n)


def save_phase_figure(path, phi: NodalField, phi_exact: NodalField | None = None):
    """Phase map of phi with interface contours (recovered dashed, exact solid)."""
    grid = phi.grid
    ticks = np.linspace(grid.x_min, grid.x_max, grid.dim + 1)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    mesh = ax.pcolormesh(ticks, ticks, _lattice(phi), cmap=_PHASE_CMAP,
                         vmin=1.0, vmax=2.0, shading="gouraud")
    fig.colorbar(mesh, ax=ax, label="phase (1 air, 2 steel)")
    if phi_exact is not None and phi_exact.values.min() < phi_exact.values.max():
        ax.contour(ticks, ticks, _lattice(phi_exact), levels=[1.5],
                   colors="red", linewidths=1.6, linestyles="solid")
    if phi.values.min() < phi.values.max():
        ax.contour(ticks, ticks, _lattice(phi), levels=[1.5],
                   colors="blue", linewidths=1.4, linestyles="dashed")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.set_title("recovered phase field")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_history_figure(path, f1_history):
    """Misfit versus iteration on a log10 axis."""
    history = np.asarray(f1_history, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.semilogy(np.arange(len(history)), np.maximum(history, 1e-300), lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("misfit")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
