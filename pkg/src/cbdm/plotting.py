"""Report figures (PNG) written by the command-line tool."""

from __future__ import annotations

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import Dirichlet, Interface, ProblemSpec  # noqa: E402

__all__ = ["plot_convergence", "plot_profile", "plot_field", "plot_map"]


def _draw_boundaries(ax, problem: ProblemSpec):
    styles = {Dirichlet: dict(color="k", lw=1.6), Interface: dict(color="tab:red", lw=1, ls="--")}
    for sub in problem.subdomains:
        for k, c in enumerate(sub.conditions):
            a, b = sub.polygon.side(k)
            st = styles.get(type(c), dict(color="tab:blue", lw=1, ls=":"))
            ax.plot([a.real, b.real], [a.imag, b.imag], **st)


def plot_convergence(history, path) -> None:
    h = np.asarray(history, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(h):
        ax.semilogy(h[:, 0], h[:, 3], label="max |xi|")
        ax.semilogy(h[:, 0], np.abs(h[:, 4]) + 1e-300, label="|sum xi|", alpha=0.7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual (V)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_profile(ys: Sequence[float], series: Dict[str, Sequence[float]], path,
                 x: float = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, v in series.items():
        ax.plot(ys, v, label=name)
    ax.set_xlabel("y")
    ax.set_ylabel("potential (V)")
    if x is not None:
        ax.set_title(f"x = {x}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_field(xs, ys, grid, problem: ProblemSpec, path, levels=None) -> None:
    fig, ax = plt.subplots(figsize=(5, 8))
    g = np.ma.masked_invalid(grid)
    if levels is None:
        levels = np.linspace(0.05, 0.95, 19)
    pc = ax.contourf(xs, ys, g, levels=50, cmap="viridis")
    ax.contour(xs, ys, g, levels=levels, colors="w", linewidths=0.6)
    _draw_boundaries(ax, problem)
    fig.colorbar(pc, ax=ax, label="potential (V)")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_map(dmap, path, radii=(0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99), rays: int = 24) -> None:
    """Images of disk circles and rays under the map, with the polygon."""
    fig, ax = plt.subplots(figsize=(5, 6))
    v = np.append(dmap.polygon.vertices, dmap.polygon.vertices[0])
    ax.plot(v.real, v.imag, "k-", lw=1.5)
    phi = np.linspace(0, 2 * np.pi, 241)
    for r in radii:
        z = dmap.forward(r * np.exp(1j * phi))
        ax.plot(z.real, z.imag, color="tab:blue", lw=0.6)
    rr = np.linspace(0, 0.995, 60)
    for a in np.linspace(0, 2 * np.pi, rays, endpoint=False):
        z = dmap.forward(rr * np.exp(1j * a))
        ax.plot(z.real, z.imag, color="tab:orange", lw=0.6)
    ax.plot(dmap.polygon.vertices.real, dmap.polygon.vertices.imag, "ko", ms=3)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
