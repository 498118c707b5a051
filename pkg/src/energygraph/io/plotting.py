"""Static figures rendered to files with matplotlib (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..graph import Graph  # noqa: E402


def plot_trajectory(traj, path, states=None):
    """State histories, one axis per state."""
    names = list(states or traj.state_names)
    idx = [traj.state_names.index(n) for n in names]
    fig, axes = plt.subplots(len(idx), 1, sharex=True, figsize=(7, 1.8 * len(idx) + 0.6), squeeze=False)
    for ax, k, name in zip(axes[:, 0], idx, names):
        ax.plot(traj.times, traj.states[:, k], lw=1.2)
        ax.set_ylabel(name, fontsize=8)
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_graph(g: Graph, path):
    """Circular layout; dynamic solid, algebraic double ring, external dashed."""
    n = len(g.vertices)
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False) + np.pi / 2
    pos = np.column_stack([np.cos(ang), np.sin(ang)]) if n > 1 else np.zeros((1, 2))
    fig, ax = plt.subplots(figsize=(6, 6))
    r = 0.12
    for (x, y), v in zip(pos, g.vertices):
        ls = "--" if v.kind == "external" else "-"
        ax.add_patch(plt.Circle((x, y), r, fill=False, ls=ls, lw=1.5))
        if v.kind == "algebraic":
            ax.add_patch(plt.Circle((x, y), r * 0.8, fill=False, lw=1.0))
        ax.text(x, y - r - 0.06, v.name, ha="center", va="top", fontsize=8)
    for j, (e, (t, h)) in enumerate(zip(g.edges, g.edge_matrix)):
        # outside endpoints sit radially beyond their partner vertex
        if t and h:
            a, b = pos[t - 1], pos[h - 1]
        elif t:
            a = pos[t - 1]
            b = a * 1.45 if np.any(a) else a + [0.5, 0]
        else:
            b = pos[h - 1]
            a = b * 1.45 if np.any(b) else b - [0.5, 0]
        d = b - a
        L = np.hypot(*d) or 1.0
        start = a + d / L * (r if t else 0)
        end = b - d / L * (r if h else 0)
        ax.annotate("", xy=end, xytext=start, arrowprops=dict(arrowstyle="->", lw=1.0))
        mid = 0.5 * (start + end)
        ax.text(mid[0], mid[1], e.name, fontsize=7, ha="center", va="bottom", color="0.25")
    ax.set_xlim(-1.8, 1.8)
    ax.set_ylim(-1.8, 1.8)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title(g.name)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_history(result, path):
    """Objective value per evaluation with the best-so-far envelope."""
    J = np.array([h.J for h in result.history])
    best = np.array([h.best_J for h in result.history])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(1, J.size + 1), J, ".", ms=3, alpha=0.5, label="evaluation")
    ax.plot(np.arange(1, J.size + 1), best, lw=1.5, label="best so far")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("J")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
