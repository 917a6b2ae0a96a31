"""Report rendering: convergence-history and centerline-profile figures.

Figures are written next to the delimited outputs; matplotlib runs with the
Agg backend so the report path works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .kinetic import DEFAULT_GAMMA, conserved_to_primitive
from .mesh import Mesh


def residual_figure(history, path, title="Residual convergence"):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.semilogy(history.steps, history.res_rho_l1, label=r"$L_1$ density residual")
    ax.semilogy(history.steps, history.res_l2, label=r"$L_2$ state residual", alpha=0.7)
    ax.set_xlabel("step")
    ax.set_ylabel("residual")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def comparison_figure(histories, path, title="Residual comparison"):
    """Overlay several labeled residual histories (scheme comparisons)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, (steps, res) in histories.items():
        ax.semilogy(steps, res, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel(r"$L_1$ density residual")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def centerline_profile(mesh: Mesh, field, axis=1, through=(0.5, 0.5), component=1,
                       nbins=None, gamma: float = DEFAULT_GAMMA):
    """Bin-averaged velocity profile along a centerline of the domain.

    axis picks the line direction; through gives the coordinates in the two
    remaining directions.  Cells whose centroid lies within one mean cell
    size of the line are volume-averaged per bin.  Returns (positions,
    values) sorted by position.
    """
    w = conserved_to_primitive(np.asarray(field, dtype=float), gamma)
    others = [d for d in range(3) if d != axis]
    cen = mesh.cell_centroid
    radius = float(np.mean(mesh.cell_h))
    dist = np.hypot(cen[:, others[0]] - through[0], cen[:, others[1]] - through[1])
    sel = dist <= radius
    if not np.any(sel):
        raise ValueError("no cells near the requested centerline")
    pos = cen[sel, axis]
    vals = w[sel, 1 + component - 1] if component >= 1 else w[sel, 0]
    vol = mesh.cell_volume[sel]
    if nbins is None:
        span = pos.max() - pos.min()
        nbins = max(4, int(round(span / radius / 1.5)))
    edges = np.linspace(pos.min() - 1e-12, pos.max() + 1e-12, nbins + 1)
    idx = np.clip(np.digitize(pos, edges) - 1, 0, nbins - 1)
    centers, means = [], []
    for b in range(nbins):
        m = idx == b
        if not np.any(m):
            continue
        centers.append(np.average(pos[m], weights=vol[m]))
        means.append(np.average(vals[m], weights=vol[m]))
    return np.array(centers), np.array(means)


def profile_figure(positions, values, path, xlabel="position", ylabel="velocity",
                   title="Centerline profile", reference=None):
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.plot(positions, values, "o-", label="computed")
    if reference is not None:
        ax.plot(reference[0], reference[1], "k--", label="reference")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
