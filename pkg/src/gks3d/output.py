"""File emission: legacy ASCII VTK snapshots and the residual history CSV."""

from __future__ import annotations

import numpy as np

from .kinetic import DEFAULT_GAMMA, conserved_to_primitive
from .mesh import Mesh
from .mesh.geometry import TET

VTK_TET = 10
VTK_HEX = 12


class OutputError(ValueError):
    pass


def write_vtk(mesh: Mesh, field, path, gamma: float = DEFAULT_GAMMA, gradients=None):
    """Legacy ASCII VTK unstructured grid with cell data rho, p, velocity.

    gradients, if given, adds one 3-vector array per conserved component.
    Refuses fields containing non-finite values.
    """
    q = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(q)):
        bad = np.flatnonzero(~np.all(np.isfinite(q), axis=1))
        raise OutputError(f"refusing to write non-finite field (cells {bad[:5].tolist()})")
    w = conserved_to_primitive(q, gamma)
    p = w[:, 0] / (2.0 * w[:, 4])

    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("gks3d snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(mesh.nodes)} double\n")
        for x, y, z in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        sizes = np.where(mesh.cell_kind == TET, 4, 8)
        fh.write(f"CELLS {mesh.ncells} {int(np.sum(sizes + 1))}\n")
        for c in range(mesh.ncells):
            ids = mesh.cell_nodes[c, : sizes[c]]
            fh.write(f"{sizes[c]} " + " ".join(str(i) for i in ids) + "\n")
        fh.write(f"CELL_TYPES {mesh.ncells}\n")
        for c in range(mesh.ncells):
            fh.write(f"{VTK_TET if mesh.cell_kind[c] == TET else VTK_HEX}\n")
        fh.write(f"CELL_DATA {mesh.ncells}\n")
        fh.write("SCALARS rho double 1\nLOOKUP_TABLE default\n")
        for v in w[:, 0]:
            fh.write(f"{v:.17g}\n")
        fh.write("SCALARS p double 1\nLOOKUP_TABLE default\n")
        for v in p:
            fh.write(f"{v:.17g}\n")
        fh.write("VECTORS velocity double\n")
        for u, v, ww in w[:, 1:4]:
            fh.write(f"{u:.17g} {v:.17g} {ww:.17g}\n")
        if gradients is not None:
            names = ("rho", "rhoU", "rhoV", "rhoW", "rhoE")
            for k, name in enumerate(names):
                fh.write(f"VECTORS grad_{name} double\n")
                for gx, gy, gz in gradients[:, :, k]:
                    fh.write(f"{gx:.17g} {gy:.17g} {gz:.17g}\n")


def write_residual_csv(history, path):
    """CSV `step,time_s,res_rho_l1,res_l2`, one row per recorded step."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("step,time_s,res_rho_l1,res_l2\n")
        for step, t, r1, r2 in zip(history.steps, history.time_s, history.res_rho_l1, history.res_l2):
            fh.write(f"{step},{t:.6f},{r1:.12e},{r2:.12e}\n")


def read_residual_csv(path):
    """Inverse of write_residual_csv, used by tests and the report path."""
    steps, times, r1, r2 = [], [], [], []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "step,time_s,res_rho_l1,res_l2":
            raise OutputError(f"unexpected residual CSV header {header!r}")
        for line in fh:
            s, t, a, b = line.strip().split(",")
            steps.append(int(s))
            times.append(float(t))
            r1.append(float(a))
            r2.append(float(b))
    return steps, times, r1, r2
