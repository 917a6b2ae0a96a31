"""Structured box meshes: hex lattices and their 6-tet subdivisions."""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, MeshError

# six tetrahedra sharing the main diagonal v0-v6 of a VTK-ordered hex;
# face diagonals come out consistent between adjacent cells
_KUHN_TETS = ((0, 1, 2, 6), (0, 2, 3, 6), (0, 3, 7, 6), (0, 7, 4, 6), (0, 4, 5, 6), (0, 5, 1, 6))

_SIDES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


def generate_box_mesh(extent, divisions, split="hex", perturb=0.0, seed=None, periodic=()):
    """Conforming mesh of the box [0, ex] x [0, ey] x [0, ez].

    split="tet" subdivides every lattice hex into 6 tetrahedra.  perturb
    jiggles interior nodes by the given fraction of the local spacing
    (tet split only, so faces stay planar).  periodic lists axis letters
    ("x", "y", "z") whose opposite sides are merged into shifted interior
    faces.
    """
    extent = np.asarray(extent, dtype=float)
    divisions = np.asarray(divisions, dtype=int)
    if np.any(extent <= 0.0):
        raise MeshError("box extent must be positive")
    if np.any(divisions < 1):
        raise MeshError("divisions must be >= 1 per axis")
    if perturb and split != "tet":
        raise MeshError("node perturbation requires the tet split (hex faces must stay planar)")
    if perturb < 0.0 or perturb > 0.3:
        if perturb:
            raise MeshError("perturb fraction must lie in [0, 0.3]")

    nx, ny, nz = divisions
    spacing = extent / divisions
    xs = [np.linspace(0.0, extent[d], divisions[d] + 1) for d in range(3)]
    grid = np.stack(np.meshgrid(xs[0], xs[1], xs[2], indexing="ij"), axis=-1)
    if perturb:
        rng = np.random.default_rng(seed)
        jig = rng.uniform(-perturb, perturb, grid.shape) * spacing
        jig[0, :, :, 0] = jig[-1, :, :, 0] = 0.0
        jig[:, 0, :, 1] = jig[:, -1, :, 1] = 0.0
        jig[:, :, 0, 2] = jig[:, :, -1, 2] = 0.0
        # pin boundary nodes entirely so the six sides stay planar rectangles
        mask = np.zeros(grid.shape[:3], dtype=bool)
        mask[1:-1, 1:-1, 1:-1] = True
        grid = grid + jig * mask[..., None]

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    nodes = grid.reshape(-1, 3)

    hex_cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                hex_cells.append(
                    (
                        nid(i, j, k),
                        nid(i + 1, j, k),
                        nid(i + 1, j + 1, k),
                        nid(i, j + 1, k),
                        nid(i, j, k + 1),
                        nid(i + 1, j, k + 1),
                        nid(i + 1, j + 1, k + 1),
                        nid(i, j + 1, k + 1),
                    )
                )

    if split == "hex":
        cells_tet, cells_hex = [], hex_cells
    elif split == "tet":
        cells_tet = [tuple(hx[p] for p in tet) for hx in hex_cells for tet in _KUHN_TETS]
        cells_hex = []
    else:
        raise MeshError(f"unknown split {split!r}")

    patch_faces = {name: [] for name in _SIDES}
    for j in range(ny):
        for k in range(nz):
            patch_faces["xmin"].append((nid(0, j, k), nid(0, j + 1, k), nid(0, j + 1, k + 1), nid(0, j, k + 1)))
            patch_faces["xmax"].append((nid(nx, j, k), nid(nx, j + 1, k), nid(nx, j + 1, k + 1), nid(nx, j, k + 1)))
    for i in range(nx):
        for k in range(nz):
            patch_faces["ymin"].append((nid(i, 0, k), nid(i + 1, 0, k), nid(i + 1, 0, k + 1), nid(i, 0, k + 1)))
            patch_faces["ymax"].append((nid(i, ny, k), nid(i + 1, ny, k), nid(i + 1, ny, k + 1), nid(i, ny, k + 1)))
    for i in range(nx):
        for j in range(ny):
            patch_faces["zmin"].append((nid(i, j, 0), nid(i + 1, j, 0), nid(i + 1, j + 1, 0), nid(i, j + 1, 0)))
            patch_faces["zmax"].append((nid(i, j, nz), nid(i + 1, j, nz), nid(i + 1, j + 1, nz), nid(i, j + 1, nz)))
    if split == "tet":
        patch_faces = {name: _split_quads(fl) for name, fl in patch_faces.items()}

    pairs = []
    for axis in periodic:
        idx = "xyz".index(axis)
        pairs.append((_SIDES[2 * idx], _SIDES[2 * idx + 1]))
    return Mesh.build(nodes, cells_tet, cells_hex, patch_faces, periodic_pairs=pairs)


def _split_quads(quads):
    """Split boundary quads along the diagonal the Kuhn subdivision cuts.

    With the side quads ordered as emitted above, every Kuhn tet face lands
    on the first-to-third diagonal.
    """
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return tris
