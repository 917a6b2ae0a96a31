"""Reconstruction stencil selection for tet and hex cells.

Stencil members are (cell id, shift) pairs; the shift translates the member
cell's geometry into the target cell's coordinate chart, which is how
periodic faces enter the stencils.  Every member list starts with the target
cell at zero shift.

Hex cells get M=8 four-cell sub-stencils built from one polar face-neighbor
pair plus the equatorial cycle; tet cells get M=4 seven-cell sub-stencils
where one face neighbor is enlarged by its own face neighbors to keep the
centroids off a common plane.  Sub-stencils that would need cells missing
across a boundary are dropped; cells left with fewer than two sub-stencils
fall back to a single least-squares linear fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import HEX, Mesh

# (kept neighbor labels, enlarged neighbor label) per tet sub-stencil,
# 0-based labels into the cell's face order
_TET_PATTERNS = (((0, 1, 2), 0), ((0, 1, 3), 1), ((1, 2, 3), 2), ((2, 0, 3), 3))

# hex sub-stencils: polar label then two equatorial labels, using the face
# order (polar a, equator e0..e3, polar b)
_HEX_PATTERNS = (
    (0, 1, 2),
    (0, 2, 3),
    (0, 3, 4),
    (0, 4, 1),
    (5, 1, 2),
    (5, 2, 3),
    (5, 3, 4),
    (5, 4, 1),
)


@dataclass
class CellStencil:
    """All stencils of one target cell; ids/shifts include the target first."""

    cell: int
    neighbor_ids: np.ndarray  # labeled by face order; -1 where boundary
    neighbor_shifts: np.ndarray
    big_ids: np.ndarray
    big_shifts: np.ndarray
    sub_ids: list = field(default_factory=list)
    sub_shifts: list = field(default_factory=list)
    hbig_ids: np.ndarray | None = None
    hbig_shifts: np.ndarray | None = None
    hsub_ids: list = field(default_factory=list)
    hsub_shifts: list = field(default_factory=list)
    weno_fallback: bool = False
    hweno_fallback: bool = False


@dataclass
class StencilTable:
    cells: list

    def __getitem__(self, c) -> CellStencil:
        return self.cells[c]

    def __len__(self):
        return len(self.cells)


def _ordered_neighbors(mesh: Mesh, c: int):
    """Face neighbors of c in the label order the sub-stencil patterns use.

    Tets keep the cell's face order.  Hexes are reordered (polar, equator
    cycle, polar): face 0 is one pole, its most anti-parallel partner the
    other, and the remaining four sorted by angle around the polar axis.
    """
    faces = mesh.cell_faces[c]
    normals = np.array([mesh.cell_outward_sign(c, f) * mesh.face_normal[f] for f in faces])
    ids = np.full(len(faces), -1, dtype=np.int64)
    shifts = np.zeros((len(faces), 3))
    for k, f in enumerate(faces):
        if mesh.face_neighbor[f] < 0:
            continue
        if mesh.face_owner[f] == c:
            ids[k] = mesh.face_neighbor[f]
            shifts[k] = mesh.face_shift[f]
        else:
            ids[k] = mesh.face_owner[f]
            shifts[k] = -mesh.face_shift[f]
    if mesh.cell_kind[c] != HEX:
        return ids, shifts
    pole_a = 0
    pole_b = 1 + int(np.argmin(normals[1:] @ normals[0]))
    rest = [k for k in range(6) if k not in (pole_a, pole_b)]
    axis = normals[pole_a]
    b1 = normals[rest[0]] - (normals[rest[0]] @ axis) * axis
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(axis, b1)
    ang = [np.arctan2(normals[k] @ b2, normals[k] @ b1) for k in rest]
    order = [pole_a] + [rest[k] for k in np.argsort(ang)] + [pole_b]
    return ids[order], shifts[order]


def _dedup(ids, shifts):
    seen = set()
    out_i, out_s = [], []
    for i, s in zip(ids, shifts):
        key = (int(i), round(s[0], 9), round(s[1], 9), round(s[2], 9))
        if key in seen:
            continue
        seen.add(key)
        out_i.append(int(i))
        out_s.append(np.asarray(s, dtype=float))
    return np.array(out_i, dtype=np.int64), np.array(out_s)


def build_stencils(mesh: Mesh) -> StencilTable:
    """Select big and sub-candidate stencils for every cell."""
    # face-neighbor lists per cell, needed when enlarging tet sub-stencils
    nbr_cache = [mesh.neighbors_of(c) for c in range(mesh.ncells)]
    cells = []
    for c in range(mesh.ncells):
        ids, shifts = _ordered_neighbors(mesh, c)
        present = ids >= 0

        big_i = [c] + [int(i) for i in ids[present]]
        big_s = [np.zeros(3)] + list(shifts[present])
        for i, s in zip(ids[present], shifts[present]):
            for j, t in nbr_cache[i]:
                big_i.append(j)
                big_s.append(s + t)
        big_ids, big_shifts = _dedup(big_i, big_s)

        st = CellStencil(
            cell=c,
            neighbor_ids=ids,
            neighbor_shifts=shifts,
            big_ids=big_ids,
            big_shifts=big_shifts,
        )

        if mesh.cell_kind[c] == HEX:
            for pattern in _HEX_PATTERNS:
                if np.any(ids[list(pattern)] < 0):
                    continue
                mi = [c] + [int(ids[k]) for k in pattern]
                ms = [np.zeros(3)] + [shifts[k] for k in pattern]
                di, ds = _dedup(mi, ms)
                if len(di) == 4:
                    st.sub_ids.append(di)
                    st.sub_shifts.append(ds)
        else:
            for kept, enlarged in _TET_PATTERNS:
                if np.any(ids[list(kept)] < 0):
                    continue
                mi = [c] + [int(ids[k]) for k in kept]
                ms = [np.zeros(3)] + [shifts[k] for k in kept]
                host = int(ids[enlarged])
                host_shift = shifts[enlarged]
                added = []
                for j, t in nbr_cache[host]:
                    tot = host_shift + t
                    if j == c and np.max(np.abs(tot)) < 1e-12:
                        continue
                    added.append((j, tot))
                added.sort(key=lambda e: (e[0], tuple(np.round(e[1], 9))))
                for j, t in added[:3]:
                    mi.append(j)
                    ms.append(t)
                di, ds = _dedup(mi, ms)
                if len(di) == 7:
                    st.sub_ids.append(di)
                    st.sub_shifts.append(ds)

        if len(st.sub_ids) < 2:
            st.sub_ids, st.sub_shifts = [], []
            st.weno_fallback = True

        # compact stencils: one neighbor level
        st.hbig_ids = np.concatenate([[c], ids[present]]).astype(np.int64)
        st.hbig_shifts = np.vstack([np.zeros(3), shifts[present]]) if present.any() else np.zeros((1, 3))
        for i, s in zip(ids[present], shifts[present]):
            st.hsub_ids.append(np.array([c, i], dtype=np.int64))
            st.hsub_shifts.append(np.vstack([np.zeros(3), s]))
        if len(st.hsub_ids) < 2:
            st.hsub_ids, st.hsub_shifts = [], []
            st.hweno_fallback = True

        cells.append(st)
    return StencilTable(cells)
