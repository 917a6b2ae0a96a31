"""Unstructured tet/hex mesh with faces, quadrature, and local frames.

Conventions baked in here and relied on everywhere else:
  * tet cells are positively oriented: det(v1-v0, v2-v0, v3-v0) > 0;
  * hex cells use VTK node ordering (bottom quad 0-3, top quad 4-7);
  * face normals point from the owner cell to the neighbor (outward on
    boundary faces);
  * face quadrature weights are normalized to sum to 1, the face area is
    stored separately;
  * a periodic face keeps one geometric copy; its neighbor cell must be
    translated by face_shift to sit adjacent to the owner.

A Mesh is immutable after construction (arrays are write-protected).
"""

from __future__ import annotations

import numpy as np

TET = 0
HEX = 1

# outward-oriented faces for a positively oriented tet
_TET_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))
# outward-oriented faces for a VTK-ordered hex
_HEX_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))

_GAUSS1 = 1.0 / np.sqrt(3.0)
# degree-2 exact symmetric rules
_TRI_BARY = np.array([[4, 1, 1], [1, 4, 1], [1, 1, 4]]) / 6.0
_TET_ALPHA = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_TET_BETA = (5.0 - np.sqrt(5.0)) / 20.0


class MeshError(ValueError):
    """Malformed, non-conforming, or inverted mesh input."""


def local_frame(normal):
    """Right-handed orthonormal triad (n, t1, t2) with deterministic tangents.

    t1 is the normalized rejection of the global axis least aligned with n,
    which keeps the construction singularity-free.
    """
    n = np.asarray(normal, dtype=float)
    axis = np.argmin(np.abs(n))
    e = np.zeros(3)
    e[axis] = 1.0
    t1 = e - np.dot(e, n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.array([n, t1, t2])


def triangle_quadrature(pts):
    pts = np.asarray(pts, dtype=float)
    e1 = pts[1] - pts[0]
    e2 = pts[2] - pts[0]
    cr = np.cross(e1, e2)
    area = 0.5 * np.linalg.norm(cr)
    if area <= 0.0:
        raise MeshError("degenerate face (zero area)")
    normal = cr / (2.0 * area)
    qp = _TRI_BARY @ pts
    w = np.full(3, 1.0 / 3.0)
    return qp, w, area, normal


def quad_quadrature(pts):
    """2x2 tensor Gauss on the bilinear map of a planar quadrilateral."""
    pts = np.asarray(pts, dtype=float)
    g = _GAUSS1
    qp = np.empty((4, 3))
    jac = np.empty(4)
    normal_acc = np.zeros(3)
    for k, (xi, eta) in enumerate(((-g, -g), (g, -g), (g, g), (-g, g))):
        shape = 0.25 * np.array(
            [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
        )
        dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
        deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
        qp[k] = shape @ pts
        cr = np.cross(dxi @ pts, deta @ pts)
        jac[k] = np.linalg.norm(cr)
        normal_acc += cr
    area = float(np.sum(jac))
    if area <= 0.0:
        raise MeshError("degenerate face (zero area)")
    normal = normal_acc / np.linalg.norm(normal_acc)
    span = np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1))
    if np.max(np.abs((pts - qp[0]) @ normal)) > 1e-8 * max(span, 1.0):
        raise MeshError("non-planar quadrilateral face")
    return qp, jac / area, area, normal


def face_quadrature(pts):
    """Quadrature rule (points, normalized weights, area, unit normal).

    Exact for polynomials of degree <= 2 on the face: a 3-point symmetric
    rule on triangles, 2x2 tensor Gauss on quadrilaterals.
    """
    pts = np.asarray(pts, dtype=float)
    if len(pts) == 3:
        return triangle_quadrature(pts)
    if len(pts) == 4:
        return quad_quadrature(pts)
    raise MeshError(f"faces must have 3 or 4 nodes, got {len(pts)}")


def tet_volume_quadrature(pts):
    pts = np.asarray(pts, dtype=float)
    vol = np.linalg.det(pts[1:] - pts[0]) / 6.0
    if vol <= 0.0:
        raise MeshError("inverted cell (negative volume)")
    bary = np.full((4, 4), _TET_BETA)
    np.fill_diagonal(bary, _TET_ALPHA)
    qp = bary @ pts
    w = np.full(4, 0.25)
    return qp, w, float(vol), pts.mean(axis=0)


def hex_volume_quadrature(pts):
    """2x2x2 Gauss on the trilinear map; exact volume/centroid for valid hexes."""
    pts = np.asarray(pts, dtype=float)
    g = _GAUSS1
    signs = np.array(
        [(-1, -1, -1), (1, -1, -1), (1, 1, -1), (-1, 1, -1), (-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)],
        dtype=float,
    )
    qp = np.empty((8, 3))
    jac = np.empty(8)
    k = 0
    for zi in (-g, g):
        for yi in (-g, g):
            for xi in (-g, g):
                ref = np.array([xi, yi, zi])
                shape = 0.125 * np.prod(1.0 + signs * ref, axis=1)
                grad = np.empty((8, 3))
                for d in range(3):
                    others = [i for i in range(3) if i != d]
                    grad[:, d] = 0.125 * signs[:, d] * np.prod(1.0 + signs[:, others] * ref[others], axis=1)
                qp[k] = shape @ pts
                jac[k] = np.linalg.det(grad.T @ pts)
                k += 1
    if np.any(jac <= 0.0):
        raise MeshError("inverted cell (negative volume)")
    vol = float(np.sum(jac))
    centroid = (jac @ qp) / vol
    return qp, jac / vol, vol, centroid


class Mesh:
    """Validated unstructured mesh with all solver-facing geometry."""

    def __init__(self):
        # populated by build(); treat instances as frozen afterwards
        self.nodes = None
        self.cell_kind = None
        self.cell_nodes = None
        self.cell_volume = None
        self.cell_centroid = None
        self.cell_h = None
        self.cell_faces = None
        self.face_nodes = None
        self.face_owner = None
        self.face_neighbor = None
        self.face_patch = None
        self.face_area = None
        self.face_normal = None
        self.face_frame = None
        self.face_shift = None
        self.fq_point = None
        self.fq_weight = None
        self.fq_face = None
        self.face_fq_start = None
        self.cq_point = None
        self.cq_weight = None
        self.cell_cq_start = None
        self.patch_names = []
        self._source = None

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, nodes, tets=(), hexes=(), patch_faces=None, periodic_pairs=()):
        """Assemble a mesh from nodes, cells, named boundary patches.

        patch_faces maps patch name -> list of boundary face node tuples.
        periodic_pairs lists (patch_a, patch_b) to merge into translated
        interior faces.
        """
        mesh = cls()
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or not np.all(np.isfinite(nodes)):
            raise MeshError("nodes must be a finite (N, 3) array")
        tets = [tuple(int(i) for i in c) for c in tets]
        hexes = [tuple(int(i) for i in c) for c in hexes]
        ncell = len(tets) + len(hexes)
        if ncell == 0:
            raise MeshError("mesh has no cells")

        cell_kind = np.empty(ncell, dtype=np.int8)
        cell_nodes = np.full((ncell, 8), -1, dtype=np.int64)
        for c, tet in enumerate(tets):
            cell_kind[c] = TET
            cell_nodes[c, :4] = tet
        for k, hx in enumerate(hexes):
            c = len(tets) + k
            cell_kind[c] = HEX
            cell_nodes[c, :8] = hx
        if np.any(cell_nodes[cell_nodes >= 0] >= len(nodes)):
            raise MeshError("cell references a node out of range")

        # face extraction keyed by sorted node tuple; owner keeps outward winding
        face_map = {}
        faces = []  # [nodes_in_owner_winding, owner, neighbor]
        cell_faces = [[] for _ in range(ncell)]
        for c in range(ncell):
            patterns = _TET_FACES if cell_kind[c] == TET else _HEX_FACES
            ids = cell_nodes[c]
            for pat in patterns:
                fn = tuple(int(ids[p]) for p in pat)
                key = tuple(sorted(fn))
                fid = face_map.get(key)
                if fid is None:
                    fid = len(faces)
                    face_map[key] = fid
                    faces.append([fn, c, -1])
                else:
                    if faces[fid][2] != -1:
                        raise MeshError(f"non-conforming mesh: face {key} shared by >2 cells")
                    faces[fid][2] = c
                cell_faces[c].append(fid)

        # boundary patch assignment
        nface = len(faces)
        face_patch = np.full(nface, -1, dtype=np.int64)
        patch_names = []
        patch_faces = patch_faces or {}
        for name, flist in patch_faces.items():
            pid = len(patch_names)
            patch_names.append(name)
            for fn in flist:
                key = tuple(sorted(int(i) for i in fn))
                fid = face_map.get(key)
                if fid is None:
                    raise MeshError(f"patch {name!r} face {key} matches no mesh face")
                if faces[fid][2] != -1:
                    raise MeshError(f"patch {name!r} face {key} is interior")
                face_patch[fid] = pid

        mesh.nodes = nodes
        mesh.cell_kind = cell_kind
        mesh.cell_nodes = cell_nodes
        mesh.patch_names = patch_names
        mesh._source = (tets, hexes, {n: list(f) for n, f in patch_faces.items()})
        mesh._finalize_cells()
        mesh._finalize_faces(faces, cell_faces, face_patch)
        for pa, pb in periodic_pairs:
            mesh._merge_periodic(pa, pb)
        mesh._freeze()
        return mesh

    def _finalize_cells(self):
        ncell = len(self.cell_kind)
        self.cell_volume = np.empty(ncell)
        self.cell_centroid = np.empty((ncell, 3))
        cq_pts, cq_w, starts = [], [], [0]
        for c in range(ncell):
            ids = self.cell_nodes[c]
            try:
                if self.cell_kind[c] == TET:
                    qp, w, vol, cen = tet_volume_quadrature(self.nodes[ids[:4]])
                else:
                    qp, w, vol, cen = hex_volume_quadrature(self.nodes[ids[:8]])
            except MeshError as exc:
                raise MeshError(f"cell {c}: {exc}") from exc
            self.cell_volume[c] = vol
            self.cell_centroid[c] = cen
            cq_pts.append(qp)
            cq_w.append(w)
            starts.append(starts[-1] + len(w))
        self.cell_h = self.cell_volume ** (1.0 / 3.0)
        self.cq_point = np.concatenate(cq_pts)
        self.cq_weight = np.concatenate(cq_w)
        self.cell_cq_start = np.array(starts, dtype=np.int64)

    def _finalize_faces(self, faces, cell_faces, face_patch):
        nface = len(faces)
        self.face_nodes = np.full((nface, 4), -1, dtype=np.int64)
        self.face_owner = np.empty(nface, dtype=np.int64)
        self.face_neighbor = np.empty(nface, dtype=np.int64)
        self.face_patch = face_patch
        self.face_area = np.empty(nface)
        self.face_normal = np.empty((nface, 3))
        self.face_frame = np.empty((nface, 3, 3))
        self.face_shift = np.zeros((nface, 3))
        fq_pts, fq_w, fq_face, starts = [], [], [], [0]
        for f, (fn, owner, nbr) in enumerate(faces):
            self.face_nodes[f, : len(fn)] = fn
            self.face_owner[f] = owner
            self.face_neighbor[f] = nbr
            try:
                qp, w, area, normal = face_quadrature(self.nodes[list(fn)])
            except MeshError as exc:
                raise MeshError(f"face {f}: {exc}") from exc
            # owner winding should already be outward; flip defensively
            if np.dot(normal, qp.mean(axis=0) - self.cell_centroid[owner]) < 0.0:
                normal = -normal
            self.face_area[f] = area
            self.face_normal[f] = normal
            self.face_frame[f] = local_frame(normal)
            fq_pts.append(qp)
            fq_w.append(w)
            fq_face.append(np.full(len(w), f, dtype=np.int64))
            starts.append(starts[-1] + len(w))
        self.fq_point = np.concatenate(fq_pts)
        self.fq_weight = np.concatenate(fq_w)
        self.fq_face = np.concatenate(fq_face)
        self.face_fq_start = np.array(starts, dtype=np.int64)
        self.cell_faces = [np.array(fl, dtype=np.int64) for fl in cell_faces]

    def _merge_periodic(self, patch_a, patch_b):
        """Replace the faces of two opposing patches with shifted interior faces."""
        try:
            pa = self.patch_names.index(patch_a)
            pb = self.patch_names.index(patch_b)
        except ValueError as exc:
            raise MeshError(f"unknown periodic patch in pair ({patch_a}, {patch_b})") from exc
        fa = np.flatnonzero(self.face_patch == pa)
        fb = np.flatnonzero(self.face_patch == pb)
        if len(fa) != len(fb) or len(fa) == 0:
            raise MeshError(f"periodic patches {patch_a}/{patch_b} have mismatched face counts")
        cen = np.array([self.fq_point[self.face_fq_start[f]: self.face_fq_start[f + 1]].mean(axis=0) for f in range(len(self.face_owner))])
        shift = cen[fb].mean(axis=0) - cen[fa].mean(axis=0)
        target = cen[fa] + shift
        from scipy.spatial import cKDTree

        tree = cKDTree(cen[fb])
        dist, idx = tree.query(target)
        tol = 1e-8 * max(1.0, float(np.max(np.abs(self.nodes))))
        if np.max(dist) > tol or len(np.unique(idx)) != len(fb):
            raise MeshError(f"periodic patches {patch_a}/{patch_b} do not tile under translation")
        keep = np.ones(len(self.face_owner), dtype=bool)
        for k, f in enumerate(fa):
            g = fb[idx[k]]
            self.face_neighbor[f] = self.face_owner[g]
            self.face_shift[f] = -shift
            self.face_patch[f] = -1
            keep[g] = False
            # owner of g now reaches the merged face instead
            lst = self.cell_faces[self.face_owner[g]]
            self.cell_faces[self.face_owner[g]] = np.where(lst == g, f, lst)
        self._compress_faces(keep)

    def _compress_faces(self, keep):
        remap = -np.ones(len(keep), dtype=np.int64)
        remap[keep] = np.arange(int(keep.sum()))
        self.face_nodes = self.face_nodes[keep]
        self.face_owner = self.face_owner[keep]
        self.face_neighbor = self.face_neighbor[keep]
        self.face_patch = self.face_patch[keep]
        self.face_area = self.face_area[keep]
        self.face_normal = self.face_normal[keep]
        self.face_frame = self.face_frame[keep]
        self.face_shift = self.face_shift[keep]
        fq_keep = keep[self.fq_face]
        self.fq_point = self.fq_point[fq_keep]
        self.fq_weight = self.fq_weight[fq_keep]
        self.fq_face = remap[self.fq_face[fq_keep]]
        counts = np.bincount(self.fq_face, minlength=int(keep.sum()))
        self.face_fq_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.cell_faces = [remap[fl] for fl in self.cell_faces]
        if any(np.any(fl < 0) for fl in self.cell_faces):
            raise MeshError("internal error: cell references a removed face")

    def _freeze(self):
        for name, val in vars(self).items():
            if isinstance(val, np.ndarray):
                val.setflags(write=False)

    # -- queries ------------------------------------------------------------

    @property
    def ncells(self):
        return len(self.cell_kind)

    @property
    def nfaces(self):
        return len(self.face_owner)

    def face_points(self, f):
        ids = self.face_nodes[f]
        return self.nodes[ids[ids >= 0]]

    def face_quadrature_of(self, f):
        sl = slice(self.face_fq_start[f], self.face_fq_start[f + 1])
        return self.fq_point[sl], self.fq_weight[sl]

    def cell_quadrature_of(self, c, shift=None):
        sl = slice(self.cell_cq_start[c], self.cell_cq_start[c + 1])
        pts = self.cq_point[sl]
        if shift is not None:
            pts = pts + shift
        return pts, self.cq_weight[sl]

    def cell_outward_sign(self, c, f):
        """+1 if cell c owns face f (normal points out of c), else -1."""
        return 1.0 if self.face_owner[f] == c else -1.0

    def neighbors_of(self, c):
        """(cell id, shift) across each interior face of cell c."""
        out = []
        for f in self.cell_faces[c]:
            if self.face_neighbor[f] < 0:
                continue
            if self.face_owner[f] == c:
                out.append((int(self.face_neighbor[f]), self.face_shift[f].copy()))
            else:
                out.append((int(self.face_owner[f]), -self.face_shift[f]))
        return out

    # -- validation ----------------------------------------------------------

    def validate(self):
        """Raise MeshError on any violated geometric invariant."""
        scale = max(1.0, float(np.max(np.abs(self.nodes))))
        if np.any(self.cell_volume <= 0.0):
            raise MeshError("non-positive cell volume")
        if not np.allclose(self.cell_h**3, self.cell_volume, rtol=1e-12):
            raise MeshError("cell h is not volume^(1/3)")
        # closed-polyhedron identity per cell
        for c in range(self.ncells):
            acc = np.zeros(3)
            for f in self.cell_faces[c]:
                acc += self.cell_outward_sign(c, f) * self.face_area[f] * self.face_normal[f]
            if np.max(np.abs(acc)) > 1e-12 * scale**2 * max(1.0, np.max(self.face_area)):
                raise MeshError(f"cell {c} face-area vectors do not close: {acc}")
        # frames orthonormal
        eye = np.einsum("fij,fkj->fik", self.face_frame, self.face_frame)
        if np.max(np.abs(eye - np.eye(3))) > 1e-12:
            raise MeshError("non-orthonormal face frame")
        # quadrature weights normalized, points on the face plane
        for f in range(self.nfaces):
            qp, w = self.face_quadrature_of(f)
            if abs(w.sum() - 1.0) > 1e-13:
                raise MeshError(f"face {f} weights sum to {w.sum()}")
            d = (qp - qp[0]) @ self.face_normal[f]
            if np.max(np.abs(d)) > 1e-10 * scale:
                raise MeshError(f"face {f} quadrature points leave the face plane")
        return True
