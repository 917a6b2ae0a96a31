"""Compact Hermite-WENO reconstruction from one neighbor level.

Fits use cell averages plus cell-averaged gradients.  The target cell's
average constraint is satisfied exactly through the zero-mean basis; every
other row (neighbor averages, all gradient rows) is least squares, with
gradient rows scaled by the contributing cell's h to even out the row
magnitudes.  Gradients are stored as cell-averaged Cartesian derivatives;
because each face frame is orthonormal, Cartesian-component rows span the
same constraints as the frame-projected directional derivatives.

The gradient field itself is driven by the time-evolved interface values
through Gauss's theorem (update_gradients).
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh
from .recon import (
    LINEAR_WEIGHT,
    NCOEF,
    WENO_EPS,
    ReconGeometry,
    ReconPolynomial,
    _pinv,
    combine_candidates,
    monomial_grad_rows,
)


class HwenoReconstructor:
    """Compact reconstruction producing combined quadratic coefficients."""

    def __init__(self, geom: ReconGeometry, eps=WENO_EPS, lin_weight=LINEAR_WEIGHT,
                 weights="nonlinear"):
        self.geom = geom
        self.eps = eps
        self.lin_weight = lin_weight
        if weights not in ("nonlinear", "linear"):
            raise ValueError(f"weights must be 'nonlinear' or 'linear', got {weights!r}")
        self.weights = weights
        self._build_operators()

    def _grad_rows(self, c, ids, shifts):
        """Mean scaled-gradient rows of the basis over all stencil members.

        Row block k holds h_k * avg_{cell k} (d p_d / dx): three rows per
        member, target included.
        """
        geom = self.geom
        mesh = geom.mesh
        h0 = mesh.cell_h[c]
        rows = np.empty((3 * len(ids), NCOEF))
        for k, (j, s) in enumerate(zip(ids, shifts)):
            pts, w = mesh.cell_quadrature_of(int(j), s)
            xt = (pts - mesh.cell_centroid[c]) / h0
            dm = np.einsum("q,qxd->xd", w, monomial_grad_rows(xt)) / h0
            rows[3 * k: 3 * k + 3] = mesh.cell_h[j] * dm
        return rows

    def _build_operators(self):
        geom = self.geom
        mesh = geom.mesh
        nc = mesh.ncells
        big_ops, big_avg_ids, big_grad_ids = [], [], []
        sub_ops, sub_ids = [], []
        self.big_degree = np.empty(nc, dtype=np.int8)
        for c in range(nc):
            st = geom.stencils[c]
            ids, shifts = st.hbig_ids, st.hbig_shifts
            avg_rows = geom.member_rows(c, ids, shifts)
            grad_rows = self._grad_rows(c, ids, shifts)
            rows = np.vstack([avg_rows, grad_rows])
            op = None
            if not st.hweno_fallback and len(rows) >= NCOEF:
                op = _pinv(rows, NCOEF)
            if op is not None:
                self.big_degree[c] = 2
            else:
                lin = _pinv(rows[:, :3], 3)
                self.big_degree[c] = 1
                op = np.zeros((NCOEF, rows.shape[0]))
                if lin is not None:
                    op[:3] = lin
            big_ops.append(op)
            big_avg_ids.append(ids[1:])
            big_grad_ids.append(ids)

            cell_subs, cell_ids = [], []
            for sids, sshifts in zip(st.hsub_ids, st.hsub_shifts):
                savg = geom.member_rows(c, sids, sshifts)[:, :3]
                sgrad = self._grad_rows(c, sids, sshifts)[:, :3]
                srows = np.vstack([savg, sgrad])
                sop = _pinv(srows, 3)
                if sop is None:
                    continue
                cell_subs.append(sop)
                cell_ids.append(sids)
            if len(cell_subs) < 2:
                cell_subs, cell_ids = [], []
            sub_ops.append(cell_subs)
            sub_ids.append(cell_ids)

        def pad_gather(idlists, width):
            arr = np.zeros((nc, width), dtype=np.int64)
            for c, ids in enumerate(idlists):
                arr[c, : len(ids)] = ids
            return arr

        amax = max(len(i) for i in big_avg_ids)
        gmax = max(len(i) for i in big_grad_ids)
        self.big_op = np.zeros((nc, NCOEF, max(amax, 1) + 3 * gmax))
        self.big_ncols = np.array([op.shape[1] for op in big_ops])
        for c, op in enumerate(big_ops):
            na = len(big_avg_ids[c])
            # averages first, then gradient rows, placed at fixed offsets
            self.big_op[c, :, :na] = op[:, :na]
            self.big_op[c, :, max(amax, 1): max(amax, 1) + op.shape[1] - na] = op[:, na:]
        self.big_avg_gather = pad_gather(big_avg_ids, max(amax, 1))
        self.big_grad_gather = pad_gather(big_grad_ids, gmax)
        self.big_grad_scale = np.zeros((nc, gmax))
        for c, ids in enumerate(big_grad_ids):
            self.big_grad_scale[c, : len(ids)] = geom.mesh.cell_h[ids]
        self._amax = max(amax, 1)
        self._gmax = gmax

        mmax = max((len(s) for s in sub_ops), default=0)
        mmax = max(mmax, 1)
        self.sub_op = np.zeros((nc, mmax, 3, 7))
        self.sub_gather = np.zeros((nc, mmax, 2), dtype=np.int64)
        self.sub_active = np.zeros((nc, mmax), dtype=bool)
        for c, (ops, idlists) in enumerate(zip(sub_ops, sub_ids)):
            for m, (op, ids) in enumerate(zip(ops, idlists)):
                self.sub_op[c, m] = op
                self.sub_gather[c, m] = ids
                self.sub_active[c, m] = True

    def candidate_coeffs(self, field, grad):
        """Hermite candidates for a (nc, m) field with (nc, 3, m) gradients."""
        field = np.atleast_2d(np.asarray(field, dtype=float).T).T
        grad = np.asarray(grad, dtype=float)
        if grad.ndim == 2:
            grad = grad[:, :, None]
        nc, _, m = grad.shape

        rhs_avg = field[self.big_avg_gather] - field[:, None, :]
        g = grad[self.big_grad_gather]  # (nc, gmax, 3, m)
        rhs_grad = (self.big_grad_scale[:, :, None, None] * g).reshape(nc, 3 * self._gmax, m)
        rhs = np.concatenate([rhs_avg, rhs_grad], axis=1)
        c_big = np.einsum("cdk,ckm->cdm", self.big_op, rhs)

        sg = self.sub_gather
        rhs_s = np.empty((nc, sg.shape[1], 7, m))
        rhs_s[:, :, 0, :] = field[sg[:, :, 1]] - field[:, None, :]
        hh = self.geom.mesh.cell_h
        rhs_s[:, :, 1:4, :] = hh[sg[:, :, 0], None, None] * grad[sg[:, :, 0]]
        rhs_s[:, :, 4:7, :] = hh[sg[:, :, 1], None, None] * grad[sg[:, :, 1]]
        b_sub = np.einsum("cmds,cmsk->cmdk", self.sub_op, rhs_s)
        return c_big, b_sub

    def combined_coeffs(self, field, grad):
        c_big, b_sub = self.candidate_coeffs(field, grad)
        if self.weights == "linear":
            return c_big
        combined, _, _ = combine_candidates(
            c_big, b_sub, self.sub_active, self.geom.beta_mat, self.eps, self.lin_weight
        )
        return combined


def update_gradients(mesh: Mesh, point_values):
    """Cell-averaged Cartesian gradients from interface values by Gauss's theorem.

    point_values holds the conserved state at every face quadrature point,
    shape (nfq, m); returns (ncells, 3, m).
    """
    point_values = np.asarray(point_values, dtype=float)
    nfq, m = point_values.shape
    contrib = (
        mesh.fq_weight[:, None, None]
        * mesh.face_area[mesh.fq_face][:, None, None]
        * mesh.face_normal[mesh.fq_face][:, :, None]
        * point_values[:, None, :]
    )
    out = np.zeros((mesh.ncells, 3, m))
    np.add.at(out, mesh.face_owner[mesh.fq_face], contrib)
    interior = mesh.face_neighbor[mesh.fq_face] >= 0
    np.add.at(
        out,
        mesh.face_neighbor[mesh.fq_face[interior]],
        -contrib[interior],
    )
    return out / mesh.cell_volume[:, None, None]


# -- single-cell views -------------------------------------------------------


def fit_big_hermite(recon: HwenoReconstructor, c, field, grad) -> ReconPolynomial:
    """Quadratic compact candidate of cell c from averages and gradients."""
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    grad = np.asarray(grad, dtype=float)
    if grad.ndim == 2:
        grad = grad[:, :, None]
    c_big, _ = recon.candidate_coeffs(field, grad)
    geom = recon.geom
    return ReconPolynomial(
        cell=c,
        q0=field[c],
        coeffs=c_big[c],
        degree=int(recon.big_degree[c]),
        centroid=geom.mesh.cell_centroid[c],
        h=float(geom.mesh.cell_h[c]),
        basis_offset=geom.avg0[c],
    )


def fit_sub_hermite(recon: HwenoReconstructor, c, field, grad) -> list[ReconPolynomial]:
    """Linear two-cell candidates of cell c (one per face neighbor)."""
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    grad = np.asarray(grad, dtype=float)
    if grad.ndim == 2:
        grad = grad[:, :, None]
    _, b_sub = recon.candidate_coeffs(field, grad)
    geom = recon.geom
    out = []
    for mth in range(recon.sub_active.shape[1]):
        if not recon.sub_active[c, mth]:
            continue
        coeffs = np.zeros((NCOEF, field.shape[1]))
        coeffs[:3] = b_sub[c, mth]
        out.append(
            ReconPolynomial(
                cell=c,
                q0=field[c],
                coeffs=coeffs,
                degree=1,
                centroid=geom.mesh.cell_centroid[c],
                h=float(geom.mesh.cell_h[c]),
                basis_offset=geom.avg0[c],
            )
        )
    return out
