"""Non-compact WENO reconstruction on unstructured stencils.

Polynomials are expressed in zero-mean monomials of the scaled local chart
xt = (x - centroid)/h of the target cell, h = volume^(1/3), so the target
cell's average constraint holds by construction and the least-squares
matrices stay well conditioned.  The multi-index order is fixed as

    x, y, z, x^2, xy, xz, y^2, yz, z^2

(3 linear + 6 quadratic coefficients).  A quadratic candidate is fitted on
the two-level stencil, linear candidates on the sub-stencils, and the face
point value/gradient comes from the nonlinear combination with constant
linear weights.  All per-mesh operators are precomputed and padded so a
whole reconstruction pass is a handful of einsums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, StencilTable

NCOEF = 9
WENO_EPS = 1e-6
LINEAR_WEIGHT = 0.025
RANK_TOL = 1e-10

# second-derivative rows of the basis monomials, one row per multi-index |l|=2
_SECOND = np.zeros((6, NCOEF))
_SECOND[0, 3] = 2.0  # xx
_SECOND[1, 4] = 1.0  # xy
_SECOND[2, 5] = 1.0  # xz
_SECOND[3, 6] = 2.0  # yy
_SECOND[4, 7] = 1.0  # yz
_SECOND[5, 8] = 2.0  # zz
_B2 = _SECOND.T @ _SECOND


def monomial_rows(xt):
    """Values of the 9 basis monomials at scaled points (..., 3) -> (..., 9)."""
    xt = np.asarray(xt, dtype=float)
    x, y, z = xt[..., 0], xt[..., 1], xt[..., 2]
    return np.stack([x, y, z, x * x, x * y, x * z, y * y, y * z, z * z], axis=-1)


def monomial_grad_rows(xt):
    """Scaled-chart gradients of the monomials, (..., 3) -> (..., 3, 9)."""
    xt = np.asarray(xt, dtype=float)
    x, y, z = xt[..., 0], xt[..., 1], xt[..., 2]
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    gx = np.stack([one, zero, zero, 2 * x, y, z, zero, zero, zero], axis=-1)
    gy = np.stack([zero, one, zero, zero, x, zero, 2 * y, z, zero], axis=-1)
    gz = np.stack([zero, zero, one, zero, zero, x, zero, y, 2 * z], axis=-1)
    return np.stack([gx, gy, gz], axis=-2)


def _pinv(a, rank_needed):
    """Pseudo-inverse with a relative singular-value rank check."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if len(s) == 0 or s[0] == 0.0:
        return None
    keep = s >= RANK_TOL * s[0]
    if int(keep.sum()) < rank_needed:
        return None
    inv = vt[keep].T * (1.0 / s[keep])
    return inv @ u[:, keep].T


@dataclass
class ReconPolynomial:
    """One candidate polynomial about its target cell: Q(x) = q0 + c . p(xt).

    basis_offset holds the cell averages of the raw monomials, making the
    basis zero-mean so the polynomial's own cell average is q0 exactly.
    """

    cell: int
    q0: np.ndarray
    coeffs: np.ndarray  # (9, ncomp); linear candidates have zero quadratic part
    degree: int
    centroid: np.ndarray
    h: float
    basis_offset: np.ndarray

    def value(self, x):
        xt = (np.asarray(x, dtype=float) - self.centroid) / self.h
        return self.q0 + (monomial_rows(xt) - self.basis_offset) @ self.coeffs

    def gradient(self, x):
        xt = (np.asarray(x, dtype=float) - self.centroid) / self.h
        return np.einsum("...xd,dk->...xk", monomial_grad_rows(xt), self.coeffs) / self.h

    def cell_average(self, geom):
        """Average over the target cell; equals q0 by the zero-mean basis."""
        pts, w = geom.mesh.cell_quadrature_of(self.cell)
        xt = (pts - self.centroid) / self.h
        rows = monomial_rows(xt) - self.basis_offset
        return self.q0 + np.einsum("q,qd,dk->k", w, rows, self.coeffs)


class ReconGeometry:
    """Geometry-only tables shared by the WENO and compact reconstructions."""

    def __init__(self, mesh: Mesh, stencils: StencilTable):
        self.mesh = mesh
        self.stencils = stencils
        nc = mesh.ncells
        self.avg0 = np.empty((nc, NCOEF))
        for c in range(nc):
            pts, w = mesh.cell_quadrature_of(c)
            xt = (pts - mesh.cell_centroid[c]) / mesh.cell_h[c]
            self.avg0[c] = w @ monomial_rows(xt)
        self.beta_mat = self._beta_matrices()
        self._face_tables()

    def member_rows(self, c, ids, shifts):
        """Cell-average rows of the basis over stencil members (target excluded)."""
        mesh = self.mesh
        c0 = mesh.cell_centroid[c]
        h0 = mesh.cell_h[c]
        rows = np.empty((len(ids) - 1, NCOEF))
        for k in range(1, len(ids)):
            pts, w = mesh.cell_quadrature_of(int(ids[k]), shifts[k])
            xt = (pts - c0) / h0
            rows[k - 1] = w @ monomial_rows(xt) - self.avg0[c]
        return rows

    def _beta_matrices(self):
        """Per-cell quadratic forms giving the smoothness indicator.

        In the scaled chart the indicator is the cell average of the squared
        first derivatives plus the squared second derivatives, which equals
        the physical definition with its volume scalings.
        """
        mesh = self.mesh
        nc = mesh.ncells
        out = np.empty((nc, NCOEF, NCOEF))
        for c in range(nc):
            pts, w = mesh.cell_quadrature_of(c)
            xt = (pts - mesh.cell_centroid[c]) / mesh.cell_h[c]
            dm = monomial_grad_rows(xt)
            out[c] = np.einsum("q,qxd,qxe->de", w, dm, dm) + _B2
        return out

    def _face_tables(self):
        mesh = self.mesh
        own = mesh.face_owner[mesh.fq_face]
        nbr = mesh.face_neighbor[mesh.fq_face]
        shift = mesh.face_shift[mesh.fq_face]
        self.fq_owner = own
        self.fq_neighbor = nbr
        self.fq_interior = nbr >= 0

        xt_o = (mesh.fq_point - mesh.cell_centroid[own]) / mesh.cell_h[own, None]
        self.phi_owner = monomial_rows(xt_o) - self.avg0[own]
        self.dphi_owner = monomial_grad_rows(xt_o) / mesh.cell_h[own, None, None]

        nbr_safe = np.where(nbr >= 0, nbr, 0)
        xt_n = (mesh.fq_point - shift - mesh.cell_centroid[nbr_safe]) / mesh.cell_h[nbr_safe, None]
        self.phi_neighbor = monomial_rows(xt_n) - self.avg0[nbr_safe]
        self.dphi_neighbor = monomial_grad_rows(xt_n) / mesh.cell_h[nbr_safe, None, None]


def combine_candidates(c_big, b_sub, active, beta_mat, eps=WENO_EPS, lin_weight=LINEAR_WEIGHT):
    """Nonlinear combination of candidate coefficients, per cell and component.

    c_big: (nc, 9, m) quadratic candidate; b_sub: (nc, M, 3, m) linear
    candidates with active mask (nc, M).  Returns combined (nc, 9, m)
    coefficients; since the combination formula is a fixed linear blend of
    the candidate polynomials, combining coefficients once is identical to
    combining values and gradients pointwise.
    """
    nc, _, m = c_big.shape
    beta0 = np.einsum("cdk,cde,cek->ck", c_big, beta_mat, c_big)
    n_active = active.sum(axis=1)
    gamma0 = 1.0 - lin_weight * n_active
    if b_sub.shape[1] == 0:
        return c_big.copy(), np.ones((nc, m)), np.zeros((nc, 0, m))
    beta_sub = np.einsum("cmdk,cmdk->cmk", b_sub, b_sub)
    amask = active[:, :, None]
    tau = np.sum(np.abs(beta0[:, None, :] - beta_sub) * amask, axis=1)
    tau /= np.maximum(n_active, 1)[:, None]
    w0 = gamma0[:, None] * (1.0 + tau / (beta0 + eps))
    wm = lin_weight * (1.0 + tau[:, None, :] / (beta_sub + eps)) * amask
    total = w0 + wm.sum(axis=1)
    w0n = w0 / total
    wmn = wm / total[:, None, :]
    coeff0 = w0n / gamma0[:, None]
    combined = coeff0[:, None, :] * c_big
    sub_factor = wmn - (w0n * lin_weight / gamma0[:, None])[:, None, :] * amask
    combined[:, :3, :] += np.einsum("cmk,cmdk->cdk", sub_factor, b_sub)
    return combined, w0n, wmn


class WenoReconstructor:
    """Third-order simple-WENO reconstruction over a two-level stencil.

    weights="linear" bypasses the smoothness-indicator machinery and keeps
    the big polynomial (the combination with exact linear weights), the mode
    used to validate smooth-flow accuracy.
    """

    def __init__(self, geom: ReconGeometry, eps=WENO_EPS, lin_weight=LINEAR_WEIGHT,
                 weights="nonlinear"):
        self.geom = geom
        self.eps = eps
        self.lin_weight = lin_weight
        if weights not in ("nonlinear", "linear"):
            raise ValueError(f"weights must be 'nonlinear' or 'linear', got {weights!r}")
        self.weights = weights
        self._build_operators()

    def _build_operators(self):
        geom = self.geom
        mesh = geom.mesh
        nc = mesh.ncells
        big_ops, big_ids = [], []
        sub_ops, sub_ids = [], []
        self.big_degree = np.empty(nc, dtype=np.int8)
        for c in range(nc):
            st = geom.stencils[c]
            cell_subs, cell_sub_ids = [], []
            for ids, shifts in zip(st.sub_ids, st.sub_shifts):
                srows = geom.member_rows(c, ids, shifts)
                sop = _pinv(srows[:, :3], 3)
                if sop is None:
                    continue  # coplanar centroids: drop this candidate
                cell_subs.append(sop)
                cell_sub_ids.append(ids[1:])
            if len(cell_subs) < 2:
                cell_subs, cell_sub_ids = [], []
            sub_ops.append(cell_subs)
            sub_ids.append(cell_sub_ids)

            rows = geom.member_rows(c, st.big_ids, st.big_shifts)
            op = None
            if cell_subs and len(rows) >= NCOEF:
                op = _pinv(rows, NCOEF)
            if op is not None:
                self.big_degree[c] = 2
            else:
                # too few members, rank-deficient, or no surviving sub-stencils:
                # a single linear least-squares fit on the available neighbors
                lin = _pinv(rows[:, :3], 3) if len(rows) >= 3 else None
                self.big_degree[c] = 1
                if lin is None:
                    op = np.zeros((NCOEF, max(len(rows), 1)))
                else:
                    op = np.zeros((NCOEF, len(rows)))
                    op[:3] = lin
            big_ops.append(op)
            big_ids.append(st.big_ids[1:])

        kmax = max(op.shape[1] for op in big_ops)
        self.big_op = np.zeros((nc, NCOEF, kmax))
        self.big_gather = np.zeros((nc, kmax), dtype=np.int64)
        for c, (op, ids) in enumerate(zip(big_ops, big_ids)):
            self.big_op[c, :, : op.shape[1]] = op
            self.big_gather[c, : len(ids)] = ids

        mmax = max((len(s) for s in sub_ops), default=0)
        mmax = max(mmax, 1)
        smax = max((op.shape[1] for s in sub_ops for op in s), default=1)
        self.sub_op = np.zeros((nc, mmax, 3, smax))
        self.sub_gather = np.zeros((nc, mmax, smax), dtype=np.int64)
        self.sub_active = np.zeros((nc, mmax), dtype=bool)
        for c, (ops, idlists) in enumerate(zip(sub_ops, sub_ids)):
            for m, (op, ids) in enumerate(zip(ops, idlists)):
                self.sub_op[c, m, :, : op.shape[1]] = op
                self.sub_gather[c, m, : len(ids)] = ids
                self.sub_active[c, m] = True

    def candidate_coeffs(self, field):
        """Quadratic and linear candidate coefficients for a (nc, m) field."""
        field = np.atleast_2d(np.asarray(field, dtype=float).T).T
        rhs = field[self.big_gather] - field[:, None, :]
        c_big = np.einsum("cdk,ckm->cdm", self.big_op, rhs)
        rhs_s = field[self.sub_gather] - field[:, None, None, :]
        b_sub = np.einsum("cmds,cmsk->cmdk", self.sub_op, rhs_s)
        return c_big, b_sub

    def combined_coeffs(self, field):
        if self.weights == "linear":
            field = np.atleast_2d(np.asarray(field, dtype=float).T).T
            rhs = field[self.big_gather] - field[:, None, :]
            return np.einsum("cdk,ckm->cdm", self.big_op, rhs)
        c_big, b_sub = self.candidate_coeffs(field)
        combined, _, _ = combine_candidates(
            c_big, b_sub, self.sub_active, self.geom.beta_mat, self.eps, self.lin_weight
        )
        return combined


def evaluate_faces(geom: ReconGeometry, field, coeffs):
    """Face-quadrature point values and gradients from combined coefficients.

    Returns (val_own, grad_own, val_nbr, grad_nbr); neighbor-side entries of
    boundary points are filled with the owner side (callers overwrite them
    with ghost data).
    """
    field = np.atleast_2d(np.asarray(field, dtype=float).T).T
    own = geom.fq_owner
    val_o = field[own] + np.einsum("fd,fdk->fk", geom.phi_owner, coeffs[own])
    grad_o = np.einsum("fxd,fdk->fxk", geom.dphi_owner, coeffs[own])
    nbr = np.where(geom.fq_interior, geom.fq_neighbor, own)
    val_n = field[nbr] + np.einsum("fd,fdk->fk", geom.phi_neighbor, coeffs[nbr])
    grad_n = np.einsum("fxd,fdk->fxk", geom.dphi_neighbor, coeffs[nbr])
    keep = geom.fq_interior[:, None]
    val_n = np.where(keep, val_n, val_o)
    grad_n = np.where(keep[:, :, None], grad_n, grad_o)
    return val_o, grad_o, val_n, grad_n


# -- single-cell views used by the tests and the public API -----------------


def _as_field(field):
    field = np.asarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    return field


def fit_big_polynomial(recon: WenoReconstructor, c, field) -> ReconPolynomial:
    """Quadratic least-squares candidate of cell c (linear on degenerate stencils)."""
    field = _as_field(field)
    geom = recon.geom
    rhs = field[recon.big_gather[c]] - field[c]
    coeffs = recon.big_op[c] @ rhs
    return ReconPolynomial(
        cell=c,
        q0=field[c],
        coeffs=coeffs,
        degree=int(recon.big_degree[c]),
        centroid=geom.mesh.cell_centroid[c],
        h=float(geom.mesh.cell_h[c]),
        basis_offset=geom.avg0[c],
    )


def fit_sub_polynomials(recon: WenoReconstructor, c, field) -> list[ReconPolynomial]:
    """Linear candidates of cell c, one per surviving sub-stencil."""
    field = _as_field(field)
    geom = recon.geom
    out = []
    for m in range(recon.sub_active.shape[1]):
        if not recon.sub_active[c, m]:
            continue
        rhs = field[recon.sub_gather[c, m]] - field[c]
        b = recon.sub_op[c, m] @ rhs
        coeffs = np.zeros((NCOEF, field.shape[1]))
        coeffs[:3] = b
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


def smoothness_indicator(geom: ReconGeometry, poly: ReconPolynomial):
    """beta = sum over |l| <= degree of |O|^(2|l|/3 - 1) int (d^l P)^2 dV."""
    b = geom.beta_mat[poly.cell]
    if poly.degree == 1:
        return np.einsum("dk,dk->k", poly.coeffs[:3], poly.coeffs[:3])
    return np.einsum("dk,de,ek->k", poly.coeffs, b, poly.coeffs)


def nonlinear_combine(p0, subs, betas, lin_weight, eps, point):
    """Value and gradient of the weighted combination at one point.

    betas lists the indicator of p0 first, then of each sub candidate; the
    weights follow w_m = g_m (1 + tau/(beta_m + eps)) with tau the mean
    absolute deviation of the sub indicators from beta0.
    """
    m = len(subs)
    betas = [np.atleast_1d(b) for b in betas]
    gamma0 = 1.0 - lin_weight * m
    if m == 0:
        return p0.value(point), p0.gradient(point)
    tau = sum(np.abs(betas[0] - bm) for bm in betas[1:]) / m
    w = [gamma0 * (1.0 + tau / (betas[0] + eps))]
    w += [lin_weight * (1.0 + tau / (bm + eps)) for bm in betas[1:]]
    total = sum(w)
    wn = [wk / total for wk in w]
    val = wn[0] * (p0.value(point) / gamma0 - sum(lin_weight / gamma0 * pm.value(point) for pm in subs))
    grad = wn[0] * (p0.gradient(point) / gamma0 - sum(lin_weight / gamma0 * pm.gradient(point) for pm in subs))
    for wk, pm in zip(wn[1:], subs):
        val = val + wk * pm.value(point)
        grad = grad + wk * pm.gradient(point)
    return val, grad
