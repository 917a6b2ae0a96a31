"""Roe-split block Jacobian of the backward-Euler system.

The matrix A of (|O|/dt) dQ + sum_faces dF S = L(Q) is stored one block row
per cell: a 5x5 diagonal block plus one 5x5 block per interior face
neighbor, exactly the mesh adjacency pattern.  Off-diagonal blocks live in
a CSR-like flat array so the block matvec runs as two einsums plus a
segment reduction.

Boundary faces contribute only to the diagonal: the ghost state is frozen
during the linearization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetic import DEFAULT_GAMMA


def euler_flux(q, n, gamma: float = DEFAULT_GAMMA):
    """Inviscid flux along unit normal n, global conserved components."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    rho = q[:, 0]
    vel = q[:, 1:4] / rho[:, None]
    un = np.sum(vel * n, axis=1)
    p = (gamma - 1.0) * (q[:, 4] - 0.5 * rho * np.sum(vel * vel, axis=1))
    out = np.empty_like(q)
    out[:, 0] = rho * un
    out[:, 1:4] = q[:, 1:4] * un[:, None] + p[:, None] * n
    out[:, 4] = (q[:, 4] + p) * un
    return out


def euler_flux_jacobian(q, n, gamma: float = DEFAULT_GAMMA):
    """Analytic 5x5 Jacobian of euler_flux with respect to the conserved state."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    m = q.shape[0]
    g1 = gamma - 1.0
    rho = q[:, 0]
    vel = q[:, 1:4] / rho[:, None]
    un = np.sum(vel * n, axis=1)
    ke = 0.5 * np.sum(vel * vel, axis=1)
    p = g1 * (q[:, 4] - rho * ke)
    h_tot = (q[:, 4] + p) / rho

    jac = np.zeros((m, 5, 5))
    jac[:, 0, 1:4] = n
    for i in range(3):
        jac[:, 1 + i, 0] = g1 * ke * n[:, i] - vel[:, i] * un
        for j in range(3):
            jac[:, 1 + i, 1 + j] = vel[:, i] * n[:, j] - g1 * vel[:, j] * n[:, i]
        jac[:, 1 + i, 1 + i] += un
        jac[:, 1 + i, 4] = g1 * n[:, i]
    jac[:, 4, 0] = (g1 * ke - h_tot) * un
    jac[:, 4, 1:4] = h_tot[:, None] * n - g1 * vel * un[:, None]
    jac[:, 4, 4] = gamma * un
    return jac


def spectral_radius(q, n, gamma: float = DEFAULT_GAMMA):
    """|u . n| + a of a conserved state along a unit normal."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    rho = q[:, 0]
    vel = q[:, 1:4] / rho[:, None]
    p = (gamma - 1.0) * (q[:, 4] - 0.5 * rho * np.sum(vel * vel, axis=1))
    return np.abs(np.sum(vel * n, axis=1)) + np.sqrt(gamma * p / rho)


@dataclass
class BlockJacobian:
    """Block-row storage: diagonal blocks plus CSR off-diagonal blocks."""

    diag: np.ndarray  # (nc, 5, 5)
    off: np.ndarray  # (nnz, 5, 5)
    off_col: np.ndarray  # (nnz,)
    off_row: np.ndarray  # (nnz,)
    rowptr: np.ndarray  # (nc + 1,)

    @property
    def ncells(self):
        return self.diag.shape[0]

    def spmv(self, x):
        """Block matvec: row i = D_i x_i + sum_p B_{i,p} x_p."""
        x = np.asarray(x, dtype=float).reshape(self.ncells, 5)
        y = np.matmul(self.diag, x[:, :, None])[:, :, 0]
        return y + self.offdiag_mv(x)

    def offdiag_mv(self, x):
        """(L + U) x, the off-diagonal part of the matvec."""
        x = np.asarray(x, dtype=float).reshape(self.ncells, 5)
        if not len(self.off):
            return np.zeros_like(x)
        return self._off_sparse().dot(x.ravel()).reshape(self.ncells, 5)

    def _off_sparse(self):
        # scipy BSR view of the off-diagonal blocks, built lazily; the block
        # arrays remain the storage of record
        cached = getattr(self, "_bsr", None)
        if cached is None:
            from scipy.sparse import bsr_matrix

            n = 5 * self.ncells
            cached = bsr_matrix(
                (self.off, self.off_col, self.rowptr), shape=(n, n), blocksize=(5, 5)
            )
            object.__setattr__(self, "_bsr", cached)
        return cached

    def diag_inverses(self):
        return np.linalg.inv(self.diag)

    def to_dense(self):
        nc = self.ncells
        dense = np.zeros((5 * nc, 5 * nc))
        for c in range(nc):
            dense[5 * c: 5 * c + 5, 5 * c: 5 * c + 5] = self.diag[c]
        for k in range(len(self.off)):
            r, c = self.off_row[k], self.off_col[k]
            dense[5 * r: 5 * r + 5, 5 * c: 5 * c + 5] = self.off[k]
        return dense


def spmv(a: BlockJacobian, x):
    return a.spmv(x)


def assemble_jacobian(mesh, q, dt_cells, gamma: float = DEFAULT_GAMMA, boundary_ghosts=None):
    """Roe-split approximate Jacobian of the time-integrated residual.

    Per interior face with owner i and neighbor j (normal i -> j, area S):
        row i gains  D_i += (J(Q_i, n) + |l| I) S/2,  B_ij = (J(Q_j, n) - |l| I) S/2
        row j gains  D_j += (J(Q_j,-n) + |l| I) S/2,  B_ji = (J(Q_i,-n) - |l| I) S/2
    with |l| evaluated at the arithmetic average of the two cell states.
    boundary_ghosts (per boundary face, frozen during linearization) only
    sharpen the |l| bound of the diagonal contribution.
    """
    q = np.asarray(q, dtype=float)
    nc = mesh.ncells
    diag = np.zeros((nc, 5, 5))
    idx = np.arange(5)
    dt_cells = np.broadcast_to(np.asarray(dt_cells, dtype=float), (nc,))
    diag[:, idx, idx] = (mesh.cell_volume / dt_cells)[:, None]

    interior = np.flatnonzero(mesh.face_neighbor >= 0)
    own = mesh.face_owner[interior]
    nbr = mesh.face_neighbor[interior]
    nrm = mesh.face_normal[interior]
    area = mesh.face_area[interior]

    lam = spectral_radius(0.5 * (q[own] + q[nbr]), nrm, gamma)
    j_own = euler_flux_jacobian(q[own], nrm, gamma)
    j_nbr = euler_flux_jacobian(q[nbr], nrm, gamma)
    eye = np.eye(5)
    half_s = 0.5 * area
    lam_eye = lam[:, None, None] * eye

    np.add.at(diag, own, half_s[:, None, None] * (j_own + lam_eye))
    np.add.at(diag, nbr, half_s[:, None, None] * (-j_nbr + lam_eye))

    # off blocks, two per interior face
    nnz = 2 * len(interior)
    off = np.empty((nnz, 5, 5))
    off_row = np.empty(nnz, dtype=np.int64)
    off_col = np.empty(nnz, dtype=np.int64)
    off[0::2] = half_s[:, None, None] * (j_nbr - lam_eye)
    off_row[0::2] = own
    off_col[0::2] = nbr
    off[1::2] = half_s[:, None, None] * (-j_own - lam_eye)
    off_row[1::2] = nbr
    off_col[1::2] = own

    bfaces = np.flatnonzero(mesh.face_neighbor < 0)
    if len(bfaces):
        bown = mesh.face_owner[bfaces]
        bnrm = mesh.face_normal[bfaces]
        barea = mesh.face_area[bfaces]
        if boundary_ghosts is None:
            qb = q[bown]
        else:
            qb = 0.5 * (q[bown] + np.asarray(boundary_ghosts, dtype=float))
        lam_b = spectral_radius(qb, bnrm, gamma)
        j_b = euler_flux_jacobian(q[bown], bnrm, gamma)
        np.add.at(
            diag, bown, (0.5 * barea)[:, None, None] * (j_b + lam_b[:, None, None] * eye)
        )

    order = np.lexsort((off_col, off_row))
    off, off_row, off_col = off[order], off_row[order], off_col[order]
    rowptr = np.concatenate([[0], np.cumsum(np.bincount(off_row, minlength=nc))]).astype(np.int64)
    return BlockJacobian(diag, off, off_col, off_row, rowptr)


def random_block_system(rng, ncell, extra_dominance=2.0):
    """Random diagonally dominant block system on a ring+chords adjacency."""
    pairs = set()
    for c in range(ncell):
        pairs.add((c, (c + 1) % ncell))
    for _ in range(ncell):
        a, b = rng.integers(0, ncell, 2)
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    off_entries = []
    for a, b in sorted(pairs):
        off_entries.append((a, b, rng.normal(size=(5, 5)) * 0.3))
        off_entries.append((b, a, rng.normal(size=(5, 5)) * 0.3))
    diag = np.zeros((ncell, 5, 5))
    row_abs = np.zeros(ncell)
    for r, _, blk in off_entries:
        row_abs[r] += np.abs(blk).sum()
    for c in range(ncell):
        diag[c] = rng.normal(size=(5, 5))
        diag[c] += np.eye(5) * (row_abs[c] + extra_dominance + np.abs(diag[c]).sum())
    off_row = np.array([e[0] for e in off_entries], dtype=np.int64)
    off_col = np.array([e[1] for e in off_entries], dtype=np.int64)
    off = np.array([e[2] for e in off_entries])
    order = np.lexsort((off_col, off_row))
    rowptr = np.concatenate([[0], np.cumsum(np.bincount(off_row[order], minlength=ncell))]).astype(np.int64)
    a = BlockJacobian(diag, off[order], off_col[order], off_row[order], rowptr)
    b = rng.normal(size=(ncell, 5))
    return a, b
