"""Linear solvers for the block system: Jacobi-preconditioned restarted
GMRES and the LUSGS baseline sweep.

GMRES is left-preconditioned: the Arnoldi process runs on P^-1 A with
modified Gram-Schmidt, the small least-squares problem is solved through
Givens rotations, and convergence is monitored in the preconditioned norm.
The preconditioner is a fixed number of block-Jacobi iterations
    b^0 = D^-1 b,   b^k = D^-1 (b - (L+U) b^(k-1)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jacobian import BlockJacobian


class SolverError(RuntimeError):
    pass


def jacobi_precondition(a: BlockJacobian, b, k_max: int = 2, diag_inv=None):
    """Fixed-count block-Jacobi approximation of A^-1 b."""
    b = np.asarray(b, dtype=float).reshape(a.ncells, 5)
    if diag_inv is None:
        diag_inv = a.diag_inverses()
    if not np.all(np.isfinite(diag_inv)):
        raise SolverError("singular diagonal block in Jacobi preconditioner")
    z = np.matmul(diag_inv, b[:, :, None])[:, :, 0]
    for _ in range(k_max):
        z = np.matmul(diag_inv, (b - a.offdiag_mv(z))[:, :, None])[:, :, 0]
    return z


@dataclass
class GmresInfo:
    """Per-cycle preconditioned residual norms and counters."""

    cycle_residuals: list = field(default_factory=list)
    matvecs: int = 0
    breakdown: bool = False
    ortho_error: float = 0.0

    @property
    def initial_residual(self):
        return self.cycle_residuals[0][0] if self.cycle_residuals else 0.0

    @property
    def final_residual(self):
        return self.cycle_residuals[-1][-1] if self.cycle_residuals else 0.0


def gmres_solve(a: BlockJacobian, b, m: int = 10, restarts: int = 3, k_max: int = 2,
                rtol: float = 0.0, atol: float = 0.0, check_orthogonality: bool = False):
    """Restarted GMRES on the block system with Jacobi preconditioning.

    Returns (x, GmresInfo); x accumulates over restart cycles from x = 0.
    A vanishing Hessenberg subdiagonal ends the Arnoldi process early with
    the exact correction (happy breakdown); non-finite values raise.
    """
    b = np.asarray(b, dtype=float).reshape(a.ncells, 5)
    n = b.size
    diag_inv = a.diag_inverses()
    x = np.zeros_like(b)
    info = GmresInfo()
    target = None

    for _ in range(restarts):
        r = b - a.spmv(x)
        info.matvecs += 1
        rh = jacobi_precondition(a, r, k_max, diag_inv).ravel()
        beta = np.linalg.norm(rh)
        if target is None:
            target = rtol * beta + atol
        if beta == 0.0 or beta <= target:
            info.cycle_residuals.append([beta])
            break
        v = np.empty((m + 1, n))
        v[0] = rh / beta
        h = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        norms = [beta]
        j_used = 0
        for j in range(m):
            w = jacobi_precondition(a, a.spmv(v[j]), k_max, diag_inv).ravel()
            info.matvecs += 1
            w_scale = np.linalg.norm(w)
            for i in range(j + 1):
                h[i, j] = w @ v[i]
                w -= h[i, j] * v[i]
            h[j + 1, j] = np.linalg.norm(w)
            if h[j + 1, j] < 0.5 * w_scale:
                # heavy cancellation: one reorthogonalization pass keeps the
                # basis orthonormal to machine precision
                for i in range(j + 1):
                    corr = w @ v[i]
                    h[i, j] += corr
                    w -= corr * v[i]
                h[j + 1, j] = np.linalg.norm(w)
            if not np.isfinite(h[j + 1, j]):
                raise SolverError("GMRES diverged: non-finite Arnoldi vector")
            # apply stored rotations, then a new one to annihilate h[j+1, j]
            for i in range(j):
                t = cs[i] * h[i, j] + sn[i] * h[i + 1, j]
                h[i + 1, j] = -sn[i] * h[i, j] + cs[i] * h[i + 1, j]
                h[i, j] = t
            denom = np.hypot(h[j, j], h[j + 1, j])
            cs[j] = h[j, j] / denom
            sn[j] = h[j + 1, j] / denom
            h[j, j] = denom
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            norms.append(abs(g[j + 1]))
            j_used = j + 1
            if h[j + 1, j] <= 1e-13 * w_scale:
                # happy breakdown: the Krylov space is exhausted
                info.breakdown = True
                break
            if norms[-1] <= max(1e-15 * norms[0], target):
                break
            v[j + 1] = w / h[j + 1, j]
        # back substitution on the rotated upper-triangular system
        y = np.zeros(j_used)
        for i in range(j_used - 1, -1, -1):
            y[i] = (g[i] - h[i, i + 1: j_used] @ y[i + 1: j_used]) / h[i, i]
        x = x + (y @ v[:j_used]).reshape(a.ncells, 5)
        info.cycle_residuals.append(norms)
        if check_orthogonality and j_used > 1:
            gram = v[:j_used] @ v[:j_used].T
            info.ortho_error = max(
                info.ortho_error, float(np.max(np.abs(gram - np.eye(j_used))))
            )
        if info.breakdown or norms[-1] <= target:
            break
    return x, info


def lusgs_sweep(a: BlockJacobian, r):
    """One forward/backward LUSGS pass: (D+L) dq* = r, (D+U) dq = D dq*.

    Inherently sequential in ascending cell order; the comparison baseline.
    """
    r = np.asarray(r, dtype=float).reshape(a.ncells, 5)
    diag_inv = a.diag_inverses()
    if not np.all(np.isfinite(diag_inv)):
        raise SolverError("singular diagonal block in LUSGS")
    nc = a.ncells
    dq = np.empty_like(r)
    for c in range(nc):
        acc = r[c].copy()
        for k in range(a.rowptr[c], a.rowptr[c + 1]):
            j = a.off_col[k]
            if j < c:
                acc -= a.off[k] @ dq[j]
        dq[c] = diag_inv[c] @ acc
    for c in range(nc - 1, -1, -1):
        acc = np.zeros(5)
        for k in range(a.rowptr[c], a.rowptr[c + 1]):
            j = a.off_col[k]
            if j > c:
                acc += a.off[k] @ dq[j]
        dq[c] = dq[c] - diag_inv[c] @ acc
    return dq
