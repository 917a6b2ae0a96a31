"""Per-step orchestration: residual evaluation and the implicit update.

One Solver instance owns a mesh, its stencils, the reconstruction operators
of the configured scheme, and the patch table.  Each backward-Euler step
runs: local time step -> reconstruction -> time-integrated flux residual
(keeping the interface distribution for the compact gradient update) ->
Roe-split Jacobian -> restarted GMRES or one LUSGS pass -> state update.

Everything between reconstruction and the scatter-add back to cells is
batched over the face quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import flux as gks
from .boundary import WALL_KINDS, ghost_gradients, ghost_state
from .hweno import HwenoReconstructor, update_gradients
from .jacobian import assemble_jacobian
from .kinetic import (
    DEFAULT_GAMMA,
    UnphysicalStateError,
    conserved_to_primitive,
    pressure,
    sound_speed,
)
from .krylov import gmres_solve, lusgs_sweep
from .mesh import Mesh, build_stencils
from .recon import ReconGeometry, WenoReconstructor, evaluate_faces

SCHEMES = ("weno_gmres", "hweno_gmres", "weno_lusgs")


class SteppingError(RuntimeError):
    pass


@dataclass
class SolutionField:
    """Cell-averaged conserved states, plus gradient averages in compact mode."""

    q: np.ndarray
    grad: np.ndarray | None = None

    def copy(self):
        return SolutionField(self.q.copy(), None if self.grad is None else self.grad.copy())


@dataclass
class StepInfo:
    res_rho_l1: float
    res_l2: float
    dt_min: float
    solver_cycles: int = 0
    retried: bool = False


@dataclass
class SolverOptions:
    scheme: str = "weno_gmres"
    model: str = "inviscid"
    mu: float = 0.0
    gamma: float = DEFAULT_GAMMA
    cfl: float = 2.0
    krylov_dim: int = 10
    restarts: int = 3
    jacobi_sweeps: int = 2
    gmres_rtol: float = 0.0
    weno_eps: float = 1e-6
    linear_weight: float = 0.025
    weights: str = "nonlinear"
    time_step: str = "local"
    patches: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.model not in ("inviscid", "viscous"):
            raise ValueError(f"unknown physics model {self.model!r}")
        if self.time_step not in ("local", "global"):
            raise ValueError("time_step must be 'local' or 'global'")


class Solver:
    def __init__(self, mesh: Mesh, options: SolverOptions):
        self.mesh = mesh
        self.opt = options
        self.stencils = build_stencils(mesh)
        self.geom = ReconGeometry(mesh, self.stencils)
        if options.scheme.startswith("hweno"):
            self.recon = HwenoReconstructor(
                self.geom, options.weno_eps, options.linear_weight, options.weights)
        else:
            self.recon = WenoReconstructor(
                self.geom, options.weno_eps, options.linear_weight, options.weights)
        self.compact = options.scheme.startswith("hweno")

        fq_face = mesh.fq_face
        self.fq_frame = mesh.face_frame[fq_face]
        self.fq_normal = mesh.face_normal[fq_face]
        self.fq_ws = mesh.fq_weight * mesh.face_area[fq_face]
        self.fq_owner = mesh.face_owner[fq_face]
        self.fq_neighbor = mesh.face_neighbor[fq_face]
        self.fq_interior = self.fq_neighbor >= 0

        # quadrature points grouped by boundary patch
        self.patch_fq = {}
        fq_patch = mesh.face_patch[fq_face]
        for pid, name in enumerate(mesh.patch_names):
            sel = np.flatnonzero(fq_patch == pid)
            if len(sel):
                self.patch_fq[name] = sel
        # impermeable faces: the evolved mass flux is zeroed exactly there
        # (the kinetic expansion otherwise leaks mass at O(dt^2) through the
        # equilibrium time slope, which blocks steady convergence)
        self.wall_fq = np.zeros(len(fq_face), dtype=bool)
        uncovered = np.flatnonzero(~self.fq_interior & (fq_patch < 0))
        if len(uncovered):
            raise SteppingError(f"{len(uncovered)} boundary quadrature points have no patch")
        for name in self.patch_fq:
            if name not in options.patches:
                raise SteppingError(f"no patch spec for boundary patch {name!r}")
            if options.patches[name].kind in WALL_KINDS:
                self.wall_fq[self.patch_fq[name]] = True

        # boundary faces (for the frozen-ghost diagonal contribution)
        self.bfaces = np.flatnonzero(mesh.face_neighbor < 0)
        self.bface_patch = [mesh.patch_names[p] for p in mesh.face_patch[self.bfaces]]

    # -- time step -----------------------------------------------------------

    def local_time_step(self, fld: SolutionField):
        """dt_i = CFL |O_i| / sum_faces (|u.n| + a + nu/d_n) S."""
        mesh = self.mesh
        opt = self.opt
        w = conserved_to_primitive(fld.q, opt.gamma)
        a = sound_speed(w, opt.gamma)
        speed = np.zeros(mesh.ncells)
        own = mesh.face_owner
        nbr = mesh.face_neighbor
        for cells in (own, nbr):
            valid = cells >= 0
            f = np.flatnonzero(valid)
            c = cells[f]
            un = np.abs(np.sum(w[c, 1:4] * mesh.face_normal[f], axis=1))
            sig = (un + a[c]) * mesh.face_area[f]
            if opt.model == "viscous" and opt.mu > 0.0:
                nu = opt.mu / w[c, 0]
                sig += nu * mesh.face_area[f] ** 2 / mesh.cell_volume[c]
            np.add.at(speed, c, sig)
        dt = opt.cfl * mesh.cell_volume / speed
        if opt.time_step == "global":
            dt = np.full(mesh.ncells, dt.min())
        return dt

    # -- reconstruction and interface states ---------------------------------

    def _reconstruct(self, fld: SolutionField):
        if self.compact:
            if fld.grad is None:
                raise SteppingError("compact scheme needs a gradient field")
            coeffs = self.recon.combined_coeffs(fld.q, fld.grad)
        else:
            coeffs = self.recon.combined_coeffs(fld.q)
        val_o, grad_o, val_n, grad_n = evaluate_faces(self.geom, fld.q, coeffs)
        # ghost states on boundary quadrature points
        for name, sel in self.patch_fq.items():
            spec = self.opt.patches[name]
            n = self.fq_normal[sel]
            try:
                val_n[sel] = ghost_state(val_o[sel], spec, n, self.opt.gamma)
            except UnphysicalStateError as exc:
                raise SteppingError(f"unphysical reconstructed state at patch {name!r}: {exc}")
            grad_n[sel] = ghost_gradients(grad_o[sel], spec, n)
        return val_o, grad_o, val_n, grad_n

    def _local_slopes(self, frames, grad):
        """Directional derivatives along the face frame, momentum rotated."""
        s = np.einsum("fkd,fdm->fkm", frames, grad)
        s = s.copy()
        s[..., 1:4] = np.einsum("fij,fkj->fki", frames, s[..., 1:4])
        return s

    def interface_batch(self, fld: SolutionField, dt_cells):
        """Batched interface data, collision times, and flux time windows."""
        val_o, grad_o, val_n, grad_n = self._reconstruct(fld)
        frames = self.fq_frame
        try:
            wl = conserved_to_primitive(gks.rotate_to_local(val_o, frames), self.opt.gamma)
            wr = conserved_to_primitive(gks.rotate_to_local(val_n, frames), self.opt.gamma)
        except UnphysicalStateError as exc:
            raise SteppingError(f"unphysical reconstructed interface state: {exc}")
        sl = self._local_slopes(frames, grad_o)
        sr = self._local_slopes(frames, grad_n)
        ib = gks.build_interface(wl, wr, sl, sr, self.opt.gamma)

        dtf = np.where(
            self.fq_interior,
            np.minimum(dt_cells[self.fq_owner], dt_cells[np.where(self.fq_interior, self.fq_neighbor, 0)]),
            dt_cells[self.fq_owner],
        )
        tau = gks.collision_time(
            self.opt.model, dtf, pressure(wl), pressure(wr), self.opt.mu, pressure(ib.w0)
        )
        return ib, tau, dtf

    # -- residual -------------------------------------------------------------

    def residual(self, fld: SolutionField, dt_cells, with_gradients=None):
        """Cell residual L(Q) from the time-integrated flux.

        Returns (L, grad_new); grad_new is the Gauss-theorem gradient update
        from the same interface distribution (compact mode only).
        """
        if with_gradients is None:
            with_gradients = self.compact
        ib, tau, dtf = self.interface_batch(fld, dt_cells)
        f_loc = gks.evolve_flux(ib, tau, dtf)
        f_loc[self.wall_fq, 0] = 0.0
        f_glob = gks.rotate_to_global(f_loc, self.fq_frame)
        contrib = self.fq_ws[:, None] * f_glob
        res = np.zeros_like(fld.q)
        np.add.at(res, self.fq_owner, -contrib)
        sel = self.fq_interior
        np.add.at(res, self.fq_neighbor[sel], contrib[sel])

        grad_new = None
        if with_gradients:
            # interface value of the step's distribution at its start time;
            # evaluating at t = dt instead feeds a faster-growing mode of the
            # gradient/reconstruction loop on tet meshes
            qpt_loc = gks.point_value(ib, tau, np.zeros_like(dtf))
            qpt = gks.rotate_to_global(qpt_loc, self.fq_frame)
            grad_new = update_gradients(self.mesh, qpt)
        return res, grad_new

    # -- implicit step ---------------------------------------------------------

    def _boundary_ghosts(self, fld: SolutionField):
        if not len(self.bfaces):
            return None
        out = np.empty((len(self.bfaces), 5))
        q = fld.q[self.mesh.face_owner[self.bfaces]]
        for k, (f, name) in enumerate(zip(self.bfaces, self.bface_patch)):
            out[k] = ghost_state(q[k], self.opt.patches[name], self.mesh.face_normal[f], self.opt.gamma)
        return out

    def _solve(self, a, res):
        if self.opt.scheme == "weno_lusgs":
            return lusgs_sweep(a, res), 0
        dq, info = gmres_solve(
            a,
            res,
            m=self.opt.krylov_dim,
            restarts=self.opt.restarts,
            k_max=self.opt.jacobi_sweeps,
            rtol=self.opt.gmres_rtol,
        )
        return dq, len(info.cycle_residuals)

    @staticmethod
    def _invalid_cells(q, gamma):
        rho = q[:, 0]
        e_int = q[:, 4] - 0.5 * np.sum(q[:, 1:4] ** 2, axis=1) / rho
        return (rho <= 0.0) | (e_int <= 0.0) | ~np.all(np.isfinite(q), axis=1)

    def advance(self, fld: SolutionField):
        """One backward-Euler step; rejected updates retry once at halved dt."""
        dt = self.local_time_step(fld)
        retried = False
        for attempt in range(2):
            res, grad_new = self.residual(fld, dt)
            ghosts = self._boundary_ghosts(fld)
            a = assemble_jacobian(self.mesh, fld.q, dt, self.opt.gamma, ghosts)
            dq, cycles = self._solve(a, res)
            q_new = fld.q + dq
            bad = self._invalid_cells(q_new, self.opt.gamma)
            if not bad.any():
                info = StepInfo(
                    res_rho_l1=float(np.sum(np.abs(res[:, 0])) / self.mesh.ncells),
                    res_l2=float(np.sqrt(np.mean(res**2))),
                    dt_min=float(dt.min()),
                    solver_cycles=cycles,
                    retried=retried,
                )
                new_fld = SolutionField(q_new, grad_new if self.compact else None)
                return new_fld, info
            if attempt == 0:
                dt = np.where(bad, 0.5 * dt, dt)
                retried = True
        raise SteppingError(
            f"unphysical update persists after dt halving at cells {np.flatnonzero(bad)[:8].tolist()}"
        )

    def frechet_matvec(self, fld: SolutionField, v, dt_cells, sigma=None):
        """Directional residual derivative (L(Q + s v) - L(Q)) / s.

        Diagnostic oracle for probing the Roe-approximate Jacobian; the
        gradient field is frozen at its current value.
        """
        v = np.asarray(v, dtype=float).reshape(fld.q.shape)
        if sigma is None:
            vn = np.linalg.norm(v)
            if vn == 0.0:
                return np.zeros_like(v)
            sigma = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(fld.q)) / vn
        base, _ = self.residual(fld, dt_cells, with_gradients=False)
        bumped = SolutionField(fld.q + sigma * v, fld.grad)
        res, _ = self.residual(bumped, dt_cells, with_gradients=False)
        return (res - base) / sigma


def initial_field(mesh: Mesh, reference, gamma: float = DEFAULT_GAMMA, compact=False):
    """Uniform reference-state field; reference = (rho, U, V, W, p)."""
    rho, u, v, w, p = np.asarray(reference, dtype=float)
    prim = np.array([rho, u, v, w, rho / (2.0 * p)])
    from .kinetic import primitive_to_conserved

    q = np.tile(primitive_to_conserved(prim, gamma), (mesh.ncells, 1))
    grad = np.zeros((mesh.ncells, 3, 5)) if compact else None
    return SolutionField(q, grad)
