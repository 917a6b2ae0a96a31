"""Ghost-state construction for the boundary patch types.

Ghosts are built pointwise from the interior reconstructed state at each
face quadrature point, in global coordinates, with the outward unit normal
supplied by the face.  Gradients are copied, with the normal-derivative
component mirrored on walls.  The periodic kind never reaches this module:
periodic patches are merged into shifted interior faces at mesh build time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinetic import DEFAULT_GAMMA, conserved_to_primitive, primitive_to_conserved

WALL_KINDS = ("wall_noslip_isothermal", "wall_noslip_adiabatic", "wall_slip_adiabatic")
PATCH_KINDS = WALL_KINDS + ("farfield_riemann", "supersonic_inlet", "supersonic_outlet", "periodic")


class BoundaryError(ValueError):
    pass


@dataclass
class PatchSpec:
    """Configuration of one boundary patch."""

    name: str
    kind: str
    reference: np.ndarray | None = None  # (rho, U, V, W, p)
    lambda_wall: float | None = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mate: str | None = None  # periodic partner patch

    def __post_init__(self):
        if self.kind not in PATCH_KINDS:
            raise BoundaryError(f"patch {self.name!r}: unknown kind {self.kind!r}")
        if self.kind in ("farfield_riemann", "supersonic_inlet") and self.reference is None:
            raise BoundaryError(f"patch {self.name!r}: kind {self.kind} needs a reference state")
        if self.kind == "wall_noslip_isothermal" and self.lambda_wall is None:
            raise BoundaryError(f"patch {self.name!r}: isothermal wall needs lambda_wall")
        if self.reference is not None:
            self.reference = np.asarray(self.reference, dtype=float)
            if self.reference[0] <= 0.0 or self.reference[4] <= 0.0:
                raise BoundaryError(f"patch {self.name!r}: invalid reference state")
        self.velocity = np.asarray(self.velocity, dtype=float)


def _reference_primitive(spec: PatchSpec):
    rho, u, v, w, p = spec.reference
    return np.array([rho, u, v, w, rho / (2.0 * p)])


def _half_mass_flux(un, lam, sign):
    """Unit-density half-range mass flux sign * <u>_{sign u > 0} at normal speed un."""
    from scipy.special import erfc

    gauss = 0.5 * np.exp(-lam * un * un) / np.sqrt(np.pi * lam)
    if sign > 0:
        return un * 0.5 * erfc(-np.sqrt(lam) * un) + gauss
    return -(un * 0.5 * erfc(np.sqrt(lam) * un) - gauss)


def ghost_state(q_interior, spec: PatchSpec, normal, gamma: float = DEFAULT_GAMMA):
    """Exterior conserved state across a boundary face.

    q_interior: (..., 5) conserved state at the face point (global frame);
    normal: (..., 3) outward unit normal.  Vectorized over leading axes.
    """
    q = np.atleast_2d(np.asarray(q_interior, dtype=float))
    n = np.atleast_2d(np.asarray(normal, dtype=float))
    w = conserved_to_primitive(q, gamma)
    rho, vel, lam = w[:, 0], w[:, 1:4], w[:, 4]
    out = w.copy()

    if spec.kind == "wall_slip_adiabatic":
        un = np.sum(vel * n, axis=1)
        out[:, 1:4] = vel - 2.0 * un[:, None] * n
    elif spec.kind == "wall_noslip_adiabatic":
        out[:, 1:4] = 2.0 * spec.velocity - vel
    elif spec.kind == "wall_noslip_isothermal":
        out[:, 1:4] = 2.0 * spec.velocity - vel
        out[:, 4] = spec.lambda_wall
        # ghost density balances the half-range mass fluxes through the wall
        # (Maxwell diffusive reflection); pressure continuity instead lets
        # mass leak whenever the near-wall temperature is off the wall value
        un = np.sum(vel * n, axis=1)
        un_g = np.sum(out[:, 1:4] * n, axis=1)
        out[:, 0] = rho * _half_mass_flux(un, lam, +1.0) / _half_mass_flux(un_g, spec.lambda_wall, -1.0)
    elif spec.kind == "supersonic_inlet":
        out[:] = _reference_primitive(spec)
    elif spec.kind == "supersonic_outlet":
        pass  # full extrapolation
    elif spec.kind == "farfield_riemann":
        out = _farfield(w, n, _reference_primitive(spec), gamma)
    else:
        raise BoundaryError(f"patch {spec.name!r}: kind {spec.kind} has no ghost state")
    ghost = primitive_to_conserved(out, gamma)
    return ghost.reshape(np.shape(q_interior))


def _farfield(w, n, ref, gamma):
    """1D characteristic farfield blend along the outward normal."""
    rho, vel, lam = w[:, 0], w[:, 1:4], w[:, 4]
    p = rho / (2.0 * lam)
    a = np.sqrt(gamma * p / rho)
    un = np.sum(vel * n, axis=1)

    rho_inf, vel_inf, lam_inf = ref[0], ref[1:4], ref[4]
    p_inf = rho_inf / (2.0 * lam_inf)
    a_inf = np.sqrt(gamma * p_inf / rho_inf)
    un_inf = vel_inf @ n.T

    g1 = gamma - 1.0
    r_plus = un + 2.0 * a / g1
    r_minus = un_inf - 2.0 * a_inf / g1
    un_b = 0.5 * (r_plus + r_minus)
    a_b = 0.25 * g1 * (r_plus - r_minus)

    outflow = un_b > 0.0
    s = np.where(outflow, p / rho**gamma, p_inf / rho_inf**gamma)
    ut = np.where(outflow[:, None], vel - un[:, None] * n, vel_inf - un_inf[:, None] * n)
    rho_b = (a_b * a_b / (gamma * s)) ** (1.0 / g1)
    p_b = rho_b * a_b * a_b / gamma

    # supersonic overrides based on the interior normal Mach number
    mach = un / a
    sup_out = mach >= 1.0
    sup_in = mach <= -1.0

    out = np.empty_like(w)
    out[:, 0] = np.where(sup_out, rho, np.where(sup_in, rho_inf, rho_b))
    blend_v = ut + un_b[:, None] * n
    out[:, 1:4] = np.where(
        sup_out[:, None], vel, np.where(sup_in[:, None], vel_inf, blend_v)
    )
    lam_b = rho_b / (2.0 * p_b)
    out[:, 4] = np.where(sup_out, lam, np.where(sup_in, lam_inf, lam_b))
    return out


def ghost_gradients(grad_interior, spec: PatchSpec, normal):
    """Exterior gradients: interior copy; walls get the mirror-image field's.

    The ghost field is the reflected interior field, so its gradient is the
    direction-mirrored gradient with the velocity block also transformed:
    slip walls reflect the momentum vector, no-slip walls negate it (plus
    the wall-velocity drive through the density gradient).  This parity is
    what cancels the slope-driven mass flux through the wall.
    """
    g = np.asarray(grad_interior, dtype=float)
    if spec.kind not in WALL_KINDS:
        return g.copy()
    n = np.asarray(normal, dtype=float)
    # direction mirror: flip the normal derivative of every row
    gn = np.einsum("...xk,...x->...k", g, n)
    mirrored = g - 2.0 * n[..., :, None] * gn[..., None, :]
    out = mirrored.copy()
    mom = mirrored[..., 1:4]
    if spec.kind == "wall_slip_adiabatic":
        # reflect the momentum components across the wall plane
        mn = np.einsum("...xc,...c->...x", mom, n)
        out[..., 1:4] = mom - 2.0 * mn[..., :, None] * n[..., None, :]
    else:
        out[..., 1:4] = -mom
        wall_v = spec.velocity
        if np.any(wall_v != 0.0):
            out[..., 1:4] += 2.0 * mirrored[..., 0:1] * wall_v
    return out
