"""Maxwellian moment engine: state conversions, moment tables, micro-slopes.

Every quantity here is expressed in the nondimensional kinetic variables.
Conserved states are arrays (..., 5) ordered (rho, rho*U, rho*V, rho*W, rho*E);
primitive states are arrays (..., 5) ordered (rho, U, V, W, lam) where lam is
the inverse-temperature parameter, p = rho / (2 lam).

All functions are vectorized over arbitrary leading batch axes and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

DEFAULT_GAMMA = 1.4

# u moments to order 6 and xi^(2s) to s=2 cover every product that appears in
# the second-order flux with first-order slopes; checked in psi_moments.
MAX_UORDER = 6
MAX_XIORDER = 2


class UnphysicalStateError(ValueError):
    """Raised when a state has non-positive density or internal energy."""


def internal_dof(gamma: float) -> float:
    """Internal degrees of freedom N for the given specific-heat ratio."""
    return (5.0 - 3.0 * gamma) / (gamma - 1.0)


def conserved_to_primitive(q, gamma: float = DEFAULT_GAMMA):
    """Convert (rho, rhoU, rhoV, rhoW, rhoE) to (rho, U, V, W, lam)."""
    q = np.asarray(q, dtype=float)
    rho = q[..., 0]
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        raise UnphysicalStateError("non-positive density")
    vel = q[..., 1:4] / rho[..., None]
    e_int = q[..., 4] - 0.5 * np.sum(q[..., 1:4] * vel, axis=-1)
    if np.any(e_int <= 0.0) or not np.all(np.isfinite(e_int)):
        raise UnphysicalStateError("non-positive internal energy")
    n_dof = internal_dof(gamma)
    lam = (n_dof + 3.0) * rho / (4.0 * e_int)
    out = np.empty_like(q)
    out[..., 0] = rho
    out[..., 1:4] = vel
    out[..., 4] = lam
    return out


def primitive_to_conserved(w, gamma: float = DEFAULT_GAMMA):
    """Inverse of conserved_to_primitive."""
    w = np.asarray(w, dtype=float)
    rho = w[..., 0]
    lam = w[..., 4]
    n_dof = internal_dof(gamma)
    out = np.empty_like(w)
    out[..., 0] = rho
    out[..., 1:4] = rho[..., None] * w[..., 1:4]
    ke = 0.5 * rho * np.sum(w[..., 1:4] ** 2, axis=-1)
    out[..., 4] = ke + (n_dof + 3.0) * rho / (4.0 * lam)
    return out


def pressure(w):
    """Ideal-gas pressure p = rho / (2 lam) of a primitive state."""
    w = np.asarray(w, dtype=float)
    return w[..., 0] / (2.0 * w[..., 4])


def sound_speed(w, gamma: float = DEFAULT_GAMMA):
    """Speed of sound sqrt(gamma p / rho) of a primitive state."""
    w = np.asarray(w, dtype=float)
    return np.sqrt(gamma / (2.0 * w[..., 4]))


def check_primitive(w):
    """Raise UnphysicalStateError unless rho > 0 and lam > 0 everywhere."""
    w = np.asarray(w)
    bad = (w[..., 0] <= 0.0) | (w[..., 4] <= 0.0) | ~np.all(np.isfinite(w), axis=-1)
    if np.any(bad):
        raise UnphysicalStateError(
            f"invalid primitive state at {np.argwhere(bad)[:8].tolist()}"
        )


@dataclass
class MomentTable:
    """Normalized Maxwellian velocity moments for a batch of states.

    Arrays are laid out order-first, u_full[p] = <u^p> for the whole batch,
    with half-range splits u_pos (u>0) and u_neg (u<0); v_full and w_full
    are the tangential analogues and xi[s] holds <xi^(2s)>.  Moments are
    normalized by density: <1> = 1.
    """

    u_full: np.ndarray
    u_pos: np.ndarray
    u_neg: np.ndarray
    v_full: np.ndarray
    w_full: np.ndarray
    xi: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        # psi-moment memo; tables are immutable once built
        self._cache = {}


def _full_moments(u, lam, order):
    m = np.empty((order + 1,) + u.shape)
    m[0] = 1.0
    m[1] = u
    inv2lam = 0.5 / lam
    for p in range(2, order + 1):
        m[p] = u * m[p - 1] + (p - 1) * inv2lam * m[p - 2]
    return m


def _half_moments(u, lam, order):
    """Half-range moments over u>0 and u<0, sharing the full recurrence."""
    sq = np.sqrt(lam)
    gauss = 0.5 * np.exp(-lam * u * u) / np.sqrt(np.pi * lam)
    pos = np.empty((order + 1,) + u.shape)
    neg = np.empty_like(pos)
    pos[0] = 0.5 * erfc(-sq * u)
    neg[0] = 0.5 * erfc(sq * u)
    pos[1] = u * pos[0] + gauss
    neg[1] = u * neg[0] - gauss
    inv2lam = 0.5 / lam
    for p in range(2, order + 1):
        pos[p] = u * pos[p - 1] + (p - 1) * inv2lam * pos[p - 2]
        neg[p] = u * neg[p - 1] + (p - 1) * inv2lam * neg[p - 2]
    return pos, neg


def build_moments(w, gamma: float = DEFAULT_GAMMA, max_order: int = MAX_UORDER) -> MomentTable:
    """Tabulate Maxwellian moments of a primitive state batch.

    Full moments obey <u^(p+2)> = U <u^(p+1)> + (p+1)/(2 lam) <u^p> seeded by
    <u^0> = 1, <u^1> = U; half moments use erfc seeds with the same
    recurrence.  xi moments come from <xi^2> = N/(2 lam).
    """
    w = np.asarray(w, dtype=float)
    check_primitive(w)
    lam = w[..., 4]
    n_dof = internal_dof(gamma)
    u_full = _full_moments(w[..., 1], lam, max_order)
    u_pos, u_neg = _half_moments(w[..., 1], lam, max_order)
    v_full = _full_moments(w[..., 2], lam, max_order)
    w_full = _full_moments(w[..., 3], lam, max_order)
    xi = np.empty((MAX_XIORDER + 1,) + lam.shape)
    xi[0] = 1.0
    xi[1] = n_dof / (2.0 * lam)
    xi[2] = n_dof * (n_dof + 2.0) / (4.0 * lam * lam)
    for arr in (u_full, u_pos, u_neg, v_full, w_full, xi):
        if not np.all(np.isfinite(arr)):
            raise UnphysicalStateError("moment table overflow: state out of range")
    return MomentTable(u_full, u_pos, u_neg, v_full, w_full, xi, w[..., 0].copy())


def _u_table(tab: MomentTable, umode: str):
    if umode == "full":
        return tab.u_full
    if umode == "pos":
        return tab.u_pos
    if umode == "neg":
        return tab.u_neg
    raise ValueError(f"unknown umode {umode!r}")


def _mono(tab: MomentTable, umode, p, q, r, s):
    key = ("m", umode, p, q, r, s)
    hit = tab._cache.get(key)
    if hit is not None:
        return hit
    u = _u_table(tab, umode)
    if p >= u.shape[0] or q >= tab.v_full.shape[0] or r >= tab.w_full.shape[0] or s >= tab.xi.shape[0]:
        raise ValueError(f"moment order ({p},{q},{r},{s}) exceeds tabulated range")
    out = u[p]
    for table, order in ((tab.v_full, q), (tab.w_full, r), (tab.xi, s)):
        if order:
            out = out * table[order]
    tab._cache[key] = out
    return out


def psi_rows(tab: MomentTable, p: int, q: int, r: int, s: int = 0, umode: str = "full"):
    """Normalized psi-moments of u^p v^q w^r xi^(2s), shape (5,) + batch.

    Row-major layout keeps every row contiguous for the batched flux
    assembly; psi_moments exposes the same data in (..., 5) order.
    """
    key = (p, q, r, s, umode)
    hit = tab._cache.get(key)
    if hit is not None:
        return hit
    m = _mono
    out = np.empty((5,) + tab.rho.shape)
    out[0] = m(tab, umode, p, q, r, s)
    out[1] = m(tab, umode, p + 1, q, r, s)
    out[2] = m(tab, umode, p, q + 1, r, s)
    out[3] = m(tab, umode, p, q, r + 1, s)
    np.add(m(tab, umode, p + 2, q, r, s), m(tab, umode, p, q + 2, r, s), out=out[4])
    out[4] += m(tab, umode, p, q, r + 2, s)
    out[4] += m(tab, umode, p, q, r, s + 1)
    out[4] *= 0.5
    out.setflags(write=False)
    tab._cache[key] = out
    return out


def psi_moments(tab: MomentTable, p: int, q: int, r: int, s: int = 0, umode: str = "full"):
    """Normalized 5-vector <u^p v^q w^r xi^(2s) psi> for the table's states."""
    rows = psi_rows(tab, p, q, r, s, umode)
    return np.moveaxis(rows, 0, -1)


def slope_psi_rows(tab: MomentTable, slope, p: int, q: int, r: int, umode: str = "full", out=None):
    """Row-major normalized <a(u) u^p v^q w^r psi>, accumulated into out.

    slope has shape (..., 5): the expansion a = a1 + a2 u + a3 v + a4 w
    + a5 * (u^2+v^2+w^2+xi^2)/2.
    """
    slope = np.asarray(slope)
    coef = [np.ascontiguousarray(slope[..., j]) for j in range(5)]
    if out is None:
        out = np.zeros((5,) + tab.rho.shape)
    pieces = (
        (coef[0], psi_rows(tab, p, q, r, 0, umode)),
        (coef[1], psi_rows(tab, p + 1, q, r, 0, umode)),
        (coef[2], psi_rows(tab, p, q + 1, r, 0, umode)),
        (coef[3], psi_rows(tab, p, q, r + 1, 0, umode)),
    )
    for c, rows in pieces:
        for i in range(5):
            out[i] += c * rows[i]
    half = 0.5 * coef[4]
    for rows in (
        psi_rows(tab, p + 2, q, r, 0, umode),
        psi_rows(tab, p, q + 2, r, 0, umode),
        psi_rows(tab, p, q, r + 2, 0, umode),
        psi_rows(tab, p, q, r, 1, umode),
    ):
        for i in range(5):
            out[i] += half * rows[i]
    return out


def slope_psi_moments(tab: MomentTable, slope, p: int, q: int, r: int, umode: str = "full"):
    """Normalized <a(u) u^p v^q w^r psi> in (..., 5) order."""
    return np.moveaxis(slope_psi_rows(tab, slope, p, q, r, umode), 0, -1)


def directional_slope_psi_rows(tab: MomentTable, a1, a2, a3, p: int, q: int, r: int, umode: str = "full", out=None):
    """Row-major normalized <(a1 u + a2 v + a3 w) u^p v^q w^r psi>."""
    out = slope_psi_rows(tab, a1, p + 1, q, r, umode, out=out)
    out = slope_psi_rows(tab, a2, p, q + 1, r, umode, out=out)
    out = slope_psi_rows(tab, a3, p, q, r + 1, umode, out=out)
    return out


def directional_slope_psi_moments(tab: MomentTable, a1, a2, a3, p: int, q: int, r: int, umode: str = "full"):
    """Normalized <(a1 u + a2 v + a3 w) u^p v^q w^r psi> in (..., 5) order."""
    return np.moveaxis(directional_slope_psi_rows(tab, a1, a2, a3, p, q, r, umode), 0, -1)


def solve_micro_slope(w, dq, gamma: float = DEFAULT_GAMMA):
    """Coefficients a with integral(a psi g) = dq, by the closed-form solve.

    The 5x5 moment system in primitive variables back-substitutes exactly;
    tests verify the moment identity <a psi> = dq to machine precision.
    """
    w = np.asarray(w, dtype=float)
    dq = np.asarray(dq, dtype=float)
    rho = w[..., 0]
    uu, vv, ww = w[..., 1], w[..., 2], w[..., 3]
    lam = w[..., 4]
    n3 = internal_dof(gamma) + 3.0
    b = dq / rho[..., None]
    ke2 = uu * uu + vv * vv + ww * ww + 0.5 * n3 / lam
    r2 = b[..., 1] - uu * b[..., 0]
    r3 = b[..., 2] - vv * b[..., 0]
    r4 = b[..., 3] - ww * b[..., 0]
    r5 = 2.0 * b[..., 4] - ke2 * b[..., 0]
    t = r5 - 2.0 * uu * r2 - 2.0 * vv * r3 - 2.0 * ww * r4
    a = np.empty_like(b)
    a[..., 4] = 4.0 * lam * lam * t / n3
    a[..., 3] = 2.0 * lam * r4 - ww * a[..., 4]
    a[..., 2] = 2.0 * lam * r3 - vv * a[..., 4]
    a[..., 1] = 2.0 * lam * r2 - uu * a[..., 4]
    a[..., 0] = (
        b[..., 0]
        - uu * a[..., 1]
        - vv * a[..., 2]
        - ww * a[..., 3]
        - 0.5 * a[..., 4] * ke2
    )
    return a


def solve_time_slope(w, a1, a2, a3, gamma: float = DEFAULT_GAMMA, tab: MomentTable | None = None):
    """Time slope A from the compatibility condition <(a1 u + a2 v + a3 w + A) psi> = 0."""
    w = np.asarray(w, dtype=float)
    if tab is None:
        tab = build_moments(w, gamma)
    rows = directional_slope_psi_rows(tab, a1, a2, a3, 0, 0, 0)
    rhs = -w[..., 0, None] * np.moveaxis(rows, 0, -1)
    return solve_micro_slope(w, rhs, gamma)


def conserved_from_moments(tab: MomentTable):
    """Conserved 5-vector integral(psi g) recovered from a moment table."""
    return tab.rho[..., None] * psi_moments(tab, 0, 0, 0)
