"""Independent brute-force references backing the derived test values.

These routines deliberately avoid the production code paths they check:
moments come from adaptive quadrature of the Maxwellian, fluxes from a
64-point Gauss-Legendre time integral of the instantaneous moment flux,
Jacobians from central differences, and linear solves from a dense
factorization.  Single-threaded by design; reproducibility over speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .kinetic import DEFAULT_GAMMA, internal_dof


def _velocity_moment_1d(mean, lam, p, half):
    """Quadrature of c^p against the 1D Maxwellian factor, optionally half range.

    Half-range integrands are sign-definite, so those run in pure relative
    mode; deep-tail moments then come out relatively accurate even at
    magnitudes near 1e-19.
    """
    scale = 1.0 / np.sqrt(2.0 * lam)

    def integrand(t):
        c = mean + t * scale
        return c**p * np.exp(-t * t / 2.0) / np.sqrt(2.0 * np.pi)

    if half == "full":
        lo, hi, epsabs = -np.inf, np.inf, 1e-14
    elif half == "pos":
        lo, hi, epsabs = -mean / scale, np.inf, 0.0
    elif half == "neg":
        lo, hi, epsabs = -np.inf, -mean / scale, 0.0
    else:
        raise ValueError(f"unknown half spec {half!r}")
    val, _ = integrate.quad(integrand, lo, hi, epsabs=epsabs, epsrel=1e-12, limit=200)
    return val


def _xi_moment(lam, s, n_dof):
    """Quadrature of xi^(2s); xi^2 follows a Gamma(N/2, 1/lam) law."""
    if s == 0:
        return 1.0
    k = 0.5 * n_dof

    def integrand(x):
        return x**s * x ** (k - 1.0) * np.exp(-lam * x) * lam**k / gamma_fn(k)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def moment_quadrature_oracle(w, p, q, r, s=0, half="full", gamma=DEFAULT_GAMMA):
    """Normalized moment <u^p v^q w^r xi^(2s)> by adaptive quadrature.

    half restricts the u integral to u>0 ("pos") or u<0 ("neg").
    """
    w = np.asarray(w, dtype=float)
    lam = w[4]
    n_dof = internal_dof(gamma)
    mu = _velocity_moment_1d(w[1], lam, p, half)
    mv = _velocity_moment_1d(w[2], lam, q, "full")
    mw = _velocity_moment_1d(w[3], lam, r, "full")
    return mu * mv * mw * _xi_moment(lam, s, n_dof)


def time_quadrature_flux_oracle(interface, tau, dt, gamma=DEFAULT_GAMMA):
    """64-point Gauss-Legendre time average of the instantaneous moment flux."""
    from .flux import instantaneous_flux

    nodes, weights = np.polynomial.legendre.leggauss(64)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (interface.n,))
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (interface.n,))
    acc = np.zeros((interface.n, 5))
    for node, wk in zip(nodes, weights):
        acc += wk * instantaneous_flux(interface, tau, 0.5 * dt * (node + 1.0))
    # the dt/2 Jacobian and the 1/dt time average cancel to 1/2
    return 0.5 * acc


def fd_jacobian_oracle(flux_fn, q, h=1e-6):
    """Central-difference 5x5 Jacobian of a flux function of one state."""
    q = np.asarray(q, dtype=float)
    jac = np.empty((5, 5))
    for k in range(5):
        step = h * (1.0 + abs(q[k]))
        qp = q.copy()
        qm = q.copy()
        qp[k] += step
        qm[k] -= step
        jac[:, k] = (np.asarray(flux_fn(qp)) - np.asarray(flux_fn(qm))) / (2.0 * step)
    return jac


def dense_solve_oracle(a, b):
    """Direct dense solve with a residual check; raises on singular input."""
    from scipy.linalg import solve

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] > 300:
        raise ValueError("dense oracle limited to 300 unknowns")
    try:
        x = solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular matrix in dense oracle") from exc
    if not np.all(np.isfinite(x)):
        raise ValueError("singular matrix in dense oracle")
    res = np.linalg.norm(a @ x - b)
    if res > 1e-12 * max(1.0, np.linalg.norm(b)):
        raise ValueError(f"dense oracle residual too large: {res:.3e}")
    return x


@dataclass
class OracleReport:
    """Outcome of one oracle suite run."""

    name: str
    rows: list = field(default_factory=list)

    def add(self, case, value, reference, tol):
        denom = max(abs(reference), 1e-300)
        relerr = abs(value - reference) / denom
        self.rows.append((self.name, case, value, reference, relerr, relerr <= tol))

    @property
    def passed(self):
        return all(row[5] for row in self.rows)

    @property
    def max_relerr(self):
        return max((row[4] for row in self.rows), default=0.0)

    def format(self):
        lines = ["oracle,case,value,reference,relerr,pass"]
        for name, case, value, reference, relerr, ok in self.rows:
            lines.append(
                f"{name},{case},{value:.12e},{reference:.12e},{relerr:.3e},{'pass' if ok else 'FAIL'}"
            )
        return "\n".join(lines)


def run_moment_suite(seed=20240801, n_states=25):
    """Moment-table entries vs adaptive quadrature over randomized states."""
    from .kinetic import build_moments

    rng = np.random.default_rng(seed)
    report = OracleReport("moments")
    for i in range(n_states):
        w = np.array(
            [
                rng.uniform(0.2, 2.0),
                rng.uniform(-2.0, 2.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(0.1, 10.0),
            ]
        )
        tab = build_moments(w[None])
        p = int(rng.integers(0, 7))
        half = ("full", "pos", "neg")[int(rng.integers(0, 3))]
        table_val = {
            "full": tab.u_full,
            "pos": tab.u_pos,
            "neg": tab.u_neg,
        }[half][p, 0]
        ref = moment_quadrature_oracle(w, p, 0, 0, 0, half)
        report.add(f"state{i}:u^{p}:{half}", table_val, ref, 1e-9)
        s = int(rng.integers(0, 3))
        report.add(
            f"state{i}:xi^{2 * s}", tab.xi[s, 0], moment_quadrature_oracle(w, 0, 0, 0, s), 1e-9
        )
    return report


def run_flux_suite(seed=20240802, n_cases=12):
    """evolve_flux vs the 64-point time-quadrature oracle on random interfaces."""
    from .flux import build_interface, evolve_flux, random_interface_inputs

    rng = np.random.default_rng(seed)
    report = OracleReport("flux")
    wl, wr, sl, sr = random_interface_inputs(rng, n_cases)
    interface = build_interface(wl, wr, sl, sr)
    tau = rng.uniform(1e-4, 0.05, n_cases)
    dt = rng.uniform(0.01, 0.1, n_cases)
    got = evolve_flux(interface, tau, dt)
    ref = time_quadrature_flux_oracle(interface, tau, dt)
    scale = np.max(np.abs(ref), axis=-1)
    for i in range(n_cases):
        err = np.max(np.abs(got[i] - ref[i])) / max(scale[i], 1e-300)
        report.rows.append(
            ("flux", f"case{i}", float(np.max(np.abs(got[i]))), float(scale[i]), err, err <= 1e-8)
        )
    return report


def run_jacobian_suite(seed=20240803, n_states=20):
    """Analytic normal-direction Euler Jacobian vs central differences."""
    from .jacobian import euler_flux, euler_flux_jacobian

    rng = np.random.default_rng(seed)
    report = OracleReport("jacobian")
    for i in range(n_states):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        w = np.array(
            [
                rng.uniform(0.3, 2.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(0.5, 3.0),
            ]
        )
        from .kinetic import primitive_to_conserved

        q = primitive_to_conserved(w)
        jac = euler_flux_jacobian(q[None], n[None])[0]
        ref = fd_jacobian_oracle(lambda x: euler_flux(x[None], n[None])[0], q)
        err = np.max(np.abs(jac - ref)) / max(np.max(np.abs(ref)), 1e-300)
        report.rows.append(
            ("jacobian", f"state{i}", float(np.max(np.abs(jac))), float(np.max(np.abs(ref))), err, err <= 1e-5)
        )
    return report


def run_linsolve_suite(seed=20240804):
    """gmres_solve and lusgs_sweep vs the dense oracle on random block systems."""
    from .krylov import gmres_solve, jacobi_precondition, lusgs_sweep
    from .jacobian import random_block_system

    rng = np.random.default_rng(seed)
    report = OracleReport("linsolve")
    for i, ncell in enumerate((10, 25, 40)):
        a, b = random_block_system(rng, ncell)
        dense = a.to_dense()
        x_ref = dense_solve_oracle(dense, b.ravel())
        x, info = gmres_solve(a, b, m=30, restarts=10, k_max=2)
        err = np.linalg.norm(x.ravel() - x_ref) / np.linalg.norm(x_ref)
        report.rows.append(
            ("linsolve", f"gmres{i}", float(np.linalg.norm(x)), float(np.linalg.norm(x_ref)), err, err <= 1e-8)
        )
        z = jacobi_precondition(a, b, k_max=60)
        errj = np.linalg.norm(z.ravel() - x_ref) / np.linalg.norm(x_ref)
        report.rows.append(
            ("linsolve", f"jacobi{i}", float(np.linalg.norm(z)), float(np.linalg.norm(x_ref)), errj, errj <= 1e-6)
        )
        dx = lusgs_sweep(a, b)
        r0 = np.linalg.norm(b.ravel())
        r1 = np.linalg.norm(b.ravel() - dense @ dx.ravel())
        report.rows.append(
            ("linsolve", f"lusgs{i}", float(r1), float(r0), r1 / r0, r1 < r0)
        )
    return report


SUITES = {
    "moments": run_moment_suite,
    "flux": run_flux_suite,
    "jacobian": run_jacobian_suite,
    "linsolve": run_linsolve_suite,
}


def run_suite(name):
    if name == "all":
        return [fn() for fn in SUITES.values()]
    if name not in SUITES:
        raise KeyError(f"unknown oracle suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return [SUITES[name]()]
