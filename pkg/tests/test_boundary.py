import numpy as np
import pytest

from gks3d.boundary import BoundaryError, PatchSpec, ghost_gradients, ghost_state
from gks3d.flux import build_interface, evolve_flux, rotate_to_local
from gks3d.kinetic import DEFAULT_GAMMA, conserved_to_primitive, primitive_to_conserved
from gks3d.mesh.geometry import local_frame

GAMMA = DEFAULT_GAMMA


def prim(rho, u, v, w, p):
    return np.array([rho, u, v, w, rho / (2.0 * p)])


class TestGhostStates:
    def test_slip_wall_mirrors_normal_velocity(self):
        spec = PatchSpec("wall", "wall_slip_adiabatic")
        n = np.array([1.0, 0.0, 0.0])
        q = primitive_to_conserved(prim(1.0, 0.3, 0.5, 0.0, 0.7))
        ghost = conserved_to_primitive(ghost_state(q, spec, n))
        assert ghost[1] == pytest.approx(-0.3, abs=1e-14)
        assert ghost[2] == pytest.approx(0.5, abs=1e-14)
        assert ghost[0] == pytest.approx(1.0)
        assert ghost[4] == pytest.approx(1.0 / 1.4)

    def test_supersonic_inlet_free_stream(self):
        ma = 1.5
        ref = np.array([1.0, ma, 0.0, 0.0, 1.0 / GAMMA])
        spec = PatchSpec("in", "supersonic_inlet", reference=ref)
        q = primitive_to_conserved(prim(0.7, 0.2, 0.1, 0.0, 0.5))
        ghost = conserved_to_primitive(ghost_state(q, spec, np.array([-1.0, 0.0, 0.0])))
        assert np.allclose(ghost[:4], [1.0, ma, 0.0, 0.0], atol=1e-14)
        assert ghost[4] == pytest.approx(GAMMA / 2.0)  # lam = rho/(2p)

    def test_supersonic_outlet_extrapolates(self):
        spec = PatchSpec("out", "supersonic_outlet")
        q = primitive_to_conserved(prim(0.9, 1.8, 0.2, -0.1, 0.6))
        assert np.allclose(ghost_state(q, spec, np.array([1.0, 0, 0])), q, atol=1e-14)

    def test_farfield_idempotent_on_reference(self):
        ref = np.array([1.0, 0.3, 0.1, -0.2, 1.0 / GAMMA])
        spec = PatchSpec("far", "farfield_riemann", reference=ref)
        lam = ref[0] / (2 * ref[4])
        q = primitive_to_conserved(np.array([ref[0], *ref[1:4], lam]))
        n = np.array([0.0, 1.0, 0.0])
        g1 = ghost_state(q, spec, n)
        assert np.max(np.abs(g1 - q)) < 1e-13
        g2 = ghost_state(g1, spec, n)
        assert np.max(np.abs(g2 - q)) < 1e-13

    def test_farfield_supersonic_directions(self):
        ref = np.array([1.0, 0.1, 0.0, 0.0, 1.0 / GAMMA])
        spec = PatchSpec("far", "farfield_riemann", reference=ref)
        n = np.array([1.0, 0.0, 0.0])
        q_out = primitive_to_conserved(prim(0.8, 2.5, 0.1, 0.0, 0.5))
        assert np.allclose(ghost_state(q_out, spec, n), q_out, atol=1e-13)
        q_in = primitive_to_conserved(prim(0.8, -2.5, 0.1, 0.0, 0.5))
        ghost = conserved_to_primitive(ghost_state(q_in, spec, n))
        assert np.allclose(ghost[:4], ref[:4], atol=1e-13)

    def test_isothermal_wall_balances_mass_flux(self):
        lam_wall = 0.9
        spec = PatchSpec("wall", "wall_noslip_isothermal", lambda_wall=lam_wall)
        w_int = prim(1.2, 0.1, -0.3, 0.2, 0.8)
        q = primitive_to_conserved(w_int)
        n = np.array([0, 0, 1.0])
        ghost = conserved_to_primitive(ghost_state(q, spec, n))
        assert np.allclose(ghost[1:4], -w_int[1:4], atol=1e-14)
        assert ghost[4] == pytest.approx(lam_wall)
        # ghost density chosen so the half-range mass fluxes along the wall
        # normal cancel exactly
        from gks3d.kinetic import build_moments, psi_moments

        frame = local_frame(n)
        wl = conserved_to_primitive(rotate_to_local(q, frame))
        wr = conserved_to_primitive(rotate_to_local(primitive_to_conserved(ghost), frame))
        f_out = wl[0] * psi_moments(build_moments(wl[None]), 1, 0, 0, umode="pos")[0, 0]
        f_in = wr[0] * psi_moments(build_moments(wr[None]), 1, 0, 0, umode="neg")[0, 0]
        assert f_out + f_in == pytest.approx(0.0, abs=1e-14)

    def test_isothermal_wall_matched_temperature_mirrors(self):
        lam_wall = 0.8
        spec = PatchSpec("wall", "wall_noslip_isothermal", lambda_wall=lam_wall)
        w_int = prim(1.1, 0.0, 0.2, 0.0, 1.1 / (2 * lam_wall))
        ghost = conserved_to_primitive(ghost_state(primitive_to_conserved(w_int), spec, np.array([0, 0, 1.0])))
        assert ghost[0] == pytest.approx(w_int[0], rel=1e-13)
        assert ghost[4] == pytest.approx(lam_wall)

    def test_moving_lid(self):
        spec = PatchSpec(
            "lid", "wall_noslip_isothermal", lambda_wall=GAMMA / 2.0, velocity=np.array([0.15, 0, 0])
        )
        w_int = prim(1.0, 0.05, -0.02, 0.0, 1.0 / GAMMA)
        ghost = conserved_to_primitive(ghost_state(primitive_to_conserved(w_int), spec, np.array([0, 1.0, 0])))
        assert ghost[1] == pytest.approx(2 * 0.15 - 0.05, abs=1e-14)
        assert ghost[2] == pytest.approx(0.02, abs=1e-14)

    def test_missing_reference_rejected(self):
        with pytest.raises(BoundaryError):
            PatchSpec("bad", "farfield_riemann")
        with pytest.raises(BoundaryError):
            PatchSpec("bad", "wall_noslip_isothermal")
        with pytest.raises(BoundaryError):
            PatchSpec("bad", "no_such_kind")


class TestGhostGradients:
    def test_slip_wall_is_reflected_field_gradient(self):
        spec = PatchSpec("wall", "wall_slip_adiabatic")
        n = np.array([0.0, 0.0, 1.0])
        g = np.arange(15, dtype=float).reshape(3, 5)
        ghost = ghost_gradients(g, spec, n)
        # scalar rows: tangential derivatives kept, normal derivative flipped
        for comp in (0, 4):
            assert np.allclose(ghost[:2, comp], g[:2, comp])
            assert np.allclose(ghost[2, comp], -g[2, comp])
        # tangential momentum: like scalars; normal momentum: opposite signs
        for comp in (1, 2):
            assert np.allclose(ghost[:2, comp], g[:2, comp])
            assert np.allclose(ghost[2, comp], -g[2, comp])
        assert np.allclose(ghost[:2, 3], -g[:2, 3])
        assert np.allclose(ghost[2, 3], g[2, 3])

    def test_noslip_wall_negates_momentum_block(self):
        spec = PatchSpec("wall", "wall_noslip_adiabatic")
        n = np.array([0.0, 0.0, 1.0])
        g = np.arange(15, dtype=float).reshape(3, 5)
        ghost = ghost_gradients(g, spec, n)
        for comp in (0, 4):
            assert np.allclose(ghost[:2, comp], g[:2, comp])
            assert np.allclose(ghost[2, comp], -g[2, comp])
        for comp in (1, 2, 3):
            assert np.allclose(ghost[:2, comp], -g[:2, comp])
            assert np.allclose(ghost[2, comp], g[2, comp])

    def test_nonwall_copies(self):
        ref = np.array([1.0, 0.0, 0.0, 0.0, 1.0])
        spec = PatchSpec("far", "farfield_riemann", reference=ref)
        g = np.random.default_rng(0).normal(size=(3, 5))
        assert np.array_equal(ghost_gradients(g, spec, np.array([1.0, 0, 0])), g)


class TestWallFlux:
    @pytest.mark.parametrize("kind", ["wall_slip_adiabatic", "wall_noslip_adiabatic", "wall_noslip_isothermal"])
    def test_stationary_state_has_no_wall_mass_flux(self, kind):
        lam = GAMMA / 2.0
        spec = PatchSpec("wall", kind, lambda_wall=lam)
        w_int = np.array([1.0, 0.0, 0.0, 0.0, lam])
        q = primitive_to_conserved(w_int)
        n = np.array([0.6, -0.64, 0.48])
        n /= np.linalg.norm(n)
        frame = local_frame(n)
        ghost = ghost_state(q, spec, n)
        wl = conserved_to_primitive(rotate_to_local(q, frame))
        wr = conserved_to_primitive(rotate_to_local(ghost, frame))
        ib = build_interface(wl[None], wr[None])
        f = evolve_flux(ib, 0.001, 0.01)
        assert abs(f[0, 0]) < 1e-10
