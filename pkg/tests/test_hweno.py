import numpy as np
import pytest

from gks3d.hweno import (
    HwenoReconstructor,
    fit_big_hermite,
    fit_sub_hermite,
    update_gradients,
)
from gks3d.mesh import build_stencils, generate_box_mesh
from gks3d.recon import ReconGeometry, evaluate_faces


def make_hweno(divisions=(4, 4, 4), split="hex", periodic=(), perturb=0.0, seed=None):
    mesh = generate_box_mesh((1, 1, 1), divisions, split=split, periodic=periodic,
                             perturb=perturb, seed=seed)
    geom = ReconGeometry(mesh, build_stencils(mesh))
    return mesh, geom, HwenoReconstructor(geom)


def quadratic_data(mesh):
    """Exact averages and average gradients of x^2 + y z on a hex lattice."""
    lo = np.array([mesh.nodes[mesh.cell_nodes[c, 0]] for c in range(mesh.ncells)])
    hi = np.array([mesh.nodes[mesh.cell_nodes[c, 6]] for c in range(mesh.ncells)])
    mid = 0.5 * (lo + hi)
    field = (lo[:, 0] ** 2 + lo[:, 0] * hi[:, 0] + hi[:, 0] ** 2) / 3.0 + mid[:, 1] * mid[:, 2]
    grad = np.stack([2.0 * mid[:, 0], mid[:, 2], mid[:, 1]], axis=1)
    return field, grad


class TestBigHermite:
    def test_quadratic_recovery(self):
        mesh, geom, recon = make_hweno()
        field, grad = quadratic_data(mesh)
        for c in range(0, mesh.ncells, 7):
            poly = fit_big_hermite(recon, c, field, grad)
            assert poly.degree == 2
            for f in mesh.cell_faces[c]:
                qp, _ = mesh.face_quadrature_of(f)
                got = poly.value(qp)[:, 0]
                expect = qp[:, 0] ** 2 + qp[:, 1] * qp[:, 2]
                assert np.max(np.abs(got - expect)) < 1e-11

    def test_constant_field(self):
        mesh, geom, recon = make_hweno()
        field = np.full(mesh.ncells, 2.5)
        grad = np.zeros((mesh.ncells, 3))
        poly = fit_big_hermite(recon, 13, field, grad)
        assert np.max(np.abs(poly.coeffs)) < 1e-13

    def test_target_average_immune_to_neighbor_gradient(self):
        mesh, geom, recon = make_hweno()
        rng = np.random.default_rng(3)
        field = rng.normal(size=mesh.ncells)
        grad = rng.normal(size=(mesh.ncells, 3))
        c = 21
        nbr = [j for j, _ in mesh.neighbors_of(c)][0]
        base = fit_big_hermite(recon, c, field, grad)
        grad2 = grad.copy()
        grad2[nbr] += 0.37
        bumped = fit_big_hermite(recon, c, field, grad2)
        assert base.cell_average(geom)[0] == pytest.approx(field[c], abs=1e-13)
        assert bumped.cell_average(geom)[0] == pytest.approx(field[c], abs=1e-13)
        # the fit itself moved, the hard constraint did not
        assert np.max(np.abs(base.coeffs - bumped.coeffs)) > 0


class TestSubHermite:
    def test_linear_field_exact(self):
        mesh, geom, recon = make_hweno(split="tet", perturb=0.1, seed=11)
        g = np.array([0.8, -0.3, 0.45])
        field = mesh.cell_centroid @ g
        grad = np.tile(g, (mesh.ncells, 1))
        for c in (0, 11, 29):
            for poly in fit_sub_hermite(recon, c, field, grad):
                got = poly.gradient(mesh.cell_centroid[c])[:, 0]
                assert np.max(np.abs(got - g)) < 1e-12

    def test_identical_data_zero_slope(self):
        mesh, geom, recon = make_hweno()
        field = np.full(mesh.ncells, 0.9)
        grad = np.zeros((mesh.ncells, 3))
        for poly in fit_sub_hermite(recon, 21, field, grad):
            assert np.max(np.abs(poly.coeffs)) < 1e-13

    def test_least_squares_optimality(self):
        # zero gradients, unequal averages: compare against a dense normal solve
        mesh, geom, recon = make_hweno()
        rng = np.random.default_rng(8)
        field = rng.normal(size=mesh.ncells)
        grad = np.zeros((mesh.ncells, 3))
        c = 21
        st = geom.stencils[c]
        polys = fit_sub_hermite(recon, c, field, grad)
        assert len(polys) == len(st.hsub_ids)
        for m, poly in enumerate(polys):
            sids, sshifts = st.hsub_ids[m], st.hsub_shifts[m]
            rows_avg = geom.member_rows(c, sids, sshifts)[:, :3]
            rows_grad = recon._grad_rows(c, sids, sshifts)[:, :3]
            a = np.vstack([rows_avg, rows_grad])
            rhs = np.concatenate([[field[sids[1]] - field[c]], np.zeros(6)])
            ref = np.linalg.solve(a.T @ a, a.T @ rhs)
            assert np.allclose(poly.coeffs[:3, 0], ref, atol=1e-11)


class TestGradientUpdate:
    def test_uniform_field_zero_gradient(self):
        mesh = generate_box_mesh((1, 1, 1), (3, 3, 3), split="tet", perturb=0.1, seed=2)
        vals = np.full((len(mesh.fq_face), 2), [4.0, -1.5])
        g = update_gradients(mesh, vals)
        assert np.max(np.abs(g)) < 1e-13

    def test_linear_field_exact(self):
        mesh = generate_box_mesh((1, 1, 1), (3, 3, 3), split="tet", perturb=0.12, seed=6)
        g = np.array([1.4, -0.7, 0.3])
        vals = (mesh.fq_point @ g)[:, None]
        got = update_gradients(mesh, vals)
        assert np.max(np.abs(got[:, :, 0] - g)) < 1e-12

    def test_smooth_field_second_order(self):
        # against the pointwise centroid gradient the update is second order
        errs = []
        for n in (4, 8):
            mesh = generate_box_mesh((1, 1, 1), (n, n, n), split="hex")
            vals = np.sin(2 * np.pi * mesh.fq_point[:, 0:1]) * np.cos(2 * np.pi * mesh.fq_point[:, 1:2])
            got = update_gradients(mesh, vals)
            cx, cy = mesh.cell_centroid[:, 0], mesh.cell_centroid[:, 1]
            exact = 2 * np.pi * np.cos(2 * np.pi * cx) * np.cos(2 * np.pi * cy)
            errs.append(np.mean(np.abs(got[:, 0, 0] - exact)))
        order = np.log2(errs[0] / errs[1])
        assert order >= 1.9

    def test_periodic_box_gradient_sum_telescopes(self):
        mesh = generate_box_mesh((1, 1, 1), (4, 4, 4), split="hex", periodic=("x", "y", "z"))
        vals = np.sin(2 * np.pi * mesh.fq_point[:, 0:1]) * np.cos(2 * np.pi * mesh.fq_point[:, 1:2])
        got = update_gradients(mesh, vals)
        total = np.sum(mesh.cell_volume[:, None, None] * got, axis=0)
        assert np.max(np.abs(total)) < 1e-12


class TestCompactCombination:
    def test_free_stream_exact(self):
        mesh, geom, recon = make_hweno(split="tet", perturb=0.1, seed=4)
        field = np.full((mesh.ncells, 5), [1.0, 0.3, -0.1, 0.2, 1.8])
        grad = np.zeros((mesh.ncells, 3, 5))
        coeffs = recon.combined_coeffs(field, grad)
        val_o, grad_o, val_n, grad_n = evaluate_faces(geom, field, coeffs)
        assert np.max(np.abs(val_o - field[0])) < 1e-13
        assert np.max(np.abs(val_n - field[0])) < 1e-13
        assert np.max(np.abs(grad_o)) < 1e-12

    def test_hard_constraint_on_all_candidates(self):
        mesh, geom, recon = make_hweno()
        rng = np.random.default_rng(5)
        field = rng.normal(size=mesh.ncells)
        grad = rng.normal(size=(mesh.ncells, 3))
        for c in (0, 9, 21, 40):
            polys = [fit_big_hermite(recon, c, field, grad)]
            polys += fit_sub_hermite(recon, c, field, grad)
            for poly in polys:
                assert poly.cell_average(geom)[0] == pytest.approx(field[c], abs=1e-13)

    def test_combine_contract_matches_weno_formula(self):
        # the nonlinear-combination contract applies verbatim to the compact
        # candidates: smooth data recovers the big Hermite polynomial
        from gks3d.recon import LINEAR_WEIGHT, WENO_EPS, nonlinear_combine, smoothness_indicator

        mesh, geom, recon = make_hweno()
        field, grad = quadratic_data(mesh)
        # shrink the quadratic part so the weights sit in the linear regime
        field = 0.3 * mesh.cell_centroid[:, 0] + 1e-5 * field
        grad = np.column_stack(
            [0.3 + 1e-5 * grad[:, 0], 1e-5 * grad[:, 1], 1e-5 * grad[:, 2]]
        )
        c = 21
        p0 = fit_big_hermite(recon, c, field, grad)
        subs = fit_sub_hermite(recon, c, field, grad)
        betas = [smoothness_indicator(geom, p0)] + [smoothness_indicator(geom, p) for p in subs]
        point = mesh.cell_centroid[c] + 0.05
        val, grad_out = nonlinear_combine(p0, subs, betas, LINEAR_WEIGHT, WENO_EPS, point)
        assert val[0] == pytest.approx(p0.value(point)[0], abs=1e-10)
        # forced weights: omega0 = 1 reproduces the bracket formula
        gamma0 = 1.0 - LINEAR_WEIGHT * len(subs)
        forced = [np.zeros(1)] + [np.full(1, 1e30) for _ in subs]
        val_f, _ = nonlinear_combine(p0, subs, forced, LINEAR_WEIGHT, WENO_EPS, point)
        expect = p0.value(point) / gamma0 - sum(
            LINEAR_WEIGHT / gamma0 * p.value(point) for p in subs
        )
        assert val_f[0] == pytest.approx(expect[0], rel=1e-6)

    def test_sine_face_values_third_order(self):
        errs = []
        for n in (8, 16):
            mesh, geom, recon = make_hweno((n, n, n), periodic=("x", "y", "z"))
            lo = np.array([mesh.nodes[mesh.cell_nodes[c, 0], 0] for c in range(mesh.ncells)])
            hi = np.array([mesh.nodes[mesh.cell_nodes[c, 6], 0] for c in range(mesh.ncells)])
            field = 1.0 + 0.2 * (np.cos(2 * np.pi * lo) - np.cos(2 * np.pi * hi)) / (2 * np.pi * (hi - lo))
            grad = np.zeros((mesh.ncells, 3))
            grad[:, 0] = 0.2 * (np.sin(2 * np.pi * hi) - np.sin(2 * np.pi * lo)) / (hi - lo)
            coeffs = recon.combined_coeffs(field, grad)
            val_o, _, val_n, _ = evaluate_faces(geom, field, coeffs)
            exact = 1.0 + 0.2 * np.sin(2 * np.pi * mesh.fq_point[:, 0])
            errs.append(np.mean(np.abs(val_o[:, 0] - exact)) + np.mean(np.abs(val_n[:, 0] - exact)))
        order = np.log2(errs[0] / errs[1])
        assert order >= 2.5
