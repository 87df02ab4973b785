"""Metric data, Christoffel symbols, curvature and covariant derivatives."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sistruct import geometry, systems
from sistruct.expr import eval_jet, parse, validate
from sistruct.geometry import PointField, SingularMetricError
from sistruct.structure import SystemDef
from sistruct.tensor import DenseTensor


def make_system(metric_entries, coords=("x1", "x2", "x3"), name="custom"):
    exprs = {
        key: validate(parse(text), coords) for key, text in metric_entries.items()
    }
    for i in range(len(coords)):
        exprs.setdefault((i, i), validate(parse("1"), coords))
    return SystemDef(
        name=name,
        n=len(coords),
        coords=coords,
        metric_exprs=exprs,
        basis=(),
        domain=tuple((-2.0, 2.0) for _ in coords),
    )


EUCLID = make_system({})
POLARISH = make_system({(1, 1): "x1^2", (2, 2): "x1^2"})


class TestMetricAt:
    def test_euclidean(self):
        m = geometry.metric_at(EUCLID, [0.3, -0.8, 1.1])
        assert_allclose(m.g, np.eye(3))
        assert_allclose(m.dg, 0.0)
        assert_allclose(m.d2g, 0.0)
        assert m.condition == pytest.approx(1.0)

    def test_sphere_positive_definite(self):
        sph = systems.load_system("sphere3")
        m = geometry.metric_at(sph, [0.3, 0.1, -0.2])
        assert np.all(np.linalg.eigvalsh(m.g) > 0)
        assert np.isfinite(m.condition)
        assert_allclose(m.g @ m.g_inv, np.eye(3), atol=1e-12)

    def test_inverse_derivative_identity(self):
        sph = systems.load_system("sphere3")
        m = geometry.metric_at(sph, [0.25, -0.4, 0.15])
        for k in range(3):
            assert_allclose(m.dg_inv[k], -m.g_inv @ m.dg[k] @ m.g_inv, rtol=1e-13)

    def test_degenerate_metric_rejected(self):
        zero = make_system({(i, i): "0" for i in range(3)})
        with pytest.raises(SingularMetricError):
            geometry.metric_at(zero, [0.1, 0.2, 0.3])


class TestChristoffel:
    def test_euclidean_vanishes(self):
        m = geometry.metric_at(EUCLID, [1.0, 2.0, 3.0])
        lc = geometry.christoffel(m)
        assert_allclose(lc.gamma, 0.0)
        assert_allclose(lc.dgamma, 0.0)

    def test_hand_formula_diag_metric(self):
        # g = diag(1, x1^2, x1^2): Gamma^2_12 = Gamma^3_13 = 1/x1,
        # Gamma^1_22 = Gamma^1_33 = -x1, everything else zero
        x1 = 1.7
        m = geometry.metric_at(POLARISH, [x1, 0.4, -0.9])
        lc = geometry.christoffel(m)
        expected = np.zeros((3, 3, 3))
        expected[1, 0, 1] = expected[1, 1, 0] = 1.0 / x1
        expected[2, 0, 2] = expected[2, 2, 0] = 1.0 / x1
        expected[0, 1, 1] = -x1
        expected[0, 2, 2] = -x1
        assert_allclose(lc.gamma, expected, rtol=1e-13, atol=1e-15)

    def test_dgamma_against_finite_differences(self):
        sph = systems.load_system("sphere3")
        x = np.array([0.2, -0.3, 0.45])
        lc = geometry.christoffel(geometry.metric_at(sph, x))
        h = 1e-6
        for l in range(3):
            e = np.zeros(3)
            e[l] = h
            gp = geometry.christoffel(geometry.metric_at(sph, x + e)).gamma
            gm = geometry.christoffel(geometry.metric_at(sph, x - e)).gamma
            assert_allclose(lc.dgamma[l], (gp - gm) / (2 * h), rtol=1e-6, atol=1e-8)


class TestCurvature:
    def test_flat_connection(self):
        m = geometry.metric_at(EUCLID, [0.0, 0.0, 0.0])
        lc = geometry.christoffel(m)
        R = geometry.curvature(lc)
        assert_allclose(R, 0.0)
        bundle = geometry.contractions(R, m)
        assert bundle.Scal == 0.0
        assert_allclose(bundle.Proj.components, 0.0)

    def test_unit_sphere_ricci(self, seeded_points):
        sph = systems.load_system("sphere3")
        for x in seeded_points(sph, npoints=10, seed=5):
            m = geometry.metric_at(sph, x)
            R = geometry.curvature(geometry.christoffel(m))
            bundle = geometry.contractions(R, m)
            scale = np.abs(2.0 * m.g).max()
            assert np.abs(bundle.Ric.components - 2.0 * m.g).max() <= 1e-8 * scale
            # constant-curvature connections are projectively flat
            assert np.abs(bundle.Proj.components).max() <= 1e-9 * (
                1 + np.abs(bundle.Riem.components).max()
            )

    def test_last_two_slots_antisymmetric_bitwise(self):
        sph = systems.load_system("sphere3")
        R = geometry.curvature(
            geometry.christoffel(geometry.metric_at(sph, [0.4, 0.2, -0.3]))
        )
        assert np.array_equal(R, -np.swapaxes(R, 2, 3))

    def test_first_bianchi(self, seeded_points):
        for name in ("sphere3", "sw:3", "em1"):
            system = systems.load_system(name)
            for x in seeded_points(system, npoints=5, seed=17):
                m = geometry.metric_at(system, x)
                R = geometry.curvature(geometry.christoffel(m))
                cyc = (
                    R
                    + np.transpose(R, (0, 2, 3, 1))
                    + np.transpose(R, (0, 3, 1, 2))
                )
                scale = 1 + np.abs(R).max()
                assert np.abs(cyc).max() <= 1e-9 * scale

    def test_scal_equals_minus_trB(self, seeded_points):
        sph = systems.load_system("sphere3")
        for x in seeded_points(sph, npoints=5, seed=3):
            m = geometry.metric_at(sph, x)
            bundle = geometry.contractions(
                geometry.curvature(geometry.christoffel(m)), m
            )
            assert abs(bundle.Scal + bundle.trB) <= 1e-10 * (1 + abs(bundle.Scal))

    def test_proj_traceless_in_building_contraction(self):
        sph = systems.load_system("sphere3")
        m = geometry.metric_at(sph, [0.5, -0.1, 0.3])
        bundle = geometry.contractions(
            geometry.curvature(geometry.christoffel(m)), m
        )
        trace = np.einsum("aj,aijk->ik", m.g_inv, bundle.Proj.components)
        assert_allclose(trace, 0.0, atol=1e-12)

    def test_zero_structure_tensor_same_code_path(self):
        sph = systems.load_system("sphere3")
        m = geometry.metric_at(sph, [0.1, 0.6, -0.4])
        lc = geometry.christoffel(m)
        zeros3 = np.zeros((3, 3, 3))
        zeros4 = np.zeros((3, 3, 3, 3))
        for orientation in (-1.0, 1.0):
            conn = geometry.induced_connection(lc, zeros3, zeros4, orientation)
            assert np.array_equal(
                geometry.curvature(conn), geometry.curvature(lc)
            )

    def test_induced_connection_rejects_asymmetric(self):
        m = geometry.metric_at(EUCLID, [0.0, 0.0, 0.0])
        lc = geometry.christoffel(m)
        bad = np.zeros((3, 3, 3))
        bad[0, 1, 2] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            geometry.induced_connection(lc, bad, np.zeros((3, 3, 3, 3)))

    def test_orientation_flag_validated(self):
        m = geometry.metric_at(EUCLID, [0.0, 0.0, 0.0])
        lc = geometry.christoffel(m)
        with pytest.raises(ValueError, match="orientation"):
            geometry.induced_connection(
                lc, np.zeros((3, 3, 3)), np.zeros((3, 3, 3, 3)), 2.0
            )


class TestCovariantDerivatives:
    def test_constant_scalar(self):
        m = geometry.metric_at(POLARISH, [1.3, 0.2, 0.9])
        lc = geometry.christoffel(m)
        vjet = eval_jet(validate(parse("5"), POLARISH.coords), m.point)
        hess, lap = geometry.covariant_hessian(vjet, lc, m)
        assert_allclose(hess, 0.0)
        assert lap == 0.0

    def test_euclidean_r_squared(self):
        m = geometry.metric_at(EUCLID, [0.7, -0.2, 1.4])
        lc = geometry.christoffel(m)
        e = validate(parse("x1^2 + x2^2 + x3^2"), EUCLID.coords)
        hess, lap = geometry.covariant_hessian(eval_jet(e, m.point), lc, m)
        assert_allclose(hess, 2.0 * m.g, rtol=1e-14)
        assert lap == pytest.approx(6.0)

    def test_laplacian_gradient_fd(self):
        sph = systems.load_system("sphere3")
        e = validate(parse("exp(x) * sin(y) + z^2"), sph.coords)
        x = np.array([0.3, -0.2, 0.4])

        def lap_at(pt):
            m = geometry.metric_at(sph, pt)
            lc = geometry.christoffel(m)
            _, lap = geometry.covariant_hessian(eval_jet(e, pt), lc, m)
            return lap

        m = geometry.metric_at(sph, x)
        lc = geometry.christoffel(m)
        lap, dlap = geometry.laplacian_with_gradient(eval_jet(e, x), lc, m)
        assert lap == pytest.approx(lap_at(x), rel=1e-12)
        h = 1e-6
        for l in range(3):
            step = np.zeros(3)
            step[l] = h
            fd = (lap_at(x + step) - lap_at(x - step)) / (2 * h)
            assert dlap[l] == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_metricity_via_covariant_d(self):
        sph = systems.load_system("sphere3")
        m = geometry.metric_at(sph, [0.2, 0.5, -0.6])
        lc = geometry.christoffel(m)
        field = PointField(DenseTensor(3, ("l", "l"), m.g), m.dg)
        nabla_g = geometry.covariant_d(field, lc)
        assert_allclose(nabla_g.components, 0.0, atol=1e-14)
        assert nabla_g.variance == ("l", "l", "l")

    def test_covariant_d_mixed_tensor_identity(self):
        # nabla of the Kronecker delta vanishes for any connection
        sph = systems.load_system("sphere3")
        lc = geometry.christoffel(geometry.metric_at(sph, [0.4, -0.1, 0.2]))
        field = PointField(
            DenseTensor(3, ("u", "l"), np.eye(3)), np.zeros((3, 3, 3))
        )
        out = geometry.covariant_d(field, lc)
        assert_allclose(out.components, 0.0, atol=1e-14)

    def test_covariant_d_upper_vector_fd(self):
        sph = systems.load_system("sphere3")
        coords = sph.coords
        comps = [validate(parse(t), coords) for t in ("x*y", "z^2", "x + 1")]
        x = np.array([0.3, 0.2, -0.5])
        m = geometry.metric_at(sph, x)
        lc = geometry.christoffel(m)
        jets_ = [eval_jet(c, x) for c in comps]
        values = np.array([j.value for j in jets_])
        partials = np.array([j.grad for j in jets_]).T  # [k, i] = d_k v^i
        out = geometry.covariant_d(
            PointField(DenseTensor(3, ("u",), values), partials), lc
        )
        expected = partials + np.einsum("ika,a->ki", lc.gamma, values)
        assert_allclose(out.components, expected, rtol=1e-13)

    def test_exterior_d_of_exact_form(self):
        sph = systems.load_system("sphere3")
        e = validate(parse("exp(x)*cos(y) + z^3"), sph.coords)
        jet = eval_jet(e, np.array([0.1, 0.4, -0.3]))
        field = PointField(DenseTensor(3, ("l",), jet.grad), jet.hess)
        two_form = geometry.exterior_d(field)
        assert np.abs(two_form.components).max() <= 1e-9
        assert_allclose(two_form.components, -two_form.components.T, rtol=1e-15)

    def test_missing_partials_rejected(self):
        sph = systems.load_system("sphere3")
        lc = geometry.christoffel(geometry.metric_at(sph, [0.2, 0.2, 0.2]))
        field = PointField(DenseTensor(3, ("l",), np.ones(3)), None)
        with pytest.raises(ValueError, match="partials"):
            geometry.covariant_d(field, lc)
        with pytest.raises(ValueError, match="partials"):
            geometry.exterior_d(field)
