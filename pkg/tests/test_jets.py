"""Jet arithmetic: frozen derivative values, FD oracle, ring axioms."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sistruct import jets
from sistruct.jets import Jet3, JetDomainError, constant, seed_coordinate

from conftest import fd_grad, fd_hess, fd_third


def random_jet(rng, n):
    hess = rng.standard_normal((n, n))
    hess = (hess + hess.T) / 2
    third = jets._mirror_third(rng.standard_normal((n, n, n)))
    return Jet3(n, float(rng.standard_normal()), rng.standard_normal(n), hess, third)


class TestSeeds:
    def test_seed_basics(self):
        j = seed_coordinate(0, 1.0, 3)
        assert j.value == 1.0
        assert_allclose(j.grad, [1, 0, 0])
        assert np.all(j.hess == 0) and np.all(j.third == 0)

    def test_seed_last_coordinate(self):
        j = seed_coordinate(2, -0.5, 3)
        assert_allclose(j.grad, [0, 0, 1])

    def test_seed_square(self):
        x = seed_coordinate(0, 2.0, 1)
        sq = x * x
        assert sq.value == 4.0
        assert sq.grad[0] == 4.0
        assert sq.hess[0, 0] == 2.0
        assert sq.third[0, 0, 0] == 0.0

    def test_seed_index_out_of_range(self):
        with pytest.raises(ValueError):
            seed_coordinate(3, 0.0, 3)
        with pytest.raises(ValueError):
            seed_coordinate(-1, 0.0, 3)


class TestArithmetic:
    def test_additive_identity(self):
        rng = np.random.default_rng(7)
        a = random_jet(rng, 3)
        zero = constant(0.0, 3)
        b = a + zero
        assert b.value == a.value
        assert np.array_equal(b.grad, a.grad)
        assert np.array_equal(b.hess, a.hess)
        assert np.array_equal(b.third, a.third)

    def test_reciprocal_frozen_values(self):
        # 1/x at x=2: derivatives -1/x^2, 2/x^3, -6/x^4
        x = seed_coordinate(0, 2.0, 1)
        r = constant(1.0, 1) / x
        assert r.value == 0.5
        assert r.grad[0] == -0.25
        assert r.hess[0, 0] == 0.25
        assert r.third[0, 0, 0] == -0.375

    def test_mul_seed_by_itself(self):
        x = seed_coordinate(0, 2.0, 1)
        p = x * x
        assert (p.value, p.grad[0], p.hess[0, 0], p.third[0, 0, 0]) == (4, 4, 2, 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            _ = seed_coordinate(0, 1.0, 2) + seed_coordinate(0, 1.0, 3)

    def test_division_by_zero_jet(self):
        with pytest.raises(JetDomainError):
            _ = constant(1.0, 2) / seed_coordinate(0, 0.0, 2)

    def test_scalar_coercion(self):
        x = seed_coordinate(0, 3.0, 2)
        assert (2 * x).value == 6.0
        assert (x - 1).value == 2.0
        assert (1 / x).value == pytest.approx(1 / 3)


class TestPrimitives:
    def test_sqrt_frozen_values(self):
        x = seed_coordinate(0, 4.0, 1)
        s = jets.sqrt(x)
        assert s.value == 2.0
        assert s.grad[0] == 0.25
        assert s.hess[0, 0] == -0.03125
        assert s.third[0, 0, 0] == 0.01171875

    def test_exp_of_constant(self):
        e = jets.exp(constant(0.0, 3))
        assert e.value == 1.0
        assert np.all(e.grad == 0) and np.all(e.hess == 0) and np.all(e.third == 0)

    def test_cube_at_one(self):
        x = seed_coordinate(0, 1.0, 1)
        c = jets.pow_int(x, 3)
        assert (c.value, c.grad[0], c.hess[0, 0], c.third[0, 0, 0]) == (1, 3, 6, 6)

    def test_pow_zero_and_negative(self):
        x = seed_coordinate(0, 2.0, 1)
        assert jets.pow_int(x, 0).value == 1.0
        inv2 = jets.pow_int(x, -2)
        assert inv2.value == 0.25
        assert inv2.grad[0] == -2 * 2.0**-3
        with pytest.raises(JetDomainError):
            jets.pow_int(seed_coordinate(0, 0.0, 1), -1)

    def test_pow_small_positive_at_zero(self):
        # coefficients with zero factors must not evaluate 0^(negative)
        x = seed_coordinate(0, 0.0, 1)
        sq = jets.pow_int(x, 2)
        assert (sq.value, sq.grad[0], sq.hess[0, 0], sq.third[0, 0, 0]) == (0, 0, 2, 0)

    def test_domain_errors(self):
        zero = constant(0.0, 1)
        neg = constant(-1.0, 1)
        for fn, bad in [(jets.sqrt, zero), (jets.sqrt, neg), (jets.log, zero),
                        (jets.recip, zero)]:
            with pytest.raises(JetDomainError):
                fn(bad)

    def test_trig_consistency(self):
        x = seed_coordinate(0, 0.7, 1)
        s, c = jets.sin(x), jets.cos(x)
        # sin^2 + cos^2 = 1 including all derivative parts
        one = s * s + c * c
        assert_allclose(one.value, 1.0, rtol=1e-14)
        assert_allclose(one.grad, 0.0, atol=1e-14)
        assert_allclose(one.hess, 0.0, atol=1e-14)
        assert_allclose(one.third, 0.0, atol=1e-13)


class TestSymmetryInvariants:
    def test_exact_symmetry_after_operations(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            a, b = random_jet(rng, 4), random_jet(rng, 4)
            b = b + (2.0 - b.value)  # keep division away from zero
            for c in (a * b, a / b, jets.exp(a), jets.sin(a)):
                assert np.array_equal(c.hess, c.hess.T)
                for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
                    assert np.array_equal(c.third, np.transpose(c.third, perm))

    def test_leibniz_gradient_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a, b = random_jet(rng, 3), random_jet(rng, 3)
            c = a * b
            assert np.array_equal(c.grad, a.value * b.grad + b.value * a.grad)


class TestRingAxioms:
    def test_ring_axioms(self):
        rng = np.random.default_rng(2024)
        one = constant(1.0, 3)
        for _ in range(25):
            a, b, c = (random_jet(rng, 3) for _ in range(3))

            def eq(u, v):
                assert_allclose(u.value, v.value, rtol=1e-12, atol=1e-12)
                assert_allclose(u.grad, v.grad, rtol=1e-12, atol=1e-12)
                assert_allclose(u.hess, v.hess, rtol=1e-12, atol=1e-12)
                assert_allclose(u.third, v.third, rtol=1e-12, atol=1e-12)

            eq(a + b, b + a)
            eq((a + b) + c, a + (b + c))
            eq(a * b, b * a)
            eq((a * b) * c, a * (b * c))
            eq(a * (b + c), a * b + a * c)
            eq(a * one, a)


class TestFiniteDifferenceOracle:
    def test_composition_against_fd(self):
        # a nontrivial composite exercising every primitive
        def f(x):
            return (
                np.exp(np.sin(x[0]) * 0.3)
                + np.log(1.0 + x[1] ** 2)
                + np.sqrt(x[0] + x[1] + x[2] + 4.0)
                + 1.0 / (x[2] + 2.0) ** 2
                + np.cos(x[0] * x[2])
            )

        def jet_f(x):
            s = [seed_coordinate(i, x[i], 3) for i in range(3)]
            return (
                jets.exp(jets.sin(s[0]) * 0.3)
                + jets.log(1.0 + s[1] * s[1])
                + jets.sqrt(s[0] + s[1] + s[2] + 4.0)
                + jets.recip(jets.pow_int(s[2] + 2.0, 2))
                + jets.cos(s[0] * s[2])
            )

        rng = np.random.default_rng(11)
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, size=3)
            jet = jet_f(x)
            assert_allclose(jet.value, f(x), rtol=1e-12)
            for i in range(3):
                assert_allclose(jet.grad[i], fd_grad(f, x, i), rtol=1e-6, atol=1e-8)
                for j in range(i, 3):
                    assert_allclose(
                        jet.hess[i, j], fd_hess(f, x, i, j), rtol=1e-5, atol=1e-6
                    )
                    for k in range(j, 3):
                        assert_allclose(
                            jet.third[i, j, k],
                            fd_third(f, x, i, j, k),
                            rtol=1e-4,
                            atol=1e-4,
                        )
