import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skewtail.errors import ClassMismatch, UnsupportedGenerator
from skewtail.generators import (
    CustomGenerator,
    NormalGenerator,
    StudentTGenerator,
    TailClass,
    check_eventually_nonincreasing,
    classify_tail,
    estimate_rv_index,
    generator_from_dict,
    gumbel_scaling_check,
    marginal_by_quadrature,
    normalization_integral,
    normalization_target,
    student_t_constant,
)
from skewtail.linalg import correlation


def _inv(t):
    return 1.0 / np.asarray(t, dtype=float)


class TestClosedFormFamilies:
    def test_normal_marginalize(self):
        g = NormalGenerator(3).marginalize()
        assert g == NormalGenerator(2)
        assert g(1.3) == pytest.approx((2 * math.pi) ** -1 * math.exp(-0.65), rel=1e-15)

    @pytest.mark.parametrize("nu", [1.0, 3.0, 4.5])
    def test_student_marginalize_constant(self, nu):
        g = StudentTGenerator(nu, 3).marginalize()
        assert g == StudentTGenerator(nu, 2)
        assert g(0.0) == pytest.approx(student_t_constant(nu, 2) * nu ** (-(nu + 2) / 2), rel=1e-14)

    @pytest.mark.parametrize("g", [NormalGenerator(3), StudentTGenerator(4.0, 3), StudentTGenerator(1.0, 2)])
    def test_quadrature_marginal_matches_closed_form(self, g):
        s = np.array([0.0, 0.5, 3.0, 40.0, 900.0])
        np.testing.assert_allclose(marginal_by_quadrature(g, s), g.marginalize()(s), rtol=1e-8)

    @pytest.mark.parametrize(
        "g", [NormalGenerator(1), NormalGenerator(3), StudentTGenerator(1.0, 2), StudentTGenerator(4.0, 3),
              StudentTGenerator(2.5, 5)]
    )
    def test_normalization(self, g):
        assert normalization_integral(g) == pytest.approx(normalization_target(g.dim), rel=1e-6)

    def test_marginalize_chain(self):
        g = StudentTGenerator(3.0, 5)
        assert g.marginalize().marginalize() == StudentTGenerator(3.0, 3)

    def test_cannot_marginalize_dim_one(self):
        with pytest.raises(ValueError):
            NormalGenerator(1).marginalize()

    def test_roundtrip_dict(self):
        g = StudentTGenerator(4.0, 3)
        assert generator_from_dict(g.to_dict(), 3) == g
        assert generator_from_dict({"family": "normal"}, 2) == NormalGenerator(2)


class TestClassifyTail:
    def test_normal(self):
        tc = classify_tail(NormalGenerator(3))
        assert tc.kind == "gumbel_quadratic"
        assert tc.m(7.0) == pytest.approx(1 / 7.0)

    def test_student(self):
        tc = classify_tail(StudentTGenerator(3.0, 3))
        assert tc.is_heavy and tc.alpha == 3.0

    @pytest.mark.parametrize("nu", [1.0, 2.0, 6.0])
    def test_index_drops_by_half_per_marginalization(self, nu):
        g = StudentTGenerator(nu, 4)
        assert classify_tail(g.marginalize()).alpha == classify_tail(g).alpha - 0.5
        assert estimate_rv_index(g.marginalize()) == pytest.approx(classify_tail(g).alpha - 0.5, abs=0.05)

    def test_custom_rv_exponential_mismatch(self):
        g = CustomGenerator(2, lambda s: np.exp(-s), TailClass("regularly_varying", alpha=2.0))
        with pytest.raises(ClassMismatch):
            classify_tail(g)

    def test_custom_rv_accepted(self):
        c = 1.0 / math.pi  # (1+s)^-2 in 2 dims is normalized with constant 1/pi
        g = CustomGenerator(2, lambda s: c * (1.0 + s) ** -2.0, TailClass("regularly_varying", alpha=2.0))
        assert classify_tail(g).alpha == 2.0
        assert normalization_integral(g) == pytest.approx(normalization_target(2), rel=1e-6)

    def test_custom_rv_marginal_index(self):
        g = CustomGenerator(2, lambda s: (1.0 + s) ** -2.0 / math.pi, TailClass("regularly_varying", alpha=2.0))
        gm = g.marginalize()
        assert classify_tail(gm).alpha == 1.5
        # closed form of 2 int_0^inf (1 + r^2 + s)^-2 dr / pi
        s = np.array([0.0, 2.0, 10.0])
        np.testing.assert_allclose(gm(s), 0.5 * (1 + s) ** -1.5, rtol=1e-8)

    def test_custom_gumbel_accepted(self):
        g = CustomGenerator(
            1, lambda s: np.exp(-0.5 * s) / math.sqrt(2 * math.pi), TailClass("gumbel_quadratic", m=_inv),
            log_func=lambda s: -0.5 * s - 0.5 * math.log(2 * math.pi),
        )
        assert classify_tail(g).kind == "gumbel_quadratic"

    def test_custom_gumbel_mismatch_for_power_law(self):
        g = CustomGenerator(1, lambda s: (1 + s) ** -3.0, TailClass("gumbel_quadratic", m=_inv))
        with pytest.raises(ClassMismatch):
            classify_tail(g)

    def test_impure_generator_rejected(self):
        state = {"k": 0}

        def noisy(s):
            state["k"] += 1
            return (1.0 + s) ** -2.0 * (1 + 1e-3 * state["k"])

        g = CustomGenerator(2, noisy, TailClass("regularly_varying", alpha=2.0))
        with pytest.raises(ClassMismatch):
            classify_tail(g)

    def test_eventually_nonincreasing(self):
        assert check_eventually_nonincreasing(StudentTGenerator(2.0, 2))
        bumpy = CustomGenerator(1, lambda s: np.asarray(s, dtype=float) ** 0.5, TailClass("regularly_varying", alpha=1))
        assert not check_eventually_nonincreasing(bumpy)


class TestGumbelScaling:
    def test_normal_scalar(self):
        rep = gumbel_scaling_check(NormalGenerator(1), [[1.0]], [1.0])
        assert rep.passed
        assert rep.analytic == pytest.approx(math.exp(-1.0))

    def test_x_zero(self):
        rep = gumbel_scaling_check(NormalGenerator(1), [[1.0]], [0.0])
        assert rep.estimate == 1.0 and rep.passed

    def test_bivariate_rho_half(self):
        rep = gumbel_scaling_check(NormalGenerator(2), correlation(0.5).inv, [1.0, 1.0])
        assert rep.analytic == pytest.approx(math.exp(-4.0 / 3.0), rel=1e-14)
        assert rep.passed

    def test_requires_gumbel_class(self):
        with pytest.raises(ClassMismatch):
            gumbel_scaling_check(StudentTGenerator(3.0, 1), [[1.0]], [1.0])


class TestSphericalDraws:
    def test_custom_without_sampler(self):
        g = CustomGenerator(2, lambda s: (1.0 + s) ** -2.0 / math.pi, TailClass("regularly_varying", alpha=2.0))
        with pytest.raises(UnsupportedGenerator):
            g.spherical_draws(np.random.default_rng(0), 10)

    def test_student_radial_law(self):
        # |X|^2 / k for the spherical t is F(k, nu)
        from scipy import stats

        x = StudentTGenerator(5.0, 3).spherical_draws(np.random.default_rng(1), 50_000)
        p = stats.kstest(np.sum(x**2, axis=1) / 3, stats.f(3, 5).cdf).pvalue
        assert p > 0.01

    @given(st.floats(0.5, 30.0))
    def test_student_log_is_log_of_value(self, nu):
        g = StudentTGenerator(nu, 3)
        s = np.array([0.0, 1.0, 100.0])
        np.testing.assert_allclose(np.exp(g.log(s)), g(s), rtol=1e-13)
