"""Tests for the moment integrals and Hermite helpers"""

import math

import numpy as np
import pytest
from numpy.polynomial import hermite_e
from scipy import integrate

from skewsim.kernels.special_functions import (SQRT_2PI, JTable, MomentIntegralKind,
                                               binom, f_script, factorial, g_script,
                                               g_script_table, gaussian_moment,
                                               hermite_coefficients, hermite_prob,
                                               j_func, log_factorial, log_normal_pdf,
                                               normal_pdf, normal_tail, s_func,
                                               scaled_normal_tail)
from skewsim.utils.errors import DomainError


def _j_reference(q, omega, a):
    """J_q by direct quadrature of its defining integral."""
    alpha = -(omega + a)
    scale = math.exp(0.5 * a * a + a * omega)
    if a >= 0:
        value, _ = integrate.quad(lambda v: v ** q * math.exp(-0.5 * v * v), -np.inf, alpha,
                                  epsabs=1e-14, epsrel=1e-12)
        return scale * value
    value, _ = integrate.quad(lambda v: v ** q * math.exp(-0.5 * v * v), alpha, np.inf,
                              epsabs=1e-14, epsrel=1e-12)
    return -scale * value


class TestScalars:
    def test_factorials(self):
        assert factorial(0) == 1.0
        assert factorial(5) == 120.0
        assert log_factorial(10) == pytest.approx(math.log(3628800.0))
        assert binom(6, 2) == 15.0
        assert binom(3, 5) == 0.0

    def test_factorial_rejects_negative(self):
        with pytest.raises(DomainError):
            factorial(-1)

    def test_normal_pdf_peak(self):
        assert normal_pdf(0.0) == pytest.approx(1.0 / SQRT_2PI, rel=1e-15)

    def test_normal_tail(self):
        assert normal_tail(2.0) == pytest.approx(0.02275013, abs=1e-8)
        assert normal_tail(0.0) == pytest.approx(0.5)

    def test_scaled_tail_is_mills_ratio_for_large_argument(self):
        u = 30.0
        mills = 1.0 / (u * SQRT_2PI)
        assert scaled_normal_tail(u) == pytest.approx(mills, rel=2e-3)

    def test_log_pdf_survives_underflow(self):
        assert normal_pdf(40.0) == 0.0
        assert log_normal_pdf(40.0) == pytest.approx(-800.0 - math.log(SQRT_2PI))

    def test_array_shape_preserved(self):
        u = np.linspace(-3, 3, 7)
        assert np.asarray(normal_tail(u)).shape == (7,)
        assert isinstance(normal_tail(1.0), float)


class TestHermite:
    def test_third_polynomial(self):
        w = np.array([-1.5, 0.0, 0.7, 2.0])
        np.testing.assert_allclose(hermite_prob(3, w), w ** 3 - 3 * w, atol=1e-14)

    def test_coefficients(self):
        assert hermite_coefficients(4) == pytest.approx((3.0, 0.0, -6.0, 0.0, 1.0))
        assert hermite_coefficients(0) == pytest.approx((1.0,))

    def test_sixth_polynomial_matches_gaussian_derivative(self):
        w, h = 1.3, 0.02
        weights = [(-1) ** k * math.comb(6, k) for k in range(7)]
        sixth = sum(c * math.exp(-0.5 * (w + (3 - k) * h) ** 2)
                    for k, c in enumerate(weights)) / h ** 6
        expected = sixth * math.exp(0.5 * w * w)
        assert hermite_prob(6, w) == pytest.approx(expected, rel=5e-3)
        assert hermite_prob(6, w) == pytest.approx(w ** 6 - 15 * w ** 4 + 45 * w ** 2 - 15)

    def test_three_term_recurrence(self):
        w = np.linspace(-10, 10, 81)
        for n in range(1, 30):
            upper, mid, lower = hermite_prob(n + 1, w), hermite_prob(n, w), hermite_prob(n - 1, w)
            residual = upper - w * mid + n * lower
            scale = np.maximum.reduce([np.abs(upper), np.abs(w * mid), np.abs(n * lower)])
            assert np.all(np.abs(residual) <= 1e-10 * np.maximum(scale, 1.0))


class TestGaussianMoment:
    @pytest.mark.parametrize('q', [0, 1, 2, 5, 8])
    def test_lower_tail_matches_quadrature(self, q):
        alpha = 0.7
        expected, _ = integrate.quad(lambda v: v ** q * math.exp(-0.5 * v * v),
                                     -np.inf, alpha, epsabs=1e-14)
        assert gaussian_moment(MomentIntegralKind.LOWER_TAIL, q, alpha) == pytest.approx(
            expected, rel=1e-10, abs=1e-13)

    def test_tails_add_to_full_moment(self):
        q = 4
        total = (gaussian_moment(MomentIntegralKind.LOWER_TAIL, q, -0.3)
                 + gaussian_moment(MomentIntegralKind.UPPER_TAIL, q, -0.3))
        assert total == pytest.approx(3.0 * SQRT_2PI, rel=1e-12)


class TestJ:
    def test_origin_value(self):
        assert j_func(0, 0.0, 0.0) == pytest.approx(1.2533141, abs=1e-7)

    @pytest.mark.parametrize('q,omega,a', [(0, 1.1, 0.8), (3, 1.1, 0.8), (6, 0.4, 2.5),
                                           (2, 0.9, -0.6), (5, 1.3, -0.2)])
    def test_matches_defining_integral(self, q, omega, a):
        assert j_func(q, omega, a) == pytest.approx(_j_reference(q, omega, a),
                                                    rel=1e-9, abs=1e-12)

    def test_scaled_table(self):
        omega = np.array([0.5, 2.0, 6.0])
        plain = JTable(omega, 0.7)
        scaled = JTable(omega, 0.7, scaled=True)
        for q in range(6):
            np.testing.assert_allclose(scaled[q], plain[q] * np.exp(0.5 * omega ** 2),
                                       rtol=1e-12)

    def test_scaled_table_stays_finite_far_out(self):
        scaled = JTable(np.array([60.0]), 1.0, scaled=True)
        assert np.all(np.isfinite(scaled.array(10)))


class TestConvolutionFunctions:
    def test_s_func_matches_integral(self):
        h, m, n, ell, omega, a = 1, 1, 2, 1, 0.3, 0.9
        e = 2 * m + h - 2 * ell
        alpha = -(omega + a)
        integrand = lambda v: (v + a + omega) ** n * (v + a) ** e * math.exp(-0.5 * v * v)
        raw, _ = integrate.quad(integrand, -np.inf, alpha, epsabs=1e-14)
        expected = math.exp(0.5 * a * a + a * omega) * raw
        assert s_func(h, m, n, ell, omega, a) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize('h,m,n', [(0, 0, 0), (1, 0, 0), (1, 1, 2), (2, 2, 1), (0, 3, 4)])
    def test_g_script_is_a_convolution(self, h, m, n):
        omega, a = 0.3, 0.6
        d = 2 * m + h
        basis = np.zeros(d + 1)
        basis[d] = 1.0

        def integrand(w):
            u = omega - w
            kernel = (-1) ** d * hermite_e.hermeval(u, basis) * math.exp(-0.5 * u * u)
            return w ** n * math.exp(a * w) * kernel

        raw, _ = integrate.quad(integrand, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-12)
        assert g_script(h, m, n, omega, a) == pytest.approx((-1) ** h * raw,
                                                            rel=1e-8, abs=1e-11)

    def test_table_agrees_with_pointwise(self):
        omega = np.array([0.2, 1.5, 3.0])
        table = g_script_table(3, 4, omega, 0.45)
        assert table.shape == (3, 4, 5, 3)
        for h in range(3):
            for m in range(4):
                for n in range(5):
                    np.testing.assert_allclose(table[h, m, n], g_script(h, m, n, omega, 0.45),
                                               rtol=1e-11, atol=1e-14)

    def test_f_script_difference(self):
        omega = 0.8
        expected = g_script(1, 1, 2, omega, 0.9) - g_script(1, 1, 2, omega, 0.4)
        assert f_script(1, 1, 2, omega, 0.4, 0.9) == pytest.approx(expected)

    def test_f_script_rejects_equal_arguments(self):
        with pytest.raises(DomainError):
            f_script(0, 0, 0, 0.5, 0.3, 0.3)
