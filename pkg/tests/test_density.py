"""Tests for the series densities and their truncation bounds"""

import math

import numpy as np
import pytest

from skewsim.kernels.density import (DensityValue, SkewParams, TruncationPolicy,
                                     WeightFunction, coeffs_drift, coeffs_driftless,
                                     delta, density_driftless, density_one_barrier_drift,
                                     density_two_barrier_drift, drift_series_term,
                                     envelope_bound, gaussian_density, make_series_evaluator,
                                     path_lengths, ratio_v_driftless, rest_bound,
                                     transition_density, truncation_level, weight_k)
from skewsim.oracles.checks import (check_detailed_balance, check_normalization,
                                    check_transmission)
from skewsim.utils.errors import DivergentBoundError, DomainError, UnsupportedRegimeError

GRID = np.linspace(-1.5, 2.5, 41)


class TestParams:
    def test_barrier_order(self):
        with pytest.raises(DomainError):
            SkewParams(z1=1.0, z2=1.0)

    def test_skewness_range(self):
        with pytest.raises(DomainError):
            SkewParams(beta1=1.2)

    def test_divergent_product(self):
        with pytest.raises(DivergentBoundError):
            SkewParams(beta1=1.0, beta2=-1.0)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            SkewParams(mu=float('nan'))

    def test_policy_validation(self):
        with pytest.raises(DomainError):
            TruncationPolicy(n_max=-1)
        with pytest.raises(DomainError):
            TruncationPolicy(tol=0.0)


class TestBounds:
    @pytest.mark.parametrize('fixture,expected', [('inside_params', 2.7975),
                                                  ('symmetric_params', 3.0),
                                                  ('concordant_params', 5.538)])
    def test_envelope(self, request, fixture, expected):
        assert envelope_bound(request.getfixturevalue(fixture)) == pytest.approx(
            expected, rel=1e-3)

    def test_delta_at_ten(self, inside_params, concordant_params):
        assert delta(inside_params, 10) == pytest.approx(3.5e-8, rel=1e-2)
        assert delta(concordant_params, 10) == pytest.approx(3.12e-4, rel=1e-2)

    def test_truncation_level_capped(self, symmetric_params, policy):
        assert truncation_level(symmetric_params, policy) == 10

    def test_truncation_level_is_smallest(self):
        params = SkewParams(beta1=0.3, beta2=0.3)
        policy = TruncationPolicy(n_max=100, tol=1e-10)
        n = truncation_level(params, policy)
        assert rest_bound(params, n) <= 1e-10
        assert rest_bound(params, n - 1) > 1e-10

    def test_zero_product_needs_no_terms(self):
        assert truncation_level(SkewParams(beta1=0.6), TruncationPolicy()) == 0

    def test_envelope_dominates_ratio(self, concordant_params):
        x, y = np.meshgrid(GRID, GRID)
        v = ratio_v_driftless(1.0, x, y, concordant_params, 60)
        assert np.max(v) <= envelope_bound(concordant_params) + 1e-12
        assert np.min(v) >= 0.0

    def test_partial_sums_within_rest_bound(self, symmetric_params):
        x, y = np.meshgrid(GRID, GRID)
        for n in (0, 2, 5):
            short = ratio_v_driftless(0.7, x, y, symmetric_params, n)
            long = ratio_v_driftless(0.7, x, y, symmetric_params, 40)
            assert np.max(np.abs(long - short)) <= rest_bound(symmetric_params, n) + 1e-14


class TestCoefficients:
    def test_driftless_coefficients_sum_to_weight(self, inside_params):
        c = coeffs_driftless(GRID, inside_params)
        np.testing.assert_allclose(sum(c), 4 * weight_k(GRID, inside_params), atol=1e-15)

    def test_drift_polynomial_reduces_to_weight(self, drift_params):
        table = coeffs_drift(GRID, drift_params)
        assert table.shape == (4, 3, GRID.size)
        np.testing.assert_allclose(table[:, 0].sum(axis=0), 4 * weight_k(GRID, drift_params),
                                   atol=1e-15)
        np.testing.assert_allclose(table[:, 1].sum(axis=0), 0.0, atol=1e-15)
        np.testing.assert_allclose(table[:, 2].sum(axis=0), 0.0, atol=1e-15)

    def test_path_lengths_between_barriers(self, symmetric_params):
        a1, a2, a3, a4 = path_lengths(0.3, 0.6, symmetric_params)
        assert a1 == 0.0
        assert a2 == pytest.approx(0.6)
        assert a3 == pytest.approx(0.8)
        assert a4 == pytest.approx(1.4)

    def test_path_lengths_non_negative(self, symmetric_params):
        x, y = np.meshgrid(GRID, GRID)
        for a in path_lengths(x, y, symmetric_params):
            assert np.min(a) >= 0.0

    def test_weight_is_right_continuous(self, symmetric_params):
        weight = WeightFunction(symmetric_params)
        assert weight.k(0.0) == weight.levels[1]
        assert weight.k(1.0) == weight.levels[2]
        assert weight.k(-1e-12) == weight.levels[0]


class TestDriftless:
    def test_no_skewness_is_gaussian(self):
        value = density_driftless(1.0, 0.0, 0.0, SkewParams())
        assert value.value == pytest.approx(0.3989422804, abs=1e-10)
        assert value.exact_formula
        assert value.error_bound == 0.0

    def test_scalar_and_array_output(self, symmetric_params):
        scalar = density_driftless(1.0, 0.5, 0.2, symmetric_params)
        array = density_driftless(1.0, 0.5, np.array([0.2, 0.4]), symmetric_params)
        assert isinstance(scalar.value, float)
        assert array.value.shape == (2,)
        assert array.value[0] == pytest.approx(scalar.value, rel=1e-15)

    def test_terms_and_bound(self, symmetric_params, policy):
        result = density_driftless(1.0, 0.5, 0.3, symmetric_params, policy)
        assert result.terms_used == 11
        p0 = gaussian_density(1.0, 0.5, 0.3)
        assert result.error_bound == pytest.approx(p0 * 3.0 * 0.25 ** 11)
        assert result.rigorous_bound

    def test_jump_ratio_at_lower_barrier(self, symmetric_params):
        above = density_driftless(1.0, 0.5, 1e-12, symmetric_params).value
        below = density_driftless(1.0, 0.5, -1e-12, symmetric_params).value
        assert above / below == pytest.approx(3.0, rel=1e-8)

    @pytest.mark.parametrize('fixture', ['symmetric_params', 'inside_params', 'outside_params',
                                         'concordant_params', 'reflecting_params'])
    def test_analytic_properties(self, request, fixture):
        params = request.getfixturevalue(fixture)
        evaluator = make_series_evaluator(params)
        assert check_normalization(1.0, 0.5, params, evaluator).passed
        assert check_transmission(1.0, 0.5, params, evaluator).passed
        pairs = [(a, b) for a in GRID[::8] for b in GRID[::5]]
        assert check_detailed_balance(1.0, params, evaluator, pairs).passed

    def test_reflecting_barrier_keeps_mass_above(self, reflecting_params):
        below = density_driftless(1.0, 0.5, np.array([-0.5, -0.01]), reflecting_params)
        np.testing.assert_allclose(below.value, 0.0, atol=1e-15)

    def test_rejects_drift(self, drift_params):
        with pytest.raises(DomainError):
            density_driftless(1.0, 0.5, 0.5, drift_params)

    @pytest.mark.parametrize('t', [0.0, -1.0, float('inf')])
    def test_rejects_bad_time(self, symmetric_params, t):
        with pytest.raises(DomainError):
            density_driftless(t, 0.5, 0.5, symmetric_params)

    def test_rejects_nan_point(self, symmetric_params):
        with pytest.raises(DomainError):
            density_driftless(1.0, float('nan'), 0.5, symmetric_params)


class TestOneBarrierDrift:
    def test_no_skewness_is_drifted_gaussian(self):
        ys = np.linspace(-2, 3, 11)
        value = density_one_barrier_drift(0.8, 0.3, ys, 0.0, 0.0, 1.3).value
        np.testing.assert_allclose(value, gaussian_density(0.8, 0.3, ys, 1.3), rtol=1e-13)

    @pytest.mark.parametrize('beta,mu', [(0.6, 1.0), (-0.5, 2.0), (0.8, -1.5)])
    def test_mass_and_jump(self, beta, mu):
        params = SkewParams(z1=0.0, z2=50.0, beta1=beta, mu=mu)

        def evaluator(t, x, y):
            return np.asarray(density_one_barrier_drift(t, x, y, 0.0, beta, mu).value)

        assert check_normalization(1.0, 0.5, params, evaluator).passed
        above = density_one_barrier_drift(1.0, 0.5, 1e-12, 0.0, beta, mu).value
        below = density_one_barrier_drift(1.0, 0.5, -1e-12, 0.0, beta, mu).value
        assert above / below == pytest.approx((1 + beta) / (1 - beta), rel=1e-8)

    def test_far_tail_is_finite(self):
        value = density_one_barrier_drift(0.01, 0.0, np.array([3.0, -3.0]), 0.0, 0.9, 5.0).value
        assert np.all(np.isfinite(value))
        assert np.all(value >= 0)


class TestTwoBarrierDrift:
    def test_unsupported_regime(self):
        params = SkewParams(beta1=-0.4, beta2=0.2, mu=1.0)
        with pytest.raises(UnsupportedRegimeError):
            density_two_barrier_drift(1.0, 0.5, 0.5, params)

    def test_result_flags(self, drift_params):
        result = density_two_barrier_drift(1.0, 0.5, 0.3, drift_params)
        assert isinstance(result, DensityValue)
        assert not result.exact_formula
        assert not result.rigorous_bound
        assert result.value > 0

    def test_mass_and_balance(self, drift_params):
        evaluator = make_series_evaluator(drift_params)
        assert check_normalization(1.0, 0.5, drift_params, evaluator).passed
        pairs = [(a, b) for a in GRID[::10] for b in GRID[::7]]
        assert check_detailed_balance(1.0, drift_params, evaluator, pairs).passed

    def test_transmission(self, drift_params):
        evaluator = make_series_evaluator(drift_params)
        assert check_transmission(1.0, 0.5, drift_params, evaluator).passed

    def test_near_equal_branch_is_continuous(self):
        ys = np.array([-0.4, 0.2, 0.7, 1.3])
        equal = SkewParams(beta1=0.4, beta2=0.4, mu=1.0)
        near = SkewParams(beta1=0.4, beta2=0.4 - 1e-7, mu=1.0)
        a = density_two_barrier_drift(1.0, 0.5, ys, equal).value
        b = density_two_barrier_drift(1.0, 0.5, ys, near).value
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_k_terms_shrink(self, drift_params):
        terms = [abs(drift_series_term(k, 1.0, 0.5, 0.3, drift_params)) for k in range(4)]
        assert terms[3] < terms[1]

    def test_rejects_negative_k(self, drift_params):
        with pytest.raises(DomainError):
            drift_series_term(-1, 1.0, 0.5, 0.3, drift_params)


class TestDispatch:
    def test_single_barrier_with_drift_uses_closed_form(self):
        params = SkewParams(beta1=0.5, beta2=0.0, mu=1.0)
        result = transition_density(1.0, 0.5, 0.2, params)
        assert result.exact_formula
        assert result.terms_used == 1
        expected = density_one_barrier_drift(1.0, 0.5, 0.2, 0.0, 0.5, 1.0).value
        assert result.value == expected

    def test_upper_barrier_only(self):
        params = SkewParams(beta1=0.0, beta2=0.5, mu=1.0)
        result = transition_density(1.0, 0.5, 1.2, params)
        expected = density_one_barrier_drift(1.0, 0.5, 1.2, 1.0, 0.5, 1.0).value
        assert result.value == expected

    def test_driftless_route(self, symmetric_params):
        result = transition_density(1.0, 0.5, 0.3, symmetric_params)
        assert result.value == density_driftless(1.0, 0.5, 0.3, symmetric_params).value

    def test_evaluator_returns_arrays(self, symmetric_params):
        evaluator = make_series_evaluator(symmetric_params)
        out = evaluator(1.0, np.array([0.5, 0.5]), np.array([0.1, 0.9]))
        assert isinstance(out, np.ndarray)
        assert out.shape == (2,)
        assert math.isfinite(out.sum())
