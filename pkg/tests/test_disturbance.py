import math

import numpy as np
import pytest

from framecast.disturbance import (
    DisturbanceReport,
    _half_line_quadrature,
    finite_j_fidelity,
    lambda_constant,
    lambda_integrand,
    single_observer_disturbance,
    trace_distance_bounds,
)
from framecast.likelihood import ResolutionError, density_grid
from framecast.su2 import HaarGrid

# frozen high-precision quadrature oracle for the limiting fidelity constant
LAMBDA_REFERENCE = 0.23606220073506967
# frozen quadrature oracle: (2/pi) int (4 cos^2)^2 sin^2 dtheta / 4 = 1/2
FIDELITY_N3 = 0.5


class TestLambdaConstant:
    def test_three_decimals(self):
        assert round(lambda_constant(1e-4), 3) == 0.236

    @pytest.mark.parametrize("rel_tol", [1e-4, 1e-6, 1e-8])
    def test_matches_reference_within_tolerance(self, rel_tol):
        value = lambda_constant(rel_tol)
        assert abs(value - LAMBDA_REFERENCE) <= rel_tol * LAMBDA_REFERENCE

    def test_tolerance_domain(self):
        with pytest.raises(ValueError):
            lambda_constant(1e-13)
        with pytest.raises(ValueError):
            lambda_constant(0.5)

    def test_integrand_vanishes_at_origin(self):
        # behaves like x^2/pi^8 near zero
        xs = np.array([1e-6, 1e-4, 1e-2])
        values = lambda_integrand(xs)
        assert np.allclose(values, xs**2 / math.pi**8, rtol=1e-3)
        assert lambda_integrand(0.0) == 0.0

    def test_integrand_finite_at_pole(self):
        # series limit: sin^4(x)/(x-pi)^4 -> 1, leaving 1/(pi^2 (2 pi)^4)
        expected = 1.0 / (math.pi**2 * 16 * math.pi**4)
        assert lambda_integrand(math.pi) == pytest.approx(expected, rel=1e-12)
        for dx in (1e-9, 1e-5, 1e-3):
            assert lambda_integrand(math.pi + dx) == pytest.approx(expected, rel=1e-2)
            assert lambda_integrand(math.pi - dx) == pytest.approx(expected, rel=1e-2)

    def test_integrand_even(self):
        xs = np.array([0.3, 1.0, math.pi - 0.1, math.pi, 4.0, 9.7])
        assert np.allclose(lambda_integrand(xs), lambda_integrand(-xs), rtol=1e-14)

    def test_tail_extension_monotone(self):
        # positive integrand: a longer tail can only add mass, and never more
        # than the analytic remainder bound at the shorter cutoff
        short = _half_line_quadrature(15.0, 2048)
        for x_max in (20.0, 30.0, 60.0):
            longer = _half_line_quadrature(x_max, int(2048 * x_max / 15.0))
            assert longer >= short
            bound = 1.0 / (9.0 * 15.0**9) / (1.0 - (math.pi / 15.0) ** 2) ** 4
            assert longer - short <= bound


class TestFiniteSizeFidelity:
    def test_three_spins(self):
        value = finite_j_fidelity(3, 1, density_grid(3, squared=True))
        assert value == pytest.approx(FIDELITY_N3, abs=1e-8)

    def test_product_structure(self):
        grid = density_grid(9, squared=True)
        single = finite_j_fidelity(9, 1, grid)
        assert finite_j_fidelity(9, 2, grid) == single**2
        assert finite_j_fidelity(9, 5, grid) == single**5

    def test_two_spins_no_disturbance(self):
        value = finite_j_fidelity(2, 1, density_grid(2, squared=True))
        assert value == pytest.approx(1.0, abs=1e-12)
        assert 1.0 - value == pytest.approx(0.0, abs=1e-12)
        assert math.sqrt(max(0.0, 1.0 - value)) == pytest.approx(0.0, abs=1e-6)

    def test_large_n_approaches_lambda(self):
        value = finite_j_fidelity(201, 1, density_grid(201, squared=True))
        assert abs(value / LAMBDA_REFERENCE - 1.0) < 0.02

    def test_convergent_sequence(self):
        gaps = [
            abs(
                finite_j_fidelity(2 * m + 1, 1, density_grid(2 * m + 1, squared=True))
                - LAMBDA_REFERENCE
            )
            for m in (25, 50, 100)
        ]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_in_unit_interval(self):
        for n_spins in (3, 10, 33, 64):
            value = finite_j_fidelity(n_spins, 1, density_grid(n_spins, squared=True))
            assert 0.0 < value < 1.0

    def test_coarse_grid_rejected(self):
        with pytest.raises(ResolutionError):
            finite_j_fidelity(101, 1, HaarGrid(theta_panels=64))
        with pytest.raises(ValueError):
            finite_j_fidelity(3, 0, density_grid(3, squared=True))

    @pytest.mark.parametrize("n_spins", [3, 4, 5])
    def test_scalar_reduction_matches_product_space_oracle(self, n_spins):
        # rebuild the one-dimensional reduction from brute-force densities
        from framecast.encoding import b_norm_squared
        from framecast.oracle import brute_overlap
        from framecast.su2 import Su2Element, su2_identity

        grid = density_grid(n_spins, squared=True)
        densities = np.array(
            [
                brute_overlap(
                    n_spins,
                    su2_identity(),
                    Su2Element(np.array([math.cos(t), math.sin(t), 0.0, 0.0])),
                )
                ** 2
                for t in grid.theta_nodes
            ]
        )
        brute_fidelity = float((densities**2) @ grid.theta_weights) / b_norm_squared(
            n_spins
        )
        reduced = finite_j_fidelity(n_spins, 1, grid)
        assert reduced == pytest.approx(brute_fidelity, rel=1e-10)


class TestTraceDistanceBounds:
    def test_single_observer_values(self):
        lower, upper = trace_distance_bounds(1, 0.236)
        assert round(lower, 3) == 0.764
        assert round(upper, 3) == 0.874

    def test_bounds_from_reference_lambda(self):
        lower, upper = trace_distance_bounds(1, LAMBDA_REFERENCE)
        assert round(lower, 3) == 0.764
        assert round(upper, 3) == 0.874

    def test_limits_with_many_observers(self):
        lower, upper = trace_distance_bounds(200, 0.236)
        assert lower == pytest.approx(1.0, abs=1e-100)
        assert upper == pytest.approx(1.0, abs=1e-100)

    def test_ordering_for_all_counts(self):
        previous = (0.0, 0.0)
        for k in range(1, 65):
            lower, upper = trace_distance_bounds(k, LAMBDA_REFERENCE)
            assert 0.0 <= lower <= upper <= 1.0
            assert lower >= previous[0] and upper >= previous[1]
            previous = (lower, upper)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            trace_distance_bounds(0, 0.5)
        with pytest.raises(ValueError):
            trace_distance_bounds(1, 1.0)


class TestSingleObserverReport:
    def test_three_spins_report(self):
        report = single_observer_disturbance(3)
        assert report.k == 1
        assert report.finite_j_fidelity == pytest.approx(0.5, abs=1e-8)
        assert report.lower_bound == pytest.approx(0.5, abs=1e-8)
        assert report.upper_bound == pytest.approx(1 / math.sqrt(2), abs=1e-8)
        assert report.lambda_ == pytest.approx(LAMBDA_REFERENCE, rel=1e-6)
        assert report.fidelity_limit == report.lambda_

    def test_large_n_matches_asymptote(self):
        report = single_observer_disturbance(201)
        asym_lower, asym_upper = trace_distance_bounds(1, report.lambda_)
        assert abs(report.lower_bound / asym_lower - 1.0) < 0.02
        assert abs(report.upper_bound / asym_upper - 1.0) < 0.02

    @pytest.mark.parametrize("n_spins", [3, 5, 12, 51, 201])
    def test_report_invariants(self, n_spins):
        report = single_observer_disturbance(n_spins)
        assert 0.0 < report.lambda_ < 1.0
        assert 0.0 <= report.lower_bound <= report.upper_bound <= 1.0
        assert 0.0 < report.finite_j_fidelity <= 1.0
        assert report.n_spins == n_spins

    def test_invalid_report_rejected(self):
        with pytest.raises(ValueError):
            DisturbanceReport(
                lambda_=1.5, k=1, fidelity_limit=0.5, lower_bound=0.2, upper_bound=0.4
            )
        with pytest.raises(ValueError):
            DisturbanceReport(
                lambda_=0.3, k=1, fidelity_limit=0.5, lower_bound=0.6, upper_bound=0.4
            )
