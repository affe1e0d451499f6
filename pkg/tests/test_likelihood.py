import math

import numpy as np
import pytest
from scipy import stats

from framecast.encoding import b_norm_squared, encoding_spec
from framecast.likelihood import (
    ResolutionError,
    average_error,
    build_model,
    density_grid,
    likelihood_density,
    overlap,
    overlap_closed_form,
    required_theta_panels,
    sample_estimate,
    transmission_error,
)
from framecast.su2 import (
    HaarGrid,
    Su2Element,
    haar_sample,
    relative_angle,
    su2_identity,
    su2_inverse,
    su2_to_rotation,
)

EIGHT_PI_SQ = 8 * math.pi**2
# frozen quadrature-oracle values for the exact small-N cases:
#   <e>(3) = (64/pi) * int cos^2 sin^4 = (64/pi)(pi/16) = 4
#   <e>(5) = 2 (two equal-weight sectors; fixed by quadrature before the build)
AVG_ERROR_N3 = 4.0
AVG_ERROR_N5 = 2.0


def closed_form_singularities(spec):
    """Angles where the closed form hits 0/0: theta = 0, pi, and the interior
    roots of cos 2 theta = cos(pi/(n+1))."""
    gap = math.pi / (spec.n_sectors + 1)
    interior = []
    for m in range(2 * spec.n_sectors + 4):
        for sign in (1.0, -1.0):
            t = 0.5 * (sign * gap + 2 * math.pi * m)
            if 0 <= t <= math.pi:
                interior.append(t)
    return np.array([0.0, math.pi] + interior)


class TestOverlap:
    def test_three_spins_at_zero(self):
        assert overlap(encoding_spec(3), 0.0) == pytest.approx(2.0, abs=1e-14)

    def test_three_spins_at_right_angle(self):
        assert overlap(encoding_spec(3), math.pi / 2) == pytest.approx(0.0, abs=1e-14)

    def test_closed_form_agrees_for_five_spins(self):
        spec = encoding_spec(5)
        rng = np.random.default_rng(0)
        bad = closed_form_singularities(spec)
        for theta in rng.uniform(0.01, math.pi - 0.01, size=200):
            if np.min(np.abs(bad - theta)) < 1e-4:
                continue
            assert overlap_closed_form(spec, theta) == pytest.approx(
                overlap(spec, theta), abs=1e-10
            )

    @pytest.mark.parametrize("n_spins", range(3, 31))
    def test_closed_form_agrees_broadly(self, n_spins):
        spec = encoding_spec(n_spins)
        rng = np.random.default_rng(n_spins)
        bad = closed_form_singularities(spec)
        thetas = rng.uniform(0.0, math.pi, size=1000)
        keep = np.array([np.min(np.abs(bad - t)) >= 1e-4 for t in thetas])
        a = overlap(spec, thetas[keep])
        b = overlap_closed_form(spec, thetas[keep])
        assert np.max(np.abs(a - b)) < 1e-9

    def test_limits_at_the_endpoints(self):
        spec = encoding_spec(7)
        expected_zero = float(spec.coeffs @ (spec.doubled_spins + 1))
        assert overlap(spec, 0.0) == pytest.approx(expected_zero, abs=1e-12)
        sign = (-1.0) ** spec.doubled_spins
        expected_pi = float(spec.coeffs @ (sign * (spec.doubled_spins + 1)))
        assert overlap(spec, math.pi) == pytest.approx(expected_pi, abs=1e-12)

    @pytest.mark.parametrize("n_spins", [300, 301])
    def test_zero_angle_ratio_approaches_limit(self, n_spins):
        # overlap(0)/sqrt(seed norm) tends to sqrt(6)/pi ~ 0.78
        spec = encoding_spec(n_spins)
        ratio = overlap(spec, 0.0) / math.sqrt(b_norm_squared(n_spins))
        assert abs(ratio / (math.sqrt(6) / math.pi) - 1.0) < 0.02

    def test_zero_angle_growth_rate(self):
        spec = encoding_spec(300)
        scale = (2 * math.sqrt(2) / math.pi) * (300 / 2) ** 1.5
        assert abs(overlap(spec, 0.0) / scale - 1.0) < 0.02


class TestDensity:
    def test_two_spins_flat(self):
        model = build_model(encoding_spec(2))
        values = likelihood_density(model, model.theta_grid)
        assert np.max(np.abs(values - 1.0)) < 1e-12

    def test_three_spins_cosine_squared(self):
        model = build_model(encoding_spec(3))
        values = likelihood_density(model, model.theta_grid)
        expected = 4.0 * np.cos(model.theta_grid) ** 2
        assert np.max(np.abs(values - expected)) < 1e-12

    @pytest.mark.parametrize("n_spins", [2, 3, 4, 5, 6, 17, 64, 101])
    def test_haar_normalization(self, n_spins):
        spec = encoding_spec(n_spins)
        grid = density_grid(n_spins)
        total = float((overlap(spec, grid.theta_nodes) ** 2) @ grid.theta_weights)
        assert abs(total - 1.0) < 1e-6

    @pytest.mark.parametrize("n_spins", [3, 8, 33, 100])
    def test_mirror_symmetry(self, n_spins):
        # deviation measured relative to the density scale: the peak grows
        # like J^3, so an absolute bar would drown in float64 roundoff
        spec = encoding_spec(n_spins)
        theta = np.linspace(0.0, math.pi, 1001)
        p = overlap(spec, theta) ** 2
        assert np.max(np.abs(p - p[::-1])) / max(1.0, float(p.max())) < 1e-10

    def test_exchange_symmetry(self):
        model = build_model(encoding_spec(5))
        rng = np.random.default_rng(3)
        for _ in range(20):
            g, gp = haar_sample(rng), haar_sample(rng)
            forward = likelihood_density(model, relative_angle(g, gp))
            backward = likelihood_density(
                model, relative_angle(su2_inverse(gp), su2_inverse(g))
            )
            assert forward == pytest.approx(backward, rel=1e-12, abs=1e-12)

    def test_cdf_table_invariants(self):
        for n_spins in (2, 3, 25, 101):
            model = build_model(encoding_spec(n_spins))
            assert model.cdf_table[0] == 0.0
            assert np.all(np.diff(model.cdf_table) >= 0)
            assert abs(model.cdf_table[-1] - 1.0) < 1e-6

    def test_under_resolved_table_rejected(self):
        with pytest.raises((ResolutionError, ValueError)):
            build_model(encoding_spec(401), resolution=64)


class TestSampling:
    def test_two_spins_relative_angle_is_haar(self):
        model = build_model(encoding_spec(2))
        rng = np.random.default_rng(11)
        g0 = haar_sample(rng)
        draws = np.array(
            [
                relative_angle(g0, sample_estimate(model, g0, rng))
                for _ in range(100000)
            ]
        )
        result = stats.kstest(draws, lambda t: (t - np.sin(t) * np.cos(t)) / math.pi)
        assert result.statistic < 1.63 / math.sqrt(len(draws))  # 1% critical value

    def test_three_spins_error_mean_matches_quadrature(self):
        model = build_model(encoding_spec(3))
        rng = np.random.default_rng(12)
        g0 = haar_sample(rng)
        errors = np.array(
            [
                8.0 * math.sin(relative_angle(g0, sample_estimate(model, g0, rng))) ** 2
                for _ in range(100000)
            ]
        )
        stderr = errors.std(ddof=1) / math.sqrt(len(errors))
        assert abs(errors.mean() - AVG_ERROR_N3) < 3 * stderr

    def test_fixed_seed_reproducible(self):
        model = build_model(encoding_spec(9))
        g0 = haar_sample(np.random.default_rng(5))
        a = sample_estimate(model, g0, np.random.default_rng(77))
        b = sample_estimate(model, g0, np.random.default_rng(77))
        assert np.array_equal(a.x, b.x)


def explicit_axis_error(g_est, g_true):
    """Test oracle: sum over the three frame axes of |R' e - R e|^2."""
    r_est = su2_to_rotation(g_est).m
    r_true = su2_to_rotation(g_true).m
    return sum(
        float(np.sum((r_est[:, a] - r_true[:, a]) ** 2)) for a in range(3)
    )


class TestTransmissionError:
    def test_coincident_frames(self):
        g = haar_sample(np.random.default_rng(1))
        assert transmission_error(g, g) == 0.0

    def test_antipodal_representatives(self):
        g = haar_sample(np.random.default_rng(2))
        assert transmission_error(-g, g) == pytest.approx(0.0, abs=1e-28)

    def test_right_angle_gives_eight(self):
        g_true = su2_identity()
        g_est = Su2Element(np.array([0.0, 1.0, 0.0, 0.0]))  # half-turn rotation
        assert transmission_error(g_est, g_true) == pytest.approx(8.0, abs=1e-12)
        assert explicit_axis_error(g_est, g_true) == pytest.approx(8.0, abs=1e-12)

    def test_matches_explicit_axis_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g, h = haar_sample(rng), haar_sample(rng)
            assert transmission_error(g, h) == pytest.approx(
                explicit_axis_error(g, h), abs=1e-10
            )

    def test_matches_trace_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            g, h = haar_sample(rng), haar_sample(rng)
            trace = np.trace(su2_to_rotation(h).m.T @ su2_to_rotation(g).m)
            assert transmission_error(g, h) == pytest.approx(6.0 - 2.0 * trace, abs=1e-10)


class TestAverageError:
    def test_no_information_baseline(self):
        assert average_error(encoding_spec(2), density_grid(2)) == pytest.approx(
            6.0, abs=1e-10
        )

    def test_three_spins(self):
        assert average_error(encoding_spec(3), density_grid(3)) == pytest.approx(
            AVG_ERROR_N3, abs=1e-8
        )

    def test_five_spins(self):
        assert average_error(encoding_spec(5), density_grid(5)) == pytest.approx(
            AVG_ERROR_N5, abs=1e-8
        )

    def test_asymptotic_scaling(self):
        n = 400
        err = average_error(encoding_spec(n), density_grid(n))
        assert abs(n * n * err / EIGHT_PI_SQ - 1.0) < 0.05

    def test_under_resolved_grid_rejected(self):
        grid = HaarGrid(theta_panels=64, psi_panels=1, phi_panels=1)
        with pytest.raises(ResolutionError):
            average_error(encoding_spec(101), grid)
        assert required_theta_panels(101) > 64

    def test_monotone_for_odd_spin_counts(self):
        errors = [
            average_error(encoding_spec(n), density_grid(n)) for n in range(3, 102, 2)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
