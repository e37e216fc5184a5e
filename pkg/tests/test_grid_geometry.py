"""
Tests for the grid geometry module.
"""

import numpy as np
import pytest
from assertpy import assert_that

from fgwise.grid_geometry import (
    Chart,
    SpatialField,
    SpatialMetric,
    check_constraints,
    christoffel,
    conformal_killing,
    divergence,
    partial_derivative,
    ricci,
    scalar_curvature,
    solve_divergence,
    spectral_derivative,
    trace,
    tracefree_part,
    tt_part,
)
from fgwise.verify import random_block_metric


def conformal_metric(chart, amplitude):
    """(1 + a sin x1) times the flat metric, with the factor."""
    x1 = chart.coordinates()[0]
    factor = 1.0 + amplitude * np.sin(x1)
    return SpatialMetric(SpatialField.identity(chart) * SpatialField.scalar(chart, factor)), factor


class TestChart:
    """Test cases for the Chart class."""

    def test_defaults_and_coordinates(self):
        """Test the default period and the coordinate grid."""
        chart = Chart(3, (4, 1, 2))
        assert_that(chart.period).is_equal_to((2 * np.pi,) * 3)
        x1, x2, x3 = chart.coordinates()
        assert_that(x1.shape).is_equal_to((4, 1, 2))
        assert_that(float(x1[1, 0, 0])).is_close_to(np.pi / 2, 1e-15)
        assert_that(float(x3[0, 0, 1])).is_close_to(np.pi, 1e-15)

    def test_nyquist_mode_is_zeroed(self):
        """Test that the Nyquist wavenumber is dropped on even grids."""
        k = Chart(3, (8, 1, 1)).wavenumbers(0)
        assert_that(float(k[4])).is_equal_to(0.0)
        assert_that(float(k[1])).is_equal_to(1.0)

    def test_invalid_charts(self):
        """Test rejection of bad dimensions and resolutions."""
        with pytest.raises(ValueError):
            Chart(2, (4, 4))
        with pytest.raises(ValueError):
            Chart(3, (4, 4))
        with pytest.raises(ValueError):
            Chart(3, (4, 0, 1))
        with pytest.raises(ValueError):
            Chart(3, (4, 1, 1), (1.0, -1.0, 1.0))


class TestSpatialField:
    """Test cases for SpatialField and SpatialMetric."""

    @pytest.fixture
    def chart(self):
        return Chart(3, (8, 1, 1))

    def test_symmetric_flag_is_checked(self, chart):
        """Test that an asymmetric field cannot be flagged symmetric."""
        values = np.zeros(chart.resolution + (3, 3))
        values[..., 0, 1] = 1.0
        with pytest.raises(ValueError):
            SpatialField(chart, 2, values, symmetric=True)

    def test_shape_is_checked(self, chart):
        """Test that components must match the chart and rank."""
        with pytest.raises(ValueError):
            SpatialField(chart, 1, np.zeros((8, 1, 1, 2)))

    def test_components_are_read_only(self, chart):
        """Test that stored components cannot be modified in place."""
        field = SpatialField.zeros(chart, 1)
        with pytest.raises(ValueError):
            field.components[0, 0, 0, 0] = 1.0

    def test_algebra(self, chart):
        """Test pointwise field algebra."""
        one = SpatialField.identity(chart)
        doubled = one + one
        assert_that(doubled.sup_norm()).is_equal_to(2.0)
        assert_that((doubled - one * 2.0).sup_norm()).is_equal_to(0.0)
        assert_that((-one).sup_norm()).is_equal_to(1.0)
        assert_that(doubled.symmetric).is_true()

    def test_metric_inverse(self, chart):
        """Test the precomputed inverse of a perturbed metric."""
        g, factor = conformal_metric(chart, 0.1)
        product = np.einsum("...ij,...jk->...ik", g.field.components, g.inverse.components)
        assert_that(float(np.max(np.abs(product - np.eye(3))))).is_less_than(1e-14)
        assert_that(float(np.max(np.abs(g.inverse.components[..., 0, 0] - 1.0 / factor)))).is_less_than(1e-14)

    def test_metric_must_be_positive_definite(self, chart):
        """Test rejection of indefinite metrics."""
        values = np.broadcast_to(np.diag([1.0, -1.0, 1.0]), chart.resolution + (3, 3)).copy()
        with pytest.raises(ValueError):
            SpatialMetric(SpatialField(chart, 2, values, symmetric=True))


class TestDerivatives:
    """Test cases for spectral differentiation."""

    def test_sine_derivative(self):
        """Test that resolved Fourier modes are differentiated exactly."""
        chart = Chart(3, (16, 1, 1))
        x1 = chart.coordinates()[0]
        derivative = spectral_derivative(np.sin(3 * x1), chart, 0)
        assert_that(float(np.max(np.abs(derivative - 3 * np.cos(3 * x1))))).is_less_than(1e-12)

    def test_constant_axis(self):
        """Test that derivatives along single-point axes vanish."""
        chart = Chart(3, (16, 1, 1))
        values = np.sin(chart.coordinates()[0])
        assert_that(float(np.max(np.abs(spectral_derivative(values, chart, 1))))).is_equal_to(0.0)

    def test_partial_derivative_axis_range(self):
        """Test the 1-based axis convention."""
        chart = Chart(3, (16, 1, 1))
        f = SpatialField.scalar(chart, np.cos(chart.coordinates()[0]))
        assert_that(float(np.max(np.abs(partial_derivative(f, 1).components + np.sin(chart.coordinates()[0]))))).is_less_than(1e-12)
        with pytest.raises(ValueError):
            partial_derivative(f, 0)


class TestCurvature:
    """Test cases for Christoffel symbols and Ricci curvature."""

    @pytest.fixture
    def chart(self):
        return Chart(3, (64, 1, 1))

    def test_flat_metric(self, chart):
        """Test that the flat metric has no connection or curvature."""
        g = SpatialMetric.flat(chart)
        assert_that(christoffel(g).sup_norm()).is_equal_to(0.0)
        assert_that(ricci(g).sup_norm()).is_equal_to(0.0)

    def test_scaled_flat_metric(self, chart):
        """Test that constant rescaling leaves the Ricci tensor at zero."""
        g = SpatialMetric(SpatialField.identity(chart) * 2.5)
        assert_that(ricci(g).sup_norm()).is_equal_to(0.0)

    def test_conformal_christoffel(self, chart):
        """Test Christoffels of f·δ against Γ^k_ij = (δ_ki f_j + δ_kj f_i - δ_ij f_k) / 2f."""
        g, factor = conformal_metric(chart, 0.05)
        df = np.zeros(chart.resolution + (3,))
        df[..., 0] = 0.05 * np.cos(chart.coordinates()[0])
        eye = np.eye(3)
        expected = (
            np.einsum("ki,...j->...kij", eye, df) + np.einsum("kj,...i->...kij", eye, df) - np.einsum("ij,...k->...kij", eye, df)
        ) / (2.0 * factor[..., None, None, None])
        assert_that(float(np.max(np.abs(christoffel(g).components - expected)))).is_less_than(1e-12)

    def test_conformal_ricci(self, chart):
        """Test Ricci of e^{2φ}δ against the conformal change formula in n = 3."""
        amplitude = 0.05
        g, factor = conformal_metric(chart, amplitude)
        x1 = chart.coordinates()[0]
        dphi = amplitude * np.cos(x1) / (2.0 * factor)
        ddphi = (-amplitude * np.sin(x1) * factor - amplitude**2 * np.cos(x1) ** 2) / (2.0 * factor**2)
        expected = np.zeros(chart.resolution + (3, 3))
        expected[..., 0, 0] = -(ddphi - dphi**2) - (ddphi + dphi**2)
        expected[..., 1, 1] = -(ddphi + dphi**2)
        expected[..., 2, 2] = -(ddphi + dphi**2)
        assert_that(float(np.max(np.abs(ricci(g).components - expected)))).is_less_than(1e-10)

    def test_scalar_curvature_is_trace(self, chart):
        """Test that R is the metric trace of Ricci."""
        g, _ = conformal_metric(chart, 0.05)
        difference = scalar_curvature(g).components - trace(g, ricci(g)).components
        assert_that(float(np.max(np.abs(difference)))).is_equal_to(0.0)


class TestTensorOperations:
    """Test cases for traces, divergences and projections."""

    @pytest.fixture
    def chart(self):
        return Chart(3, (8, 1, 1))

    @pytest.fixture
    def sine_tensor(self, chart):
        """a sin(x1)(e11 - e22) with a = 0.01."""
        values = np.zeros(chart.resolution + (3, 3))
        wave = 0.01 * np.sin(chart.coordinates()[0])
        values[..., 0, 0] = wave
        values[..., 1, 1] = -wave
        return SpatialField(chart, 2, values, symmetric=True)

    def test_trace_of_metric(self, chart):
        """Test tr_g g = n."""
        g = SpatialMetric.flat(chart)
        assert_that(float(np.max(np.abs(trace(g, g.field).components - 3.0)))).is_equal_to(0.0)

    def test_trace_rank_mismatch(self, chart):
        """Test that traces need rank-2 fields."""
        with pytest.raises(ValueError):
            trace(SpatialMetric.flat(chart), SpatialField.zeros(chart, 1))

    def test_divergence_sign(self, chart, sine_tensor):
        """Test (δk)_1 = -∂_1 k_11 on the flat torus."""
        div = divergence(SpatialMetric.flat(chart), sine_tensor)
        expected = -0.01 * np.cos(chart.coordinates()[0])
        assert_that(float(np.max(np.abs(div.components[..., 0] - expected)))).is_less_than(1e-15)
        assert_that(float(np.max(np.abs(div.components[..., 1:])))).is_equal_to(0.0)

    def test_tracefree_part(self, chart):
        """Test that the trace-free part has no trace and keeps the trace-free piece."""
        g, _ = conformal_metric(Chart(3, (16, 1, 1)), 0.1)
        values = np.zeros(g.chart.resolution + (3, 3))
        values[..., 0, 0] = 1.0
        values[..., 1, 2] = values[..., 2, 1] = 0.3
        tf = tracefree_part(g, SpatialField(g.chart, 2, values, symmetric=True))
        assert_that(trace(g, tf).sup_norm()).is_less_than(1e-15)
        assert_that(float(np.max(np.abs(tf.components[..., 1, 2] - 0.3)))).is_equal_to(0.0)

    def test_conformal_killing_is_tracefree(self):
        """Test that Lξ is trace-free."""
        chart = Chart(3, (16, 1, 1))
        g, _ = conformal_metric(chart, 0.1)
        xi = np.zeros(chart.resolution + (3,))
        xi[..., 0] = np.cos(chart.coordinates()[0])
        xi[..., 1] = np.sin(2 * chart.coordinates()[0])
        lxi = conformal_killing(g, SpatialField(chart, 1, xi))
        assert_that(trace(g, lxi).sup_norm()).is_less_than(1e-14)
        assert_that(lxi.symmetric).is_true()

    def test_constraints_of_umbilic_slice(self, chart):
        """Test that flat data with k = γ satisfies the constraints for Λ = n(n-1)/2."""
        g = SpatialMetric.flat(chart)
        hamiltonian, momentum = check_constraints(g, g.field, 3.0)
        assert_that(hamiltonian.sup_norm()).is_less_than(1e-14)
        assert_that(momentum.sup_norm()).is_less_than(1e-14)

    def test_solve_divergence_flat(self, chart):
        """Test the divergence solve on the flat torus."""
        g = SpatialMetric.flat(chart)
        w = np.zeros(chart.resolution + (3,))
        w[..., 0] = np.cos(chart.coordinates()[0])
        target = SpatialField(chart, 1, w)
        c = solve_divergence(g, target)
        assert_that((divergence(g, c) - target).sup_norm()).is_less_than(1e-10)
        assert_that(trace(g, c).sup_norm()).is_less_than(1e-12)

    def test_solve_divergence_curved(self):
        """Test the divergence solve for a divergence in the range of δ on trace-free tensors."""
        chart = Chart(3, (16, 1, 1))
        g, _ = conformal_metric(chart, 0.1)
        values = np.zeros(chart.resolution + (3, 3))
        x1 = chart.coordinates()[0]
        values[..., 0, 0] = np.sin(x1)
        values[..., 0, 1] = values[..., 1, 0] = 0.5 * np.cos(2 * x1)
        target = divergence(g, tracefree_part(g, SpatialField(chart, 2, values, symmetric=True)))
        c = solve_divergence(g, target)
        assert_that((divergence(g, c) - target).sup_norm()).is_less_than(1e-9)
        assert_that(trace(g, c).sup_norm()).is_less_than(1e-12)

    def test_tt_part_of_sine_tensor(self, chart, sine_tensor):
        """Test that TT(a sin x1 (e11 - e22)) = ½ a sin x1 (e33 - e22)."""
        g = SpatialMetric.flat(chart)
        tt = tt_part(g, sine_tensor)
        wave = 0.01 * np.sin(chart.coordinates()[0])
        expected = np.zeros(chart.resolution + (3, 3))
        expected[..., 1, 1] = -0.5 * wave
        expected[..., 2, 2] = 0.5 * wave
        assert_that(float(np.max(np.abs(tt.components - expected)))).is_less_than(1e-12)
        assert_that(divergence(g, tt).sup_norm()).is_less_than(1e-12)


def fd_derivative(values, chart, axis):
    """4th-order periodic central difference along a 0-based chart axis."""
    if chart.resolution[axis] == 1:
        return np.zeros_like(values)
    h = chart.period[axis] / chart.resolution[axis]
    return (np.roll(values, 2, axis) - 8 * np.roll(values, 1, axis) + 8 * np.roll(values, -1, axis) - np.roll(values, -2, axis)) / (12 * h)


def fd_ricci(g):
    """Ricci tensor from finite-difference Christoffel symbols, written out index by index."""
    chart = g.chart
    n = chart.n
    metric = g.field.components
    inverse = np.linalg.inv(metric)
    dg = np.stack([fd_derivative(metric, chart, a) for a in range(n)], axis=len(chart.resolution))  # [..., a, i, j]
    gamma = np.zeros(chart.resolution + (n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                for m in range(n):
                    gamma[..., k, i, j] += 0.5 * inverse[..., k, m] * (dg[..., i, m, j] + dg[..., j, m, i] - dg[..., m, i, j])
    result = np.zeros(chart.resolution + (n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                result[..., i, j] += fd_derivative(gamma[..., k, i, j], chart, k) - fd_derivative(gamma[..., k, k, i], chart, j)
                for m in range(n):
                    result[..., i, j] += gamma[..., k, k, m] * gamma[..., m, i, j] - gamma[..., k, j, m] * gamma[..., m, k, i]
    return result


def random_metric(chart, seed, amplitude=0.05):
    rng = np.random.default_rng(seed)
    return random_block_metric(chart, rng, order=1, amplitude=amplitude, varying_axes=(0, 1)).boundary_metric()


class TestGeometricIdentities:
    """Property tests against independent formulas on random metrics."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_metric_is_divergence_free(self, seed):
        """Test δ_g g = 0 for random metrics."""
        g = random_metric(Chart(3, (16, 16, 1)), seed)
        assert_that(divergence(g, g.field).sup_norm()).is_less_than(1e-13)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_trace_of_metric_is_dimension(self, seed):
        """Test g^ij g_ij = n for random metrics."""
        g = random_metric(Chart(3, (16, 16, 1)), seed)
        assert_that(float(np.max(np.abs(trace(g, g.field).components - 3.0)))).is_less_than(1e-13)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_ricci_matches_finite_differences(self, seed):
        """Test the spectral Ricci tensor against a 4th-order finite-difference oracle on a refined grid."""
        g = random_metric(Chart(3, (64, 64, 1)), seed)
        spectral = ricci(g).components
        error = float(np.max(np.abs(spectral - fd_ricci(g))))
        assert_that(float(np.max(np.abs(spectral)))).is_greater_than(1e-3)
        assert_that(error).is_less_than(1e-4 * float(np.max(np.abs(spectral))))

    def test_finite_difference_gap_shrinks_at_fourth_order(self):
        """Test that doubling the resolution divides the spectral-vs-difference gap by about 16."""
        gaps = []
        for points in (32, 64):
            g = random_metric(Chart(3, (points, points, 1)), 5)
            gaps.append(float(np.max(np.abs(ricci(g).components - fd_ricci(g)))))
        assert_that(gaps[0] / gaps[1]).is_between(10.0, 22.0)
