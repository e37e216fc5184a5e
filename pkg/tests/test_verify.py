"""
Tests for the verification module.
"""

import numpy as np
import pandas as pd
import pytest
from assertpy import assert_that

from fgwise.data_sources import FourierMode, build_boundary_metric, build_symmetric_field
from fgwise.fg_recursion import BoundaryData, expand
from fgwise.frame_calculus import BlockMetricSeries
from fgwise.grid_geometry import Chart, SpatialField, SpatialMetric, tt_part
from fgwise.verify import (
    DecayReport,
    StencilSpec,
    compare_fields,
    fd_oracle_ricci,
    fit_decay,
    frame_vs_oracle,
    random_block_metric,
    residual_report,
)


class TestOracle:
    """Test cases for the finite-difference Ricci oracle."""

    @pytest.fixture
    def chart(self):
        return Chart(3, (8, 1, 1))

    def test_stencil_spec(self):
        """Test relative and absolute steps."""
        assert_that(StencilSpec().step_at(0.1)).is_close_to(2e-4, 1e-18)
        assert_that(StencilSpec(step=1e-3).step_at(0.5)).is_equal_to(1e-3)
        with pytest.raises(ValueError):
            StencilSpec(relative_step=-0.1).step_at(0.1)

    def test_de_sitter_is_einstein(self, chart):
        """Test Ric = n g for the coordinate de Sitter metric."""
        s = 0.1
        ricci = fd_oracle_ricci(BlockMetricSeries.de_sitter(SpatialMetric.flat(chart), 2), s)
        expected = np.broadcast_to(3.0 * np.diag([-1.0, 1.0, 1.0, 1.0]) / s**2, chart.resolution + (4, 4))
        assert_that(compare_fields(ricci, expected, 1e-6).passed).is_true()

    def test_stencil_must_stay_inside(self, chart):
        """Test rejection of stencils that leave (0, 1)."""
        g = BlockMetricSeries.de_sitter(SpatialMetric.flat(chart), 2)
        with pytest.raises(ValueError):
            fd_oracle_ricci(g, 0.01, StencilSpec(step=0.005))

    def test_random_metrics_agree_with_series(self, chart):
        """Test that the frame Ricci series matches the oracle on random metrics."""
        rng = np.random.default_rng(3)
        for _ in range(3):
            g = random_block_metric(chart, rng, order=4)
            comparison = frame_vs_oracle(g, 0.1)
            assert_that(comparison.passed).is_true()
            assert_that(comparison.max_relative_difference).is_less_than(1e-6)

    def test_oracle_converges_at_fourth_order(self, chart):
        """Test that halving the s step divides the oracle error by about 16."""
        g = random_block_metric(chart, np.random.default_rng(8), order=4, amplitude=0.05)
        coarse = frame_vs_oracle(g, 0.1, tol=1.0, steps=StencilSpec(relative_step=0.05)).max_relative_difference
        fine = frame_vs_oracle(g, 0.1, tol=1.0, steps=StencilSpec(relative_step=0.025)).max_relative_difference
        assert_that(coarse / fine).is_between(10.0, 22.0)

    def test_even_parity_metrics(self, chart):
        """Test the block structure of even-parity random metrics."""
        g = random_block_metric(chart, np.random.default_rng(0), order=4, even_parity=True)
        assert_that(g.g0i.is_zero()).is_true()
        assert_that(g.g00.keys()).is_equal_to([(0, 0)])
        assert_that([i for i, _ in g.gij.keys()]).is_equal_to([0, 2, 4])


class TestComparisons:
    """Test cases for field comparison and decay fitting."""

    def test_compare_fields(self):
        """Test relative differences, the floor and shape checks."""
        comparison = compare_fields(np.array([1.0, 2.02]), np.array([1.0, 2.0]), 0.02)
        assert_that(comparison.max_relative_difference).is_close_to(0.01, 1e-12)
        assert_that(comparison.passed).is_true()
        assert_that(compare_fields(np.zeros(3), np.zeros(3), 0.0).passed).is_true()
        with pytest.raises(ValueError):
            compare_fields(np.zeros(3), np.zeros(4), 1.0)

    def test_compare_spatial_fields(self):
        """Test that spatial fields compare by components."""
        chart = Chart(3, (4, 1, 1))
        assert_that(compare_fields(SpatialField.identity(chart), SpatialField.identity(chart) * 1.5, 0.1).passed).is_false()

    def test_fit_decay_power(self):
        """Test the fitted power of a pure monomial."""
        s = [0.2, 0.1, 0.05, 0.025]
        assert_that(fit_decay(s, [x**9 for x in s])).is_close_to(9.0, 1e-10)

    def test_fit_decay_with_log(self):
        """Test that one log factor is divided out."""
        s = [0.2, 0.1, 0.05, 0.025]
        norms = [x**5 * abs(np.log(x)) for x in s]
        assert_that(fit_decay(s, norms, log_active=True)).is_close_to(5.0, 1e-10)
        assert_that(fit_decay(s, norms)).is_less_than(5.0)

    def test_fit_decay_degenerate(self):
        """Test rejection of degenerate inputs."""
        with pytest.raises(ValueError):
            fit_decay([0.1], [1.0])
        with pytest.raises(ValueError):
            fit_decay([0.1, 0.05], [1.0, 0.0])
        with pytest.raises(ValueError):
            fit_decay([0.1, 0.1], [1.0, 2.0])


class TestResidualReport:
    """Test cases for residual decay reports."""

    @pytest.fixture
    def flat_result(self):
        chart = Chart(3, (1, 1, 1))
        return expand(BoundaryData(SpatialMetric.flat(chart), SpatialField.zeros(chart, 2, symmetric=True), 4))

    def test_exact_zero(self, flat_result):
        """Test that de Sitter space is reported as an exact zero, not fitted."""
        report = residual_report(flat_result, [0.2, 0.1, 0.05, 0.025])
        assert_that(report.exact_zero).is_true()
        assert_that(report.fitted_slope).is_none()
        assert_that(max(report.norms)).is_less_than(1e-12)

    def test_sample_validation(self, flat_result):
        """Test rejection of short, unordered and out-of-range samples."""
        with pytest.raises(ValueError):
            residual_report(flat_result, [0.2, 0.1, 0.05])
        with pytest.raises(ValueError):
            residual_report(flat_result, [0.1, 0.2, 0.05, 0.025])
        with pytest.raises(ValueError):
            residual_report(flat_result, [1.5, 0.1, 0.05, 0.025])

    def test_write_csv(self, tmp_path):
        """Test the CSV layout of a decay report."""
        report = DecayReport([0.2, 0.1, 0.05, 0.025], [1e-3, 1e-5, 1e-7, 1e-9], 6.6, True)
        path = tmp_path / "decay.csv"
        report.write_csv(path)
        frame = pd.read_csv(path)
        assert_that(list(frame.columns)).is_equal_to(["s", "residual_norm", "log_level_active"])
        assert_that(len(frame)).is_equal_to(4)
        assert_that(bool(frame["log_level_active"].all())).is_true()

    def test_decay_steepens_with_order(self):
        """Test that raising N by two raises the fitted decay slope by at least 1.5."""
        chart = Chart(3, (16, 1, 1))
        g0 = build_boundary_metric(chart, [FourierMode((2, 2), (1, 0, 0), 0.05, -np.pi / 2)])
        raw = build_symmetric_field(chart, [FourierMode((1, 1), (1, 0, 0), 0.01), FourierMode((2, 2), (1, 0, 0), -0.01)])
        gn = tt_part(g0, raw)
        samples = [0.2, 0.1, 0.05, 0.025]
        slopes = []
        for order in (3, 5):
            report = residual_report(expand(BoundaryData(g0, gn, order)), samples)
            assert_that(report.exact_zero).is_false()
            slopes.append(report.fitted_slope)
        assert_that(slopes[1] - slopes[0]).is_greater_than_or_equal_to(1.5)
