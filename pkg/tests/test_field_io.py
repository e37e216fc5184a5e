"""
Tests for field dumps and Fourier summaries.
"""

import json

import numpy as np
import pytest
from assertpy import assert_that

from fgwise.data_sources import FourierMode, build_symmetric_field
from fgwise.grid_geometry import Chart, SpatialField
from fgwise.utils import dump_field, load_field, top_fourier_modes


class TestFieldIO:
    """Test cases for binary field dumps."""

    @pytest.fixture
    def field(self):
        chart = Chart(3, (8, 2, 1), (2.0 * np.pi, 1.0, 2.0 * np.pi))
        rng = np.random.default_rng(1)
        values = rng.normal(size=chart.resolution + (3, 3))
        return SpatialField(chart, 2, values + np.swapaxes(values, -1, -2), symmetric=True)

    def test_dump_and_load(self, field, tmp_path):
        """Test that a dump is read back bit for bit."""
        data_path, header_path = dump_field(field, tmp_path / "coefficients" / "3_0", {"order": 3, "log_power": 0})
        assert_that(data_path.name).is_equal_to("3_0.bin")
        assert_that(data_path.stat().st_size).is_equal_to(field.components.size * 8)
        loaded = load_field(tmp_path / "coefficients" / "3_0")
        assert_that(np.array_equal(loaded.components, field.components)).is_true()
        assert_that(loaded.chart).is_equal_to(field.chart)
        assert_that(loaded.symmetric).is_true()

    def test_header(self, field, tmp_path):
        """Test the JSON header layout."""
        _, header_path = dump_field(field, tmp_path / "h", {"order": 4, "log_power": 1})
        header = json.loads(header_path.read_text())
        assert_that(header).contains_entry({"dtype": "<f8"}, {"order": 4}, {"log_power": 1})
        assert_that(header["shape"]).is_equal_to([8, 2, 1, 3, 3])
        assert_that(header["chart"]["period"]).is_equal_to([2.0 * np.pi, 1.0, 2.0 * np.pi])


class TestTopFourierModes:
    """Test cases for the Fourier summary of a field."""

    def test_cosine_mode_amplitude(self):
        """Test that a cos(x1) component reports a/2 at wavenumbers ±1."""
        chart = Chart(3, (8, 1, 1))
        field = build_symmetric_field(chart, [FourierMode((2, 2), (1, 0, 0), 0.4)])
        modes = top_fourier_modes(field, k=5)
        assert_that(modes).is_length(2)
        assert_that(modes[0]["amplitude"]).is_close_to(0.2, 1e-14)
        assert_that(sorted(m["wavenumber"][0] for m in modes)).is_equal_to([-1, 1])
        assert_that(modes[0]["component"]).is_equal_to([2, 2])

    def test_constant_and_limit(self):
        """Test constants and truncation to k entries."""
        chart = Chart(3, (4, 1, 1))
        field = build_symmetric_field(
            chart,
            [FourierMode((1, 1), (0, 0, 0), 0.5), FourierMode((2, 2), (0, 0, 0), -0.25), FourierMode((3, 3), (1, 0, 0), 0.1)],
        )
        modes = top_fourier_modes(field, k=2)
        assert_that(modes).is_length(2)
        assert_that(modes[0]).is_equal_to({"component": [1, 1], "wavenumber": [0, 0, 0], "amplitude": 0.5})
        assert_that(modes[1]["amplitude"]).is_close_to(0.25, 1e-15)
