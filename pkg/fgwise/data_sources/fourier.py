"""
Fourier-mode data source for boundary metrics and scattering data.

This module turns lists of Fourier modes, each placed on one tensor
component, into symmetric 2-tensor fields on a chart. Boundary metrics are
the flat metric plus such modes.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from fgwise.grid_geometry import Chart, SpatialField, SpatialMetric


@dataclass(frozen=True)
class FourierMode:
    """
    One term amplitude * cos(k·x + phase) on the (i, j) component.

    Attributes:
        component: 1-based tensor indices (i, j).
        wavenumbers: Integer wavenumber per axis.
        amplitude: Mode amplitude.
        phase: Phase shift in radians; -pi/2 turns the cosine into a sine.
    """

    component: Tuple[int, int]
    wavenumbers: Tuple[int, ...]
    amplitude: float
    phase: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["component"] = list(self.component)
        data["wavenumbers"] = list(self.wavenumbers)
        return data

    def values(self, chart: Chart) -> np.ndarray:
        coordinates = chart.coordinates()
        argument = np.full(chart.resolution, self.phase)
        for axis, k in enumerate(self.wavenumbers):
            if k:
                argument = argument + k * (2.0 * np.pi / chart.period[axis]) * coordinates[axis]
        return self.amplitude * np.cos(argument)


def _mode_problems(chart: Chart, mode: FourierMode) -> Sequence[str]:
    problems = []
    if len(mode.component) != 2 or not all(1 <= c <= chart.n for c in mode.component):
        problems.append(f"component {mode.component} outside 1..{chart.n}")
    if len(mode.wavenumbers) != chart.n:
        problems.append(f"mode needs {chart.n} wavenumbers, got {len(mode.wavenumbers)}")
    else:
        for axis, k in enumerate(mode.wavenumbers):
            if k and 2 * abs(k) >= chart.resolution[axis]:
                problems.append(f"wavenumber {k} is not resolved on axis {axis + 1} with {chart.resolution[axis]} points")
    return problems


def build_symmetric_field(chart: Chart, modes: Sequence[FourierMode]) -> SpatialField:
    """
    Sum Fourier modes into a symmetric rank-2 field.

    Off-diagonal modes must be listed for both (i, j) and (j, i).

    Raises:
        ValueError: If a mode is malformed or the result is not symmetric.
    """
    components = np.zeros(chart.resolution + (chart.n, chart.n))
    for mode in modes:
        problems = _mode_problems(chart, mode)
        if problems:
            raise ValueError("; ".join(problems))
        i, j = mode.component
        components[..., i - 1, j - 1] += mode.values(chart)
    if not np.array_equal(components, np.swapaxes(components, -1, -2)):
        raise ValueError("Fourier modes do not produce a symmetric tensor")
    return SpatialField(chart, 2, components, symmetric=True)


def build_boundary_metric(chart: Chart, modes: Sequence[FourierMode]) -> SpatialMetric:
    """Flat metric plus the given modes."""
    return SpatialMetric(SpatialField.identity(chart) + build_symmetric_field(chart, modes))
