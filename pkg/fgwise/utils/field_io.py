"""
Field dumps and Fourier summaries.

Grid dumps are raw little-endian float64 arrays in row-major order next to
a JSON header describing shape, chart and series slot.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from fgwise.grid_geometry import Chart, SpatialField


def dump_field(field: SpatialField, path: Union[str, Path], metadata: Optional[Dict[str, Any]] = None) -> Tuple[Path, Path]:
    """
    Write ``<path>.bin`` and ``<path>.json`` for a field.

    Returns:
        Paths of the binary dump and the header.
    """
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    data_path = base.with_suffix(".bin")
    header_path = base.with_suffix(".json")
    np.ascontiguousarray(field.components, dtype="<f8").tofile(data_path)
    header = {
        "dtype": "<f8",
        "memory_order": "C",
        "shape": list(field.components.shape),
        "rank": field.rank,
        "index_dim": field.dim,
        "symmetric": field.symmetric,
        "chart": {"n": field.chart.n, "resolution": list(field.chart.resolution), "period": list(field.chart.period)},
    }
    header.update(metadata or {})
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return data_path, header_path


def load_field(path: Union[str, Path]) -> SpatialField:
    """Read a field written by ``dump_field``."""
    base = Path(path)
    header = json.loads(base.with_suffix(".json").read_text())
    chart_info = header["chart"]
    chart = Chart(chart_info["n"], tuple(chart_info["resolution"]), tuple(chart_info["period"]))
    values = np.fromfile(base.with_suffix(".bin"), dtype="<f8").reshape(header["shape"])
    return SpatialField(chart, header["rank"], values, symmetric=header["symmetric"], index_dim=header["index_dim"])


def top_fourier_modes(field: SpatialField, k: int = 5) -> List[Dict[str, Any]]:
    """
    Largest Fourier modes of every tensor component.

    Amplitudes are normalized so that a cos(k·x) component reports a/2 at
    ±k and a constant reports itself.

    Returns:
        Up to ``k`` entries sorted by decreasing amplitude, ties broken by component then wavenumber.
    """
    chart = field.chart
    grid_axes = tuple(range(chart.n))
    count = int(np.prod(chart.resolution))
    spectrum = np.fft.fftn(field.components, axes=grid_axes) / count
    frequencies = [np.fft.fftfreq(r, d=1.0 / r).astype(int) for r in chart.resolution]
    entries = []
    for index in np.argwhere(np.abs(spectrum) > 1e-14):
        grid_index = tuple(index[: chart.n])
        component = [int(c) + 1 for c in index[chart.n :]]
        wavenumber = [int(frequencies[axis][i]) for axis, i in enumerate(grid_index)]
        entries.append({"component": component, "wavenumber": wavenumber, "amplitude": float(np.abs(spectrum[tuple(index)]))})
    entries.sort(key=lambda e: (-round(e["amplitude"], 14), e["component"], e["wavenumber"]))
    return entries[:k]
