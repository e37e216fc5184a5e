"""
Verification module for fgwise.

This module provides checks that are independent of the series curvature
code: a coordinate-based Ricci oracle built from finite differences in s
and spectral derivatives in x, least-squares fitting of residual decay
rates, field comparisons, and random analytic block metrics for property
suites.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from fgwise.fg_recursion import ExpansionResult
from fgwise.frame_calculus import BlockMetricSeries, einstein_residual, frame_ricci, frame_to_coordinates
from fgwise.grid_geometry import Chart, SpatialField, spectral_derivative
from fgwise.phg_series import PhgSeries

logger = logging.getLogger(__name__)

# Residual coefficients below this are reported as an exact zero instead of fitted
EXACT_ZERO_THRESHOLD = 1e-12
COMPARISON_FLOOR = 1e-14

# 4th-order central first-derivative weights on offsets -2..2
_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFFSETS = (-2, -1, 0, 1, 2)


class VerificationError(ValueError):
    """A verification check did not meet its threshold."""

    def __init__(self, check: str, value: float, threshold: float):
        self.check = check
        self.value = value
        self.threshold = threshold
        super().__init__(f"Verification check '{check}' failed: {value:.6g} against threshold {threshold:.6g}")


@dataclass(frozen=True)
class StencilSpec:
    """Step of the s stencil, absolute if ``step`` is set and otherwise ``relative_step * s``."""

    relative_step: float = 0.002
    step: Optional[float] = None

    def step_at(self, s: float) -> float:
        h = self.step if self.step is not None else self.relative_step * s
        if h <= 0:
            raise ValueError(f"Stencil step must be positive, got {h}")
        return h

    def fits(self, s: float) -> bool:
        """Whether the 9-point stencil around s stays inside (0, 1)."""
        h = self.step_at(s)
        return s - 4 * h > 0 and s + 4 * h < 1


@dataclass(frozen=True)
class DecayReport:
    """Residual norms at decreasing s samples and the fitted power."""

    s_samples: List[float]
    norms: List[float]
    fitted_slope: Optional[float]
    log_correction_used: bool
    exact_zero: bool = False
    solved_order_residual: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.s_samples,
                "residual_norm": self.norms,
                "log_level_active": [self.log_correction_used] * len(self.s_samples),
            }
        )

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class FieldComparison:
    max_relative_difference: float
    passed: bool


def _coordinate_metric(frame_metric: PhgSeries, s: float) -> np.ndarray:
    return frame_metric.evaluate_at(s).components / s**2


def _s_derivative(samples: Sequence[np.ndarray], h: float) -> np.ndarray:
    return sum(weight * sample for weight, sample in zip(_STENCIL, samples)) / h


def _coordinate_christoffel(frame_metric: PhgSeries, chart: Chart, s: float, h: float) -> np.ndarray:
    """Γ^a_{bc} of the coordinate metric at s, coordinates (s, x^1..x^n)."""
    metric = _coordinate_metric(frame_metric, s)
    dim = metric.shape[-1]
    derivative = np.zeros(metric.shape[:-2] + (dim, dim, dim))  # [..., a, b, c] = ∂_a G_bc
    derivative[..., 0, :, :] = _s_derivative([_coordinate_metric(frame_metric, s + k * h) for k in _OFFSETS], h)
    for axis in range(chart.n):
        derivative[..., axis + 1, :, :] = spectral_derivative(metric, chart, axis)
    lowered = 0.5 * (np.einsum("...bcd->...dbc", derivative) + np.einsum("...cbd->...dbc", derivative) - derivative)
    return np.einsum("...ad,...dbc->...abc", np.linalg.inv(metric), lowered)


def fd_oracle_ricci(g: BlockMetricSeries, s: float, steps: Optional[StencilSpec] = None) -> SpatialField:
    """
    Coordinate Ricci tensor of g at s from finite differences.

    The coordinate metric g_frame/s² is sampled on a 9-point s stencil;
    Christoffel symbols come from 4th-order central differences in s and
    spectral derivatives in x, and the Ricci tensor is the contraction of the
    full Riemann tensor.

    Args:
        g: Block metric series.
        s: Evaluation point.
        steps: Stencil step specification.

    Returns:
        Coordinate Ricci components (index 0 is ds).
    """
    spec = steps or StencilSpec()
    h = spec.step_at(s)
    if not spec.fits(s):
        raise ValueError(f"Stencil around s={s} with step {h} leaves (0, 1)")
    chart = g.gij.chart
    frame_metric = g.full()

    symbols = [_coordinate_christoffel(frame_metric, chart, s + k * h, h) for k in _OFFSETS]
    gamma = symbols[2]
    dim = gamma.shape[-1]
    dgamma = np.zeros(gamma.shape[:-3] + (dim,) * 4)  # [..., c, a, b, d] = ∂_c Γ^a_{bd}
    dgamma[..., 0, :, :, :] = _s_derivative(symbols, h)
    for axis in range(chart.n):
        dgamma[..., axis + 1, :, :, :] = spectral_derivative(gamma, chart, axis)

    riemann = (
        np.einsum("...cadb->...abcd", dgamma)
        - np.einsum("...dacb->...abcd", dgamma)
        + np.einsum("...ace,...edb->...abcd", gamma, gamma)
        - np.einsum("...ade,...ecb->...abcd", gamma, gamma)
    )
    ricci = np.einsum("...abad->...bd", riemann)
    return SpatialField.symmetrized(chart, ricci, index_dim=dim)


def compare_fields(
    a: Union[SpatialField, np.ndarray], b: Union[SpatialField, np.ndarray], tol: float, floor: float = COMPARISON_FLOOR
) -> FieldComparison:
    """
    Relative sup-norm difference |a - b| / max(|b|, floor).

    Raises:
        ValueError: If the shapes differ.
    """
    x = a.components if isinstance(a, SpatialField) else np.asarray(a, dtype=np.float64)
    y = b.components if isinstance(b, SpatialField) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"Cannot compare fields of shapes {x.shape} and {y.shape}")
    scale = max(float(np.max(np.abs(y))) if y.size else 0.0, floor)
    difference = float(np.max(np.abs(x - y))) / scale if x.size else 0.0
    return FieldComparison(difference, difference <= tol)


def frame_vs_oracle(
    g: BlockMetricSeries, s: float, tol: float = 1e-6, steps: Optional[StencilSpec] = None, extra_orders: int = 10
) -> FieldComparison:
    """
    Compare the series frame Ricci, converted to coordinates, with the oracle at s.

    The Ricci series is carried ``extra_orders`` beyond the metric's truncation
    so that its own truncation error is negligible at s.
    """
    engine = frame_to_coordinates(frame_ricci(g.truncated(g.order + extra_orders)).evaluate_at(s), s)
    return compare_fields(engine, fd_oracle_ricci(g, s, steps), tol)


def fit_decay(s_samples: Sequence[float], norms: Sequence[float], log_active: bool = False) -> float:
    """
    Least-squares slope of log(norm) against log(s).

    With ``log_active`` one factor |log s| is divided out first.
    """
    s = np.asarray(s_samples, dtype=np.float64)
    values = np.asarray(norms, dtype=np.float64)
    if len(s) < 2 or np.any(values <= 0) or np.any(s <= 0) or np.ptp(np.log(s)) == 0:
        raise ValueError("Degenerate decay fit: need positive norms at two or more distinct samples")
    if log_active:
        values = values / np.abs(np.log(s))
    slope, _ = np.polyfit(np.log(s), np.log(values), 1)
    return float(slope)


def residual_report(result: ExpansionResult, s_samples: Sequence[float], window: int = 4) -> DecayReport:
    """
    Decay of the Einstein residual of the truncated expansion.

    The residual series is computed ``window`` orders beyond N and summed at
    each sample.

    Args:
        result: Expansion to check.
        s_samples: At least four strictly decreasing samples in (0, 1).
        window: Extra orders of the residual series to keep.

    Returns:
        The decay report.
    """
    samples = [float(s) for s in s_samples]
    if len(samples) < 4:
        raise ValueError("Need at least four s samples")
    if any(not 0 < s < 1 for s in samples) or any(b >= a for a, b in zip(samples, samples[1:])):
        raise ValueError("s samples must be strictly decreasing and inside (0, 1)")
    order = result.metric.order
    residual = einstein_residual(result.metric.truncated(order + window), result.n)
    norms = [residual.evaluate_at(s).sup_norm() for s in samples]
    solved = residual.max_norm(max_order=order)
    first = min((i for i, _ in residual.keys() if i > order), default=None)
    log_active = first is not None and any(m > 0 for m in residual.log_levels(first))

    # judged on coefficients, not on the sampled sums
    if residual.max_norm() < EXACT_ZERO_THRESHOLD:
        return DecayReport(samples, norms, None, False, exact_zero=True, solved_order_residual=solved)
    slope = fit_decay(samples, norms, log_active)
    logger.info(f"Residual decay slope {slope:.3f} over s in [{samples[-1]}, {samples[0]}]")
    return DecayReport(samples, norms, slope, log_active, solved_order_residual=solved)


def random_block_metric(
    chart: Chart,
    rng: np.random.Generator,
    order: int = 4,
    amplitude: float = 0.02,
    varying_axes: Sequence[int] = (0,),
    even_parity: bool = False,
    with_logs: bool = False,
) -> BlockMetricSeries:
    """
    Random analytic block metric with low Fourier modes.

    Args:
        chart: Chart for the coefficients.
        rng: Random generator.
        order: Largest s power present.
        amplitude: Size of every perturbation.
        varying_axes: 0-based axes along which coefficients vary (wavenumber 1).
        even_parity: Keep g00 = -1, g0i = 0 and only even powers in gij.
        with_logs: Add an s² log(s) term to gij.

    Returns:
        The block metric series.
    """
    n = chart.n
    coordinates = chart.coordinates()

    def wave() -> np.ndarray:
        values = np.full(chart.resolution, rng.uniform(-1.0, 1.0))
        for axis in varying_axes:
            values = values + rng.uniform(-1.0, 1.0) * np.cos(coordinates[axis] + rng.uniform(0.0, 2.0 * np.pi))
        return amplitude * values

    def symmetric() -> np.ndarray:
        out = np.zeros(chart.resolution + (n, n))
        for i in range(n):
            for j in range(i, n):
                out[..., i, j] = wave()
                out[..., j, i] = out[..., i, j]
        return out

    gij_terms = {(0, 0): np.eye(n) + symmetric()}
    g00_terms = {(0, 0): -np.ones(chart.resolution)}
    g0i_terms = {}
    for i in range(1, order + 1):
        if even_parity and i % 2 == 1:
            continue
        gij_terms[(i, 0)] = symmetric()
        if not even_parity:
            g00_terms[(i, 0)] = wave()
            g0i_terms[(i, 0)] = np.stack([wave() for _ in range(n)], axis=-1)
    if with_logs and order >= 2:
        gij_terms[(2, 1)] = symmetric()
    return BlockMetricSeries(
        g00=PhgSeries(chart, 0, order, g00_terms),
        g0i=PhgSeries(chart, 1, order, g0i_terms),
        gij=PhgSeries(chart, 2, order, gij_terms),
    )
