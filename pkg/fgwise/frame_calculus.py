"""
Frame calculus module for fgwise.

This module provides spacetime curvature of a metric written in the 0-frame

    e_0 = s∂_s,  e_i = s∂_{x^i}

as polyhomogeneous series: connection symbols, the Ricci tensor, the
Einstein residual Ric(g) - n g, and the 4-component splitting of symmetric
frame tensors relative to a boundary metric.

The only nonvanishing frame brackets are [e_0, e_i] = e_i, so the structure
constants enter the Koszul formula and the Ricci contraction explicitly.
Frame index 0 is the s direction; indices 1..n are spatial.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from fgwise.grid_geometry import SpatialField, SpatialMetric
from fgwise.phg_series import Key, PhgSeries, frame_derivative, invert_metric_series, mul, mul_constant, s_dds, stack

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockMetricSeries:
    """
    Spacetime metric in frame components, stored as three series blocks.

    Attributes:
        g00: Scalar series for the e_0 e_0 component.
        g0i: One-form series for the mixed components.
        gij: Symmetric spatial series.
    """

    g00: PhgSeries
    g0i: PhgSeries
    gij: PhgSeries

    def __post_init__(self) -> None:
        if (self.g00.rank, self.g0i.rank, self.gij.rank) != (0, 1, 2):
            raise ValueError("Metric blocks must have ranks 0, 1 and 2")
        chart = self.gij.chart
        if self.g00.chart != chart or self.g0i.chart != chart:
            raise ValueError("Metric blocks live on different charts")

    @property
    def n(self) -> int:
        return self.gij.chart.n

    @property
    def order(self) -> int:
        return min(self.g00.order, self.g0i.order, self.gij.order)

    @classmethod
    def de_sitter(cls, g0: SpatialMetric, order: int, log_cap: Optional[int] = None) -> "BlockMetricSeries":
        """Blocks (-1, 0, g0): the leading part of every metric the engine builds. ``log_cap`` bounds the spatial log powers."""
        chart = g0.chart
        return cls(
            g00=PhgSeries(chart, 0, order, {(0, 0): -np.ones(chart.resolution)}),
            g0i=PhgSeries.zero(chart, 1, order),
            gij=PhgSeries.constant(g0.field, order, log_cap),
        )

    def boundary_metric(self) -> SpatialMetric:
        return SpatialMetric(SpatialField.symmetrized(self.gij.chart, self.gij.components(0, 0)))

    def with_spatial_term(self, i: int, m: int, field: SpatialField) -> "BlockMetricSeries":
        """Add s^i log(s)^m field to the spatial block."""
        term = PhgSeries(self.gij.chart, 2, self.gij.order, {(i, m): field.components}, log_cap=self.gij.log_cap)
        return BlockMetricSeries(self.g00, self.g0i, self.gij + term)

    def truncated(self, order: int) -> "BlockMetricSeries":
        return BlockMetricSeries(self.g00.truncated(order), self.g0i.truncated(order), self.gij.truncated(order))

    def full(self) -> PhgSeries:
        """Assemble the (n+1)×(n+1) frame metric series."""
        chart = self.gij.chart
        n = self.n
        keys = set(self.g00.keys()) | set(self.g0i.keys()) | set(self.gij.keys())
        terms: Dict[Key, np.ndarray] = {}
        for key in sorted(keys):
            block = np.zeros(chart.resolution + (n + 1, n + 1))
            block[..., 0, 0] = self.g00.components(*key)
            block[..., 0, 1:] = self.g0i.components(*key)
            block[..., 1:, 0] = self.g0i.components(*key)
            block[..., 1:, 1:] = self.gij.components(*key)
            terms[key] = block
        return PhgSeries(chart, 2, self.order, terms, index_dim=n + 1)


@dataclass(frozen=True, eq=False)
class FrameSymbols:
    """Frame connection symbols Γ_{λμν} and Γ^λ_{μν} with the inverse metric used to raise them."""

    lowered: PhgSeries
    raised: PhgSeries
    inverse_metric: PhgSeries


@dataclass(frozen=True, eq=False)
class Block4:
    """
    Symmetric frame tensor split relative to a boundary metric.

    h1 is the e_0 e_0 slot, h2 the mixed one-form slot, h3 the coefficient
    of g0 in the spatial block and h4 the g0-trace-free spatial remainder.
    """

    h1: SpatialField
    h2: SpatialField
    h3: SpatialField
    h4: SpatialField

    def norms(self) -> Tuple[float, float, float, float]:
        return (self.h1.sup_norm(), self.h2.sup_norm(), self.h3.sup_norm(), self.h4.sup_norm())

    def sup_norm(self) -> float:
        return max(self.norms())

    def __neg__(self) -> "Block4":
        return Block4(-self.h1, -self.h2, -self.h3, -self.h4)


def structure_constants(n: int) -> np.ndarray:
    """C[σ, a, b] with [e_a, e_b] = C^σ_{ab} e_σ for the 0-frame."""
    constants = np.zeros((n + 1, n + 1, n + 1))
    for k in range(1, n + 1):
        constants[k, 0, k] = 1.0
        constants[k, k, 0] = -1.0
    return constants


def _frame_gradient(series: PhgSeries) -> PhgSeries:
    """Prepend a derivative index: result[a, ...] = e_a(series)."""
    parts = [s_dds(series)] + [frame_derivative(series, axis) for axis in range(series.chart.n)]
    return stack(parts)


def frame_christoffels(g: BlockMetricSeries) -> FrameSymbols:
    """
    Connection symbols of the frame metric.

    Lowered symbols follow the Koszul formula with frame brackets,

        Γ_{λμν} = ½(e_μ g_{νλ} + e_ν g_{μλ} - e_λ g_{μν}
                    + C^σ_{μν} g_{σλ} - C^σ_{μλ} g_{σν} - C^σ_{νλ} g_{σμ}),

    so that ∇_{e_μ} e_ν = Γ^λ_{μν} e_λ with Γ^λ_{μν} = g^{λκ} Γ_{κμν}.
    """
    metric = g.full()
    constants = structure_constants(g.n)
    derivative = _frame_gradient(metric)  # [a, b, c] = e_a g_bc
    lowered = (
        derivative.transpose("mnl->lmn")
        + derivative.transpose("nml->lmn")
        - derivative
        + mul_constant(metric, constants, "sl,smn->lmn")
        - mul_constant(metric, constants, "sn,sml->lmn")
        - mul_constant(metric, constants, "sm,snl->lmn")
    ) * 0.5
    inverse = invert_metric_series(metric)
    raised = mul(inverse, lowered, "lk,kmn->lmn")
    return FrameSymbols(lowered=lowered, raised=raised, inverse_metric=inverse)


def frame_ricci(g: BlockMetricSeries, symbols: Optional[FrameSymbols] = None) -> PhgSeries:
    """
    Ricci tensor of the frame metric.

        Ric_{μν} = e_λ Γ^λ_{μν} - e_μ Γ^λ_{λν} + Γ^λ_{λρ} Γ^ρ_{μν}
                   - Γ^λ_{μρ} Γ^ρ_{λν} - C^σ_{λμ} Γ^λ_{σν}

    Args:
        g: Block metric series.
        symbols: Precomputed connection symbols of g, if available.

    Returns:
        Symmetric rank-2 frame series.
    """
    gamma = (symbols or frame_christoffels(g)).raised
    constants = structure_constants(g.n)
    contracted = gamma.contract("llv->v")
    ricci = (
        _frame_gradient(gamma).contract("llmn->mn")
        - _frame_gradient(contracted)
        + mul(contracted, gamma, "r,rmn->mn")
        - mul(gamma, gamma, "lmr,rln->mn")
        - mul_constant(gamma, constants, "lsn,slm->mn")
    )
    return (ricci + ricci.transpose("mn->nm")) * 0.5


def einstein_residual(g: BlockMetricSeries, n: int) -> PhgSeries:
    """Ric(g) - n g in frame components (Λ = n)."""
    if n != g.n:
        raise ValueError(f"Residual dimension {n} does not match the metric dimension {g.n}")
    return frame_ricci(g) - g.full() * float(n)


def split4(t: SpatialField, g0: SpatialMetric) -> Block4:
    """
    Split a symmetric frame tensor into (h1, h2, h3, h4).

    Args:
        t: Rank-2 frame field (index range n + 1).
        g0: Boundary metric defining the trace and trace-free parts.

    Returns:
        The four slots; h3 = tr_{g0}(t_ij)/n and h4 = tf_{g0}(t_ij).
    """
    chart = g0.chart
    n = g0.n
    if t.rank != 2 or t.dim != n + 1 or t.chart != chart:
        raise ValueError("split4 expects a rank-2 frame field on the boundary chart")
    spatial = 0.5 * (t.components[..., 1:, 1:] + np.swapaxes(t.components[..., 1:, 1:], -1, -2))
    h3 = np.einsum("...ij,...ij->...", g0.inverse.components, spatial) / n
    h4 = spatial - h3[..., None, None] * g0.field.components
    mixed = 0.5 * (t.components[..., 0, 1:] + t.components[..., 1:, 0])
    return Block4(
        h1=SpatialField(chart, 0, t.components[..., 0, 0]),
        h2=SpatialField(chart, 1, mixed),
        h3=SpatialField(chart, 0, h3),
        h4=SpatialField.symmetrized(chart, h4),
    )


def unsplit4(b: Block4, g0: SpatialMetric) -> SpatialField:
    """Reassemble a symmetric frame tensor from its four slots."""
    chart = g0.chart
    n = g0.n
    out = np.zeros(chart.resolution + (n + 1, n + 1))
    out[..., 0, 0] = b.h1.components
    out[..., 0, 1:] = b.h2.components
    out[..., 1:, 0] = b.h2.components
    out[..., 1:, 1:] = b.h3.components[..., None, None] * g0.field.components + b.h4.components
    return SpatialField.symmetrized(chart, out, index_dim=n + 1)


def split4_series(t: PhgSeries, g0: SpatialMetric) -> Dict[Key, Block4]:
    return {key: split4(value, g0) for key, value in t.terms.items()}


def frame_to_coordinates(t: SpatialField, s: float) -> SpatialField:
    """Coordinate components (ds, dx) of a covariant rank-2 frame tensor at s."""
    return SpatialField(t.chart, t.rank, t.components / s**t.rank, index_dim=t.dim)
