"""
Grid geometry module for fgwise.

This module provides tensor calculus for fields on a flat periodic
n-dimensional chart: spectral partial derivatives, Christoffel symbols,
Ricci and scalar curvature, traces, divergences and trace-free parts of
symmetric 2-tensors, the constraint residuals of initial data, and the
conformal Killing machinery used to prescribe divergences and to project
onto transverse-traceless tensors.

Fields are stored as full numpy arrays of shape ``resolution + (dim,) * rank``.
Axes with resolution 1 carry fields that are constant in that direction,
which keeps higher dimensions affordable when the data varies along only
a few axes.
"""

import logging
from dataclasses import dataclass
from dataclasses import field as dataclass_field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

logger = logging.getLogger(__name__)

# Cholesky pivots below this value are treated as a loss of positive definiteness
PIVOT_THRESHOLD = 1e-10
# Per-entry tolerance for g * g^{-1} = identity
INVERSE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Chart:
    """
    Periodic chart with a uniform grid.

    Attributes:
        n: Spatial dimension (at least 3).
        resolution: Grid point count per axis; an axis with a single point carries constant fields.
        period: Period per axis, 2*pi by default.
    """

    n: int
    resolution: Tuple[int, ...]
    period: Tuple[float, ...] = dataclass_field(default=())

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError(f"Spatial dimension must be at least 3, got {self.n}")
        resolution = tuple(int(r) for r in self.resolution)
        if len(resolution) != self.n:
            raise ValueError(f"Expected {self.n} resolutions, got {len(resolution)}")
        if any(r < 1 for r in resolution):
            raise ValueError(f"Every resolution must be at least 1, got {resolution}")
        period = tuple(float(p) for p in self.period) if self.period else (2.0 * np.pi,) * self.n
        if len(period) != self.n:
            raise ValueError(f"Expected {self.n} periods, got {len(period)}")
        if any(p <= 0 for p in period):
            raise ValueError(f"Periods must be positive, got {period}")
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "period", period)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.resolution

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Grid coordinates x^1..x^n as broadcast arrays of the full grid shape."""
        axes = [np.arange(count) * (length / count) for count, length in zip(self.resolution, self.period)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers along a 0-based axis, with the Nyquist mode zeroed."""
        count = self.resolution[axis]
        k = np.fft.fftfreq(count, d=1.0 / count) * (2.0 * np.pi / self.period[axis])
        if count % 2 == 0:
            k[count // 2] = 0.0
        return k


@dataclass(frozen=True, eq=False)
class SpatialField:
    """
    Tensor field on a chart.

    Components are indexed by grid multi-index followed by ``rank`` tensor
    indices. Spatial tensors have ``index_dim == n``; frame components of a
    spacetime tensor at fixed s use ``index_dim == n + 1`` with index 0 the
    s direction.
    """

    chart: Chart
    rank: int
    components: np.ndarray
    symmetric: bool = False
    index_dim: Optional[int] = None

    def __post_init__(self) -> None:
        dim = self.chart.n if self.index_dim is None else int(self.index_dim)
        object.__setattr__(self, "index_dim", dim)
        values = np.array(self.components, dtype=np.float64)
        expected = self.chart.resolution + (dim,) * self.rank
        if values.shape != expected:
            raise ValueError(f"Component shape {values.shape} does not match chart/rank shape {expected}")
        if self.symmetric:
            if self.rank != 2:
                raise ValueError("Only rank-2 fields can be flagged symmetric")
            if not np.array_equal(values, np.swapaxes(values, -1, -2)):
                raise ValueError("Field flagged symmetric but components are not symmetric")
        values.setflags(write=False)
        object.__setattr__(self, "components", values)

    @property
    def dim(self) -> int:
        assert self.index_dim is not None
        return self.index_dim

    @classmethod
    def zeros(cls, chart: Chart, rank: int, symmetric: bool = False, index_dim: Optional[int] = None) -> "SpatialField":
        dim = chart.n if index_dim is None else index_dim
        return cls(chart, rank, np.zeros(chart.resolution + (dim,) * rank), symmetric=symmetric, index_dim=dim)

    @classmethod
    def scalar(cls, chart: Chart, values: Union[float, np.ndarray]) -> "SpatialField":
        return cls(chart, 0, np.broadcast_to(np.asarray(values, dtype=np.float64), chart.resolution).copy())

    @classmethod
    def identity(cls, chart: Chart) -> "SpatialField":
        """The flat metric delta_ij."""
        return cls(chart, 2, np.broadcast_to(np.eye(chart.n), chart.resolution + (chart.n, chart.n)).copy(), symmetric=True)

    @classmethod
    def symmetrized(cls, chart: Chart, components: np.ndarray, index_dim: Optional[int] = None) -> "SpatialField":
        """Build a symmetric rank-2 field from ½(a + aᵀ)."""
        values = np.asarray(components, dtype=np.float64)
        return cls(chart, 2, 0.5 * (values + np.swapaxes(values, -1, -2)), symmetric=True, index_dim=index_dim)

    def _check_compatible(self, other: "SpatialField") -> None:
        if other.chart != self.chart or other.rank != self.rank or other.dim != self.dim:
            raise ValueError("Fields live on different charts or have different ranks")

    def __add__(self, other: "SpatialField") -> "SpatialField":
        self._check_compatible(other)
        return SpatialField(self.chart, self.rank, self.components + other.components, self.symmetric and other.symmetric, self.dim)

    def __sub__(self, other: "SpatialField") -> "SpatialField":
        self._check_compatible(other)
        return SpatialField(self.chart, self.rank, self.components - other.components, self.symmetric and other.symmetric, self.dim)

    def __neg__(self) -> "SpatialField":
        return SpatialField(self.chart, self.rank, -self.components, self.symmetric, self.dim)

    def __mul__(self, factor: Union[float, "SpatialField"]) -> "SpatialField":
        if isinstance(factor, SpatialField):
            if factor.rank != 0 or factor.chart != self.chart:
                raise ValueError("Pointwise multiplication needs a scalar field on the same chart")
            weights = factor.components.reshape(self.chart.resolution + (1,) * self.rank)
            return SpatialField(self.chart, self.rank, self.components * weights, self.symmetric, self.dim)
        return SpatialField(self.chart, self.rank, self.components * float(factor), self.symmetric, self.dim)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        if self.components.size == 0:
            return 0.0
        return float(np.max(np.abs(self.components)))


@dataclass(frozen=True, eq=False)
class SpatialMetric:
    """
    Riemannian metric on a chart with its precomputed pointwise inverse.

    Construction checks positive definiteness through a batched Cholesky
    factorization and the accuracy of the inverse.
    """

    field: SpatialField
    inverse: SpatialField = dataclass_field(init=False)

    def __post_init__(self) -> None:
        g = self.field
        if g.rank != 2 or not g.symmetric or g.dim != g.chart.n:
            raise ValueError("A spatial metric must be a symmetric rank-2 spatial field")
        try:
            factor = np.linalg.cholesky(g.components)
        except np.linalg.LinAlgError as e:
            raise ValueError("Metric is not positive definite at some grid point") from e
        pivots = np.diagonal(factor, axis1=-2, axis2=-1) ** 2
        if np.min(pivots) < PIVOT_THRESHOLD:
            raise ValueError(f"Metric is degenerate: smallest Cholesky pivot {np.min(pivots):.3e}")
        inverse = np.linalg.inv(g.components)
        defect = np.max(np.abs(g.components @ inverse - np.eye(g.chart.n)))
        if defect > INVERSE_TOLERANCE:
            raise ValueError(f"Metric inverse inaccurate (defect {defect:.3e}); metric is ill-conditioned")
        object.__setattr__(self, "inverse", SpatialField.symmetrized(g.chart, inverse))

    @property
    def chart(self) -> Chart:
        return self.field.chart

    @property
    def n(self) -> int:
        return self.field.chart.n

    @classmethod
    def flat(cls, chart: Chart) -> "SpatialMetric":
        return cls(SpatialField.identity(chart))


def spectral_derivative(values: np.ndarray, chart: Chart, axis: int) -> np.ndarray:
    """
    Differentiate grid values along a 0-based chart axis.

    Works on any array whose leading dimensions are the chart grid; trailing
    tensor dimensions are carried along. Exact for resolved Fourier modes.
    """
    count = chart.resolution[axis]
    if count == 1:
        return np.zeros_like(values, dtype=np.float64)
    shape = [1] * values.ndim
    shape[axis] = count
    k = chart.wavenumbers(axis).reshape(shape)
    transformed = np.fft.fft(values, axis=axis)
    return np.real(np.fft.ifft(1j * k * transformed, axis=axis))


def _gradient(values: np.ndarray, chart: Chart) -> np.ndarray:
    """Stack ∂_a of values as a new tensor index placed right after the grid axes."""
    return np.stack([spectral_derivative(values, chart, a) for a in range(chart.n)], axis=len(chart.resolution))


def partial_derivative(f: SpatialField, axis: int) -> SpatialField:
    """
    Partial derivative of a field along chart axis ``axis`` (1-based).

    Args:
        f: Field to differentiate.
        axis: Axis number in 1..n.

    Returns:
        Field of the same rank holding ∂_axis of every component.
    """
    if not 1 <= axis <= f.chart.n:
        raise ValueError(f"Axis must be in 1..{f.chart.n}, got {axis}")
    return SpatialField(f.chart, f.rank, spectral_derivative(f.components, f.chart, axis - 1), f.symmetric, f.dim)


def _christoffel_array(g: SpatialMetric) -> np.ndarray:
    chart = g.chart
    dg = _gradient(g.field.components, chart)  # dg[..., a, i, j] = ∂_a g_ij
    lowered = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return np.einsum("...kl,...lij->...kij", g.inverse.components, lowered)


def christoffel(g: SpatialMetric) -> SpatialField:
    """Christoffel symbols Γ^k_ij, returned with the upper index first."""
    return SpatialField(g.chart, 3, _christoffel_array(g))


def _ricci_array(g: SpatialMetric, gamma: np.ndarray) -> np.ndarray:
    chart = g.chart
    dgamma = _gradient(gamma, chart)  # dgamma[..., a, k, i, j] = ∂_a Γ^k_ij
    contracted = np.einsum("...kki->...i", gamma)  # Γ^k_ki
    ric = (
        np.einsum("...kkij->...ij", dgamma)
        - np.einsum("...ji->...ij", _gradient(contracted, chart))
        + np.einsum("...l,...lij->...ij", contracted, gamma)
        - np.einsum("...kjl,...lki->...ij", gamma, gamma)
    )
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


def ricci(g: SpatialMetric) -> SpatialField:
    """Ricci tensor of a spatial metric."""
    return SpatialField(g.chart, 2, _ricci_array(g, _christoffel_array(g)), symmetric=True)


def scalar_curvature(g: SpatialMetric) -> SpatialField:
    return trace(g, ricci(g))


def trace(g: SpatialMetric, t: SpatialField) -> SpatialField:
    """Pointwise trace g^ij t_ij."""
    if t.rank != 2:
        raise ValueError(f"Trace needs a rank-2 field, got rank {t.rank}")
    if t.chart != g.chart:
        raise ValueError("Field and metric live on different charts")
    return SpatialField(g.chart, 0, np.einsum("...ij,...ij->...", g.inverse.components, t.components))


def _divergence_array(g: SpatialMetric, gamma: np.ndarray, k: np.ndarray) -> np.ndarray:
    dk = _gradient(k, g.chart)  # dk[..., l, i, j] = ∂_l k_ij
    # k_{ij;l} stored as [..., l, i, j]
    covariant = dk - np.einsum("...mli,...mj->...lij", gamma, k) - np.einsum("...mlj,...im->...lij", gamma, k)
    return -np.einsum("...jl,...lij->...i", g.inverse.components, covariant)


def divergence(g: SpatialMetric, k: SpatialField) -> SpatialField:
    """
    Divergence (δ_g k)_i = -g^{jl} k_{ij;l}.

    Note the sign convention: δ is the formal adjoint of the symmetric gradient.
    """
    if k.rank != 2:
        raise ValueError("Divergence is defined for symmetric rank-2 fields")
    return SpatialField(g.chart, 1, _divergence_array(g, _christoffel_array(g), k.components))


def tracefree_part(g: SpatialMetric, t: SpatialField) -> SpatialField:
    """t - (tr_g t / n) g."""
    tr = trace(g, t).components[..., None, None]
    return SpatialField.symmetrized(g.chart, t.components - tr * g.field.components / g.n)


def check_constraints(gamma: SpatialMetric, k: SpatialField, cosmological_constant: float) -> Tuple[SpatialField, SpatialField]:
    """
    Constraint residuals of initial data (γ, k) for Ric = Λ g.

    Returns:
        The Hamiltonian residual R_γ - |k|² + (tr k)² - 2Λ and the momentum
        residual δ_γ k + d tr_γ k.
    """
    if not k.symmetric:
        raise ValueError("Second fundamental form must be symmetric")
    chart = gamma.chart
    ginv = gamma.inverse.components
    gamma_symbols = _christoffel_array(gamma)
    scalar = np.einsum("...ij,...ij->...", ginv, _ricci_array(gamma, gamma_symbols))
    norm_squared = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, k.components, k.components)
    tr_k = np.einsum("...ij,...ij->...", ginv, k.components)
    hamiltonian = scalar - norm_squared + tr_k**2 - 2.0 * cosmological_constant
    momentum = _divergence_array(gamma, gamma_symbols, k.components) + _gradient(tr_k, chart)
    return SpatialField(chart, 0, hamiltonian), SpatialField(chart, 1, momentum)


def _conformal_killing_array(g: SpatialMetric, gamma: np.ndarray, xi: np.ndarray) -> np.ndarray:
    # ∇_i ξ_j stored as [..., i, j]
    nabla = _gradient(xi, g.chart) - np.einsum("...kij,...k->...ij", gamma, xi)
    symmetric = nabla + np.swapaxes(nabla, -1, -2)
    div = np.einsum("...ij,...ij->...", g.inverse.components, nabla)
    return symmetric - (2.0 / g.n) * div[..., None, None] * g.field.components


def conformal_killing(g: SpatialMetric, xi: SpatialField) -> SpatialField:
    """Conformal Killing operator (Lξ)_ij = ∇_i ξ_j + ∇_j ξ_i - (2/n) g_ij ∇^k ξ_k."""
    if xi.rank != 1:
        raise ValueError("Conformal Killing operator acts on one-forms")
    return SpatialField.symmetrized(g.chart, _conformal_killing_array(g, _christoffel_array(g), xi.components))


def _flat_inverse(chart: Chart, values: np.ndarray) -> np.ndarray:
    """
    Exact inverse of δL on the flat torus applied mode by mode.

    In Fourier space δLξ = |k|²ξ + (1 - 2/n) k (k·ξ); the k = 0 block is
    replaced by the identity so the map stays invertible.
    """
    n = chart.n
    grid_axes = tuple(range(n))
    k = np.stack(np.meshgrid(*[chart.wavenumbers(a) for a in range(n)], indexing="ij"), axis=-1)
    k2 = np.sum(k**2, axis=-1)
    zero = k2 == 0.0
    safe = np.where(zero, 1.0, k2)
    transformed = np.fft.fftn(values, axes=grid_axes)
    kv = np.einsum("...a,...a->...", k, transformed)
    weight = (1.0 - 2.0 / n) / (2.0 - 2.0 / n)
    solved = transformed / safe[..., None] - (weight * kv / safe**2)[..., None] * k
    solved[zero] = transformed[zero]
    return np.real(np.fft.ifftn(solved, axes=grid_axes))


def solve_divergence(g: SpatialMetric, w: SpatialField, tolerance: float = 1e-13, max_iterations: int = 200) -> SpatialField:
    """
    Find a trace-free symmetric tensor c = Lξ with δ_g c = w.

    The vector equation δ_g L ξ = w is solved with GMRES, right-preconditioned
    by the flat-torus inverse. A right-hand side with components along the
    conformal Killing fields of g has no exact solution; the least-residual
    iterate is returned and the remaining defect is logged.

    Args:
        g: Metric.
        w: Target one-form.
        tolerance: Absolute residual target, relative to max(1, |w|).
        max_iterations: Restart cycles allowed to GMRES.

    Returns:
        The trace-free symmetric tensor c.
    """
    if w.rank != 1 or w.chart != g.chart:
        raise ValueError("Divergence target must be a one-form on the metric's chart")
    chart = g.chart
    shape = w.components.shape
    gamma = _christoffel_array(g)

    def apply_operator(xi: np.ndarray) -> np.ndarray:
        return _divergence_array(g, gamma, _conformal_killing_array(g, gamma, xi))

    def preconditioned(flat: np.ndarray) -> np.ndarray:
        return apply_operator(_flat_inverse(chart, flat.reshape(shape))).ravel()

    size = int(np.prod(shape))
    rhs = w.components.ravel()
    scale = max(1.0, float(np.max(np.abs(rhs))) if size else 0.0)
    operator = LinearOperator((size, size), matvec=preconditioned, dtype=np.float64)
    y, info = gmres(operator, rhs, rtol=0.0, atol=tolerance * scale, restart=min(size, 60), maxiter=max_iterations)
    if info < 0:
        raise ValueError(f"GMRES rejected the divergence problem (info={info})")
    xi = _flat_inverse(chart, y.reshape(shape))
    result = _conformal_killing_array(g, gamma, xi)
    defect = float(np.max(np.abs(_divergence_array(g, gamma, result) - w.components)))
    if defect > tolerance * scale:
        logger.warning(f"Divergence solve stopped with defect {defect:.3e} (info={info})")
    else:
        logger.info(f"Divergence solve converged, defect {defect:.3e}")
    return SpatialField.symmetrized(chart, result)


def tt_part(g: SpatialMetric, t: SpatialField) -> SpatialField:
    """
    Transverse-traceless part of a symmetric tensor.

    Removes the trace and then the Lξ component carrying the divergence.
    """
    tf = tracefree_part(g, t)
    correction = solve_divergence(g, divergence(g, tf))
    return tracefree_part(g, tf - correction)
