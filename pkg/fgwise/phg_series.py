"""
Polyhomogeneous series module for fgwise.

This module provides arithmetic on finite series

    Σ s^i log(s)^m · c_{i,m}

whose coefficients are tensor fields on a chart. Series are truncated at a
fixed order N: products silently drop terms above N, since the recursion
only ever needs orders up to N. Coefficients whose sup-norm falls below
``ZERO_THRESHOLD`` are dropped by a normalization pass so that vanishing
tests stay meaningful.

Tensor products and contractions are described by einsum subscripts over
the tensor indices only (for instance ``"ab,bc->ac"``); grid axes are
handled implicitly.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from fgwise.grid_geometry import Chart, SpatialField, spectral_derivative

Key = Tuple[int, int]

ZERO_THRESHOLD = 1e-15


class PhgSeries:
    """
    Finite polyhomogeneous series with tensor-field coefficients.

    Attributes:
        chart: Chart shared by every coefficient.
        rank: Tensor rank of the coefficients.
        index_dim: Range of each tensor index (n for spatial tensors, n + 1 for frame tensors).
        order: Truncation order N; no stored term has i > N.
        log_cap: When set, every stored term satisfies m <= i // log_cap.
    """

    def __init__(
        self,
        chart: Chart,
        rank: int,
        order: int,
        terms: Optional[Mapping[Key, Union[np.ndarray, SpatialField]]] = None,
        index_dim: Optional[int] = None,
        log_cap: Optional[int] = None,
    ):
        if order < 0:
            raise ValueError(f"Truncation order must be nonnegative, got {order}")
        self.chart = chart
        self.rank = rank
        self.order = order
        self.index_dim = chart.n if index_dim is None else index_dim
        self.log_cap = log_cap
        self._terms: Dict[Key, np.ndarray] = {}

        expected = chart.resolution + (self.index_dim,) * rank
        for (i, m), value in (terms or {}).items():
            if i < 0 or m < 0:
                raise ValueError(f"Series exponents must be nonnegative, got {(i, m)}")
            if i > order:
                continue
            if isinstance(value, SpatialField):
                if value.chart != chart:
                    raise ValueError("Coefficient lives on a different chart")
                value = value.components
            array = np.array(value, dtype=np.float64)
            if array.shape != expected:
                raise ValueError(f"Coefficient {(i, m)} has shape {array.shape}, expected {expected}")
            if array.size == 0 or np.max(np.abs(array)) < ZERO_THRESHOLD:
                continue
            if log_cap is not None and m > i // log_cap:
                raise ValueError(f"Log power {m} at order {i} exceeds the cap {i // log_cap}")
            array.setflags(write=False)
            self._terms[(i, m)] = array

    @classmethod
    def constant(cls, field: SpatialField, order: int, log_cap: Optional[int] = None) -> "PhgSeries":
        """Series whose only term is the s-independent field."""
        return cls(field.chart, field.rank, order, {(0, 0): field.components}, field.dim, log_cap)

    @classmethod
    def zero(cls, chart: Chart, rank: int, order: int, index_dim: Optional[int] = None, log_cap: Optional[int] = None) -> "PhgSeries":
        return cls(chart, rank, order, {}, index_dim, log_cap)

    def _like(self, terms: Mapping[Key, np.ndarray], rank: Optional[int] = None, order: Optional[int] = None) -> "PhgSeries":
        return PhgSeries(
            self.chart,
            self.rank if rank is None else rank,
            self.order if order is None else order,
            terms,
            self.index_dim,
            self.log_cap,
        )

    @property
    def value_shape(self) -> Tuple[int, ...]:
        return (self.index_dim,) * self.rank

    @property
    def terms(self) -> Dict[Key, SpatialField]:
        return {key: self._field(value) for key, value in self._terms.items()}

    def keys(self) -> List[Key]:
        return sorted(self._terms)

    def _field(self, values: np.ndarray) -> SpatialField:
        return SpatialField(self.chart, self.rank, values, index_dim=self.index_dim)

    def components(self, i: int, m: int = 0) -> np.ndarray:
        """Raw coefficient array of s^i log(s)^m (zeros when absent)."""
        value = self._terms.get((i, m))
        if value is None:
            return np.zeros(self.chart.resolution + self.value_shape)
        return value

    def coefficient(self, i: int, m: int = 0) -> SpatialField:
        return self._field(self.components(i, m))

    def log_levels(self, i: int) -> List[int]:
        return sorted(m for (order, m) in self._terms if order == i)

    def max_norm(self, max_order: Optional[int] = None) -> float:
        norms = [float(np.max(np.abs(v))) for (i, _), v in self._terms.items() if max_order is None or i <= max_order]
        return max(norms, default=0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def _check_compatible(self, other: "PhgSeries") -> None:
        if other.chart != self.chart or other.rank != self.rank or other.index_dim != self.index_dim:
            raise ValueError("Series have different charts, ranks or index ranges")

    def __add__(self, other: "PhgSeries") -> "PhgSeries":
        self._check_compatible(other)
        order = min(self.order, other.order)
        result: Dict[Key, np.ndarray] = {}
        for key, value in list(self._terms.items()) + list(other._terms.items()):
            result[key] = result[key] + value if key in result else value
        return self._like(result, order=order)

    def __neg__(self) -> "PhgSeries":
        return self._like({key: -value for key, value in self._terms.items()})

    def __sub__(self, other: "PhgSeries") -> "PhgSeries":
        return self + (-other)

    def __mul__(self, factor: float) -> "PhgSeries":
        return self._like({key: value * float(factor) for key, value in self._terms.items()})

    __rmul__ = __mul__

    def truncated(self, order: int) -> "PhgSeries":
        """Same terms with a new truncation order; raising the order adds no terms."""
        return self._like(self._terms, order=order)

    def transpose(self, subscripts: str) -> "PhgSeries":
        """Permute or contract tensor indices of every coefficient, e.g. ``"abc->bca"`` or ``"aab->b"``."""
        source, target = subscripts.split("->")
        if len(source) != self.rank:
            raise ValueError(f"Subscripts {subscripts!r} do not match rank {self.rank}")
        spec = f"...{source}->...{target}"
        return self._like({key: np.einsum(spec, value) for key, value in self._terms.items()}, rank=len(target))

    contract = transpose

    def evaluate_at(self, s: float) -> SpatialField:
        """Sum the series at a fixed s in (0, 1)."""
        if s <= 0:
            raise ValueError(f"Series can only be evaluated at s > 0, got {s}")
        log_s = np.log(s)
        total = np.zeros(self.chart.resolution + self.value_shape)
        for (i, m), value in sorted(self._terms.items()):
            total = total + (s**i) * (log_s**m) * value
        return self._field(total)


def add(a: PhgSeries, b: PhgSeries) -> PhgSeries:
    """Termwise sum truncated at min(N_a, N_b)."""
    return a + b


def mul(a: PhgSeries, b: PhgSeries, subscripts: str) -> PhgSeries:
    """
    Graded product of two series.

    s^{i1} log^{m1} · s^{i2} log^{m2} contributes to s^{i1+i2} log^{m1+m2};
    terms above min(N_a, N_b) are dropped.

    Args:
        a: Left factor.
        b: Right factor.
        subscripts: Tensor-index contraction, e.g. ``",ab->ab"`` for scalar times tensor
            or ``"ab,bc->ac"`` for a matrix product.

    Returns:
        The product series.
    """
    if a.chart != b.chart or a.index_dim != b.index_dim:
        raise ValueError("Series factors live on different charts or index ranges")
    inputs, target = subscripts.split("->")
    left, right = inputs.split(",")
    if len(left) != a.rank or len(right) != b.rank:
        raise ValueError(f"Subscripts {subscripts!r} do not match ranks {a.rank} and {b.rank}")
    spec = f"...{left},...{right}->...{target}"
    order = min(a.order, b.order)
    result: Dict[Key, np.ndarray] = {}
    for (i1, m1), x in a._terms.items():
        for (i2, m2), y in b._terms.items():
            i = i1 + i2
            if i > order:
                continue
            key = (i, m1 + m2)
            product = np.einsum(spec, x, y)
            result[key] = result[key] + product if key in result else product
    log_cap = a.log_cap if a.log_cap == b.log_cap else None
    return PhgSeries(a.chart, len(target), order, result, a.index_dim, log_cap)


def mul_constant(a: PhgSeries, constant: np.ndarray, subscripts: str) -> PhgSeries:
    """Contract every coefficient with a constant tensor, e.g. ``"sl,smn->lmn"``."""
    inputs, target = subscripts.split("->")
    left, right = inputs.split(",")
    if len(left) != a.rank or len(right) != constant.ndim:
        raise ValueError(f"Subscripts {subscripts!r} do not match the operands")
    spec = f"...{left},{right}->...{target}"
    return a._like({key: np.einsum(spec, value, constant) for key, value in a._terms.items()}, rank=len(target))


def stack(parts: Sequence[PhgSeries]) -> PhgSeries:
    """Stack series of equal rank into one series with a new leading tensor index."""
    if not parts:
        raise ValueError("Nothing to stack")
    first = parts[0]
    for part in parts[1:]:
        first._check_compatible(part)
    if len(parts) != first.index_dim:
        raise ValueError(f"Stacking {len(parts)} series does not match the index range {first.index_dim}")
    keys = sorted({key for part in parts for key in part._terms})
    axis = len(first.chart.resolution)
    terms = {key: np.stack([part.components(*key) for part in parts], axis=axis) for key in keys}
    return PhgSeries(first.chart, first.rank + 1, min(p.order for p in parts), terms, first.index_dim, first.log_cap)


def s_dds(a: PhgSeries) -> PhgSeries:
    """
    Apply s∂_s termwise.

    s^i log^m c  ↦  i s^i log^m c + m s^i log^{m-1} c
    """
    result: Dict[Key, np.ndarray] = {}
    for (i, m), value in a._terms.items():
        contributions: Iterable[Tuple[Key, np.ndarray]] = [((i, m), i * value)]
        if m > 0:
            contributions = [((i, m), i * value), ((i, m - 1), m * value)]
        for key, part in contributions:
            result[key] = result[key] + part if key in result else part
    return a._like(result)


def frame_derivative(a: PhgSeries, axis: int) -> PhgSeries:
    """
    Apply the frame vector field s∂_{x} along a 0-based chart axis.

    s^i log^m c  ↦  s^{i+1} log^m ∂c, so the order rises by one and terms
    pushed above N are dropped.
    """
    terms = {(i + 1, m): spectral_derivative(value, a.chart, axis) for (i, m), value in a._terms.items() if i + 1 <= a.order}
    return a._like(terms)


def invert_metric_series(g: PhgSeries) -> PhgSeries:
    """
    Inverse of a rank-2 metric series.

    With g = g_0 + h, the inverse solves X = g_0^{-1} - g_0^{-1} h X; every
    fixed-point sweep fixes one more order because h starts at order one.

    Args:
        g: Rank-2 series whose order-0 coefficient is pointwise invertible.

    Returns:
        The symmetrized inverse series.
    """
    if g.rank != 2:
        raise ValueError("Only rank-2 series can be inverted")
    if any(i == 0 and m > 0 for (i, m) in g._terms):
        raise ValueError("Order-0 log terms make the leading block singular")
    leading = g.components(0, 0)
    try:
        leading_inverse = np.linalg.inv(leading)
    except np.linalg.LinAlgError as e:
        raise ValueError("Order-0 block of the metric series is singular") from e
    if not np.all(np.isfinite(leading_inverse)):
        raise ValueError("Order-0 block of the metric series is singular")

    base = g._like({(0, 0): leading_inverse})
    remainder = g._like({key: value for key, value in g._terms.items() if key != (0, 0)})
    step = mul(base, remainder, "ab,bc->ac")
    inverse = base
    for _ in range(g.order):
        inverse = base - mul(step, inverse, "ab,bc->ac")
    return inverse._like({key: 0.5 * (value + np.swapaxes(value, -1, -2)) for key, value in inverse._terms.items()})
