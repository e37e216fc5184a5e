"""
Expansion recursion module for fgwise.

This module provides the order-by-order construction of a truncated
Fefferman-Graham expansion

    g = s^{-2}(-ds² + g0 + Σ_{i,m} s^i log(s)^m h_{i,m})

of a solution to Ric(g) = n g from scattering data (g0, gn). At each order
the Einstein residual of the current truncated metric is split into the
4-splitting, the indicial equation is solved for the spatial slots, and the
metric is updated in block-diagonal form. For even n the order-n forcing
produces the log term and the obstruction tensor.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from fgwise.frame_calculus import Block4, BlockMetricSeries, einstein_residual, split4
from fgwise.grid_geometry import SpatialField, SpatialMetric, divergence, solve_divergence, trace
from fgwise.indicial import SolvabilityError, solve_order
from fgwise.phg_series import Key

logger = logging.getLogger(__name__)


class ParityError(ValueError):
    """Forcing at an order where parity forces the coefficient to vanish is not small."""

    def __init__(self, order: int, defect: float):
        self.order = order
        self.defect = defect
        super().__init__(f"Parity violation at order {order}: forcing norm {defect:.3e}")


@dataclass(frozen=True)
class Tolerances:
    """Absolute tolerances, scaled by the largest metric-coefficient norm before use."""

    compatibility: float = 1e-9
    parity: float = 1e-10
    zero_coefficient: float = 1e-12

    def scaled(self, factor: float) -> "Tolerances":
        return Tolerances(self.compatibility * factor, self.parity * factor, self.zero_coefficient * factor)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """
    Scattering data for the expansion.

    Attributes:
        g0: Boundary metric.
        gn: Free trace-free datum at order n.
        order: Truncation order N (at least n).
        tolerances: Tolerance ladder.
    """

    g0: SpatialMetric
    gn: SpatialField
    order: int
    tolerances: Tolerances = Tolerances()

    def __post_init__(self) -> None:
        if self.gn.rank != 2 or not self.gn.symmetric:
            raise ValueError("gn must be a symmetric rank-2 field")
        if self.gn.chart != self.g0.chart:
            raise ValueError("gn and g0 live on different charts")
        if self.order < self.n:
            raise ValueError(f"Truncation order {self.order} must be at least n = {self.n}")

    @property
    def n(self) -> int:
        return self.g0.n

    def scale(self) -> float:
        return max(1.0, self.g0.field.sup_norm(), self.gn.sup_norm())


@dataclass(frozen=True)
class BoundaryDefect:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance


@dataclass(frozen=True)
class OrderDiagnostics:
    """What happened while solving one (order, log level) slot."""

    order: int
    log_level: int
    forcing_norms: Tuple[float, float, float, float]
    compatibility_defects: Dict[str, float]
    action: str


@dataclass(frozen=True, eq=False)
class ExpansionResult:
    """
    Output of the recursion.

    Attributes:
        data: Input scattering data.
        coeffs: Spatial coefficients h_{i,m} for 1 <= i <= N.
        obstruction: Obstruction tensor (even n only).
        metric: Expanded block metric through order N.
        forcing: True-scale forcing of every solved slot.
        diagnostics: Per-slot diagnostics in solve order.
        divergence_correction: Trace-free tensor added to h_{n,0} to meet the even-n divergence condition.
        final_residual_norm: Largest residual coefficient at orders <= N.
    """

    data: BoundaryData
    coeffs: Dict[Key, SpatialField]
    obstruction: Optional[SpatialField]
    metric: BlockMetricSeries
    forcing: Dict[Key, Block4]
    diagnostics: List[OrderDiagnostics]
    divergence_correction: Optional[SpatialField]
    final_residual_norm: float

    @property
    def n(self) -> int:
        return self.data.n

    def coefficient(self, i: int, m: int = 0) -> SpatialField:
        return self.coeffs.get((i, m), SpatialField.zeros(self.data.g0.chart, 2, symmetric=True))

    def log_terms(self) -> Dict[Key, SpatialField]:
        return {key: value for key, value in self.coeffs.items() if key[1] > 0}

    @property
    def effective_gn(self) -> SpatialField:
        """The order-n datum actually expanded: gn plus any even-n divergence correction."""
        if self.divergence_correction is None:
            return self.data.gn
        return self.data.gn + self.divergence_correction


def validate_boundary_data(data: BoundaryData) -> List[BoundaryDefect]:
    """
    Report the trace, divergence and positivity defects of scattering data.

    Returns:
        One entry per check; the divergence defect is only reported for odd n.
    """
    tolerances = data.tolerances.scaled(data.scale())
    g0 = data.g0
    defects = [BoundaryDefect("trace", trace(g0, data.gn).sup_norm(), tolerances.compatibility)]
    if data.n % 2 == 1:
        defects.append(BoundaryDefect("divergence", divergence(g0, data.gn).sup_norm(), tolerances.compatibility))
    smallest = float(np.min(np.linalg.eigvalsh(g0.field.components)))
    # zero when positive definite
    defects.append(BoundaryDefect("positivity", max(0.0, -smallest), 0.0))
    return defects


class FeffermanGrahamExpander:
    """
    Order-by-order solver for the expansion.

    The metric is kept in block form (-1, 0, g0 + Σ s^i log^m h_{i,m}); each
    solve touches only the spatial block, which is the h = (0, 0, h3, h4)
    representative of the indicial equation.
    """

    def __init__(self, tolerances: Optional[Tolerances] = None, fix_even_divergence: bool = True, max_divergence_passes: int = 3):
        """
        Initialize the expander.

        Args:
            tolerances: Overrides the tolerances carried by the boundary data.
            fix_even_divergence: For even n, add the trace-free correction to h_{n,0} demanded by the
                order-(n+1) mixed equation instead of reporting it as a solvability violation.
            max_divergence_passes: Correction passes allowed before giving up.
        """
        if max_divergence_passes < 1:
            raise ValueError("max_divergence_passes must be at least 1")
        self.tolerances = tolerances
        self.fix_even_divergence = fix_even_divergence
        self.max_divergence_passes = max_divergence_passes

    def expand(self, data: BoundaryData) -> ExpansionResult:
        """
        Build the expansion through order N.

        Args:
            data: Scattering data.

        Returns:
            The expansion with diagnostics.

        Raises:
            ValueError: If gn is not trace-free.
            SolvabilityError: If some order's forcing is outside the indicial range.
            ParityError: If an odd-order forcing that must vanish does not.
        """
        if self.tolerances is not None:
            data = replace(data, tolerances=self.tolerances)
        n = data.n
        tol = data.tolerances.scaled(data.scale())
        for defect in validate_boundary_data(data):
            if defect.name == "divergence" and not defect.passed:
                logger.warning(f"gn has divergence defect {defect.value:.3e}; expect a solvability violation at order {n + 1}")
            elif not defect.passed:
                raise ValueError(f"Boundary data fails the {defect.name} check: {defect.value:.3e} > {defect.tolerance:.3e}")

        self._data = data
        self._tol = tol
        self._metric = BlockMetricSeries.de_sitter(data.g0, data.order, log_cap=n)
        self._coeffs: Dict[Key, SpatialField] = {}
        self._forcing: Dict[Key, Block4] = {}
        self._diagnostics: List[OrderDiagnostics] = []
        self._obstruction: Optional[SpatialField] = None
        self._correction: Optional[SpatialField] = None

        for order in range(1, data.order + 1):
            self._solve(order)

        residual = einstein_residual(self._metric, n)
        final_norm = residual.max_norm()
        logger.info(f"Expansion through order {data.order} done, largest residual coefficient {final_norm:.3e}")
        return ExpansionResult(
            data=data,
            coeffs=dict(sorted(self._coeffs.items())),
            obstruction=self._obstruction,
            metric=self._metric,
            forcing=dict(sorted(self._forcing.items())),
            diagnostics=list(self._diagnostics),
            divergence_correction=self._correction,
            final_residual_norm=final_norm,
        )

    def _forcing_at(self, order: int, log_level: int) -> Tuple[Block4, Block4]:
        """Residual coefficient and true-scale forcing at (order, log_level)."""
        residual = einstein_residual(self._metric.truncated(order), self._data.n)
        split = split4(residual.coefficient(order, log_level), self._data.g0)
        return split, -split

    def _add_coefficient(self, order: int, log_level: int, value: SpatialField) -> None:
        if value.sup_norm() == 0.0:
            return
        self._metric = self._metric.with_spatial_term(order, log_level, value)
        key = (order, log_level)
        self._coeffs[key] = self._coeffs[key] + value if key in self._coeffs else value

    def _record(self, order: int, log_level: int, forcing: Block4, defects: Dict[str, float], action: str) -> None:
        self._forcing[(order, log_level)] = forcing
        self._diagnostics.append(OrderDiagnostics(order, log_level, forcing.norms(), defects, action))
        logger.info(f"Order {order} log level {log_level}: {action}, forcing norms {forcing.norms()}")

    def _solve(self, order: int) -> None:
        n = self._data.n
        for log_level in range(order // n, -1, -1):
            _, forcing = self._forcing_at(order, log_level)
            if n % 2 == 0 and order == n + 1 and log_level == 0:
                forcing = self._meet_divergence_condition(forcing)

            parity_order = order % 2 == 1 and (order < n or n % 2 == 0)
            if parity_order:
                defect = forcing.sup_norm()
                if defect > self._tol.parity:
                    if forcing.h2.sup_norm() > self._tol.compatibility:
                        raise SolvabilityError(order, forcing.h2.sup_norm(), "f2")
                    raise ParityError(order, defect)
                self._record(order, log_level, forcing, {"parity": defect}, "parity")
                continue

            if forcing.sup_norm() <= self._tol.zero_coefficient and not (order == n and log_level == 0):
                self._record(order, log_level, forcing, {}, "negligible")
                continue
            if order == n and log_level > 0:
                raise SolvabilityError(order, forcing.sup_norm(), "forcing", f"Unexpected log-level {log_level} forcing at order {order}")

            if order == n:
                self._solve_boundary_order(forcing)
                continue

            result = solve_order(order, forcing, n, tolerance=self._tol.compatibility)
            update = result.h4 + SpatialField.symmetrized(self._data.g0.chart, result.h3.components[..., None, None] * self._data.g0.field.components)
            self._add_coefficient(order, log_level, update)
            self._record(order, log_level, forcing, result.compatibility_defects, "solved")

    def _solve_boundary_order(self, forcing: Block4) -> None:
        n = self._data.n
        g0 = self._data.g0
        if n % 2 == 0:
            self._obstruction = -forcing.h4
        result = solve_order(n, forcing, n, free_h4=self._data.gn, tolerance=self._tol.compatibility)
        update = result.h4 + SpatialField.symmetrized(g0.chart, result.h3.components[..., None, None] * g0.field.components)
        self._add_coefficient(n, 0, update)
        if result.log_h4 is not None and result.log_h4.sup_norm() > self._tol.zero_coefficient:
            self._add_coefficient(n, 1, result.log_h4)
        self._record(n, 0, forcing, result.compatibility_defects, "boundary order")

    def _meet_divergence_condition(self, forcing: Block4) -> Block4:
        """
        Correct h_{n,0} so that the order-(n+1) mixed forcing vanishes.

        A trace-free order-n coefficient c changes the mixed residual at order
        n + 1 by -(n/2) δ_{g0} c and leaves order n untouched.
        """
        n = self._data.n
        g0 = self._data.g0
        passes = 0
        while self.fix_even_divergence and forcing.h2.sup_norm() > self._tol.compatibility and passes < self.max_divergence_passes:
            correction = solve_divergence(g0, forcing.h2 * (-2.0 / n))
            logger.warning(
                f"Divergence pass {passes + 1}: gn changed by {correction.sup_norm():.3e} to cancel mixed forcing {forcing.h2.sup_norm():.3e} at order {n + 1}"
            )
            self._add_coefficient(n, 0, correction)
            self._correction = correction if self._correction is None else self._correction + correction
            _, forcing = self._forcing_at(n + 1, 0)
            passes += 1
        return forcing


def expand(data: BoundaryData, fix_even_divergence: bool = True) -> ExpansionResult:
    """
    Expand scattering data with default engine settings.

    Args:
        data: Scattering data.
        fix_even_divergence: See ``FeffermanGrahamExpander``.

    Returns:
        The expansion result.
    """
    return FeffermanGrahamExpander(fix_even_divergence=fix_even_divergence).expand(data)


def obstruction_tensor(g0: SpatialMetric, n: int, tolerances: Optional[Tolerances] = None) -> SpatialField:
    """
    Obstruction tensor of a boundary metric in even dimension.

    Normalized as the trace-free part of the order-n tangential Einstein
    residual of the expansion with gn = 0.
    """
    if n % 2 != 0 or n < 4:
        raise ValueError(f"The obstruction tensor is defined for even n >= 4, got {n}")
    if g0.n != n:
        raise ValueError(f"Boundary metric has dimension {g0.n}, expected {n}")
    data = BoundaryData(g0, SpatialField.zeros(g0.chart, 2, symmetric=True), n, tolerances or Tolerances())
    result = FeffermanGrahamExpander().expand(data)
    assert result.obstruction is not None
    return result.obstruction
