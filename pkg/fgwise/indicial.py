"""
Indicial algebra module for fgwise.

This module provides the indicial families of the linearized Einstein
operator and of the gauge-fixed operator as exact λ-polynomial matrices
acting on the 4-component splitting (h1, h2, h3, h4), together with their
roots, the exact composition identities between them, and the order-λ
solve used by the expansion recursion.

Matrices follow the displayed normalization: ``ricci_indicial(n)`` is
2·I(DRic - Λ, λ) and ``ricci_indicial_derivative(n)`` is 2·∂_λ I. The
solve works with the true operator I = ½·ricci_indicial.

Operator blocks written in the 3-component splitting (scalar, one-form,
spatial 2-tensor) are translated into the 4-splitting with the rules
tr_{g0} ↦ n on the h3 slot, multiplication by g0 ↦ the h3 slot, and
a·I + b·g0 tr_{g0} ↦ (a + n b) on h3 and a on h4.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import sympy

from fgwise.frame_calculus import Block4
from fgwise.grid_geometry import SpatialField

logger = logging.getLogger(__name__)

LAMBDA = sympy.Symbol("lambda")

Number = Union[int, Fraction, sympy.Rational]


class SolvabilityError(ValueError):
    """Forcing outside the range of the indicial operator at some order."""

    def __init__(self, order: Number, defect: float, kind: str, message: Optional[str] = None):
        self.order = order
        self.defect = defect
        self.kind = kind
        super().__init__(message or f"Solvability violation at order {order}: {kind} defect {defect:.3e}")


@dataclass(frozen=True)
class LambdaMatrix:
    """
    Matrix with entries polynomial in λ and exact rational coefficients.

    Wraps an immutable sympy matrix; all algebra stays exact.
    """

    matrix: sympy.ImmutableMatrix

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[object]]) -> "LambdaMatrix":
        return cls(sympy.ImmutableMatrix([[sympy.sympify(entry) for entry in row] for row in rows]))

    @property
    def rows(self) -> int:
        return int(self.matrix.rows)

    @property
    def cols(self) -> int:
        return int(self.matrix.cols)

    def __matmul__(self, other: "LambdaMatrix") -> "LambdaMatrix":
        return LambdaMatrix(sympy.ImmutableMatrix((self.matrix * other.matrix).applyfunc(sympy.expand)))

    def __add__(self, other: "LambdaMatrix") -> "LambdaMatrix":
        return LambdaMatrix(sympy.ImmutableMatrix((self.matrix + other.matrix).applyfunc(sympy.expand)))

    def __sub__(self, other: "LambdaMatrix") -> "LambdaMatrix":
        return LambdaMatrix(sympy.ImmutableMatrix((self.matrix - other.matrix).applyfunc(sympy.expand)))

    def __mul__(self, factor: object) -> "LambdaMatrix":
        return LambdaMatrix(sympy.ImmutableMatrix((self.matrix * sympy.sympify(factor)).applyfunc(sympy.expand)))

    __rmul__ = __mul__

    def __neg__(self) -> "LambdaMatrix":
        return self * -1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LambdaMatrix):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and (self - other).is_zero()

    def __hash__(self) -> int:
        return hash(self.matrix)

    def is_zero(self) -> bool:
        return all(sympy.expand(entry) == 0 for entry in self.matrix)

    def at(self, lam: Number) -> sympy.Matrix:
        """Exact evaluation at a rational λ."""
        return self.matrix.subs(LAMBDA, sympy.Rational(str(lam)))

    def as_float(self, lam: Number) -> np.ndarray:
        return np.array(self.at(lam).tolist(), dtype=np.float64)

    def derivative(self, times: int = 1) -> "LambdaMatrix":
        return LambdaMatrix(sympy.ImmutableMatrix(self.matrix.diff(LAMBDA, times)))

    def det(self) -> sympy.Expr:
        return sympy.expand(self.matrix.det(method="berkowitz"))

    def degree(self) -> int:
        degrees = [sympy.Poly(entry, LAMBDA).degree() for entry in self.matrix if entry != 0]
        return max(degrees, default=0)

    def rank_at(self, lam: Number) -> int:
        return int(self.at(lam).rank())

    def kernel_at(self, lam: Number) -> List[sympy.Matrix]:
        return list(self.at(lam).nullspace())

    def column_space_at(self, lam: Number) -> List[sympy.Matrix]:
        return list(self.at(lam).columnspace())


def _check_dimension(n: int) -> None:
    if n < 3:
        raise ValueError(f"Indicial families need n >= 3, got {n}")


def ricci_indicial(n: int) -> LambdaMatrix:
    """2·I(DRic - Λ, λ) in the 4-splitting."""
    _check_dimension(n)
    lam = LAMBDA
    return LambdaMatrix.from_rows(
        [
            [n * (lam - 2), 0, -n * lam * (lam - 2), 0],
            [0, 0, 0, 0],
            [-lam + 2 * n, 0, lam * (lam - 2 * n), 0],
            [0, 0, 0, lam * (lam - n)],
        ]
    )


def ricci_indicial_derivative(n: int) -> LambdaMatrix:
    """2·∂_λ I(DRic - Λ, λ)."""
    _check_dimension(n)
    lam = LAMBDA
    return LambdaMatrix.from_rows(
        [
            [n, 0, -2 * n * lam + 2 * n, 0],
            [0, 0, 0, 0],
            [-1, 0, 2 * lam - n, 0],
            [0, 0, 0, 2 * lam - n],
        ]
    )


def deltastar_indicial() -> LambdaMatrix:
    """I(δ*, λ): one-forms (ω0, ω) into the 4-splitting."""
    lam = LAMBDA
    return LambdaMatrix.from_rows([[lam, 0], [0, (lam + 1) / sympy.Integer(2)], [1, 0], [0, 0]])


def deltaG_indicial(n: int) -> LambdaMatrix:
    """I(δG, λ), the indicial family of the linearized Bianchi operator."""
    _check_dimension(n)
    lam = LAMBDA
    half = sympy.Rational(1, 2)
    return LambdaMatrix.from_rows([[half * (lam - 2 * n), 0, half * n * (lam - 2), 0], [0, lam - (n + 1), 0, 0]])


def gauged_indicial(n: int) -> LambdaMatrix:
    """Indicial family of the constraint-damped gauge-fixed Einstein operator."""
    _check_dimension(n)
    lam = LAMBDA
    base = LambdaMatrix.from_rows(
        [
            [-4 * lam + 2 * (n + 2), 0, 2 * n * (lam - 2), 0],
            [0, -4 * lam + 3 * (n + 1), 0, 0],
            [-2, 0, 2 * n, 0],
            [0, 0, 0, 0],
        ]
    )
    return base + _identity(4) * (lam**2 - n * lam)


def gauge_propagation_indicial(n: int) -> LambdaMatrix:
    """Indicial family of the gauge propagation operator on one-forms."""
    _check_dimension(n)
    lam = LAMBDA
    half = sympy.Rational(-1, 2)
    return LambdaMatrix.from_rows([[half * (lam - 2) * (lam - n), 0], [0, half * (lam + 1) * (lam - (n + 1))]])


def _identity(size: int) -> LambdaMatrix:
    return LambdaMatrix(sympy.ImmutableMatrix(sympy.eye(size)))


# Building blocks of the gauge-fixed operator


def wave_indicial(n: int) -> LambdaMatrix:
    """Tensor wave operator □ on symmetric 2-tensors."""
    _check_dimension(n)
    lam = LAMBDA
    base = LambdaMatrix.from_rows(
        [
            [-2 * n, 0, -2 * n, 0],
            [0, -(n + 3), 0, 0],
            [-2, 0, -2, 0],
            [0, 0, 0, -2],
        ]
    )
    return base + _identity(4) * (lam**2 - n * lam)


def einstein_trace_indicial(n: int) -> LambdaMatrix:
    """Trace reversal G = 1 - ½ g tr_g."""
    _check_dimension(n)
    half = sympy.Rational(1, 2)
    return LambdaMatrix.from_rows(
        [
            [half, 0, half * n, 0],
            [0, 1, 0, 0],
            [half, 0, 1 - half * n, 0],
            [0, 0, 0, 1],
        ]
    )


def curvature_indicial(n: int) -> LambdaMatrix:
    """Zeroth-order curvature term 𝓡 of the linearized Ricci operator."""
    _check_dimension(n)
    return LambdaMatrix.from_rows(
        [
            [n, 0, n, 0],
            [0, n + 1, 0, 0],
            [1, 0, 1, 0],
            [0, 0, 0, n + 1],
        ]
    )


def divergence_indicial(n: int) -> LambdaMatrix:
    """Divergence δ from symmetric 2-tensors to one-forms."""
    _check_dimension(n)
    lam = LAMBDA
    return LambdaMatrix.from_rows([[lam - n, 0, -n, 0], [0, lam - (n + 1), 0, 0]])


def gauge_e_indicial(n: int) -> LambdaMatrix:
    """Constraint-damping modification E."""
    _check_dimension(n)
    return LambdaMatrix.from_rows([[1, 0, -2 * n, 0], [0, 0, 0, 0]])


def gauge_etilde_indicial() -> LambdaMatrix:
    return LambdaMatrix.from_rows([[-2, 0], [0, -2], [0, 0], [0, 0]])


def deltastar_tilde_indicial() -> LambdaMatrix:
    """Modified symmetric gradient δ̃*."""
    lam = LAMBDA
    return LambdaMatrix.from_rows([[lam - 2, 0], [0, (lam - 3) / sympy.Integer(2)], [1, 0], [0, 0]])


def assembled_gauged_indicial(n: int) -> LambdaMatrix:
    """□ - 2Λ + 2ẼδG + 2𝓡 - 2δ̃*E with Λ = n."""
    delta_g = divergence_indicial(n) @ einstein_trace_indicial(n)
    return (
        wave_indicial(n)
        - _identity(4) * (2 * n)
        + (gauge_etilde_indicial() @ delta_g) * 2
        + curvature_indicial(n) * 2
        - (deltastar_tilde_indicial() @ gauge_e_indicial(n)) * 2
    )


def assembled_ricci_indicial(n: int) -> LambdaMatrix:
    """2·I(DRic - Λ) from □ - 2δ*δG + 2𝓡 - 2Λ."""
    delta_g = divergence_indicial(n) @ einstein_trace_indicial(n)
    return wave_indicial(n) - (deltastar_indicial() @ delta_g) * 2 + curvature_indicial(n) * 2 - _identity(4) * (2 * n)


def assembled_gauge_propagation(n: int) -> LambdaMatrix:
    """(-δG + E) δ*."""
    delta_g = divergence_indicial(n) @ einstein_trace_indicial(n)
    return (gauge_e_indicial(n) - delta_g) @ deltastar_indicial()


def indicial_roots(n: int) -> List[sympy.Rational]:
    """Roots of det gauged_indicial(n), listed with multiplicity in increasing order."""
    poly = sympy.Poly(gauged_indicial(n).det(), LAMBDA)
    roots = sympy.roots(poly)
    if sum(roots.values()) != poly.degree():
        raise ValueError(f"Could not find all indicial roots for n={n}")
    return sorted((sympy.Rational(root) for root, count in roots.items() for _ in range(count)), key=float)


def gauge_propagation_roots(n: int) -> List[sympy.Rational]:
    poly = sympy.Poly(gauge_propagation_indicial(n).det(), LAMBDA)
    return sorted((sympy.Rational(root) for root, count in sympy.roots(poly).items() for _ in range(count)), key=float)


def log_series_action(matrix: LambdaMatrix, lam: Number, levels: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    Apply an indicial family to Σ_m s^λ log(s)^m h_m.

    The s^λ log(s)^k coefficient of the image is
    Σ_{j≥0} C(k+j, j) ∂_λ^j I(λ) h_{k+j}.

    Args:
        matrix: Indicial family.
        lam: Exponent λ.
        levels: Slot vectors h_m, each of shape (..., cols).

    Returns:
        Image coefficients per log level, each of shape (..., rows).
    """
    derivatives = [matrix.derivative(j).as_float(lam) if j else matrix.as_float(lam) for j in range(len(levels))]
    result = []
    for k in range(len(levels)):
        total = np.zeros(np.shape(levels[k])[:-1] + (matrix.rows,))
        for j in range(len(levels) - k):
            total = total + comb(k + j, j) * np.einsum("ab,...b->...a", derivatives[j], levels[k + j])
        result.append(total)
    return result


@dataclass(frozen=True, eq=False)
class OrderSolveResult:
    """Spatial update s^λ(h3·g0 + h4) (+ s^λ log(s) log_h4) solving one order."""

    h3: SpatialField
    h4: SpatialField
    log_h4: Optional[SpatialField]
    compatibility_defects: Dict[str, float]


def solve_order(lam: Number, f: Block4, n: int, free_h4: Optional[SpatialField] = None, tolerance: float = 1e-9) -> OrderSolveResult:
    """
    Solve I(DRic - Λ, λ)(0, 0, h3, h4) = f for the spatial slots.

    At generic λ the h3 slot comes from whichever of rows 1 and 3 has the
    larger denominator and the other row is checked. At λ = n the h4 slot is
    free: for even n its forcing is absorbed by a log term, for odd n the
    forcing must vanish altogether.

    Args:
        lam: Positive rational exponent.
        f: True-scale forcing, i.e. minus the split residual coefficient.
        n: Spatial dimension.
        free_h4: Trace-free datum for the h4 slot at λ = n.
        tolerance: Largest acceptable compatibility defect (absolute sup-norm).

    Returns:
        The solution and its compatibility defects.

    Raises:
        SolvabilityError: If a compatibility defect exceeds the tolerance.
    """
    _check_dimension(n)
    lam = Fraction(str(lam))
    if lam <= 0:
        raise ValueError(f"Order must be positive, got {lam}")
    chart = f.h1.chart
    x = float(lam)

    f1, f2, f3, f4 = (f.h1.components, f.h2.components, f.h3.components, f.h4.components)
    defects: Dict[str, float] = {
        "f2": float(np.max(np.abs(f2))) if f2.size else 0.0,
        "kernel": float(np.max(np.abs((x - 2 * n) * f1 + n * (x - 2) * f3))),
    }
    log_h4: Optional[SpatialField] = None
    zero_tf = SpatialField.zeros(chart, 2, symmetric=True)

    if lam == n:
        h4 = free_h4 if free_h4 is not None else zero_tf
        if n % 2 == 0:
            h3 = -2.0 * f1 / (n * n * (n - 2))
            defects["row-consistency"] = float(np.max(np.abs(f3 + 0.5 * n * n * h3)))
            log_h4 = SpatialField.symmetrized(chart, (2.0 / n) * f4)
        else:
            h3 = np.zeros_like(f1)
            defects["forcing"] = f.sup_norm()
    else:
        h4 = SpatialField.symmetrized(chart, 2.0 * f4 / (x * (x - n)))
        row1 = -0.5 * n * x * (x - 2)
        row3 = 0.5 * x * (x - 2 * n)
        if abs(row1) >= abs(row3):
            h3 = f1 / row1
            defects["row-consistency"] = float(np.max(np.abs(f3 - row3 * h3)))
        else:
            h3 = f3 / row3
            defects["row-consistency"] = float(np.max(np.abs(f1 - row1 * h3)))

    for kind, defect in defects.items():
        if defect > tolerance:
            raise SolvabilityError(lam, defect, kind)
    logger.debug(f"Solved order {lam}: defects {defects}")
    return OrderSolveResult(h3=SpatialField(chart, 0, h3), h4=h4, log_h4=log_h4, compatibility_defects=defects)
