#!/usr/bin/env python3
"""
Demonstration of truncated Fefferman-Graham expansions.

This script shows the indicial roots, an odd-dimensional expansion with
transverse-traceless data, and the log term and obstruction tensor that
appear in even dimension.
"""

import numpy as np

from fgwise.data_sources import FourierMode, build_boundary_metric, build_symmetric_field
from fgwise.fg_recursion import BoundaryData, expand, obstruction_tensor
from fgwise.grid_geometry import Chart, SpatialField, divergence, tt_part
from fgwise.indicial import gauge_propagation_roots, indicial_roots


def demo_indicial_roots():
    """Print the indicial roots of the gauged Einstein operator."""
    print("=== Indicial Roots ===")
    for n in (3, 4, 5):
        roots = [str(root) for root in indicial_roots(n)]
        propagation = [str(root) for root in gauge_propagation_roots(n)]
        print(f"n={n}: gauged roots {roots}, gauge propagation roots {propagation}")
    print()


def demo_odd_expansion():
    """Expand TT scattering data in n = 3."""
    print("=== Odd Dimension (n = 3) ===")
    chart = Chart(3, (8, 1, 1))
    g0 = build_boundary_metric(chart, [])
    sine = -np.pi / 2
    raw = build_symmetric_field(
        chart,
        [
            FourierMode((1, 1), (1, 0, 0), 0.01, sine),
            FourierMode((2, 2), (1, 0, 0), -0.01, sine),
        ],
    )
    print(f"Raw datum divergence: {divergence(g0, raw).sup_norm():.3e}")
    gn = tt_part(g0, raw)
    print(f"TT datum divergence: {divergence(g0, gn).sup_norm():.3e}")

    result = expand(BoundaryData(g0, gn, order=6))
    for (i, m), coeff in result.coeffs.items():
        print(f"  h[{i},{m}] sup-norm {coeff.sup_norm():.3e}")
    print(f"Largest residual coefficient through order 6: {result.final_residual_norm:.3e}")
    print()


def demo_even_obstruction():
    """Show the log term and the obstruction tensor in n = 4."""
    print("=== Even Dimension (n = 4) ===")
    chart = Chart(4, (16, 1, 1, 1))
    for epsilon in (1e-3, 2e-3):
        g0 = build_boundary_metric(chart, [FourierMode((2, 2), (1, 0, 0, 0), epsilon, -np.pi / 2)])
        obstruction = obstruction_tensor(g0, 4)
        print(f"epsilon={epsilon}: obstruction norm {obstruction.sup_norm():.3e}")

    result = expand(BoundaryData(g0, SpatialField.zeros(chart, 2, symmetric=True), order=5))
    for (i, m), coeff in result.log_terms().items():
        print(f"  log term h[{i},{m}] sup-norm {coeff.sup_norm():.3e}")
    print()


if __name__ == "__main__":
    print("Fefferman-Graham Expansion Demonstration")
    print("=" * 50)
    print()

    try:
        demo_indicial_roots()
        demo_odd_expansion()
        demo_even_obstruction()

        print("All demos completed successfully!")

    except Exception as e:
        print(f"Demo failed with error: {e}")
        import traceback

        traceback.print_exc()
