#!/usr/bin/env python3
"""
Example usage of witten_rates
Demonstrates the library API without run files
"""

import logging

from witten_rates.evolution import default_time_step, evolve, gaussian_bump, relaxation_rate
from witten_rates.grid_operator import assemble_fokker_planck, assemble_schrodinger, build_grid
from witten_rates.potential import Quadratic, QuarticDoubleWell, Region
from witten_rates.ratescan import GridPolicy, beta_scan, fit_all
from witten_rates.semiclassics import estimate_rates, rate_summary
from witten_rates.spectrum import (
    eigenvalue_table,
    lowest_eigenpairs,
    partition_from_critical_points,
    spectral_gap,
)
from witten_rates.witten import WittenContext

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def _banner(title: str):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60 + "\n")


def example_1_quadratic_spectrum():
    """Example 1: Harmonic ladder E_n = 2 alpha beta n"""
    _banner("Example 1: Quadratic potential spectrum")

    ctx = WittenContext(Quadratic(alpha=1.0), beta=2.0)
    grid = build_grid(-8.0, 8.0, 1599)
    result = lowest_eigenpairs(assemble_schrodinger(ctx, grid), 4)
    for line in eigenvalue_table(result):
        print(line)


def example_2_quartic_rates():
    """Example 2: Every E1 estimate for the quartic double well"""
    _banner("Example 2: Quartic double-well rate estimates")

    spec = QuarticDoubleWell(h=1.0, a=1.0)
    grid = build_grid(-3.0, 3.0, 1599)
    partition = partition_from_critical_points(spec, Region(grid.lo, grid.hi))
    ctx = WittenContext(spec, beta=10.0)
    result = lowest_eigenpairs(assemble_schrodinger(ctx, grid), 2)
    for line in rate_summary(estimate_rates(ctx, grid, result, partition)):
        print(line)


def example_3_arrhenius_fit():
    """Example 3: Barrier height from the slope of ln E1 against beta"""
    _banner("Example 3: Arrhenius-plot regression")

    spec = QuarticDoubleWell(h=1.0, a=1.0)
    partition = partition_from_critical_points(spec, Region(-3.0, 3.0))
    table = beta_scan(spec, [6.0, 8.0, 10.0, 12.0], partition, GridPolicy(lo=-3.0, hi=3.0), threads=2)
    for fit in fit_all(table):
        print(f"{fit.column:<13} implied dU = {fit.implied_barrier:.4f}  (r^2 = {fit.r_squared:.6f})")


def example_4_relaxation():
    """Example 4: Fokker-Planck relaxation at rate E1"""
    _banner("Example 4: Fokker-Planck relaxation")

    ctx = WittenContext(QuarticDoubleWell(h=1.0, a=1.0), beta=6.0)
    grid = build_grid(-2.5, 2.5, 799)
    op = assemble_fokker_planck(ctx, grid)
    e1 = spectral_gap(lowest_eigenpairs(op, 2)).value
    dt, horizon = default_time_step(e1)

    trace = evolve(op, gaussian_bump(grid, -1.0, 0.1), dt, horizon)
    fit = relaxation_rate(trace, (5.0 / e1, 15.0 / e1))
    print(f"E1 (eigensolver)       = {e1:.6e}")
    print(f"fitted relaxation rate = {fit.rate:.6e}")
    print(f"final distance         = {trace.distance[-1]:.3e}")


if __name__ == "__main__":
    _banner("witten_rates - Examples")

    try:
        example_1_quadratic_spectrum()
        example_2_quartic_rates()
        example_3_arrhenius_fit()
        example_4_relaxation()

        print("\nAll examples completed successfully!")

    except Exception as e:
        logger.error(f"Error running examples: {str(e)}", exc_info=True)
