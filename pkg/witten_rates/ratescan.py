"""
Temperature scans of the spectral gap and Arrhenius-plot fits
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.sparse.linalg import norm as sparse_norm
from scipy.stats import linregress

from witten_rates.grid_operator import AssembledOperator, assemble_schrodinger, build_grid
from witten_rates.potential import PotentialSpec, evaluate
from witten_rates.semiclassics import CSV_COLUMNS, RateEstimates, estimate_rates
from witten_rates.spectrum import WellPartition, lowest_eigenpairs, spectral_gap
from witten_rates.utils.exceptions import (
    ConfigError,
    ConvergenceError,
    DomainError,
    PartitionError,
    SemiclassicalError,
)
from witten_rates.utils.io import write_csv
from witten_rates.witten import WittenContext

logger = logging.getLogger(__name__)

# the gap must exceed the eigenvalue resolution floor by this factor
FLOOR_FACTOR = 1e3

# asymptotic power of beta in each estimator's prefactor
PREFACTOR_POWERS = {
    "E1_numeric": 1.0,
    "E1_wkb": 1.0,
    "E1_arrhenius": 1.0,
    "E1_surface": 1.0,
    "E1_eyring": 0.0,
}


@dataclass(frozen=True)
class GridPolicy:
    """
    Grid used at each beta: n = max(n_min, points_per_barrier * beta * dU), made odd

    An odd node count puts a node at the centre of a symmetric domain.
    """

    lo: float
    hi: float
    n_min: int = 1599
    points_per_barrier: int = 200
    stencil: str = "factorized"

    def nodes_for(self, beta: float, delta_u: float) -> int:
        n = max(self.n_min, int(math.ceil(self.points_per_barrier * beta * max(delta_u, 0.0))))
        return n if n % 2 == 1 else n + 1


@dataclass(frozen=True, eq=False)
class ScanTable:
    """Rows of rate estimates ordered by beta"""

    rows: List[RateEstimates]
    grid_policy: GridPolicy
    potential: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.rows], columns=list(CSV_COLUMNS.values()))


@dataclass(frozen=True)
class ArrheniusFit:
    """Linear fit of ln(rate) - m ln(beta) on beta"""

    column: str
    slope: float
    intercept: float
    r_squared: float
    prefactor_power: float
    points: int

    @property
    def implied_barrier(self) -> float:
        """-slope, the barrier height the fit implies"""
        return -self.slope

    @property
    def applicable(self) -> bool:
        """Rates decreasing with beta"""
        return self.slope < 0


def discretization_floor(op: AssembledOperator) -> float:
    """
    Eigenvalue resolution floor eps * ||M||_1 of the assembled matrix

    On the quadratic calibration the factorized |E0| stays at this level; gaps
    within FLOOR_FACTOR of it are rounding rather than tunnelling.
    """
    return float(np.finfo(float).eps * sparse_norm(op.symmetric_form(), 1))


def _nan_row(beta: float, delta_u: float) -> RateEstimates:
    nan = float("nan")
    return RateEstimates(beta=beta, e1_numeric=nan, e1_wkb=nan, e1_arrhenius=nan, e1_eyring=nan,
                         e1_surface=nan, delta_u=delta_u, f0=nan, f1=nan, p0=nan, vol=nan,
                         converged=False)


def _scan_row(spec: PotentialSpec, beta: float, partition: Optional[WellPartition],
              policy: GridPolicy, delta_u: float) -> RateEstimates:
    ctx = WittenContext(spec, beta)
    grid = build_grid(policy.lo, policy.hi, policy.nodes_for(beta, delta_u), spec.dimension)
    op = assemble_schrodinger(ctx, grid, stencil=policy.stencil)
    try:
        result = lowest_eigenpairs(op, 2)
        gap = spectral_gap(result)
    except ConvergenceError as e:
        logger.warning(f"Unconverged eigensolve at beta={beta} (best residual {e.best_residual:.2e})")
        return _nan_row(beta, delta_u)

    floor = discretization_floor(op)
    if gap.value < FLOOR_FACTOR * floor:
        logger.warning(f"E1={gap.value:.3e} at beta={beta} is within {FLOOR_FACTOR:g}x of the "
                       f"discretization floor {floor:.3e}; refine the grid or shrink the domain")

    if partition is None:
        nan = float("nan")
        row = RateEstimates(beta=beta, e1_numeric=gap.value, e1_wkb=nan, e1_arrhenius=nan,
                            e1_eyring=nan, e1_surface=nan, delta_u=delta_u, f0=nan, f1=nan,
                            p0=nan, vol=nan, converged=True)
    else:
        try:
            row = estimate_rates(ctx, grid, result, partition)
        except (ConfigError, DomainError, PartitionError, SemiclassicalError) as e:
            logger.warning(f"Rate estimates unavailable at beta={beta}: {e}")
            row = replace(_nan_row(beta, delta_u), e1_numeric=gap.value,
                          converged=bool(np.all(result.converged[:2])))
    logger.info(f"beta={beta:g}: n={grid.n}, E1={row.e1_numeric:.6e}")
    return row


def beta_scan(spec: PotentialSpec, betas: Sequence[float], partition: Optional[WellPartition],
              grid_policy: GridPolicy, threads: int = 1) -> ScanTable:
    """
    Rate estimates over a list of inverse temperatures

    Rows are independent and may run in parallel; the table is ordered by beta
    regardless of completion order. Unconverged rows are kept with NaN entries
    and converged = False.

    Args:
        spec: Potential
        betas: Distinct positive inverse temperatures
        partition: Double-well partition, or None for numeric gaps only
        grid_policy: Grid selection per beta
        threads: Worker threads

    Returns:
        ScanTable
    """
    values = sorted(float(b) for b in betas)
    if not values:
        raise ConfigError("beta_scan needs at least one beta")
    if any(not (b > 0 and math.isfinite(b)) for b in values):
        raise ConfigError(f"All betas must be finite and > 0, got {values}")
    if len(set(values)) != len(values):
        raise ConfigError(f"Duplicate betas in {values}")
    if len(values) < 2:
        logger.warning("A single beta cannot be fitted")

    delta_u = 0.0
    if partition is not None:
        delta_u = float(evaluate(spec, partition.barrier_x) - evaluate(spec, partition.well_minimum))

    logger.info(f"Scanning {len(values)} betas with {threads} thread(s)")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda b: _scan_row(spec, b, partition, grid_policy, delta_u), values))
    return ScanTable(rows=rows, grid_policy=grid_policy, potential=spec.metadata())


def arrhenius_fit(table: ScanTable, column: str = "E1_numeric", prefactor_power: float = 0.0) -> ArrheniusFit:
    """
    Least-squares fit of ln(rate) - m ln(beta) against beta

    m = 0 is the plain Arrhenius plot; m = 1 removes a prefactor linear in
    beta. Unconverged and non-positive entries are excluded.

    Raises:
        ConfigError: Unknown column or fewer than two usable rows
    """
    frame = table.to_frame()
    if column not in frame.columns or column in ("beta", "converged"):
        raise ConfigError(f"Unknown estimator column {column!r}")
    usable = frame[frame["converged"].astype(bool) & (frame[column] > 0)]
    usable = usable[np.isfinite(usable[column])]
    if len(usable) < 2:
        raise ConfigError(f"Arrhenius fit of {column} needs >= 2 usable rows, got {len(usable)}")

    beta = usable["beta"].to_numpy(dtype=float)
    y = np.log(usable[column].to_numpy(dtype=float)) - prefactor_power * np.log(beta)
    fit = linregress(beta, y)
    result = ArrheniusFit(column=column, slope=float(fit.slope), intercept=float(fit.intercept),
                          r_squared=float(fit.rvalue ** 2), prefactor_power=prefactor_power,
                          points=len(usable))
    if not result.applicable:
        logger.warning(f"{column} does not decrease with beta (slope {result.slope:.4g}); "
                       f"the Arrhenius formula is not applicable")
    return result


def fit_all(table: ScanTable, powers: Optional[Dict[str, float]] = None) -> List[ArrheniusFit]:
    """Fit every estimator column with enough usable rows"""
    chosen = dict(PREFACTOR_POWERS)
    chosen.update(powers or {})
    fits = []
    for column, power in chosen.items():
        try:
            fits.append(arrhenius_fit(table, column, prefactor_power=power))
        except ConfigError as e:
            logger.debug(f"Skipping fit of {column}: {e}")
    return fits


def write_scan(table: ScanTable, path: Union[str, Path]) -> Path:
    """The scan table in its fixed column order"""
    return write_csv(table.to_frame(), path)


def write_fits(fits: Sequence[ArrheniusFit], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame([{
        "column": f.column,
        "prefactor_power": f.prefactor_power,
        "slope": f.slope,
        "intercept": f.intercept,
        "r_squared": f.r_squared,
        "implied_deltaU": f.implied_barrier,
        "points": f.points,
    } for f in fits])
    return write_csv(frame, path)
