"""
Lowest eigenpairs, spectral gap, theta-profile and the surface formula for E1
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.sparse.linalg import norm as sparse_norm

from witten_rates.grid_operator import AssembledOperator, Grid
from witten_rates.potential import (
    CriticalKind,
    PotentialSpec,
    Region,
    critical_points,
    evaluate,
)
from witten_rates.utils.config import Config
from witten_rates.utils.exceptions import ConfigError, ConvergenceError, PartitionError
from witten_rates.utils.io import write_csv
from witten_rates.witten import WittenContext, ground_state

logger = logging.getLogger(__name__)

# shift-invert target below the (nonnegative) spectrum of H
SHIFT = -1.0
THETA_SAMPLES = 4001
MIN_OVERLAP = 1e-300


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Lowest eigenpairs in ascending order; eigenvectors are unit-norm columns"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)


@dataclass(frozen=True)
class SpectralGap:
    """E1 - E0 with both levels"""

    e0: float
    e1: float

    @property
    def value(self) -> float:
        return self.e1 - self.e0


@dataclass(frozen=True)
class WellPartition:
    """
    Splitting of a double well at the barrier top

    `well_region` is the basin G used by the surface formula and the
    semiclassical prefactors; x_left < barrier_x < x_right are the two
    minima and the maximum between them.
    """

    barrier_x: float
    well_region: Region
    x_left: float
    x_right: float
    other_region: Optional[Region] = None

    def __post_init__(self):
        if not self.x_left < self.barrier_x < self.x_right:
            raise PartitionError(
                f"Partition needs x_left < barrier_x < x_right, got "
                f"{self.x_left}, {self.barrier_x}, {self.x_right}"
            )
        if not (self.well_region.hi <= self.barrier_x or self.well_region.lo >= self.barrier_x):
            raise PartitionError(
                f"Well region [{self.well_region.lo}, {self.well_region.hi}] straddles "
                f"the barrier at {self.barrier_x}"
            )
        if self.other_region is not None and self.other_region.overlaps(self.well_region):
            raise PartitionError("Well regions overlap")

    @property
    def well_is_left(self) -> bool:
        return self.well_region.hi <= self.barrier_x

    @property
    def well_minimum(self) -> float:
        return self.x_left if self.well_is_left else self.x_right

    @property
    def outward_normal(self) -> int:
        """Sign of the outward normal of the well region at the barrier"""
        return 1 if self.well_is_left else -1


def align_sign(v: np.ndarray, grid: Grid, x_left: Optional[float] = None) -> np.ndarray:
    """
    Fix the arbitrary eigenvector sign

    With x_left the vector is made positive at the node nearest x_left;
    otherwise its first moment against a left-heavy ramp is made positive.
    """
    v = np.asarray(v, dtype=float)
    if x_left is not None and grid.dimension == 1:
        ref = v[grid.node_index(x_left)]
    else:
        x = grid.points() if grid.dimension == 1 else grid.points()[:, 0]
        ref = float(np.dot(v, (grid.hi - x) / (grid.hi - grid.lo)))
    return -v if ref < 0 else v


def lowest_eigenpairs(op: AssembledOperator, k: int, tol: Optional[float] = None) -> SpectrumResult:
    """
    Lowest k eigenpairs of the symmetric form of an assembled operator

    d = 1 uses bisection with inverse iteration on the tridiagonal matrix;
    d = 2 uses shift-invert Lanczos with an iteration cap of 10 k sqrt(N).

    Args:
        op: Assembled operator
        k: Number of eigenpairs (2 <= k <= matrix size)
        tol: Relative residual tolerance for the convergence flags

    Returns:
        SpectrumResult

    Raises:
        ConfigError: k out of range
        ConvergenceError: Lanczos hits the iteration cap
    """
    matrix = op.symmetric_form()
    size = matrix.shape[0]
    if k < 2 or k > size:
        raise ConfigError(f"k must satisfy 2 <= k <= {size}, got {k}")
    tol = Config.SOLVER_TOL if tol is None else tol

    if op.grid.dimension == 1:
        vals, vecs = eigh_tridiagonal(
            matrix.diagonal(), matrix.diagonal(1), select="i", select_range=(0, k - 1),
            lapack_driver="stebz", tol=2.0 * np.finfo(float).tiny,
        )
    else:
        maxiter = 10 * k * int(math.ceil(math.sqrt(size)))
        try:
            vals, vecs = eigsh(matrix.tocsc(), k=k, sigma=SHIFT, which="LM", maxiter=maxiter, tol=1e-12)
        except ArpackNoConvergence as e:
            best = float("nan")
            if e.eigenvalues.size:
                r = matrix @ e.eigenvectors - e.eigenvectors * e.eigenvalues
                best = float(np.min(np.linalg.norm(r, axis=0)))
            raise ConvergenceError(
                f"Lanczos did not converge within {maxiter} iterations", best_residual=best
            ) from e

    order = np.argsort(vals)
    vals = np.asarray(vals)[order]
    vecs = np.asarray(vecs)[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    vecs = np.column_stack([align_sign(vecs[:, j], op.grid) for j in range(k)])

    residuals = np.linalg.norm(matrix @ vecs - vecs * vals, axis=0)
    scale = max(1.0, float(sparse_norm(matrix, 1)))
    converged = residuals <= tol * scale
    logger.debug(f"Eigenvalues {vals}, max residual {residuals.max():.2e} (scale {scale:.2e})")
    return SpectrumResult(eigenvalues=vals, eigenvectors=vecs, residuals=residuals, converged=converged)


def spectral_gap(result: SpectrumResult) -> SpectralGap:
    """
    E1 - E0 from a spectrum

    Raises:
        ConvergenceError: Fewer than two converged eigenpairs
    """
    if result.count < 2 or not np.all(result.converged[:2]):
        best = float(np.min(result.residuals)) if result.count else float("nan")
        raise ConvergenceError("Fewer than two converged eigenpairs", best_residual=best)
    return SpectralGap(e0=float(result.eigenvalues[0]), e1=float(result.eigenvalues[1]))


def partition_from_critical_points(spec: PotentialSpec, search: Region) -> WellPartition:
    """
    The "auto" partition: exactly three critical points, minimum-maximum-minimum

    The left basin [search.lo, barrier] is the well region.
    """
    if spec.dimension != 1:
        raise PartitionError("Automatic partitions are one-dimensional")
    points = critical_points(spec, search)
    kinds = [p.kind for p in points]
    expected = [CriticalKind.MINIMUM, CriticalKind.MAXIMUM, CriticalKind.MINIMUM]
    if kinds != expected:
        raise PartitionError(
            f"Automatic partition needs exactly (min, max, min) critical points, found "
            f"{[k.value for k in kinds]} at {[round(p.x, 6) for p in points]}"
        )
    left, barrier, right = (p.x for p in points)
    return WellPartition(barrier_x=barrier, well_region=Region(search.lo, barrier),
                         x_left=left, x_right=right, other_region=Region(barrier, search.hi))


def partition_from_regions(spec: PotentialSpec, barrier_x: float, well: Region,
                           other_well: Region) -> WellPartition:
    """Build a partition from explicit regions, locating each basin's minimum"""
    minima = []
    for region in (well, other_well):
        found = [p for p in critical_points(spec, region) if p.kind is CriticalKind.MINIMUM]
        if not found:
            raise PartitionError(f"No minimum of U in [{region.lo}, {region.hi}]")
        minima.append(min(found, key=lambda p: evaluate(spec, p.x)).x)
    x_left, x_right = sorted(minima)
    return WellPartition(barrier_x=barrier_x, well_region=well, x_left=x_left, x_right=x_right,
                         other_region=other_well)


def theta_profile(ctx: WittenContext, grid: Grid, partition: WellPartition) -> np.ndarray:
    """
    theta(x) = 1 - 2 C(x)/C(x_right) with C(x) the integral of exp(beta U) from x_left

    theta is 1 at x_left, -1 at x_right, constant beyond them, and decreasing in
    between. The cumulative integral is evaluated in log-space relative to the
    barrier maximum.

    Returns:
        Node-sampled theta
    """
    if grid.dimension != 1:
        raise ConfigError("theta_profile is implemented for d = 1")
    s = np.linspace(partition.x_left, partition.x_right, THETA_SAMPLES)
    u = np.asarray(evaluate(ctx.spec, s))
    weight = np.exp(ctx.beta * (u - u.max()))
    c = cumulative_trapezoid(weight, s, initial=0.0)
    theta = 1.0 - 2.0 * c / c[-1]
    return np.interp(grid.nodes, s, theta, left=1.0, right=-1.0)


def theta_trial_state(ctx: WittenContext, grid: Grid, partition: WellPartition) -> np.ndarray:
    """theta * psi0, orthogonalized against psi0 and normalized in discrete L2"""
    psi0 = ground_state(ctx, grid)
    trial = theta_profile(ctx, grid, partition) * psi0
    trial = trial - np.sum(trial * psi0) * grid.cell_volume * psi0
    return trial / math.sqrt(np.sum(trial ** 2) * grid.cell_volume)


def theta_rayleigh_quotient(op: AssembledOperator, trial: np.ndarray) -> float:
    """Rayleigh quotient of a trial vector; an upper bound on E1 for trials orthogonal to psi0"""
    matrix = op.symmetric_form()
    return float(trial @ (matrix @ trial) / (trial @ trial))


def surface_formula_E1(psi0: np.ndarray, psi1: np.ndarray, partition: WellPartition,
                       grid: Grid) -> float:
    """
    E1 from the Green identity over one well

    E1 = -psi0(x_b) n psi1'(x_b) / (integral over G of psi1 psi0), with a
    fourth-order central derivative at the node nearest the barrier and
    trapezoid quadrature over the well's nodes. Invariant to the sign and
    scale of either vector.

    Raises:
        PartitionError: Barrier too close to the grid edge or vanishing overlap
    """
    if grid.dimension != 1:
        raise ConfigError("surface_formula_E1 is implemented for d = 1")
    psi0 = np.asarray(psi0, dtype=float)
    psi1 = np.asarray(psi1, dtype=float)
    b = grid.node_index(partition.barrier_x)
    if b < 2 or b > grid.n - 3:
        raise PartitionError("Barrier lies within two nodes of the grid boundary")

    h = grid.spacing
    dpsi1 = (-psi1[b + 2] + 8.0 * psi1[b + 1] - 8.0 * psi1[b - 1] + psi1[b - 2]) / (12.0 * h)

    x = grid.nodes
    region = partition.well_region
    inside = (x >= region.lo) & (x <= region.hi)
    if partition.well_is_left:
        inside &= np.arange(grid.n) <= b
    else:
        inside &= np.arange(grid.n) >= b
    if inside.sum() < 2:
        raise PartitionError("Well region contains fewer than two grid nodes")
    overlap = trapezoid(psi1[inside] * psi0[inside], x[inside])
    if abs(overlap) < MIN_OVERLAP:
        raise PartitionError("Vanishing overlap of psi0 and psi1 over the well region")
    return float(-psi0[b] * partition.outward_normal * dpsi1 / overlap)


def write_eigenvectors(result: SpectrumResult, grid: Grid, path: Union[str, Path]) -> Path:
    """Node coordinates and eigenvector columns psi0, psi1, ..."""
    columns = {}
    if grid.dimension == 1:
        columns["x"] = grid.nodes
    else:
        for name, axis in zip(("x", "y"), grid.points().T):
            columns[name] = axis
    for j in range(result.count):
        columns[f"psi{j}"] = result.eigenvectors[:, j]
    return write_csv(pd.DataFrame(columns), path)


def write_eigenvalues(result: SpectrumResult, path: Union[str, Path]) -> Path:
    """Eigenvalues with residuals and convergence flags"""
    frame = pd.DataFrame({
        "index": np.arange(result.count),
        "eigenvalue": result.eigenvalues,
        "residual": result.residuals,
        "converged": result.converged,
    })
    return write_csv(frame, path)


def eigenvalue_table(result: SpectrumResult) -> List[str]:
    """Printable eigenvalue lines"""
    return [f"E{j} = {e:.12g}" + ("" if ok else "  (unconverged)")
            for j, (e, ok) in enumerate(zip(result.eigenvalues, result.converged))]
