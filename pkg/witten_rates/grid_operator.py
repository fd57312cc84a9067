"""
Uniform Dirichlet grids and the discrete Schrodinger / Fokker-Planck operators
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from witten_rates.potential import Region, evaluate
from witten_rates.utils.exceptions import ConfigError
from witten_rates.utils.io import write_csv
from witten_rates.witten import WittenContext, effective_potential

logger = logging.getLogger(__name__)

STENCILS = ("central", "factorized")

# exp() overflows past ~709; beyond this the boundary layer is unresolved
MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class Grid:
    """
    Uniform tensor grid with homogeneous Dirichlet boundary

    The n interior nodes per axis sit at lo + spacing * (1..n) with
    spacing = (hi - lo)/(n + 1); the boundary nodes carry the zero condition.
    """

    lo: float
    hi: float
    n: int
    dimension: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ConfigError(f"Grid requires finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.n) != self.n or self.n < 16:
            raise ConfigError(f"Grid requires n >= 16 nodes per axis, got {self.n}")
        if self.dimension not in (1, 2):
            raise ConfigError(f"Grid dimension must be 1 or 2, got {self.dimension}")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates along one axis"""
        return self.lo + self.spacing * np.arange(1, self.n + 1)

    @property
    def midpoints(self) -> np.ndarray:
        """The n + 1 cell midpoints along one axis, boundary cells included"""
        return self.lo + self.spacing * (np.arange(self.n + 1) + 0.5)

    @property
    def size(self) -> int:
        return self.n ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def mesh(self) -> Tuple[np.ndarray, ...]:
        """Tensor coordinates, 'ij' indexing"""
        return tuple(np.meshgrid(*([self.nodes] * self.dimension), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates in flattened (row-major) order"""
        if self.dimension == 1:
            return self.nodes
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def node_index(self, x: float) -> int:
        """Index of the node nearest to x (d = 1)"""
        return int(np.clip(np.rint((x - self.lo) / self.spacing) - 1, 0, self.n - 1))

    def contains(self, region: Region) -> bool:
        return self.lo <= region.lo and region.hi <= self.hi


def build_grid(lo: float, hi: float, n: int, d: int = 1) -> Grid:
    """
    Build a uniform grid on [lo, hi]^d with n interior nodes per axis

    Args:
        lo: Lower bound
        hi: Upper bound
        n: Interior nodes per axis (>= 16)
        d: Dimension, 1 or 2

    Returns:
        Grid
    """
    grid = Grid(lo=float(lo), hi=float(hi), n=int(n), dimension=int(d))
    logger.debug(f"Grid [{lo}, {hi}]^{d}, n={n}, spacing={grid.spacing:.3e}")
    return grid


class OperatorKind(str, Enum):
    """Which operator a matrix represents"""

    SCHRODINGER = "schrodinger"
    FOKKER_PLANCK = "fokker_planck"


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """
    Sparse matrix of H or L together with its discretization data

    `log_weights` holds ln w_i = -beta (U_i - min U)/2, the similarity
    weights of the Witten transform.
    """

    kind: OperatorKind
    matrix: sp.csr_matrix
    context: WittenContext
    grid: Grid
    log_weights: np.ndarray
    stencil: str = "central"

    @property
    def beta(self) -> float:
        return self.context.beta

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def symmetric_form(self) -> sp.csr_matrix:
        """
        The positive symmetric matrix of the operator

        For Fokker-Planck this is -W^-1 L W, computed entrywise from exponent
        differences so that no weight is formed explicitly.
        """
        if self.kind is OperatorKind.SCHRODINGER:
            return self.matrix
        coo = self.matrix.tocoo()
        data = -coo.data * np.exp(self.log_weights[coo.col] - self.log_weights[coo.row])
        return sp.csr_matrix((data, (coo.row, coo.col)), shape=coo.shape)

    def with_diagonal_shift(self, shift: np.ndarray) -> "AssembledOperator":
        """A copy with a diagonal perturbation added to the matrix"""
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.grid.size,))
        return replace(self, matrix=(self.matrix + sp.diags(shift)).tocsr())


def _log_weights(ctx: WittenContext, grid: Grid) -> np.ndarray:
    u = np.asarray(evaluate(ctx.spec, grid.points()), dtype=float)
    return -0.5 * ctx.beta * (u - u.min())


def _check_exponents(ctx: WittenContext, *exponents: np.ndarray) -> None:
    worst = max(float(np.max(np.abs(e))) for e in exponents)
    if not np.isfinite(worst) or worst > MAX_EXPONENT:
        raise ConfigError(
            f"Grid too coarse for beta={ctx.beta}: midpoint exponent {worst:.1f} overflows; "
            f"refine the grid or shrink the domain"
        )


def _midpoint_exponents(ctx: WittenContext, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exponents -beta (U_mid - U_node) on both sides of every node

    Returns (right, left): right[i] uses the midpoint below node i, left[i]
    the midpoint above it.
    """
    u = np.asarray(evaluate(ctx.spec, grid.nodes))
    um = np.asarray(evaluate(ctx.spec, grid.midpoints))
    below = -ctx.beta * (um[:-1] - u)
    above = -ctx.beta * (um[1:] - u)
    _check_exponents(ctx, below, above)
    return below, above


def _laplacian_1d(grid: Grid) -> sp.csr_matrix:
    h2 = grid.spacing ** 2
    off = -np.ones(grid.n - 1) / h2
    return sp.diags([off, np.full(grid.n, 2.0 / h2), off], [-1, 0, 1], format="csr")


def _factorized_schrodinger(ctx: WittenContext, grid: Grid) -> sp.csr_matrix:
    """A_h* A_h for the midpoint-weighted forward difference A_h"""
    below, above = _midpoint_exponents(ctx, grid)
    h2 = grid.spacing ** 2
    u = np.asarray(evaluate(ctx.spec, grid.nodes))
    um = np.asarray(evaluate(ctx.spec, grid.midpoints))
    pair = -ctx.beta * (um[1:-1] - 0.5 * (u[:-1] + u[1:]))
    _check_exponents(ctx, pair)
    diag = (np.exp(below) + np.exp(above)) / h2
    off = -np.exp(pair) / h2
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def assemble_schrodinger(ctx: WittenContext, grid: Grid, stencil: str = "central") -> AssembledOperator:
    """
    Assemble H = -Laplacian + V on the grid

    Args:
        ctx: Potential and inverse temperature
        grid: Grid (d = 1 or 2)
        stencil: "central" (second-order Laplacian plus node values of V) or
            "factorized" (A_h* A_h, d = 1, annihilates exp(-beta U/2) exactly)

    Returns:
        Assembled operator with a symmetric CSR matrix
    """
    if stencil not in STENCILS:
        raise ConfigError(f"Unknown stencil {stencil!r}; expected one of {STENCILS}")
    if grid.dimension != ctx.spec.dimension:
        raise ConfigError(f"Grid dimension {grid.dimension} != potential dimension {ctx.spec.dimension}")

    if stencil == "factorized":
        if grid.dimension != 1:
            raise ConfigError("The factorized stencil is implemented for d = 1")
        matrix = _factorized_schrodinger(ctx, grid)
    else:
        v = np.asarray(effective_potential(ctx, grid.points()), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ConfigError(f"Effective potential is not finite on the grid at beta={ctx.beta}")
        lap = _laplacian_1d(grid)
        if grid.dimension == 2:
            eye = sp.identity(grid.n, format="csr")
            lap = sp.kron(lap, eye) + sp.kron(eye, lap)
        matrix = (lap + sp.diags(v)).tocsr()

    logger.debug(f"Assembled Schrodinger ({stencil}) matrix of size {matrix.shape[0]}, nnz={matrix.nnz}")
    return AssembledOperator(kind=OperatorKind.SCHRODINGER, matrix=matrix, context=ctx, grid=grid,
                             log_weights=_log_weights(ctx, grid), stencil=stencil)


def assemble_fokker_planck(ctx: WittenContext, grid: Grid) -> AssembledOperator:
    """
    Conservative finite-volume Fokker-Planck operator L f = div(grad f + beta f grad U)

    Fluxes use exp(-beta U) at midpoints acting on r = exp(beta U) f, so every
    interior column sums to zero and exp(-beta U_i) is an exact null vector.
    Each diagonal entry is minus the sum of its column's off-diagonal entries.

    Args:
        ctx: Potential and inverse temperature
        grid: One-dimensional grid

    Returns:
        Assembled operator with a tridiagonal CSR matrix
    """
    if grid.dimension != 1:
        raise ConfigError("The Fokker-Planck operator is implemented for d = 1")
    below, above = _midpoint_exponents(ctx, grid)
    h2 = grid.spacing ** 2
    # column j: entry in row j-1 through the midpoint below, row j+1 through the one above
    to_prev = np.exp(below) / h2
    to_next = np.exp(above) / h2
    main = -(to_prev + to_next)
    matrix = sp.diags([to_next[:-1], main, to_prev[1:]], [-1, 0, 1], format="csr")

    logger.debug(f"Assembled Fokker-Planck matrix of size {grid.n}")
    return AssembledOperator(kind=OperatorKind.FOKKER_PLANCK, matrix=matrix, context=ctx, grid=grid,
                             log_weights=_log_weights(ctx, grid), stencil="factorized")


def write_triplets(op: AssembledOperator, path: Union[str, Path]) -> Path:
    """Dump the matrix as (row, col, value) triplets"""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    frame = pd.DataFrame({"row": coo.row[order], "col": coo.col[order], "value": coo.data[order]})
    return write_csv(frame, path)
