"""
Witten-Schrodinger transform of the diffusion generator

Units follow hbar = 2m = 1, so the transformed operator is H = -Laplacian + V
with V = -(beta/2) Laplacian(U) + (beta^2/4) |grad U|^2. The deformation
parameter of the Witten Laplacian is t = beta/2. H annihilates exp(-beta U/2).
"""

import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from witten_rates.potential import (
    CriticalKind,
    CriticalPoint,
    PotentialSpec,
    evaluate,
    grad,
    laplacian,
)
from witten_rates.utils.exceptions import ConfigError

if TYPE_CHECKING:
    from witten_rates.grid_operator import AssembledOperator, Grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WittenContext:
    """A potential together with the inverse temperature beta"""

    spec: PotentialSpec
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be finite and > 0, got {self.beta}")

    @property
    def deformation_parameter(self) -> float:
        """t = beta/2"""
        return 0.5 * self.beta


@dataclass(frozen=True)
class EffectiveLevel:
    """Value of V at a critical point of U"""

    point: CriticalPoint
    value: float
    sign: int


def effective_potential(ctx: WittenContext, x) -> Union[float, np.ndarray]:
    """
    Effective potential V of the Witten-Schrodinger operator

    Args:
        ctx: Potential and inverse temperature
        x: Coordinate(s); last axis holds the components for d > 1

    Returns:
        V(x)
    """
    g = np.asarray(grad(ctx.spec, x))
    g2 = g ** 2 if ctx.spec.dimension == 1 else np.sum(g ** 2, axis=-1)
    v = -0.5 * ctx.beta * np.asarray(laplacian(ctx.spec, x)) + 0.25 * ctx.beta ** 2 * g2
    return float(v) if np.ndim(v) == 0 else v


def log_ground_state(ctx: WittenContext, grid: "Grid") -> np.ndarray:
    """Logarithm of the normalized node-sampled ground state"""
    u = np.asarray(evaluate(ctx.spec, grid.points()), dtype=float)
    log_psi = -0.5 * ctx.beta * (u - u.min())
    log_norm = 0.5 * (logsumexp(2.0 * log_psi) + np.log(grid.cell_volume))
    return log_psi - log_norm


def ground_state(ctx: WittenContext, grid: "Grid") -> np.ndarray:
    """
    Analytic zero-energy state exp(-beta U/2), sampled on the grid nodes

    Normalized in log-space to unit discrete L2 norm: sum psi^2 h^d = 1.
    """
    return np.exp(log_ground_state(ctx, grid))


def quadratic_form_check(ctx: WittenContext, grid: "Grid", psi: np.ndarray) -> float:
    """
    <psi, H psi> through the factorization H = A* A with A = exp(-beta U/2) d exp(beta U/2)

    Uses forward differences of r = exp(beta U/2) psi weighted by exp(-beta U)
    at cell midpoints, with Dirichlet zeros outside the grid. The result equals
    the Rayleigh numerator of the factorized stencil exactly.

    Args:
        ctx: Potential and inverse temperature
        grid: One-dimensional grid
        psi: Node-sampled function

    Returns:
        Nonnegative quadratic form value
    """
    if grid.dimension != 1:
        raise ConfigError("quadratic_form_check is implemented for d = 1")
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.n,):
        raise ConfigError(f"psi has shape {psi.shape}, expected ({grid.n},)")
    h = grid.spacing
    u = np.asarray(evaluate(ctx.spec, grid.nodes))
    um = np.asarray(evaluate(ctx.spec, grid.midpoints))
    right = np.exp(-0.5 * ctx.beta * (um[:-1] - u))
    left = np.exp(-0.5 * ctx.beta * (um[1:] - u))

    diff = np.zeros(grid.n + 1)
    diff[:-1] += right * psi
    diff[1:] -= left * psi
    return float(np.sum(diff ** 2) / h)


def ground_state_residual(op: "AssembledOperator", ctx: WittenContext) -> float:
    """||H psi0|| / ||psi0|| for an assembled Schrodinger operator"""
    psi0 = ground_state(ctx, op.grid)
    return float(np.linalg.norm(op.matrix @ psi0) / np.linalg.norm(psi0))


def effective_levels(ctx: WittenContext, points: Sequence[CriticalPoint]) -> List[EffectiveLevel]:
    """
    V at each critical point of U

    At a minimum V = -(beta/2) Laplacian(U) < 0, at a maximum V > 0; at a
    saddle the sign follows the sign of the Laplacian.
    """
    levels = []
    for p in points:
        x = np.asarray(p.location if ctx.spec.dimension > 1 else p.location[0])
        value = float(effective_potential(ctx, x))
        levels.append(EffectiveLevel(point=p, value=value, sign=int(np.sign(value))))
    return levels


def harmonic_levels(ctx: WittenContext, point: CriticalPoint, count: int) -> np.ndarray:
    """
    Local oscillator ladder beta * sum_j U''_j n_j at a minimum

    Exact for the quadratic family; the low-temperature reference elsewhere.
    """
    if point.kind is not CriticalKind.MINIMUM:
        raise ConfigError("harmonic_levels needs a minimum")
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    curvature = np.asarray(point.hessian_eigs, dtype=float)
    ladder = sorted(
        ctx.beta * float(np.dot(curvature, n))
        for n in itertools.product(range(count), repeat=curvature.size)
    )
    return np.asarray(ladder[:count])
