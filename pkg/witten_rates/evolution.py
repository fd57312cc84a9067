"""
Time evolution of the Fokker-Planck equation and relaxation to the Gibbs state
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, solve_banded
from scipy.special import logsumexp
from scipy.stats import linregress

from witten_rates.grid_operator import AssembledOperator, Grid, OperatorKind
from witten_rates.potential import Region, evaluate
from witten_rates.utils.exceptions import ConfigError, NumericError
from witten_rates.utils.io import write_csv
from witten_rates.witten import WittenContext

logger = logging.getLogger(__name__)

MASS_ZERO_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Sampled times with total mass, weighted distance to equilibrium and snapshots"""

    times: np.ndarray
    mass: np.ndarray
    distance: np.ndarray
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)
    final: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RelaxationFit:
    """Exponential decay rate fitted to the distance trace"""

    rate: float
    intercept: float
    residual: float
    points: int


def total_mass(f: np.ndarray, grid: Grid) -> float:
    """Rectangle rule; equals the trapezoid rule since f vanishes on the boundary"""
    return float(np.sum(f) * grid.cell_volume)


def _log_inverse_gibbs(ctx: WittenContext, grid: Grid) -> np.ndarray:
    """ln of the weight exp(beta (U - min U))"""
    u = np.asarray(evaluate(ctx.spec, grid.points()), dtype=float)
    return ctx.beta * (u - u.min())


def weighted_distance(f: np.ndarray, g: np.ndarray, log_weight: np.ndarray, grid: Grid) -> float:
    """sqrt(integral (f - g)^2 exp(beta U)), evaluated in log-space"""
    diff = np.abs(np.asarray(f) - np.asarray(g))
    nz = diff > 0
    if not np.any(nz):
        return 0.0
    log_sq = logsumexp(2.0 * np.log(diff[nz]) + log_weight[nz]) + math.log(grid.cell_volume)
    return float(math.exp(0.5 * log_sq))


def gibbs_limit(ctx: WittenContext, grid: Grid, f0: np.ndarray) -> np.ndarray:
    """
    The Gibbs state carrying the mass of f0

    Args:
        ctx: Potential and inverse temperature
        grid: Grid (d = 1)
        f0: Initial density

    Returns:
        (integral f0) * exp(-beta U) / Z; the zero vector for a massless f0

    Raises:
        ConfigError: f0 has infinite weighted norm
    """
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (grid.size,):
        raise ConfigError(f"Initial condition has shape {f0.shape}, expected ({grid.size},)")
    log_w = _log_inverse_gibbs(ctx, grid)
    nz = f0 != 0
    if np.any(nz) and not np.isfinite(logsumexp(2.0 * np.log(np.abs(f0[nz])) + log_w[nz])):
        raise ConfigError("Initial condition has infinite weighted norm")

    mass = total_mass(f0, grid)
    if abs(mass) <= MASS_ZERO_TOL * float(np.sum(np.abs(f0))) * grid.cell_volume:
        return np.zeros_like(f0)
    log_gibbs = -log_w
    log_z = logsumexp(log_gibbs) + math.log(grid.cell_volume)
    return mass * np.exp(log_gibbs - log_z)


def positivity_dt_threshold(op: AssembledOperator) -> float:
    """Largest dt for which a Crank-Nicolson step preserves nonnegativity: 2 / max |L_ii|"""
    return 2.0 / float(np.max(np.abs(op.matrix.diagonal())))


def _banded(op: AssembledOperator, dt: float) -> np.ndarray:
    """I - (dt/2) L in LAPACK banded storage"""
    matrix = op.matrix
    n = matrix.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5 * dt * matrix.diagonal(1)
    ab[1, :] = 1.0 - 0.5 * dt * matrix.diagonal()
    ab[2, :-1] = -0.5 * dt * matrix.diagonal(-1)
    return ab


def _solve(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        out = solve_banded((1, 1), ab, rhs, check_finite=False)
    except (LinAlgError, ValueError) as e:
        raise NumericError(f"Banded solve failed: {e}") from e
    if not np.all(np.isfinite(out)):
        raise NumericError("Banded solve produced non-finite values")
    return out


def evolve(op: AssembledOperator, f0: np.ndarray, dt: float, T: float, sample_every: int = 10,
           snapshot_times: Iterable[float] = (), startup_steps: int = 4) -> EvolutionTrace:
    """
    Integrate df/dt = L f with Crank-Nicolson

    The first `startup_steps` steps are backward-Euler steps of size dt/2
    (whose matrix is the Crank-Nicolson implicit matrix) to damp the stiff
    modes of non-smooth data; both schemes conserve the total mass.

    Args:
        op: Fokker-Planck operator
        f0: Initial density
        dt: Time step (> 0)
        T: Horizon (>= dt)
        sample_every: Record mass and distance every this many steps
        snapshot_times: Times at which to keep the full density
        startup_steps: Number of backward-Euler half steps

    Returns:
        EvolutionTrace including t = 0 and the final time

    Raises:
        NumericError: The implicit system is singular
    """
    if op.kind is not OperatorKind.FOKKER_PLANCK:
        raise ConfigError("evolve needs a Fokker-Planck operator")
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError(f"dt must be > 0, got {dt}")
    if not T >= dt:
        raise ConfigError(f"Horizon T={T} must be >= dt={dt}")
    if sample_every < 1 or startup_steps < 0:
        raise ConfigError("sample_every must be >= 1 and startup_steps >= 0")

    grid, ctx = op.grid, op.context
    f = np.asarray(f0, dtype=float).copy()
    f_inf = gibbs_limit(ctx, grid, f)
    log_w = _log_inverse_gibbs(ctx, grid)

    ab = _banded(op, dt)
    matrix = op.matrix
    pending = sorted(float(t) for t in snapshot_times)
    snapshots: Dict[float, np.ndarray] = {}

    n_startup = startup_steps // 2
    steps = int(math.ceil(T / dt - 1e-9))
    times, mass, distance = [0.0], [total_mass(f, grid)], [weighted_distance(f, f_inf, log_w, grid)]
    if pending and pending[0] <= 0.0:
        snapshots[0.0] = f.copy()
        pending.pop(0)

    for step in range(1, steps + 1):
        if step <= n_startup:
            f = _solve(ab, _solve(ab, f))
        else:
            f = _solve(ab, f + 0.5 * dt * (matrix @ f))
        t = step * dt
        while pending and pending[0] <= t + 1e-12:
            snapshots[pending.pop(0)] = f.copy()
        if step % sample_every == 0 or step == steps:
            times.append(t)
            mass.append(total_mass(f, grid))
            distance.append(weighted_distance(f, f_inf, log_w, grid))

    logger.info(f"Evolved {steps} steps to t={steps * dt:.6g} (dt={dt:.3e}); "
                f"mass drift {abs(mass[-1] - mass[0]) / max(abs(mass[0]), 1e-300):.2e}")
    return EvolutionTrace(times=np.asarray(times), mass=np.asarray(mass),
                          distance=np.asarray(distance), snapshots=snapshots, final=f)


def relaxation_rate(trace: EvolutionTrace, window: Tuple[float, float]) -> RelaxationFit:
    """
    Least-squares slope of -ln(distance) over a time window

    Raises:
        ConfigError: Fewer than two samples in the window, or the distance has
            underflowed there (choose an earlier window)
    """
    lo, hi = window
    mask = (trace.times >= lo) & (trace.times <= hi)
    if mask.sum() < 2:
        raise ConfigError(f"Window [{lo}, {hi}] holds fewer than two samples")
    t = trace.times[mask]
    d = trace.distance[mask]
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise ConfigError(f"Distance underflows in window [{lo}, {hi}]; choose an earlier window")
    fit = linregress(t, -np.log(d))
    predicted = fit.intercept + fit.slope * t
    residual = float(np.sqrt(np.mean((-np.log(d) - predicted) ** 2)))
    return RelaxationFit(rate=float(fit.slope), intercept=float(fit.intercept),
                         residual=residual, points=int(mask.sum()))


def default_time_step(e1_estimate: float) -> Tuple[float, float]:
    """
    dt = 0.01/E1 and T = 20/E1 for any positive E1 estimate

    The evolve command passes the eigensolver E1 of the run grid, so that
    the relaxation fit window 5/E1 to 15/E1 lies inside the horizon.
    """
    if not e1_estimate > 0:
        raise ConfigError(f"E1 estimate must be > 0, got {e1_estimate}")
    return 0.01 / e1_estimate, 20.0 / e1_estimate


def gibbs_in_well(ctx: WittenContext, grid: Grid, region: Region, mass: float = 1.0) -> np.ndarray:
    """Gibbs density restricted to a region, normalized to the given mass"""
    x = grid.nodes
    inside = (x >= region.lo) & (x <= region.hi)
    if not np.any(inside):
        raise ConfigError(f"Region [{region.lo}, {region.hi}] holds no grid nodes")
    u = np.asarray(evaluate(ctx.spec, x[inside]))
    log_f = -ctx.beta * (u - u.min())
    log_z = logsumexp(log_f) + math.log(grid.cell_volume)
    f = np.zeros(grid.n)
    f[inside] = mass * np.exp(log_f - log_z)
    return f


def gaussian_bump(grid: Grid, center: float, width: float, mass: float = 1.0) -> np.ndarray:
    """Normalized Gaussian density sampled on the nodes"""
    if not width > 0:
        raise ConfigError(f"width must be > 0, got {width}")
    f = np.exp(-0.5 * ((grid.nodes - center) / width) ** 2)
    total = total_mass(f, grid)
    if not total > 0:
        raise ConfigError(f"Gaussian bump at {center} lies outside the grid")
    return mass * f / total


def load_initial(path: Union[str, Path], grid: Grid) -> np.ndarray:
    """Read an (x, f) CSV and interpolate onto the nodes, zero outside its range"""
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read initial condition {path}: {e}") from e
    if frame.shape[1] < 2:
        raise ConfigError(f"Initial condition {path} needs columns (x, f)")
    x = frame.iloc[:, 0].to_numpy(dtype=float)
    f = frame.iloc[:, 1].to_numpy(dtype=float)
    order = np.argsort(x)
    return np.interp(grid.nodes, x[order], f[order], left=0.0, right=0.0)


def write_trace(trace: EvolutionTrace, path: Union[str, Path]) -> Path:
    """t, mass, distance columns"""
    frame = pd.DataFrame({"t": trace.times, "mass": trace.mass, "distance": trace.distance})
    return write_csv(frame, path)


def write_snapshots(trace: EvolutionTrace, grid: Grid, path: Union[str, Path]) -> Optional[Path]:
    """One column per snapshot time; nothing is written when there are no snapshots"""
    if not trace.snapshots:
        return None
    columns = {"x": grid.nodes}
    for t in sorted(trace.snapshots):
        columns[f"f_t={t:.17g}"] = trace.snapshots[t]
    return write_csv(pd.DataFrame(columns), path)
