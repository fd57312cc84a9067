"""
Semiclassical and thermodynamic estimates of the spectral gap E1

All one-dimensional. The barrier interval is the connected component of
{V > 0} around the barrier top; the well volume is the length of the
component of {V <= 0} around the well's minimum.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from witten_rates.grid_operator import Grid
from witten_rates.potential import (
    PotentialSpec,
    Region,
    evaluate,
    free_energy,
    grad,
    hessian_diag,
    log_partition,
)
from witten_rates.spectrum import SpectrumResult, WellPartition, spectral_gap, surface_formula_E1
from witten_rates.utils.exceptions import ConfigError, SemiclassicalError
from witten_rates.witten import WittenContext, effective_potential

logger = logging.getLogger(__name__)

SAMPLES = 4001
QUAD_RTOL = 1e-10
SYMMETRY_TOL = 1e-8
BOUND_STATE_ACTION = 0.5

CSV_COLUMNS = {
    "beta": "beta",
    "e1_numeric": "E1_numeric",
    "e1_wkb": "E1_wkb",
    "e1_arrhenius": "E1_arrhenius",
    "e1_eyring": "E1_eyring",
    "e1_surface": "E1_surface",
    "delta_u": "deltaU",
    "f0": "F0",
    "f1": "F1",
    "p0": "p0",
    "vol": "vol",
    "e1_flux": "E1_flux",
    "e1_theta": "E1_theta",
    "e1_gaussian": "E1_gaussian",
    "converged": "converged",
}


@dataclass(frozen=True)
class RateEstimates:
    """One beta's worth of E1 estimates and their ingredients"""

    beta: float
    e1_numeric: float
    e1_wkb: float
    e1_arrhenius: float
    e1_eyring: float
    e1_surface: float
    delta_u: float
    f0: float
    f1: float
    p0: float
    vol: float
    e1_flux: float = float("nan")
    e1_theta: float = float("nan")
    e1_gaussian: float = float("nan")
    converged: bool = True

    def to_row(self) -> Dict[str, float]:
        """Row keyed by CSV column names, in table order"""
        data = asdict(self)
        return {CSV_COLUMNS[k]: data[k] for k in CSV_COLUMNS}


def _v(ctx: WittenContext, x: float) -> float:
    return float(effective_potential(ctx, x))


def _first_crossing(f: Callable[[float], float], start: float, stop: float,
                    positive: bool) -> Optional[float]:
    """
    First point walking from start to stop where f changes to the requested sign

    Returns None when f keeps its sign on the whole segment.
    """
    s = np.linspace(start, stop, SAMPLES)
    values = np.array([f(x) for x in s])
    hit = values > 0 if positive else values <= 0
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        return float(start)
    return brentq(f, s[i - 1], s[i], xtol=1e-13, rtol=4 * np.finfo(float).eps)


def barrier_height(spec: PotentialSpec, partition: WellPartition) -> float:
    """U(barrier) - U(well minimum)"""
    return float(evaluate(spec, partition.barrier_x) - evaluate(spec, partition.well_minimum))


def _check_symmetric(spec: PotentialSpec, partition: WellPartition) -> float:
    du = barrier_height(spec, partition)
    asym = abs(float(evaluate(spec, partition.x_left) - evaluate(spec, partition.x_right)))
    if asym > SYMMETRY_TOL * du:
        raise SemiclassicalError(
            f"Wells are not symmetric: |U(x_left) - U(x_right)| = {asym:.3e} > {SYMMETRY_TOL:g} * {du:.3e}"
        )
    return du


def barrier_interval(ctx: WittenContext, partition: WellPartition) -> Tuple[float, float]:
    """
    Connected component of {V > 0} containing the barrier top

    Raises:
        SemiclassicalError: V(barrier) <= 0, the barrier is not resolved at this beta
    """
    v_top = _v(ctx, partition.barrier_x)
    if not v_top > 0:
        raise SemiclassicalError(
            f"V(x_b) = {v_top:.3e} <= 0 at beta={ctx.beta}: barrier not resolved semiclassically"
        )
    f = lambda x: _v(ctx, x)
    left = _first_crossing(f, partition.barrier_x, partition.x_left, positive=False)
    right = _first_crossing(f, partition.barrier_x, partition.x_right, positive=False)
    if left is None or right is None:
        raise SemiclassicalError("V stays positive between the barrier and a minimum")
    return left, right


def well_volume(ctx: WittenContext, partition: WellPartition) -> float:
    """
    Classically allowed length of the well: the {V <= 0} component around its minimum
    """
    x_min = partition.well_minimum
    f = lambda x: _v(ctx, x)
    if not f(x_min) <= 0:
        raise SemiclassicalError(f"V > 0 at the well minimum {x_min} for beta={ctx.beta}")
    inner = _first_crossing(f, x_min, partition.barrier_x, positive=True)
    reach = abs(partition.barrier_x - x_min)
    direction = -partition.outward_normal
    outer = None
    for step in range(1, 65):
        lo = x_min + direction * reach * (step - 1)
        hi = x_min + direction * reach * step
        try:
            outer = _first_crossing(f, lo, hi, positive=True)
        except ValueError:
            break
        if outer is not None:
            break
    if inner is None or outer is None:
        raise SemiclassicalError("Classically allowed region of the well is unbounded")
    return abs(inner - outer)


def bohr_sommerfeld_action(ctx: WittenContext, well: Region) -> float:
    """
    (1/pi) * integral of sqrt(-V) over {V <= 0} within a well

    A bound state is predicted when the action is at least 1/2.

    Args:
        ctx: Potential and inverse temperature (d = 1)
        well: Interval around one critical point of U

    Returns:
        Nonnegative action; 0 when V > 0 on the whole interval
    """
    if ctx.spec.dimension != 1:
        raise ConfigError("bohr_sommerfeld_action is one-dimensional")
    f = lambda x: _v(ctx, x)
    s = np.linspace(well.lo, well.hi, SAMPLES)
    values = np.array([f(x) for x in s])
    cuts = [well.lo]
    for i in np.flatnonzero(values[:-1] * values[1:] < 0):
        cuts.append(brentq(f, s[i], s[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))
    cuts.append(well.hi)

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a or f(0.5 * (a + b)) > 0:
            continue
        value, _ = quad(lambda x: math.sqrt(max(-f(x), 0.0)), a, b,
                        epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        total += value
    return total / math.pi


def predicts_bound_state(action: float) -> bool:
    """Bohr-Sommerfeld criterion"""
    return action >= BOUND_STATE_ACTION


def wkb_action(ctx: WittenContext, partition: WellPartition) -> float:
    """Tunneling action: integral of sqrt(V) across the barrier interval"""
    left, right = barrier_interval(ctx, partition)
    value, _ = quad(lambda x: math.sqrt(max(_v(ctx, x), 0.0)), left, right,
                    points=[partition.barrier_x], epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return value


def barrier_momentum(ctx: WittenContext, partition: WellPartition) -> float:
    """|p(0)| = sqrt(V(x_b))"""
    v_top = _v(ctx, partition.barrier_x)
    if not v_top > 0:
        raise SemiclassicalError(f"V(x_b) = {v_top:.3e} <= 0 at beta={ctx.beta}")
    return math.sqrt(v_top)


def wkb_splitting(ctx: WittenContext, partition: WellPartition) -> float:
    """
    WKB doublet splitting (|p(0)|/Vol) * exp(-integral sqrt(V))

    Raises:
        SemiclassicalError: Asymmetric wells or unresolved barrier
    """
    _check_symmetric(ctx.spec, partition)
    p0 = barrier_momentum(ctx, partition)
    return p0 / well_volume(ctx, partition) * math.exp(-wkb_action(ctx, partition))


def arrhenius_rate(ctx: WittenContext, partition: WellPartition) -> float:
    """Arrhenius reduction (|p(0)|/Vol) * exp(-beta dU)"""
    du = _check_symmetric(ctx.spec, partition)
    p0 = barrier_momentum(ctx, partition)
    return p0 / well_volume(ctx, partition) * math.exp(-ctx.beta * du)


def low_temperature_wkb(ctx: WittenContext, partition: WellPartition) -> float:
    """(|p(0)|/Vol) * exp(-(beta/2) * integral |U'|) over the barrier interval"""
    _check_symmetric(ctx.spec, partition)
    left, right = barrier_interval(ctx, partition)
    value, _ = quad(lambda x: abs(float(grad(ctx.spec, x))), left, right,
                    points=[partition.barrier_x], epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    p0 = barrier_momentum(ctx, partition)
    return p0 / well_volume(ctx, partition) * math.exp(-0.5 * ctx.beta * value)


def eyring_rate(ctx: WittenContext, well_region: Region, barrier_region: Region) -> float:
    """
    exp(-beta (F1 - F0)) with F0 = F(well_region), F1 = F(barrier_region)

    Identical regions give 1; partially overlapping regions are rejected.
    """
    if well_region == barrier_region:
        return 1.0
    if well_region.overlaps(barrier_region):
        raise ConfigError("Well and barrier regions overlap")
    f0 = free_energy(ctx.spec, well_region, ctx.beta)
    f1 = free_energy(ctx.spec, barrier_region, ctx.beta)
    return math.exp(-ctx.beta * (f1 - f0))


def thermal_window(ctx: WittenContext, partition: WellPartition) -> Region:
    """The barrier neighborhood where U >= U(x_b) - 1/beta"""
    level = float(evaluate(ctx.spec, partition.barrier_x)) - 1.0 / ctx.beta
    f = lambda x: float(evaluate(ctx.spec, x)) - level
    left = _first_crossing(f, partition.barrier_x, partition.x_left, positive=False)
    right = _first_crossing(f, partition.barrier_x, partition.x_right, positive=False)
    return Region(partition.x_left if left is None else left,
                  partition.x_right if right is None else right)


def eyring_regions(ctx: WittenContext, partition: WellPartition) -> Tuple[Region, Region]:
    """
    Default (well, barrier) regions: the thermal window and the well outside it

    Raises:
        SemiclassicalError: The thermal window covers the whole well region
    """
    window = thermal_window(ctx, partition)
    well = partition.well_region
    if partition.well_is_left:
        lo, hi = well.lo, min(well.hi, window.lo)
    else:
        lo, hi = max(well.lo, window.hi), well.hi
    if not lo < hi:
        raise SemiclassicalError(f"Thermal window [{window.lo:.4g}, {window.hi:.4g}] covers the well "
                                 f"region [{well.lo:.4g}, {well.hi:.4g}]")
    return Region(lo, hi), window


def flux_eyring_rate(ctx: WittenContext, partition: WellPartition) -> float:
    """
    Transition-state rate with exp(-beta F1) = 1 / integral of exp(beta U) between the minima
    """
    log_barrier = log_partition(ctx.spec, Region(partition.x_left, partition.x_right), ctx.beta, sign=1.0)
    log_well = log_partition(ctx.spec, partition.well_region, ctx.beta, sign=-1.0)
    return math.exp(-log_barrier - log_well)


def gaussian_barrier_width(spec: PotentialSpec, partition: WellPartition) -> float:
    """Inverse width a of the Gaussian barrier matching U''(x_b): a = sqrt(-U''(x_b)/(2 dU))"""
    curvature = float(hessian_diag(spec, partition.barrier_x))
    if not curvature < 0:
        raise SemiclassicalError(f"U''(x_b) = {curvature:.3e} is not negative")
    return math.sqrt(-curvature / (2.0 * barrier_height(spec, partition)))


def gaussian_barrier_rate(ctx: WittenContext, partition: WellPartition) -> float:
    """Closed form sqrt(beta dU) (a/Vol) exp(-beta dU)"""
    du = _check_symmetric(ctx.spec, partition)
    a = gaussian_barrier_width(ctx.spec, partition)
    return math.sqrt(ctx.beta * du) * a / well_volume(ctx, partition) * math.exp(-ctx.beta * du)


def _guarded(name: str, beta: float, fn: Callable[[], float]) -> float:
    try:
        return fn()
    except SemiclassicalError as e:
        logger.warning(f"{name} unavailable at beta={beta}: {e}")
        return float("nan")


def estimate_rates(ctx: WittenContext, grid: Grid, result: SpectrumResult,
                   partition: WellPartition) -> RateEstimates:
    """
    Collect every E1 estimate at one beta

    Args:
        ctx: Potential and inverse temperature
        grid: Grid the spectrum was computed on
        result: Lowest eigenpairs (k >= 2) of the symmetric operator
        partition: Double-well partition

    Returns:
        RateEstimates; semiclassical entries are NaN where outside their validity
    """
    spec, beta = ctx.spec, ctx.beta
    numeric = spectral_gap(result).value
    surface = surface_formula_E1(result.eigenvectors[:, 0], result.eigenvectors[:, 1], partition, grid)

    try:
        well, window = eyring_regions(ctx, partition)
        f0 = free_energy(spec, well, beta)
        f1 = free_energy(spec, window, beta)
    except SemiclassicalError as e:
        logger.warning(f"Eyring unavailable at beta={beta}: {e}")
        f0 = f1 = float("nan")
    flux = flux_eyring_rate(ctx, partition)

    p0 = _guarded("p0", beta, lambda: barrier_momentum(ctx, partition))
    vol = _guarded("Vol", beta, lambda: well_volume(ctx, partition))
    estimates = RateEstimates(
        beta=beta,
        e1_numeric=numeric,
        e1_wkb=_guarded("WKB", beta, lambda: wkb_splitting(ctx, partition)),
        e1_arrhenius=_guarded("Arrhenius", beta, lambda: arrhenius_rate(ctx, partition)),
        e1_eyring=math.exp(-beta * (f1 - f0)) if math.isfinite(f1 - f0) else float("nan"),
        e1_surface=surface,
        delta_u=barrier_height(spec, partition),
        f0=f0,
        f1=f1,
        p0=p0,
        vol=vol,
        e1_flux=flux,
        e1_theta=2.0 * flux,
        e1_gaussian=_guarded("Gaussian", beta, lambda: gaussian_barrier_rate(ctx, partition)),
        converged=bool(np.all(result.converged[:2])),
    )
    logger.debug(f"Rates at beta={beta}: {estimates}")
    return estimates


def rate_summary(estimates: RateEstimates) -> List[str]:
    """Printable lines comparing every estimator with the numeric gap"""
    lines = [f"beta = {estimates.beta:g}, dU = {estimates.delta_u:.6g}",
             f"  E1_numeric   = {estimates.e1_numeric:.6e}"]
    for label, value in (("wkb", estimates.e1_wkb), ("arrhenius", estimates.e1_arrhenius),
                         ("eyring", estimates.e1_eyring), ("surface", estimates.e1_surface),
                         ("theta", estimates.e1_theta), ("gaussian", estimates.e1_gaussian)):
        ok = value > 0 and estimates.e1_numeric > 0
        ratio = math.log(value / estimates.e1_numeric) if ok else float("nan")
        lines.append(f"  E1_{label:<10}= {value:.6e}   ln(ratio) = {ratio:+.3f}")
    return lines
