"""
Command-line interface for spectral-gap and rate computations

Subcommands: spectrum | rates | scan | evolve | validate. Each reads a JSON
run file, writes CSV tables and a manifest.json to the output directory, and
exits with 2 on configuration errors, 3 on convergence failures and 4 on I/O
errors.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from witten_rates import __version__
from witten_rates.evolution import (
    EvolutionTrace,
    default_time_step,
    evolve,
    gaussian_bump,
    gibbs_in_well,
    load_initial,
    relaxation_rate,
    write_snapshots,
    write_trace,
)
from witten_rates.grid_operator import Grid, assemble_fokker_planck, assemble_schrodinger, build_grid
from witten_rates.potential import CriticalKind, Region, critical_points
from witten_rates.ratescan import (
    ArrheniusFit,
    GridPolicy,
    ScanTable,
    beta_scan,
    fit_all,
    write_fits,
    write_scan,
)
from witten_rates.semiclassics import (
    BOUND_STATE_ACTION,
    RateEstimates,
    bohr_sommerfeld_action,
    estimate_rates,
    rate_summary,
)
from witten_rates.spectrum import (
    SpectrumResult,
    WellPartition,
    eigenvalue_table,
    lowest_eigenpairs,
    partition_from_critical_points,
    partition_from_regions,
    spectral_gap,
    write_eigenvalues,
    write_eigenvectors,
)
from witten_rates.utils.config import Config, RunConfig
from witten_rates.utils.exceptions import ConfigError, PartitionError, WittenRatesError
from witten_rates.utils.io import write_csv, write_manifest
from witten_rates.utils.logger import setup_logging
from witten_rates.witten import WittenContext, ground_state_residual, quadratic_form_check

logger = logging.getLogger(__name__)

VALIDATION_SEED = 20240101

# anharmonic wells reach the bound-state action 1/2 only as beta grows
BOHR_SOMMERFELD_TOL = 0.05


@dataclass(frozen=True)
class Check:
    """One row of the validation report"""

    name: str
    value: float
    threshold: float
    passed: bool


def _grid(cfg: RunConfig) -> Grid:
    return build_grid(cfg.grid.lo, cfg.grid.hi, cfg.grid.n, cfg.grid.d)


def _resolve_partition(cfg: RunConfig, required: bool) -> Optional[WellPartition]:
    """Explicit partition from the run file, or the automatic one from critical points"""
    spec = cfg.potential
    if spec.dimension != 1:
        if required:
            raise ConfigError("Rate estimates are one-dimensional")
        return None
    if cfg.partition is not None:
        p = cfg.partition
        other = p.other_well
        if other is None:
            other = (Region(p.barrier_x, cfg.grid.hi) if p.well.hi <= p.barrier_x
                     else Region(cfg.grid.lo, p.barrier_x))
        return partition_from_regions(spec, p.barrier_x, p.well, other)
    try:
        return partition_from_critical_points(spec, Region(cfg.grid.lo, cfg.grid.hi))
    except PartitionError:
        if required:
            raise
        logger.info("No double-well partition for this potential; semiclassical columns skipped")
        return None


def _manifest(cfg: RunConfig, subcommand: str, artifacts: Sequence[Optional[Path]],
              summary: Optional[Dict] = None) -> Path:
    data = {
        "subcommand": subcommand,
        "version": __version__,
        "config": cfg.resolved(),
        "artifacts": sorted(str(p) for p in artifacts if p is not None),
    }
    if summary:
        data["summary"] = summary
    return write_manifest(data, Path(cfg.out_dir) / "manifest.json")


def cmd_spectrum(cfg: RunConfig) -> SpectrumResult:
    """Lowest k eigenpairs of H; eigenvalues to stdout, eigenvectors to CSV"""
    grid = _grid(cfg)
    ctx = WittenContext(cfg.potential, cfg.beta)
    op = assemble_schrodinger(ctx, grid, stencil=cfg.grid.stencil)
    result = lowest_eigenpairs(op, cfg.k)
    for line in eigenvalue_table(result):
        print(line)

    out = Path(cfg.out_dir)
    artifacts = [write_eigenvalues(result, out / "eigenvalues.csv"),
                 write_eigenvectors(result, grid, out / "eigenvectors.csv")]
    _manifest(cfg, "spectrum", artifacts, {"eigenvalues": result.eigenvalues})
    return result


def cmd_rates(cfg: RunConfig) -> RateEstimates:
    """Every E1 estimate at one beta"""
    grid = _grid(cfg)
    partition = _resolve_partition(cfg, required=True)
    ctx = WittenContext(cfg.potential, cfg.beta)
    op = assemble_schrodinger(ctx, grid, stencil=cfg.grid.stencil)
    estimates = estimate_rates(ctx, grid, lowest_eigenpairs(op, 2), partition)
    for line in rate_summary(estimates):
        print(line)

    path = write_csv(pd.DataFrame([estimates.to_row()]), Path(cfg.out_dir) / "rates.csv")
    _manifest(cfg, "rates", [path])
    return estimates


def cmd_scan(cfg: RunConfig) -> Tuple[ScanTable, List[ArrheniusFit]]:
    """Rate estimates over all betas plus Arrhenius-plot fits"""
    partition = _resolve_partition(cfg, required=False)
    policy = GridPolicy(lo=cfg.grid.lo, hi=cfg.grid.hi, n_min=cfg.scan.n_min,
                        points_per_barrier=cfg.scan.points_per_barrier, stencil=cfg.grid.stencil)
    table = beta_scan(cfg.potential, cfg.betas, partition, policy, threads=cfg.threads)
    fits = fit_all(table, cfg.scan.prefactor_powers)
    for fit in fits:
        print(f"{fit.column:<13} implied dU = {fit.implied_barrier:.4f}  "
              f"(r^2 = {fit.r_squared:.6f}, prefactor power {fit.prefactor_power:g})")

    out = Path(cfg.out_dir)
    artifacts = [write_scan(table, out / "scan.csv")]
    if fits:
        artifacts.append(write_fits(fits, out / "fits.csv"))
    _manifest(cfg, "scan", artifacts,
              {f.column: {"implied_deltaU": f.implied_barrier, "r_squared": f.r_squared} for f in fits})
    return table, fits


def _initial_condition(cfg: RunConfig, ctx: WittenContext, grid: Grid,
                       partition: Optional[WellPartition]) -> np.ndarray:
    block = cfg.evolution.initial
    kind = block.get("kind", "gaussian")
    mass = float(block.get("mass", 1.0))
    if kind == "gaussian":
        default_center = partition.x_left if partition else 0.5 * (grid.lo + grid.hi)
        center = float(block.get("center", default_center))
        width = float(block.get("width", 0.1 * cfg.potential.length_scale))
        return gaussian_bump(grid, center, width, mass)
    if kind == "gibbs_in_well":
        if "region" in block:
            region = Region(*map(float, block["region"]))
        elif partition is not None:
            region = partition.well_region
        else:
            raise ConfigError("gibbs_in_well needs a 'region' or a double-well partition")
        return gibbs_in_well(ctx, grid, region, mass)
    if kind == "gibbs":
        return gibbs_in_well(ctx, grid, Region(grid.lo, grid.hi), mass)
    if kind == "csv":
        if "path" not in block:
            raise ConfigError("csv initial condition needs a 'path'")
        return load_initial(block["path"], grid)
    raise ConfigError(f"Unknown initial condition kind {kind!r}")


def cmd_evolve(cfg: RunConfig) -> EvolutionTrace:
    """Crank-Nicolson evolution of the configured initial density"""
    if cfg.grid.d != 1:
        raise ConfigError("evolve is one-dimensional")
    grid = _grid(cfg)
    ctx = WittenContext(cfg.potential, cfg.beta)
    partition = _resolve_partition(cfg, required=False)
    op = assemble_fokker_planck(ctx, grid)
    f0 = _initial_condition(cfg, ctx, grid, partition)

    e1 = spectral_gap(lowest_eigenpairs(op, 2)).value
    dt_default, horizon_default = default_time_step(e1)
    dt = cfg.evolution.dt or dt_default
    horizon = cfg.evolution.T or horizon_default
    logger.info(f"E1 = {e1:.6e}; dt = {dt:.4g}, T = {horizon:.4g}")

    trace = evolve(op, f0, dt, horizon, sample_every=cfg.evolution.sample_every,
                   snapshot_times=cfg.evolution.snapshot_times, startup_steps=cfg.evolution.startup_steps)
    summary = {"E1": e1, "dt": dt, "T": horizon, "final_distance": float(trace.distance[-1])}
    print(f"E1 (eigensolver) = {e1:.6e}")
    print(f"final distance to Gibbs state = {trace.distance[-1]:.3e}")
    try:
        fit = relaxation_rate(trace, (5.0 / e1, 15.0 / e1))
        summary["relaxation_rate"] = fit.rate
        print(f"fitted relaxation rate = {fit.rate:.6e} (ratio {fit.rate / e1:.4f})")
    except ConfigError as e:
        logger.info(f"Relaxation rate not fitted: {e}")

    out = Path(cfg.out_dir)
    artifacts = [write_trace(trace, out / "trace.csv"),
                 write_snapshots(trace, grid, out / "snapshots.csv")]
    _manifest(cfg, "evolve", artifacts, summary)
    return trace


def _checks_1d(cfg: RunConfig, ctx: WittenContext, grid: Grid) -> List[Check]:
    eps = np.finfo(float).eps
    h = grid.spacing
    checks = []

    factorized = assemble_schrodinger(ctx, grid, stencil="factorized")
    threshold = 1e3 * eps * 4.0 / h ** 2
    residual = ground_state_residual(factorized, ctx)
    checks.append(Check("ground-state residual (factorized)", residual, threshold, residual <= threshold))

    fp = assemble_fokker_planck(ctx, grid)
    columns = np.asarray(fp.matrix.sum(axis=0)).ravel()[1:-1]
    scale = float(np.max(np.abs(fp.matrix.diagonal())))
    column_sum = float(np.max(np.abs(columns))) / scale
    checks.append(Check("FP interior column sums", column_sum, 1e-12, column_sum <= 1e-12))

    fp_spec = lowest_eigenpairs(fp, 2)
    fz_spec = lowest_eigenpairs(factorized, 2)
    e1_fp, e1_fz = fp_spec.eigenvalues[1], fz_spec.eigenvalues[1]
    agreement = abs(e1_fp - e1_fz) / abs(e1_fz)
    checks.append(Check("FP/Schrodinger E1 agreement", agreement, 1e-6, agreement <= 1e-6))

    central = lowest_eigenpairs(assemble_schrodinger(ctx, grid, stencil="central"), cfg.k)
    central_gap = central.eigenvalues[1] - central.eigenvalues[0]
    stencil_gap = abs(central_gap - (e1_fz - fz_spec.eigenvalues[0])) / abs(e1_fz)
    checks.append(Check("central vs factorized gap (O(h^2) stencil error)", stencil_gap, 0.05,
                        stencil_gap <= 0.05))

    gram = central.eigenvectors.T @ central.eigenvectors
    ortho = float(np.max(np.abs(gram - np.eye(central.count))))
    checks.append(Check("eigenvector orthogonality", ortho, 1e-8, ortho <= 1e-8))

    dt = 0.01 / e1_fz
    trace = evolve(fp, gaussian_bump(grid, 0.5 * (grid.lo + grid.hi), 0.1 * cfg.potential.length_scale),
                   dt, 200 * dt, sample_every=200, startup_steps=cfg.evolution.startup_steps)
    drift = abs(trace.mass[-1] - trace.mass[0]) / abs(trace.mass[0])
    checks.append(Check("mass conservation (200 steps)", drift, 1e-10, drift <= 1e-10))

    rng = np.random.default_rng(VALIDATION_SEED)
    lowest = min(quadratic_form_check(ctx, grid, rng.standard_normal(grid.n)) for _ in range(1000))
    checks.append(Check("quadratic form positivity", lowest, 0.0, lowest >= 0.0))

    points = critical_points(cfg.potential, Region(grid.lo, grid.hi))
    bounds = [grid.lo] + [p.x for p in points] + [grid.hi]
    for i, p in enumerate(points):
        if p.kind is not CriticalKind.MINIMUM:
            continue
        action = bohr_sommerfeld_action(ctx, Region(bounds[i], bounds[i + 2]))
        floor = BOUND_STATE_ACTION - BOHR_SOMMERFELD_TOL
        checks.append(Check(f"Bohr-Sommerfeld action at x={p.x:.4g} (1/2 - {BOHR_SOMMERFELD_TOL:g})",
                            action, floor, action >= floor))
    return checks


def cmd_validate(cfg: RunConfig) -> List[Check]:
    """Run the invariant suite on the configured problem and print a table"""
    grid = _grid(cfg)
    ctx = WittenContext(cfg.potential, cfg.beta)
    if grid.dimension == 1:
        checks = _checks_1d(cfg, ctx, grid)
    else:
        result = lowest_eigenpairs(assemble_schrodinger(ctx, grid), cfg.k)
        gram = result.eigenvectors.T @ result.eigenvectors
        ortho = float(np.max(np.abs(gram - np.eye(result.count))))
        checks = [Check("eigenvector orthogonality", ortho, 1e-8, ortho <= 1e-8)]

    width = max(len(c.name) for c in checks)
    print(f"{'check':<{width}}  {'value':>12}  {'threshold':>12}  result")
    for c in checks:
        print(f"{c.name:<{width}}  {c.value:>12.4e}  {c.threshold:>12.4e}  {'PASS' if c.passed else 'FAIL'}")

    frame = pd.DataFrame([{"check": c.name, "value": c.value, "threshold": c.threshold,
                           "passed": c.passed} for c in checks])
    path = write_csv(frame, Path(cfg.out_dir) / "validation.csv")
    _manifest(cfg, "validate", [path], {"passed": all(c.passed for c in checks)})
    return checks


COMMANDS: Dict[str, Callable[[RunConfig], object]] = {
    "spectrum": cmd_spectrum,
    "rates": cmd_rates,
    "scan": cmd_scan,
    "evolve": cmd_evolve,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per subcommand"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run file")
    common.add_argument("--out", default=None, help=f"Output directory (default: {Config.OUTPUT_DIR})")
    common.add_argument("--beta", type=float, default=None, help="Override the inverse temperature")
    common.add_argument("--threads", type=int, default=None, help="Worker threads for scans")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(
        description="Spectral gaps and transition-rate estimates for diffusion in a potential",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  Lowest eigenvalues of the quadratic benchmark:
    python cli.py spectrum --config configs/quadratic.json

  Arrhenius scan of the quartic double well:
    python cli.py scan --config configs/quartic_benchmark.json --threads 4
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)
    setup_logging("DEBUG" if args.verbose else Config.LOG_LEVEL)

    if not Config.validate_subcommand(args.command):
        logger.error(f"Unsupported subcommand: {args.command}")
        return 2

    try:
        cfg = RunConfig.from_file(args.config).with_overrides(
            beta=args.beta, out_dir=args.out, threads=args.threads)
        logger.info(f"Running {args.command} on {cfg.potential.family.value} (beta={list(cfg.betas)})")
        outcome = COMMANDS[args.command](cfg)
    except WittenRatesError as e:
        logger.error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1

    if args.command == "validate" and not all(c.passed for c in outcome):
        return 1
    logger.info(f"{args.command} finished; results in {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
