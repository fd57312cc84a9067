"""Configuration management utilities"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from witten_rates.potential import Family, PotentialSpec, Region, from_config
from witten_rates.utils.exceptions import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Environment-backed application configuration"""

    # Application Configuration
    OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./out")
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Numerics
    THREADS = int(os.getenv("WITTEN_THREADS", "1"))
    SOLVER_TOL = float(os.getenv("WITTEN_SOLVER_TOL", "1e-10"))

    SUPPORTED_SUBCOMMANDS = ["spectrum", "rates", "scan", "evolve", "validate"]
    SUPPORTED_FAMILIES = [f.value for f in Family]

    @staticmethod
    def validate_subcommand(subcommand: str) -> bool:
        """Validate if subcommand is supported"""
        return subcommand.lower() in Config.SUPPORTED_SUBCOMMANDS

    @staticmethod
    def validate_family(family: str) -> bool:
        """Validate if potential family is supported"""
        return family.lower() in Config.SUPPORTED_FAMILIES


@dataclass(frozen=True)
class GridSettings:
    """Grid block of a run file"""

    lo: float
    hi: float
    n: int = 1599
    d: int = 1
    stencil: str = "factorized"


@dataclass(frozen=True)
class PartitionSettings:
    """Explicit partition block; None in RunConfig means "auto" """

    barrier_x: float
    well: Region
    other_well: Optional[Region] = None


@dataclass(frozen=True)
class EvolutionSettings:
    """Evolution block of a run file"""

    dt: Optional[float] = None
    T: Optional[float] = None
    sample_every: int = 10
    startup_steps: int = 4
    initial: Dict[str, Any] = field(default_factory=lambda: {"kind": "gaussian"})
    snapshot_times: Tuple[float, ...] = ()


@dataclass(frozen=True)
class ScanSettings:
    """Scan block of a run file"""

    n_min: int = 1599
    points_per_barrier: int = 200
    prefactor_powers: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration"""

    potential: PotentialSpec
    betas: Tuple[float, ...]
    grid: GridSettings
    partition: Optional[PartitionSettings] = None
    k: int = 4
    evolution: EvolutionSettings = field(default_factory=EvolutionSettings)
    scan: ScanSettings = field(default_factory=ScanSettings)
    out_dir: str = Config.OUTPUT_DIR
    threads: int = Config.THREADS
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def beta(self) -> float:
        """Inverse temperature for single-β subcommands"""
        return self.betas[0]

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Load and validate a JSON run file

        Args:
            path: Path to the JSON file

        Returns:
            Validated configuration
        """
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON in {path}: {e}") from e
        return cls.from_dict(data, base_dir=path.parent)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Union[str, Path, None] = None) -> "RunConfig":
        """Validate a parsed run file"""
        if not isinstance(data, dict):
            raise ConfigError("Run config must be a JSON object")

        block = data.get("potential", {})
        if isinstance(block, dict) and "family" in block:
            family = str(block["family"])
            if not Config.validate_family(family):
                raise ConfigError(f"Unsupported potential family {family!r}; "
                                  f"expected one of {Config.SUPPORTED_FAMILIES}")
            block = {**block, "family": family.lower()}
        spec = from_config(block, base_dir=base_dir)

        if "betas" in data:
            betas = data["betas"]
        elif "beta" in data:
            betas = [data["beta"]]
        else:
            raise ConfigError("Run config needs 'beta' or 'betas'")
        betas = tuple(_positive(b, "beta") for b in _as_list(betas, "betas"))
        if not betas:
            raise ConfigError("'betas' must not be empty")

        grid = _grid_settings(data.get("grid", {}), spec)
        partition = _partition_settings(data.get("partition", "auto"))

        spectrum = data.get("spectrum", {})
        k = _int(spectrum.get("k", 4), "spectrum.k")
        if k < 2:
            raise ConfigError(f"spectrum.k must be >= 2, got {k}")

        ev = data.get("evolution", {})
        evolution = EvolutionSettings(
            dt=_positive(ev["dt"], "evolution.dt") if ev.get("dt") is not None else None,
            T=_positive(ev["T"], "evolution.T") if ev.get("T") is not None else None,
            sample_every=_int(ev.get("sample_every", 10), "evolution.sample_every", minimum=1),
            startup_steps=_int(ev.get("startup_steps", 4), "evolution.startup_steps", minimum=0),
            initial=dict(ev.get("initial", {"kind": "gaussian"})),
            snapshot_times=tuple(_positive(t, "snapshot time") for t in ev.get("snapshot_times", [])),
        )

        sc = data.get("scan", {})
        policy = sc.get("grid_policy", {})
        scan = ScanSettings(
            n_min=_int(policy.get("n_min", 1599), "scan.grid_policy.n_min", minimum=16),
            points_per_barrier=_int(policy.get("points_per_barrier", 200),
                                    "scan.grid_policy.points_per_barrier", minimum=1),
            prefactor_powers={str(k_): float(v) for k_, v in
                              data.get("fit", {}).get("prefactor_powers", {}).items()},
        )

        threads = _int(sc.get("threads", data.get("threads", Config.THREADS)), "threads", minimum=1)
        out_dir = str(data.get("out", Config.OUTPUT_DIR))

        logger.debug(f"Loaded config: family={spec.family.value}, betas={betas}, grid={grid}")
        return cls(potential=spec, betas=betas, grid=grid, partition=partition, k=k,
                   evolution=evolution, scan=scan, out_dir=out_dir, threads=threads, raw=data)

    def with_overrides(self, beta: Optional[float] = None, out_dir: Optional[str] = None,
                       threads: Optional[int] = None) -> "RunConfig":
        """Apply command-line overrides of config scalars"""
        updated = self
        if beta is not None:
            updated = replace(updated, betas=(_positive(beta, "--beta"),))
        if out_dir is not None:
            updated = replace(updated, out_dir=out_dir)
        if threads is not None:
            updated = replace(updated, threads=_int(threads, "--threads", minimum=1))
        return updated

    def resolved(self) -> Dict[str, Any]:
        """Plain-data echo of the resolved configuration for the run manifest"""
        partition = None
        if self.partition is not None:
            partition = {
                "barrier_x": self.partition.barrier_x,
                "well": [self.partition.well.lo, self.partition.well.hi],
                "other_well": ([self.partition.other_well.lo, self.partition.other_well.hi]
                               if self.partition.other_well else None),
            }
        return {
            "potential": self.potential.metadata(),
            "betas": list(self.betas),
            "grid": asdict(self.grid),
            "partition": partition or "auto",
            "k": self.k,
            "evolution": {**asdict(self.evolution), "snapshot_times": list(self.evolution.snapshot_times)},
            "scan": asdict(self.scan),
            "out": self.out_dir,
            "threads": self.threads,
        }


def _as_list(value: Any, name: str) -> List[Any]:
    if isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigError(f"'{name}' must be a list")


def _positive(value: Any, name: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a number, got {value!r}") from e
    if not (math.isfinite(x) and x > 0):
        raise ConfigError(f"{name} must be finite and > 0, got {value!r}")
    return x


def _int(value: Any, name: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _region(value: Any, name: str) -> Region:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a [lo, hi] pair")
    try:
        return Region(float(value[0]), float(value[1]))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def _grid_settings(block: Dict[str, Any], spec: PotentialSpec) -> GridSettings:
    if not isinstance(block, dict):
        raise ConfigError("grid must be an object")
    domain = spec.default_domain()
    lo = float(block.get("lo", domain.lo))
    hi = float(block.get("hi", domain.hi))
    if not lo < hi:
        raise ConfigError(f"grid requires lo < hi, got [{lo}, {hi}]")
    n = _int(block.get("n", 1599), "grid.n", minimum=16)
    d = _int(block.get("d", spec.dimension), "grid.d", minimum=1)
    if d not in (1, 2):
        raise ConfigError(f"grid.d must be 1 or 2, got {d}")
    if d != spec.dimension:
        raise ConfigError(f"grid.d={d} does not match potential dimension {spec.dimension}")
    # the factorized stencil exists in one dimension only
    stencil = str(block.get("stencil", "factorized" if d == 1 else "central"))
    if stencil not in ("central", "factorized"):
        raise ConfigError(f"grid.stencil must be 'central' or 'factorized', got {stencil!r}")
    if stencil == "factorized" and d != 1:
        raise ConfigError("grid.stencil 'factorized' needs d = 1")
    return GridSettings(lo=lo, hi=hi, n=n, d=d, stencil=stencil)


def _partition_settings(block: Any) -> Optional[PartitionSettings]:
    if block == "auto":
        return None
    if not isinstance(block, dict) or "barrier_x" not in block or "well" not in block:
        raise ConfigError("partition must be \"auto\" or {barrier_x, well, [other_well]}")
    other = _region(block["other_well"], "partition.other_well") if "other_well" in block else None
    return PartitionSettings(barrier_x=float(block["barrier_x"]),
                             well=_region(block["well"], "partition.well"),
                             other_well=other)
