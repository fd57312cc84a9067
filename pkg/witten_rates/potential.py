"""
Potential families U(x), their derivatives, critical points and free energies

Analytic families are separable: in d dimensions U(x) = offset + sum_i u(x_i)
for a one-dimensional profile u. Tabulated potentials are one-dimensional and
reconstructed with a natural cubic spline so that U is C^2.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from witten_rates.utils.exceptions import ConfigError, DomainError, NonMorseError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

ROOT_TOL = 1e-12
HESSIAN_TOL = 1e-8
BRACKET_POINTS = 2000
QUAD_RTOL = 1e-10
MAX_BREAKS = 50


class Family(str, Enum):
    """Supported potential families"""

    QUADRATIC = "quadratic"
    QUARTIC_DOUBLE_WELL = "quartic_double_well"
    GAUSSIAN_BARRIER_WELL = "gaussian_barrier_well"
    TABULATED = "tabulated"


class CriticalKind(str, Enum):
    """Morse type of a critical point"""

    MINIMUM = "minimum"
    MAXIMUM = "maximum"
    SADDLE = "saddle"


@dataclass(frozen=True)
class Region:
    """A one-dimensional interval [lo, hi], a well basin or a barrier neighborhood"""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ConfigError(f"Region bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ConfigError(f"Region requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def overlaps(self, other: "Region") -> bool:
        """True when the interiors intersect"""
        return self.lo < other.hi and other.lo < self.hi


@dataclass(frozen=True)
class CriticalPoint:
    """A root of grad U with its Morse classification"""

    location: tuple
    kind: CriticalKind
    hessian_eigs: tuple

    @property
    def x(self) -> float:
        """Coordinate of a one-dimensional critical point"""
        return float(self.location[0])


@dataclass(frozen=True)
class PotentialSpec:
    """
    Base class for potential families

    Subclasses implement the one-dimensional profile `_u` and its first two
    derivatives; the base class assembles the separable d-dimensional form.
    """

    dimension: int = 1
    offset: float = 0.0
    family: ClassVar[Family]

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.dimension}")

    # one-dimensional profile
    def _u(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _du(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _d2u(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_domain(self, t: np.ndarray) -> None:
        """Analytic families are defined everywhere"""

    @property
    def length_scale(self) -> float:
        """Well scale used to size default grids"""
        return 1.0

    def default_domain(self) -> Region:
        """Grid interval used when a run file has no grid bounds"""
        return Region(-8.0 * self.length_scale, 8.0 * self.length_scale)

    def shifted(self, c: float) -> "PotentialSpec":
        """The same potential plus a constant c"""
        return replace(self, offset=self.offset + c)

    def metadata(self) -> Dict[str, Any]:
        """Plain-data description for manifests and scan tables"""
        data = {"family": self.family.value, "dimension": self.dimension, "offset": self.offset}
        data.update(self._parameters())
        return data

    def _parameters(self) -> Dict[str, Any]:
        return {}


@dataclass(frozen=True)
class Quadratic(PotentialSpec):
    """U(x) = alpha |x|^2"""

    alpha: float = 1.0
    family: ClassVar[Family] = Family.QUADRATIC

    def __post_init__(self):
        super().__post_init__()
        if not self.alpha > 0:
            raise ConfigError(f"Quadratic stiffness alpha must be > 0, got {self.alpha}")

    def _u(self, t):
        return self.alpha * t ** 2

    def _du(self, t):
        return 2.0 * self.alpha * t

    def _d2u(self, t):
        return np.full_like(t, 2.0 * self.alpha)

    @property
    def length_scale(self) -> float:
        return 1.0 / np.sqrt(self.alpha)

    def _parameters(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class QuarticDoubleWell(PotentialSpec):
    """U(x) = h ((x/a)^2 - 1)^2, barrier height h at 0, wells at +-a"""

    h: float = 1.0
    a: float = 1.0
    family: ClassVar[Family] = Family.QUARTIC_DOUBLE_WELL

    def __post_init__(self):
        super().__post_init__()
        if not (self.h > 0 and self.a > 0):
            raise ConfigError(f"Quartic double well needs h > 0 and a > 0, got h={self.h}, a={self.a}")

    def _u(self, t):
        s = (t / self.a) ** 2 - 1.0
        return self.h * s ** 2

    def _du(self, t):
        s = (t / self.a) ** 2 - 1.0
        return 4.0 * self.h * s * t / self.a ** 2

    def _d2u(self, t):
        return self.h * (12.0 * t ** 2 / self.a ** 4 - 4.0 / self.a ** 2)

    @property
    def length_scale(self) -> float:
        return self.a

    def _parameters(self):
        return {"h": self.h, "a": self.a}


@dataclass(frozen=True)
class GaussianBarrierWell(PotentialSpec):
    """
    Gaussian barrier between two confined wells

    U(x) = dU exp(-a^2 x^2) + dU (x/L)^4: a barrier of height dU and inverse
    width a at the origin, quartic walls at scale L.
    """

    dU: float = 1.0
    a: float = 2.0
    L: float = 2.0
    family: ClassVar[Family] = Family.GAUSSIAN_BARRIER_WELL

    def __post_init__(self):
        super().__post_init__()
        if not (self.dU > 0 and self.a > 0 and self.L > 0):
            raise ConfigError(
                f"Gaussian barrier well needs dU, a, L > 0, got dU={self.dU}, a={self.a}, L={self.L}"
            )

    def _u(self, t):
        return self.dU * (np.exp(-(self.a * t) ** 2) + (t / self.L) ** 4)

    def _du(self, t):
        return self.dU * (-2.0 * self.a ** 2 * t * np.exp(-(self.a * t) ** 2)
                          + 4.0 * t ** 3 / self.L ** 4)

    def _d2u(self, t):
        g = np.exp(-(self.a * t) ** 2)
        return self.dU * ((4.0 * self.a ** 4 * t ** 2 - 2.0 * self.a ** 2) * g
                          + 12.0 * t ** 2 / self.L ** 4)

    @property
    def length_scale(self) -> float:
        return self.L

    def _parameters(self):
        return {"dU": self.dU, "a": self.a, "L": self.L}


@dataclass(frozen=True, eq=False)
class Tabulated(PotentialSpec):
    """Sampled one-dimensional potential reconstructed by a natural cubic spline"""

    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    family: ClassVar[Family] = Family.TABULATED

    def __post_init__(self):
        super().__post_init__()
        if self.dimension != 1:
            raise ConfigError("Tabulated potentials are one-dimensional only")
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 4:
            raise ConfigError("Tabulated potential needs matching node/value lists of length >= 4")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigError("Tabulated nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ConfigError("Tabulated values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spline", CubicSpline(nodes, values, bc_type="natural"))

    def _check_domain(self, t):
        if np.any(t < self.nodes[0]) or np.any(t > self.nodes[-1]):
            raise DomainError(
                f"Point outside tabulated range [{self.nodes[0]}, {self.nodes[-1]}]"
            )

    def _u(self, t):
        return self._spline(t)

    def _du(self, t):
        return self._spline(t, 1)

    def _d2u(self, t):
        return self._spline(t, 2)

    @property
    def length_scale(self) -> float:
        return 0.5 * (self.nodes[-1] - self.nodes[0]) / 8.0

    def default_domain(self) -> Region:
        return Region(float(self.nodes[0]), float(self.nodes[-1]))

    def shifted(self, c: float) -> "Tabulated":
        return Tabulated(nodes=self.nodes, values=self.values + c)

    def _parameters(self):
        return {"nodes": int(self.nodes.size), "range": [float(self.nodes[0]), float(self.nodes[-1])]}


def _as_points(spec: PotentialSpec, x: ArrayLike) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if spec.dimension > 1 and (pts.ndim == 0 or pts.shape[-1] != spec.dimension):
        raise ConfigError(f"Expected coordinates with last axis of size {spec.dimension}")
    spec._check_domain(pts)
    return pts


def _scalar_or_array(values: np.ndarray) -> Union[float, np.ndarray]:
    return float(values) if np.ndim(values) == 0 else values


def evaluate(spec: PotentialSpec, x: ArrayLike) -> Union[float, np.ndarray]:
    """
    Evaluate U at one or many points

    Args:
        spec: Potential
        x: Coordinate(s); for d > 1 the last axis holds the d components

    Returns:
        U(x), a float for a single point
    """
    pts = _as_points(spec, x)
    u = spec._u(pts)
    if spec.dimension > 1:
        u = u.sum(axis=-1)
    return _scalar_or_array(u + spec.offset)


def grad(spec: PotentialSpec, x: ArrayLike) -> Union[float, np.ndarray]:
    """
    Gradient of U

    Args:
        spec: Potential
        x: Coordinate(s)

    Returns:
        U'(x) in one dimension, otherwise an array with a trailing axis of size d
    """
    pts = _as_points(spec, x)
    return _scalar_or_array(spec._du(pts))


def hessian_diag(spec: PotentialSpec, x: ArrayLike) -> Union[float, np.ndarray]:
    """Diagonal of the Hessian; the full Hessian for separable families"""
    pts = _as_points(spec, x)
    return _scalar_or_array(spec._d2u(pts))


def laplacian(spec: PotentialSpec, x: ArrayLike) -> Union[float, np.ndarray]:
    """Laplacian of U"""
    d2 = hessian_diag(spec, x)
    if spec.dimension > 1:
        return _scalar_or_array(np.asarray(d2).sum(axis=-1))
    return d2


def _profile_roots(spec: PotentialSpec, search: Region) -> List[float]:
    """Roots of u' in the search interval by sign-change bracketing and Brent refinement"""
    t = np.linspace(search.lo, search.hi, 10 * BRACKET_POINTS + 1)
    spec._check_domain(t)
    g = spec._du(t)
    roots = [float(t[i]) for i in np.flatnonzero(g == 0.0)]
    for i in np.flatnonzero(g[:-1] * g[1:] < 0.0):
        roots.append(brentq(lambda s: float(spec._du(np.asarray(s))), t[i], t[i + 1],
                            xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps))
    return sorted(roots)


def classify(hessian_eigs: Sequence[float]) -> CriticalKind:
    """Morse type from the signs of the Hessian eigenvalues"""
    eigs = np.asarray(hessian_eigs)
    if np.all(eigs > 0):
        return CriticalKind.MINIMUM
    if np.all(eigs < 0):
        return CriticalKind.MAXIMUM
    return CriticalKind.SADDLE


def critical_points(spec: PotentialSpec, search: Region) -> List[CriticalPoint]:
    """
    Locate and classify all critical points of U inside a search interval

    For d > 1 the search interval is applied to every axis and the separable
    structure gives the critical points as products of profile roots.

    Args:
        spec: Potential (C^2)
        search: Search interval

    Returns:
        Critical points sorted by coordinate

    Raises:
        NonMorseError: A root has a Hessian eigenvalue below tolerance
    """
    roots = _profile_roots(spec, search)
    t = np.linspace(search.lo, search.hi, BRACKET_POINTS + 1)
    scale = max(float(np.max(np.abs(spec._d2u(t)))), np.finfo(float).tiny)

    curvature = {}
    for r in roots:
        c = float(spec._d2u(np.asarray(r)))
        if abs(c) < HESSIAN_TOL * scale:
            raise NonMorseError(f"Degenerate Hessian at x = {r:.12g} (U'' = {c:.3e})", location=(r,))
        curvature[r] = c

    points = []
    for combo in itertools.product(roots, repeat=spec.dimension):
        eigs = tuple(curvature[r] for r in combo)
        points.append(CriticalPoint(location=tuple(combo), kind=classify(eigs), hessian_eigs=eigs))
    logger.debug(f"Found {len(points)} critical points in [{search.lo}, {search.hi}]")
    return sorted(points, key=lambda p: p.location)


def _region_extreme(spec: PotentialSpec, region: Region, roots: List[float], largest: bool) -> float:
    t = np.linspace(region.lo, region.hi, BRACKET_POINTS + 1)
    if roots:
        t = np.concatenate([t, roots])
    u = np.asarray(evaluate(spec, t))
    return float(u.max() if largest else u.min())


def log_partition(spec: PotentialSpec, region: Region, beta: float, sign: float = -1.0) -> float:
    """
    ln of the integral of exp(sign * beta * U) over a region, in shifted log-space

    Args:
        spec: One-dimensional potential
        region: Integration interval
        beta: Inverse temperature
        sign: -1 for the Gibbs weight, +1 for the inverse (barrier) weight

    Returns:
        Natural log of the integral
    """
    if spec.dimension != 1:
        raise ConfigError("Region integrals are one-dimensional")
    roots = _profile_roots(spec, region)
    ref = _region_extreme(spec, region, roots, largest=sign > 0)

    def integrand(s: float) -> float:
        return float(np.exp(sign * beta * (evaluate(spec, s) - ref)))

    breaks = [r for r in roots if region.lo < r < region.hi]
    if len(breaks) > MAX_BREAKS:
        # flat stretches make every sample a root
        breaks = []
    value, error = quad(integrand, region.lo, region.hi, points=breaks or None,
                        epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
    if not value > 0:
        raise DomainError(f"Empty integral over [{region.lo}, {region.hi}] at beta={beta}")
    logger.debug(f"Quadrature over [{region.lo}, {region.hi}]: {value:.6e} +- {error:.1e}")
    return sign * beta * ref + float(np.log(value))


def free_energy(spec: PotentialSpec, region: Region, beta: float) -> float:
    """
    Free energy F(G) defined by exp(-beta F) = integral over G of exp(-beta U)

    Args:
        spec: One-dimensional potential
        region: The set of states G
        beta: Inverse temperature (> 0)

    Returns:
        F(G)
    """
    if not beta > 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    return -log_partition(spec, region, beta, sign=-1.0) / beta


def load_tabulated(path: Union[str, Path]) -> Tabulated:
    """Read a two-column (x, U) CSV into a Tabulated potential"""
    try:
        frame = pd.read_csv(path, header=None, comment="#")
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read tabulated potential {path}: {e}") from e
    if frame.shape[1] < 2:
        raise ConfigError(f"Tabulated potential {path} needs two columns (x, U)")
    # tolerate a header row
    frame = frame.apply(pd.to_numeric, errors="coerce").dropna()
    return Tabulated(nodes=frame.iloc[:, 0].to_numpy(), values=frame.iloc[:, 1].to_numpy())


_FAMILIES = {
    Family.QUADRATIC: (Quadratic, {"alpha"}),
    Family.QUARTIC_DOUBLE_WELL: (QuarticDoubleWell, {"h", "a"}),
    Family.GAUSSIAN_BARRIER_WELL: (GaussianBarrierWell, {"dU", "a", "L"}),
}


def from_config(block: Mapping[str, Any], base_dir: Union[str, Path, None] = None) -> PotentialSpec:
    """
    Build a potential from its JSON configuration block

    Args:
        block: e.g. {"family": "quartic_double_well", "h": 1.0, "a": 1.0}
        base_dir: Directory that relative CSV paths are resolved against

    Returns:
        Potential family and parameters
    """
    if not isinstance(block, Mapping) or "family" not in block:
        raise ConfigError("potential block must be an object with a 'family' key")
    try:
        family = Family(block["family"])
    except ValueError as e:
        raise ConfigError(f"Unknown potential family: {block['family']}") from e

    if family is Family.TABULATED:
        if "path" in block:
            path = Path(block["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            spec = load_tabulated(path)
        elif "nodes" in block and "values" in block:
            spec = Tabulated(nodes=block["nodes"], values=block["values"])
        else:
            raise ConfigError("tabulated potential needs 'path' or 'nodes'/'values'")
        return spec.shifted(float(block["offset"])) if "offset" in block else spec

    cls, allowed = _FAMILIES[family]
    extra = set(block) - allowed - {"family", "dimension", "offset"}
    if extra:
        raise ConfigError(f"Unknown parameters for {family.value}: {sorted(extra)}")
    try:
        kwargs = {k: float(block[k]) for k in allowed if k in block}
        kwargs["dimension"] = int(block.get("dimension", 1))
        kwargs["offset"] = float(block.get("offset", 0.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid potential parameters: {e}") from e
    return cls(**kwargs)
