"""
Tests for potential families, critical points and free energies
"""

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
import pytest
from scipy.integrate import trapezoid

from witten_rates.potential import (
    CriticalKind,
    Family,
    GaussianBarrierWell,
    PotentialSpec,
    Quadratic,
    QuarticDoubleWell,
    Region,
    Tabulated,
    critical_points,
    evaluate,
    free_energy,
    from_config,
    grad,
    hessian_diag,
    laplacian,
    load_tabulated,
)
from witten_rates.utils.exceptions import ConfigError, DomainError, NonMorseError


@dataclass(frozen=True)
class PureQuartic(PotentialSpec):
    """U = x^4, degenerate at the origin"""

    family: ClassVar[Family] = Family.QUARTIC_DOUBLE_WELL

    def _u(self, t):
        return t ** 4

    def _du(self, t):
        return 4.0 * t ** 3

    def _d2u(self, t):
        return 12.0 * t ** 2


FAMILIES = [
    Quadratic(alpha=0.7),
    QuarticDoubleWell(h=1.0, a=1.0),
    GaussianBarrierWell(dU=1.0, a=2.0, L=2.0),
]


class TestEvaluate:
    """Test potential evaluation"""

    def test_quadratic_value(self):
        """Test U = alpha x^2 at a point"""
        assert evaluate(Quadratic(alpha=1.0), 2.0) == pytest.approx(4.0)

    def test_quartic_wells_and_barrier(self, quartic):
        """Test the quartic has zeros at the wells and height h at the origin"""
        assert evaluate(quartic, 0.0) == pytest.approx(1.0)
        assert evaluate(quartic, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert evaluate(quartic, -1.0) == pytest.approx(0.0, abs=1e-15)

    def test_vectorized_matches_pointwise(self, quartic):
        """Test array evaluation agrees with scalar evaluation"""
        x = np.linspace(-2.0, 2.0, 11)
        values = evaluate(quartic, x)
        assert values.shape == x.shape
        for xi, vi in zip(x, values):
            assert evaluate(quartic, float(xi)) == pytest.approx(vi, rel=1e-15)

    def test_two_dimensional_is_separable(self):
        """Test a two-dimensional quadratic sums over axes"""
        spec = Quadratic(alpha=1.0, dimension=2)
        assert evaluate(spec, [1.0, 2.0]) == pytest.approx(5.0)
        assert laplacian(spec, [1.0, 2.0]) == pytest.approx(4.0)

    def test_shifted_adds_constant(self, quartic):
        """Test shifted() adds a constant everywhere"""
        x = np.linspace(-2.0, 2.0, 7)
        assert np.allclose(evaluate(quartic.shifted(3.7), x), evaluate(quartic, x) + 3.7)

    def test_invalid_parameters(self):
        """Test non-positive parameters are rejected"""
        with pytest.raises(ConfigError):
            Quadratic(alpha=0.0)
        with pytest.raises(ConfigError):
            QuarticDoubleWell(h=-1.0)


class TestTabulated:
    """Test spline-reconstructed potentials"""

    def test_reconstructs_quadratic(self):
        """Test a sampled quadratic is reproduced in the interior"""
        nodes = np.linspace(-5.0, 5.0, 401)
        spec = Tabulated(nodes=nodes, values=nodes ** 2)
        assert evaluate(spec, 2.0) == pytest.approx(4.0, abs=1e-4)
        assert grad(spec, 2.0) == pytest.approx(4.0, abs=1e-4)

    def test_outside_range_raises(self):
        """Test evaluation outside the tabulated range fails"""
        nodes = np.linspace(-1.0, 1.0, 21)
        spec = Tabulated(nodes=nodes, values=nodes ** 2)
        with pytest.raises(DomainError):
            evaluate(spec, 1.5)

    def test_rejects_unsorted_nodes(self):
        """Test nodes must increase"""
        with pytest.raises(ConfigError):
            Tabulated(nodes=[0.0, 2.0, 1.0, 3.0], values=[0.0, 1.0, 2.0, 3.0])

    def test_load_from_csv(self, tmp_path):
        """Test loading a two-column CSV with a header"""
        nodes = np.linspace(-2.0, 2.0, 41)
        path = tmp_path / "u.csv"
        path.write_text("x,U\n" + "\n".join(f"{x!r},{x * x!r}" for x in nodes) + "\n")
        spec = load_tabulated(path)
        assert evaluate(spec, 0.5) == pytest.approx(0.25, abs=1e-3)


class TestGrad:
    """Test analytic derivatives against finite differences"""

    @pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
    def test_grad_matches_central_differences(self, spec):
        """Test grad U against central differences at 1000 random points"""
        rng = np.random.default_rng(7)
        x = rng.uniform(-2.0, 2.0, 1000)
        delta = 1e-5
        fd = (evaluate(spec, x + delta) - evaluate(spec, x - delta)) / (2 * delta)
        g = grad(spec, x)
        assert np.all(np.abs(g - fd) <= 1e-6 * (1.0 + np.abs(g)))

    @pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
    def test_hessian_matches_differences_of_grad(self, spec):
        """Test U'' against central differences of U'"""
        x = np.linspace(-2.0, 2.0, 101)
        delta = 1e-5
        fd = (grad(spec, x + delta) - grad(spec, x - delta)) / (2 * delta)
        assert np.allclose(hessian_diag(spec, x), fd, rtol=1e-6, atol=1e-6)

    def test_two_dimensional_gradient_shape(self):
        """Test the gradient has a trailing axis of size d"""
        spec = Quadratic(alpha=1.0, dimension=2)
        g = grad(spec, np.array([[1.0, -2.0], [0.5, 0.0]]))
        assert g.shape == (2, 2)
        assert np.allclose(g, [[2.0, -4.0], [1.0, 0.0]])


class TestCriticalPoints:
    """Test critical point location and classification"""

    def test_quartic_min_max_min(self, quartic):
        """Test the quartic has minima at +-1 and a maximum at 0"""
        points = critical_points(quartic, Region(-3.0, 3.0))
        assert [p.kind for p in points] == [CriticalKind.MINIMUM, CriticalKind.MAXIMUM, CriticalKind.MINIMUM]
        assert [p.x for p in points] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-10)

    def test_quadratic_single_minimum(self, quadratic):
        """Test the quadratic has one minimum"""
        points = critical_points(quadratic, Region(-5.0, 5.0))
        assert len(points) == 1
        assert points[0].kind is CriticalKind.MINIMUM
        assert points[0].x == pytest.approx(0.0, abs=1e-10)

    def test_tabulated_quartic(self):
        """Test critical points of a sampled quartic"""
        nodes = np.linspace(-3.0, 3.0, 1201)
        spec = Tabulated(nodes=nodes, values=(nodes ** 2 - 1.0) ** 2)
        points = critical_points(spec, Region(-2.0, 2.0))
        assert [p.x for p in points] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-6)
        assert points[1].kind is CriticalKind.MAXIMUM

    def test_two_dimensional_saddles(self):
        """Test the separable 2D quartic has 4 minima, 4 saddles and 1 maximum"""
        spec = QuarticDoubleWell(h=1.0, a=1.0, dimension=2)
        kinds = [p.kind for p in critical_points(spec, Region(-2.0, 2.0))]
        assert kinds.count(CriticalKind.MINIMUM) == 4
        assert kinds.count(CriticalKind.SADDLE) == 4
        assert kinds.count(CriticalKind.MAXIMUM) == 1

    def test_degenerate_hessian_raises(self):
        """Test a non-Morse critical point is reported with its location"""
        with pytest.raises(NonMorseError) as excinfo:
            critical_points(PureQuartic(), Region(-3.0, 3.0))
        assert excinfo.value.location[0] == pytest.approx(0.0, abs=1e-6)


class TestFreeEnergy:
    """Test free energies of regions"""

    def test_constant_potential(self):
        """Test F equals the constant on a unit interval"""
        spec = Tabulated(nodes=np.linspace(0.0, 1.0, 11), values=np.full(11, 2.5))
        assert free_energy(spec, Region(0.0, 1.0), 3.0) == pytest.approx(2.5, abs=1e-12)

    def test_quadratic_gaussian_integral(self, quadratic):
        """Test F = -ln sqrt(pi) for U = x^2 at beta = 1"""
        assert free_energy(quadratic, Region(-8.0, 8.0), 1.0) == pytest.approx(
            -math.log(math.sqrt(math.pi)), abs=1e-10)

    def test_quartic_against_fine_trapezoid(self, quartic):
        """Test F against a brute-force trapezoid rule"""
        beta = 8.0
        x = np.linspace(0.5, 1.5, 2 ** 20 + 1)
        reference = -math.log(trapezoid(np.exp(-beta * evaluate(quartic, x)), x)) / beta
        assert free_energy(quartic, Region(0.5, 1.5), beta) == pytest.approx(reference, abs=1e-10)

    def test_region_inclusion_lowers_free_energy(self, quartic):
        """Test enlarging the region does not increase F"""
        inner = free_energy(quartic, Region(0.5, 1.5), 4.0)
        outer = free_energy(quartic, Region(0.0, 2.0), 4.0)
        assert outer <= inner

    def test_shift_covariance(self, quartic):
        """Test F(U + c) = F(U) + c"""
        region = Region(-2.0, 0.5)
        base = free_energy(quartic, region, 5.0)
        assert free_energy(quartic.shifted(3.7), region, 5.0) - base == pytest.approx(3.7, abs=1e-12)

    def test_beta_must_be_positive(self, quartic):
        """Test beta <= 0 is rejected"""
        with pytest.raises(ConfigError):
            free_energy(quartic, Region(0.0, 1.0), 0.0)

    def test_empty_region_rejected(self):
        """Test a degenerate region cannot be built"""
        with pytest.raises(ConfigError):
            Region(1.0, 1.0)


class TestFromConfig:
    """Test building potentials from run-file blocks"""

    def test_quartic_block(self):
        """Test a quartic block"""
        spec = from_config({"family": "quartic_double_well", "h": 2.0, "a": 1.5})
        assert isinstance(spec, QuarticDoubleWell)
        assert spec.h == 2.0 and spec.a == 1.5

    def test_unknown_family(self):
        """Test unknown families are rejected"""
        with pytest.raises(ConfigError):
            from_config({"family": "lennard_jones"})

    def test_unknown_parameter(self):
        """Test unknown parameters are rejected"""
        with pytest.raises(ConfigError):
            from_config({"family": "quadratic", "alpha": 1.0, "beta": 2.0})

    def test_tabulated_inline(self):
        """Test inline tabulated nodes and values"""
        spec = from_config({"family": "tabulated", "nodes": [0, 1, 2, 3, 4], "values": [4, 1, 0, 1, 4]})
        assert isinstance(spec, Tabulated)
        assert evaluate(spec, 2.0) == pytest.approx(0.0, abs=1e-12)
