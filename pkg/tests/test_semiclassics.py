"""
Tests for the semiclassical and thermodynamic rate estimates
"""

import logging
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from witten_rates.grid_operator import assemble_schrodinger, build_grid
from witten_rates.potential import Quadratic, QuarticDoubleWell, Region, Tabulated, evaluate
from witten_rates.semiclassics import (
    CSV_COLUMNS,
    arrhenius_rate,
    barrier_height,
    barrier_interval,
    barrier_momentum,
    bohr_sommerfeld_action,
    estimate_rates,
    eyring_rate,
    eyring_regions,
    flux_eyring_rate,
    gaussian_barrier_rate,
    gaussian_barrier_width,
    low_temperature_wkb,
    predicts_bound_state,
    rate_summary,
    thermal_window,
    well_volume,
    wkb_splitting,
)
from witten_rates.spectrum import WellPartition, lowest_eigenpairs, partition_from_critical_points
from witten_rates.utils.exceptions import ConfigError, SemiclassicalError
from witten_rates.witten import WittenContext, effective_potential


@pytest.fixture
def tilted():
    """Sampled quartic with a linear tilt, so the wells differ in depth"""
    nodes = np.linspace(-3.0, 3.0, 1201)
    return Tabulated(nodes=nodes, values=(nodes ** 2 - 1.0) ** 2 + 0.1 * nodes)


@pytest.fixture(scope="module")
def quartic_rates():
    """Every estimate for the quartic double well at beta = 10"""
    spec = QuarticDoubleWell(h=1.0, a=1.0)
    grid = build_grid(-3.0, 3.0, 1599)
    ctx = WittenContext(spec, 10.0)
    partition = partition_from_critical_points(spec, Region(-3.0, 3.0))
    result = lowest_eigenpairs(assemble_schrodinger(ctx, grid), 2)
    return estimate_rates(ctx, grid, result, partition)


class TestBohrSommerfeld:
    """Test the bound-state action"""

    @pytest.mark.parametrize("beta", [8.0, 16.0, 32.0])
    def test_quadratic_minimum_gives_half(self, beta):
        """Test the action at a quadratic minimum is 1/2"""
        action = bohr_sommerfeld_action(WittenContext(Quadratic(alpha=1.0), beta), Region(-3.0, 3.0))
        assert action == pytest.approx(0.5, rel=0.01)
        assert predicts_bound_state(action)

    def test_zero_at_maximum(self, quartic):
        """Test V > 0 around the quartic maximum gives an action of exactly 0"""
        assert bohr_sommerfeld_action(WittenContext(quartic, 8.0), Region(-0.3, 0.3)) == 0.0

    def test_against_brute_force_trapezoid(self, quartic):
        """Test the action against a fine trapezoid rule"""
        ctx = WittenContext(quartic, 8.0)
        x = np.linspace(0.5, 1.5, 2 ** 20 + 1)
        integrand = np.sqrt(np.maximum(-effective_potential(ctx, x), 0.0))
        reference = trapezoid(integrand, x) / math.pi
        assert bohr_sommerfeld_action(ctx, Region(0.5, 1.5)) == pytest.approx(reference, abs=1e-6)

    def test_approaches_half_from_below(self, quartic):
        """Test the quartic minimum's action increases with beta toward 1/2"""
        well = Region(0.3, 2.0)
        actions = [bohr_sommerfeld_action(WittenContext(quartic, b), well) for b in (2.0, 4.0, 8.0, 16.0)]
        assert np.all(np.diff(actions) > 0)
        assert actions[-1] == pytest.approx(0.5, abs=0.02)

    def test_two_dimensional_rejected(self):
        """Test the action is one-dimensional"""
        with pytest.raises(ConfigError):
            bohr_sommerfeld_action(WittenContext(Quadratic(alpha=1.0, dimension=2), 1.0), Region(-1.0, 1.0))


class TestWKB:
    """Test the tunneling splitting"""

    def test_barrier_interval_brackets_top(self, quartic, quartic_partition):
        """Test V vanishes at both ends of the barrier interval"""
        ctx = WittenContext(quartic, 10.0)
        left, right = barrier_interval(ctx, quartic_partition)
        assert left < 0.0 < right
        assert left == pytest.approx(-right, rel=1e-8)
        assert abs(effective_potential(ctx, right)) <= 1e-8 * ctx.beta ** 2

    def test_well_volume_symmetric_about_minimum(self, quartic, quartic_partition):
        """Test the classically allowed length shrinks like 1/sqrt(beta)"""
        v10 = well_volume(WittenContext(quartic, 10.0), quartic_partition)
        v40 = well_volume(WittenContext(quartic, 40.0), quartic_partition)
        assert v10 == pytest.approx(0.309, abs=0.005)
        assert v10 / v40 == pytest.approx(2.0, rel=0.05)

    def test_rejects_asymmetric_wells(self, tilted):
        """Test the doublet formula requires symmetric wells"""
        partition = partition_from_critical_points(tilted, Region(-2.5, 2.5))
        ctx = WittenContext(tilted, 6.0)
        with pytest.raises(SemiclassicalError):
            wkb_splitting(ctx, partition)
        with pytest.raises(SemiclassicalError):
            arrhenius_rate(ctx, partition)

    def test_arrhenius_and_wkb_exponents_converge(self, quartic, quartic_partition):
        """Test |ln(arrhenius/wkb)| / beta decreases over beta = 6, 10, 14"""
        gaps = []
        for beta in (6.0, 10.0, 14.0):
            ctx = WittenContext(quartic, beta)
            ratio = arrhenius_rate(ctx, quartic_partition) / wkb_splitting(ctx, quartic_partition)
            gaps.append(abs(math.log(ratio)) / beta)
        assert np.all(np.diff(gaps) < 0)

    def test_gaussian_closed_form_matches_arrhenius(self, quartic, quartic_partition):
        """Test sqrt(beta dU) a equals sqrt(V(x_b)) when a matches the barrier curvature"""
        ctx = WittenContext(quartic, 10.0)
        assert gaussian_barrier_rate(ctx, quartic_partition) == pytest.approx(
            arrhenius_rate(ctx, quartic_partition), rel=1e-10)

    def test_barrier_momentum_and_width(self, quartic, quartic_partition):
        """Test |p(0)| = sqrt(2 beta) and a = sqrt(2) for U''(0) = -4, dU = 1"""
        ctx = WittenContext(quartic, 8.0)
        assert barrier_momentum(ctx, quartic_partition) == pytest.approx(4.0, rel=1e-12)
        assert gaussian_barrier_width(quartic, quartic_partition) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_low_temperature_reduction(self, quartic, quartic_partition):
        """Test the integral of |U'| over the barrier interval is 2 (U(x_b) - U(edge))"""
        ctx = WittenContext(quartic, 10.0)
        left, _ = barrier_interval(ctx, quartic_partition)
        ratio = low_temperature_wkb(ctx, quartic_partition) / arrhenius_rate(ctx, quartic_partition)
        assert math.log(ratio) == pytest.approx(10.0 * float(evaluate(quartic, left)), rel=1e-6)

    def test_flux_rate_scaling(self, quartic, quartic_partition):
        """Test the flux rate scales like beta exp(-beta dU) over beta = 8 -> 16"""
        rates = [flux_eyring_rate(WittenContext(quartic, b), quartic_partition) for b in (8.0, 16.0)]
        assert math.log(rates[0] / rates[1]) == pytest.approx(8.0 - math.log(2.0), rel=0.02)


class TestEyring:
    """Test free-energy rates"""

    def test_identical_regions(self, quartic):
        """Test identical regions give 1"""
        region = Region(-0.2, 0.2)
        assert eyring_rate(WittenContext(quartic, 5.0), region, region) == 1.0

    def test_overlapping_regions(self, quartic):
        """Test partially overlapping regions are rejected"""
        with pytest.raises(ConfigError):
            eyring_rate(WittenContext(quartic, 5.0), Region(-2.0, 0.1), Region(-0.2, 0.2))

    def test_shift_invariance(self, quartic):
        """Test adding a constant to U leaves the rate unchanged"""
        well, barrier = Region(-2.0, -0.3), Region(-0.2, 0.2)
        base = eyring_rate(WittenContext(quartic, 8.0), well, barrier)
        shifted = eyring_rate(WittenContext(quartic.shifted(5.0), 8.0), well, barrier)
        assert shifted == pytest.approx(base, rel=1e-10)

    def test_thermal_window(self, quartic, quartic_partition):
        """Test the window edges sit where U = U(x_b) - 1/beta"""
        ctx = WittenContext(quartic, 10.0)
        window = thermal_window(ctx, quartic_partition)
        assert window.hi == pytest.approx(math.sqrt(1.0 - math.sqrt(0.9)), rel=1e-8)
        assert evaluate(quartic, window.lo) == pytest.approx(0.9, abs=1e-10)

    def test_default_regions_are_disjoint(self, quartic, quartic_partition):
        """Test the well region ends where the thermal window begins"""
        well, window = eyring_regions(WittenContext(quartic, 10.0), quartic_partition)
        assert well.hi == window.lo
        assert not well.overlaps(window)

    def test_window_covering_well_is_rejected(self, quartic):
        """Test a well region inside the thermal window has no Eyring regions"""
        partition = WellPartition(barrier_x=0.0, well_region=Region(-0.3, 0.0), x_left=-1.0, x_right=1.0)
        with pytest.raises(SemiclassicalError):
            eyring_regions(WittenContext(quartic, 4.0), partition)

    def test_window_covering_well_blanks_eyring(self, quartic, caplog):
        """Test the other estimates survive a well swallowed by the thermal window"""
        partition = WellPartition(barrier_x=0.0, well_region=Region(-0.3, 0.0), x_left=-1.0, x_right=1.0)
        ctx = WittenContext(quartic, 4.0)
        grid = build_grid(-3.0, 3.0, 799)
        result = lowest_eigenpairs(assemble_schrodinger(ctx, grid, stencil="factorized"), 2)
        with caplog.at_level(logging.WARNING, logger="witten_rates"):
            rates = estimate_rates(ctx, grid, result, partition)
        assert math.isnan(rates.e1_eyring)
        assert math.isnan(rates.f0) and math.isnan(rates.f1)
        assert rates.e1_arrhenius > 0 and rates.e1_numeric > 0
        assert "Eyring unavailable" in caplog.text


class TestConcordance:
    """Test every estimator against the numeric gap at beta = 10"""

    def test_barrier_height(self, quartic, quartic_partition):
        """Test dU = 1 for the unit quartic"""
        assert barrier_height(quartic, quartic_partition) == pytest.approx(1.0, abs=1e-12)

    def test_log_agreement(self, quartic_rates):
        """Test each estimate's log error is a small fraction of beta dU"""
        scale = quartic_rates.beta * quartic_rates.delta_u
        ln_numeric = math.log(quartic_rates.e1_numeric)
        for value in (quartic_rates.e1_wkb, quartic_rates.e1_arrhenius, quartic_rates.e1_surface):
            assert abs(math.log(value) - ln_numeric) <= 0.15 * scale
        assert abs(math.log(quartic_rates.e1_eyring) - ln_numeric) <= 0.25 * scale

    def test_wkb_within_tenth_of_log(self, quartic_rates):
        """Test the WKB log error is at most 10% of ln E1"""
        ln_numeric = math.log(quartic_rates.e1_numeric)
        assert abs(math.log(quartic_rates.e1_wkb) - ln_numeric) <= 0.1 * abs(ln_numeric)

    def test_surface_and_theta_are_sharp(self, quartic_rates):
        """Test the surface formula within 2% and the theta-capacity estimate within 5%"""
        assert quartic_rates.e1_surface == pytest.approx(quartic_rates.e1_numeric, rel=0.02)
        assert quartic_rates.e1_theta == pytest.approx(quartic_rates.e1_numeric, rel=0.05)
        assert quartic_rates.e1_theta == pytest.approx(2.0 * quartic_rates.e1_flux)

    def test_row_order(self, quartic_rates):
        """Test the CSV row starts with the scan columns in order"""
        row = quartic_rates.to_row()
        assert list(row) == list(CSV_COLUMNS.values())
        assert list(row)[:11] == ["beta", "E1_numeric", "E1_wkb", "E1_arrhenius", "E1_eyring",
                                  "E1_surface", "deltaU", "F0", "F1", "p0", "vol"]
        assert row["converged"] is True

    def test_summary_lines(self, quartic_rates):
        """Test the printable summary lists every estimator"""
        lines = rate_summary(quartic_rates)
        assert len(lines) == 8
        assert "E1_numeric" in lines[1]

    def test_asymmetric_wells_give_nan(self, tilted, caplog):
        """Test doublet formulas degrade to NaN with a warning"""
        grid = build_grid(-2.5, 2.5, 799)
        ctx = WittenContext(tilted, 4.0)
        partition = partition_from_critical_points(tilted, Region(-2.5, 2.5))
        result = lowest_eigenpairs(assemble_schrodinger(ctx, grid), 2)
        with caplog.at_level(logging.WARNING, logger="witten_rates"):
            rates = estimate_rates(ctx, grid, result, partition)
        assert math.isnan(rates.e1_wkb)
        assert math.isnan(rates.e1_arrhenius)
        assert math.isfinite(rates.e1_eyring)
        assert rates.e1_numeric > 0
        assert "WKB unavailable" in caplog.text
