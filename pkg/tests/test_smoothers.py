"""Tests for the smoother families, the ordering check, and grid construction."""

from __future__ import annotations

import numpy as np
import pytest

from specreg import (
    AlphaGrid,
    SmootherFamily,
    Spectrum,
    check_ordered,
    default_grid,
    exponential_spectrum,
    h_values,
    polynomial_spectrum,
)

FAMILIES = [SmootherFamily.cutoff(), SmootherFamily.tikhonov(), SmootherFamily.landweber()]


def _random_spectrum(rng, p=None):
    p = p or int(rng.integers(3, 40))
    lam = np.sort(10.0 ** rng.uniform(-6.0, 0.0, size=p))[::-1]
    return Spectrum(lam)


class TestHValues:
    def test_tikhonov_small_alpha_limit(self):
        s = polynomial_spectrum(6, 2.0)
        h = h_values(SmootherFamily.tikhonov(), 1e-14 * s.retained[-1], s)
        assert np.all(h >= 1.0 - 1e-9)

    def test_tikhonov_half_at_matching_eigenvalue(self):
        s = Spectrum([2.0, 1.0, 0.5])
        h = h_values(SmootherFamily.tikhonov(), 1.0, s)
        assert h[1] == 0.5

    def test_landweber_single_full_step(self):
        s = Spectrum([1.0])
        for alpha in (0.05, 0.4, 1.0, 3.0):
            assert h_values(SmootherFamily.landweber(tau=1.0), alpha, s)[0] == 1.0

    def test_cutoff_index_rule(self):
        s = polynomial_spectrum(5, 1.0)
        h = h_values(SmootherFamily.cutoff(), 1.0 / 3.0, s)
        assert np.array_equal(h, [1.0, 1.0, 1.0, 0.0, 0.0])
        assert np.array_equal(h_values(SmootherFamily.cutoff(), 1.0, s), [1, 0, 0, 0, 0])
        assert np.array_equal(h_values(SmootherFamily.cutoff(), 0.9, s), [1, 1, 0, 0, 0])

    def test_bounds_hold_everywhere(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            s = _random_spectrum(rng)
            for family in FAMILIES:
                for alpha in 10.0 ** rng.uniform(-4, 2, size=5):
                    h = h_values(family, float(alpha), s)
                    assert np.all(h >= 0.0) and np.all(h <= 1.0)

    def test_landweber_default_step_is_stable(self):
        # default tau = 1/lambda(1) may round to tau*lambda(1) just above 1
        s = Spectrum([3.0, 1.0, 0.1])
        h = h_values(SmootherFamily.landweber(), 0.2, s)
        assert np.all(np.isfinite(h))

    def test_landweber_unstable_step_rejected(self):
        s = Spectrum([2.0, 1.0])
        with pytest.raises(ValueError, match="unstable step"):
            h_values(SmootherFamily.landweber(tau=1.0), 0.5, s)

    def test_alpha_must_be_positive(self):
        s = polynomial_spectrum(3, 1.0)
        with pytest.raises(ValueError, match="alpha"):
            h_values(SmootherFamily.cutoff(), 0.0, s)


class TestCheckOrdered:
    def test_builtin_families_pass(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            s = _random_spectrum(rng)
            for family in FAMILIES:
                grid = default_grid(family, s, points=15, floor_rule=None)
                report = check_ordered(family, grid, s)
                assert report.ok, (family.kind, report.violation)

    def test_crossing_table_fails_with_witness(self):
        s = Spectrum([1.0, 0.5])
        family = SmootherFamily.from_table(
            alphas=[1.0, 2.0],
            h_table=[[0.9, 0.1], [0.5, 0.5]],
        )
        report = check_ordered(family, AlphaGrid([1.0, 2.0]), s)
        assert not report.ok
        assert report.violation.kind == "crossing"
        assert report.violation.k == 2
        assert (report.violation.alpha_low, report.violation.alpha_high) == (1.0, 2.0)

    def test_reversed_direction_fails(self):
        s = Spectrum([1.0, 0.5])
        family = SmootherFamily.from_table(
            alphas=[1.0, 2.0],
            h_table=[[0.2, 0.1], [0.8, 0.4]],
        )
        report = check_ordered(family, AlphaGrid([1.0, 2.0]), s)
        assert not report.ok
        assert report.violation.kind == "grid direction"

    def test_non_monotone_profile_fails(self):
        s = Spectrum([1.0, 0.5, 0.25])
        family = SmootherFamily.from_table(alphas=[1.0], h_table=[[0.5, 0.9, 0.1]])
        report = check_ordered(family, AlphaGrid([1.0]), s)
        assert not report.ok
        assert report.violation.kind == "not monotone in lambda"

    def test_grid_monotone_smoothing(self):
        s = polynomial_spectrum(20, 1.5)
        for family in FAMILIES:
            grid = default_grid(family, s, points=12, floor_rule=None)
            rows = [h_values(family, a, s) for a in grid.values]
            for i in range(len(rows) - 1):
                assert np.all(rows[i] >= rows[i + 1] - 1e-12)


class TestDefaultGrid:
    def test_cutoff_full_range(self):
        grid = default_grid(SmootherFamily.cutoff(), polynomial_spectrum(4, 1.0), floor_rule=None)
        assert np.allclose(grid.values, [0.25, 1 / 3, 0.5, 1.0])

    def test_geometric_two_points(self):
        s = polynomial_spectrum(10, 2.0)
        grid = default_grid(SmootherFamily.tikhonov(), s, points=2, floor_rule=None)
        assert np.allclose(grid.values, [s.retained[-1] / 10.0, 10.0 * s.retained[0]])

    def test_default_floor_keeps_at_most_90_of_100(self):
        s = polynomial_spectrum(100, 1.0)
        grid = default_grid(SmootherFamily.cutoff(), s)
        # first kept alpha must zero out at least 10 components
        assert grid.alpha_floor == pytest.approx(1.0 / 90.0)
        h = h_values(SmootherFamily.cutoff(), grid.alpha_floor, s)
        assert np.sum(h) <= 90

    def test_floor_infeasible(self):
        with pytest.raises(ValueError, match="alpha floor infeasible"):
            default_grid(SmootherFamily.cutoff(), polynomial_spectrum(4, 1.0))

    def test_geometric_needs_points(self):
        with pytest.raises(ValueError, match="points"):
            default_grid(SmootherFamily.tikhonov(), polynomial_spectrum(5, 1.0), floor_rule=None)

    def test_severely_ill_posed_grid_is_finite(self):
        s = exponential_spectrum(500, 1.0)
        grid = default_grid(SmootherFamily.landweber(), s, points=20, floor_rule=None)
        h = h_values(SmootherFamily.landweber(), grid.alpha_floor, s)
        assert np.all(np.isfinite(h))


class TestAlphaGrid:
    def test_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            AlphaGrid([1.0, 1.0])
        with pytest.raises(ValueError, match="positive"):
            AlphaGrid([0.0, 1.0])
        grid = AlphaGrid([0.1, 0.2])
        assert len(grid) == 2
        assert grid.alpha_floor == 0.1
        assert grid.alpha_max == 0.2
