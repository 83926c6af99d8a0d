import math

import numpy as np
import pytest

from looploc import (
    AmbiguousBranch,
    CandidateSet,
    Measurement,
    NoSolution,
    PositionInterval,
    ZeroMagnification,
    candidates,
    coarse_to_fine,
    curve_maximum,
    diamond_layout,
    invert_ratio,
    loop_phase,
    optimize_phase,
    propagate_error,
    ratio_analytic,
    select_branch,
    simulate_measurement,
    slope,
)

TWO_PI = 2.0 * math.pi


def brute_force_phases(ratio, x, points=1_000_001):
    """Independent root scan of the closed form on a dense grid."""
    grid = np.linspace(0.0, TWO_PI, points)
    resid = ratio_analytic(x, grid) - ratio
    roots = []
    for i in np.nonzero(resid[:-1] * resid[1:] < 0.0)[0]:
        lo, hi, f_lo = grid[i], grid[i + 1], resid[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = float(ratio_analytic(x, mid)) - ratio
            if fm * f_lo > 0.0:
                lo, f_lo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return sorted(roots)


class TestInvertRatio:
    def test_dark_ratio_unique_solution(self):
        roots = invert_ratio(0.0, 5.0)
        assert len(roots) == 1
        assert roots[0] == pytest.approx(math.pi, abs=1e-8)

    def test_worked_ratio_pair(self):
        expected = brute_force_phases(0.812, 5.0)
        assert [e / math.pi for e in expected] == pytest.approx([0.6004, 1.3996], abs=1e-3)
        roots = invert_ratio(0.812, 5.0)
        assert len(roots) == 2
        assert roots == pytest.approx(expected, abs=1e-8)

    def test_curve_maximum_tangent_root(self):
        roots = invert_ratio(curve_maximum(5.0), 5.0)
        assert len(roots) == 1
        assert roots[0] == pytest.approx(0.0, abs=1e-4)

    def test_ratio_above_maximum_raises(self):
        with pytest.raises(NoSolution):
            invert_ratio(curve_maximum(5.0) + 1e-6, 5.0)

    @pytest.mark.parametrize("x", [1.0, 5.0, 10.0])
    def test_matches_brute_force_scan(self, x):
        for ratio in (0.05, 0.3, 0.55):
            target = ratio * curve_maximum(x)
            assert invert_ratio(target, x) == pytest.approx(
                brute_force_phases(target, x), abs=1e-8
            )

    def test_solutions_come_in_even_pairs(self):
        for roots in (invert_ratio(0.5, 5.0), invert_ratio(0.2, 10.0)):
            for r in roots:
                assert min(abs(TWO_PI - r - s) for s in roots) < 1e-7


class TestCandidates:
    def test_worked_candidate_positions(self):
        meas = Measurement(ratio=0.812)
        cs = candidates(meas, diamond_layout(2.0), 5.0, (0.0, 1.0))
        z_hats = [c.z_hat for c in cs.candidates]
        assert z_hats == pytest.approx([0.15, 0.35, 0.65, 0.85], abs=1e-3)

    def test_higher_magnification_doubles_candidates(self):
        meas = Measurement(ratio=0.812)
        cs = candidates(meas, diamond_layout(4.0), 5.0, (0.0, 1.0))
        assert len(cs) == 8

    def test_relative_phase_shifts_candidates(self):
        meas = Measurement(ratio=0.812)
        base = candidates(meas, diamond_layout(2.0), 5.0, (0.0, 1.0))
        shifted = candidates(meas, diamond_layout(2.0, phi0=math.pi / 4), 5.0, (0.0, 1.0))
        shift = (math.pi / 4) / (TWO_PI * 2.0)
        base_z = sorted((c.z_hat - shift) % 0.5 for c in base.candidates)
        shifted_z = sorted(c.z_hat % 0.5 for c in shifted.candidates)
        for a, b in zip(base_z, shifted_z):
            assert min(abs(a - b), abs(abs(a - b) - 0.5)) < 1e-10

    def test_zero_magnification_rejected(self):
        with pytest.raises(ZeroMagnification):
            candidates(Measurement(ratio=0.5), diamond_layout(0.0), 5.0, (0.0, 1.0))

    def test_candidate_count_is_twice_magnification(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            xi = float(rng.choice([2.0, 4.0]))
            z_true = float(rng.uniform(0.0, 1.0))
            layout = diamond_layout(xi)
            meas = simulate_measurement(z_true, layout, 5.0)
            if not 1e-3 < meas.ratio < curve_maximum(5.0) - 1e-3:
                continue
            cs = candidates(meas, layout, 5.0, (0.0, 1.0))
            assert len(cs) == 2 * xi

    def test_round_trip_contains_truth(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            xi = float(rng.choice([2.0, 4.0]))
            z_true = float(rng.uniform(0.0, 1.0))
            phi0 = float(rng.uniform(0.0, TWO_PI))
            layout = diamond_layout(xi, phi0=phi0)
            meas = simulate_measurement(z_true, layout, 5.0)
            cs = candidates(meas, layout, 5.0, (0.0, 1.0))
            assert min(abs(c.z_hat - z_true) for c in cs.candidates) < 1e-6


class TestPropagateError:
    def worked_set(self, xi, phi0):
        layout = diamond_layout(xi, phi0=phi0)
        meas = simulate_measurement(0.15, layout, 5.0, band=0.05)
        return propagate_error(meas, layout, 5.0, (0.0, 1.0))

    def nearest(self, cs, z):
        return min(cs.candidates, key=lambda c: abs(c.z_hat - z))

    def test_base_configuration_uncertainty(self):
        c = self.nearest(self.worked_set(2.0, 0.0), 0.15)
        assert 0.20 / 1.5 <= c.relative_uncertainty <= 0.20 * 1.5

    def test_doubled_magnification_uncertainty(self):
        c = self.nearest(self.worked_set(4.0, 0.0), 0.15)
        assert 0.02 / 1.5 <= c.relative_uncertainty <= 0.02 * 1.5

    def test_optimized_phase_uncertainty(self):
        c = self.nearest(self.worked_set(2.0, math.pi / 4), 0.15)
        assert 0.025 / 1.5 <= c.relative_uncertainty <= 0.025 * 1.5

    def test_magnification_shrinks_width_tenfold(self):
        w2 = self.nearest(self.worked_set(2.0, 0.0), 0.15)
        w4 = self.nearest(self.worked_set(4.0, 0.0), 0.15)
        ratio = (w2.z_hi - w2.z_lo) / (w4.z_hi - w4.z_lo)
        assert 10.0 / 2.0 <= ratio <= 10.0 * 2.0

    def test_width_scales_inversely_with_magnification(self):
        # same operating phase at xi and 2*xi: z intervals shrink by exactly 2
        meas = Measurement(ratio=0.6, relative_error=0.03)
        a = self.nearest(propagate_error(meas, diamond_layout(2.0), 5.0, (0.0, 1.0)), 0.1)
        b = self.nearest(propagate_error(meas, diamond_layout(4.0), 5.0, (0.0, 1.0)), 0.05)
        assert (a.z_hi - a.z_lo) == pytest.approx(2.0 * (b.z_hi - b.z_lo), rel=1e-9)

    def test_uncertainty_shrinks_linearly_with_band(self):
        layout = diamond_layout(2.0)
        widths = []
        deltas = (0.08, 0.04, 0.02, 0.01)
        for delta in deltas:
            meas = Measurement(ratio=0.5, relative_error=delta)
            c = self.nearest(propagate_error(meas, layout, 5.0, (0.0, 1.0)), 0.2)
            widths.append(c.z_hi - c.z_lo)
        assert all(a > b for a, b in zip(widths, widths[1:]))
        assert widths[2] / widths[3] == pytest.approx(2.0, rel=0.05)

    def test_band_escaping_curve_maximum_is_flagged(self):
        layout = diamond_layout(0.25, phi0=0.0)
        meas = simulate_measurement(0.15, layout, 5.0, band=0.05)
        cs = propagate_error(meas, layout, 5.0, (0.0, 1.0))
        assert any("BandEscapesBranch" in c.flags for c in cs.candidates)

    def test_requires_positive_band(self):
        with pytest.raises(ValueError):
            propagate_error(Measurement(ratio=0.5), diamond_layout(2.0), 5.0, (0.0, 1.0))


class TestSimulateMeasurement:
    def test_worked_point(self):
        meas = simulate_measurement(0.15, diamond_layout(2.0), 5.0)
        assert meas.ratio == pytest.approx(0.812, abs=1e-3)

    def test_shifted_operating_point(self):
        meas = simulate_measurement(0.15, diamond_layout(2.0, phi0=math.pi / 4), 5.0)
        assert meas.ratio == pytest.approx(0.40, abs=0.01)

    def test_noise_is_deterministic_per_seed(self):
        layout = diamond_layout(2.0)
        a = simulate_measurement(0.15, layout, 5.0, noise=(0.05, 42))
        b = simulate_measurement(0.15, layout, 5.0, noise=(0.05, 42))
        c = simulate_measurement(0.15, layout, 5.0, noise=(0.05, 43))
        assert a == b
        assert a.ratio != c.ratio
        assert a.relative_error == 0.05

    def test_band_overrides_reported_error(self):
        meas = simulate_measurement(0.15, diamond_layout(2.0), 5.0, band=0.07)
        assert meas.relative_error == 0.07


class TestOptimizePhase:
    def test_beats_illustrative_quarter_pi(self):
        layout = diamond_layout(2.0)
        phi0_star = optimize_phase(0.15, layout, 5.0)
        operating = lambda phi0: abs(float(slope(5.0, loop_phase(diamond_layout(2.0, phi0=phi0), 0.15))))
        assert operating(phi0_star) > operating(math.pi / 4)

    def test_beats_zero_phase(self):
        layout = diamond_layout(2.0)
        phi0_star = optimize_phase(0.15, layout, 5.0)
        base = TWO_PI * 2.0 * 0.15
        assert abs(float(slope(5.0, base + phi0_star))) >= abs(float(slope(5.0, base)))

    def test_periodic_in_branch_spacing(self):
        layout = diamond_layout(2.0)
        a = optimize_phase(0.15, layout, 5.0)
        b = optimize_phase(0.15 + 0.5, layout, 5.0)
        assert a == pytest.approx(b, abs=1e-6)

    def test_zero_magnification_rejected(self):
        with pytest.raises(ZeroMagnification):
            optimize_phase(0.15, diamond_layout(0.0), 5.0)


class TestSelectBranch:
    def make_set(self, z_hats):
        layout = diamond_layout(2.0)
        cands = tuple(
            PositionInterval(z_lo=z, z_hat=z, z_hi=z, branch=i, phi_solution=0.5)
            for i, z in enumerate(z_hats)
        )
        return CandidateSet(cands, layout, 5.0)

    def prior(self, lo, hi):
        mid = 0.5 * (lo + hi)
        return PositionInterval(z_lo=lo, z_hat=mid, z_hi=hi, branch=0, phi_solution=0.0)

    def test_unique_containment(self):
        cs = self.make_set([0.15, 0.35, 0.65, 0.85])
        assert select_branch(cs, self.prior(0.10, 0.20)).z_hat == 0.15

    def test_wide_prior_is_ambiguous(self):
        cs = self.make_set([0.15, 0.35, 0.65, 0.85])
        with pytest.raises(AmbiguousBranch):
            select_branch(cs, self.prior(0.0, 1.0))

    def test_single_candidate_always_selected(self):
        cs = self.make_set([0.42])
        chosen = select_branch(cs, self.prior(0.9, 0.95))
        assert chosen.z_hat == 0.42
        assert "OutsidePrior" in chosen.flags


class TestCoarseToFine:
    @staticmethod
    def source_for(z_true, band):
        def source(layout, x):
            return simulate_measurement(z_true, layout, x, band=band)

        return source

    def stages(self, spec):
        return [(diamond_layout(xi, phi0=phi0), 5.0) for xi, phi0 in spec]

    def test_three_stage_protocol(self):
        result = coarse_to_fine(
            self.source_for(0.15, 0.05),
            self.stages([(0.25, math.pi / 2), (2.0, 0.0), (4.0, 0.0)]),
            (0.0, 1.0),
        )
        assert result.final.z_hat == pytest.approx(0.15, abs=1e-6)
        assert result.final.relative_uncertainty <= 0.04

    def test_noiseless_round_trip(self):
        result = coarse_to_fine(
            self.source_for(0.15, 0.0),
            self.stages([(0.25, math.pi / 2), (2.0, 0.0), (4.0, 0.0)]),
            (0.0, 1.0),
        )
        assert result.final.z_hat == pytest.approx(0.15, abs=1e-6)
        assert result.final.z_lo == result.final.z_hi

    def test_skipping_magnification_level_is_ambiguous(self):
        with pytest.raises(AmbiguousBranch):
            coarse_to_fine(
                self.source_for(0.15, 0.05),
                self.stages([(0.25, math.pi / 2), (4.0, 0.0)]),
                (0.0, 1.0),
            )

    def test_tight_coarse_band_rescues_two_stage_protocol(self):
        from looploc import magnification

        def source(layout, x):
            band = 0.01 if magnification(layout) < 1.0 else 0.05
            return simulate_measurement(0.15, layout, x, band=band)

        result = coarse_to_fine(
            source, self.stages([(0.25, math.pi / 2), (4.0, 0.0)]), (0.0, 1.0)
        )
        assert result.final.z_hat == pytest.approx(0.15, abs=1e-6)

    def test_first_stage_must_be_coarse(self):
        with pytest.raises(ValueError):
            coarse_to_fine(
                self.source_for(0.15, 0.05), self.stages([(2.0, 0.0), (4.0, 0.0)]), (0.0, 1.0)
            )

    def test_stages_must_increase(self):
        with pytest.raises(ValueError):
            coarse_to_fine(
                self.source_for(0.15, 0.05),
                self.stages([(0.25, 0.0), (4.0, 0.0), (2.0, 0.0)]),
                (0.0, 1.0),
            )


class TestMeasurementValidation:
    def test_negative_ratio_rejected(self):
        with pytest.raises(ValueError):
            Measurement(ratio=-0.1)

    def test_half_band_rejected(self):
        with pytest.raises(ValueError):
            Measurement(ratio=0.5, relative_error=0.5)

    def test_unordered_interval_rejected(self):
        with pytest.raises(ValueError):
            PositionInterval(z_lo=0.2, z_hat=0.1, z_hi=0.3, branch=0, phi_solution=0.0)
