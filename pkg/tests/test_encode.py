import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempomatch.encode import (
    FrequencyAssignment,
    FunctionalSpec,
    Rect,
    SamplingSchedule,
    TabulatedEncoder,
    estimate_D3_D4,
    f_series,
    freq_encode,
    horizontal_strips,
    sample,
    scan_position,
    strip_integrals,
    validate_schedule,
)
from tempomatch.errors import ConfigError, DomainError, ParameterError
from tempomatch.field import PerturbParams, ScalarField


def unit_field(n=32, lo=-1.0, hi=1.0, value=1.0):
    return ScalarField(np.full((n, n), value), lo, hi, lo, hi)


def random_field(n=32, seed=0):
    rng = np.random.default_rng(seed)
    return ScalarField(rng.random((n, n)))


class TestSample:
    def test_zero_field_gives_zero(self):
        f = unit_field(value=0.0)
        spec = FunctionalSpec(kind="strip-integral", bias=0.0)
        assert sample(f, Rect(-1, 1, -1, 0), spec) == 0.0

    def test_constant_strip_integral_is_area(self):
        f = unit_field(n=64)
        spec = FunctionalSpec(kind="strip-integral")
        rect = Rect(-0.5, 0.5, -0.25, 0.75)
        got = sample(f, rect, spec)
        assert abs(got - rect.area) < 0.05 * rect.area

    @given(kappa=st.floats(min_value=-10, max_value=10, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_homogeneity_strip(self, kappa):
        f = random_field(24, seed=2)
        g = f.with_values(kappa * f.values)
        spec = FunctionalSpec(kind="strip-integral", bias=0.3)
        a = sample(f, Rect(-1, 1, -1, 1), spec)
        b = sample(g, Rect(-1, 1, -1, 1), spec)
        assert abs((b - spec.bias) - kappa * (a - spec.bias)) <= 1e-12 * max(1.0, abs(a))

    def test_homogeneity_all_kinds_kappa5(self):
        f = random_field(16, seed=3)
        g = f.with_values(5.0 * f.values)
        sub = Rect(-1, 1, -1, 1)
        for kind in ("strip-integral", "exp-kernel", "spectral-band"):
            spec = FunctionalSpec(kind=kind, bias=0.1)
            a = sample(f, sub, spec)
            b = sample(g, sub, spec)
            assert abs((b - spec.bias) - 5.0 * (a - spec.bias)) < 1e-10 * max(1.0, abs(a))
        spec = FunctionalSpec(kind="scan-point", bias=0.1)
        a = sample(f, (0.1, 0.2), spec)
        b = sample(g, (0.1, 0.2), spec)
        assert abs((b - spec.bias) - 5.0 * (a - spec.bias)) < 1e-12

    def test_exp_kernel_weighting(self):
        # quadrature oracle computed directly from the kernel definition
        f = random_field(20, seed=4)
        spec = FunctionalSpec(kind="exp-kernel", reference_point=(0.2, -0.1))
        X, Y = np.meshgrid(f.x_coords(), f.y_coords())
        expected = float(
            (f.values * np.exp(-np.abs(X - 0.2) - np.abs(Y + 0.1))).sum() * f.cell_area
        )
        got = sample(f, Rect(-1, 1, -1, 1), spec)
        assert abs(got - expected) < 1e-12

    def test_subdomain_outside_domain_rejected(self):
        f = unit_field()
        with pytest.raises(DomainError):
            sample(f, Rect(-2, 0, -1, 1), FunctionalSpec())

    def test_strip_lipschitz_bound(self):
        # |f(S) - f(S')| <= area * ||S - S'||_inf on random pairs
        rng = np.random.default_rng(9)
        spec = FunctionalSpec(kind="strip-integral")
        rect = Rect(-1, 0.5, -0.5, 1)
        for trial in range(5):
            a = ScalarField(rng.random((24, 24)))
            b = ScalarField(rng.random((24, 24)))
            fa = sample(a, rect, spec)
            fb = sample(b, rect, spec)
            gap = np.abs(a.values - b.values).max()
            assert abs(fa - fb) <= rect.area * gap + 1e-12


class TestFSeries:
    def sweep_schedule(self):
        rects = [Rect(-1, -0.2, -1, 1), Rect(-0.2, 0.4, -1, 1), Rect(0.4, 1, -1, 1)]
        return SamplingSchedule(mode="sweep", subdomains=rects, period=3.0)

    def test_zero_gain(self):
        f = random_field()
        p = PerturbParams(theta1=0.0, theta2=0.0, kind="identity")
        out = f_series(f, p, self.sweep_schedule(), FunctionalSpec(), 0.7)
        assert out == 0.0

    def test_gain_doubles(self):
        f = random_field()
        sched = self.sweep_schedule()
        p1 = PerturbParams(theta1=1.0, theta2=0.0, kind="identity")
        p2 = PerturbParams(theta1=2.0, theta2=0.0, kind="identity")
        a = f_series(f, p1, sched, FunctionalSpec(), 1.3)
        b = f_series(f, p2, sched, FunctionalSpec(), 1.3)
        assert abs(b - 2 * a) < 1e-12

    def test_sweep_steps_through_rect_areas(self):
        # per-rectangle quadrature oracle on a constant field
        f = unit_field(n=40)
        sched = self.sweep_schedule()
        p = PerturbParams(kind="identity")
        spec = FunctionalSpec()
        expected = [sample(f, r, spec) for r in sched.subdomains]
        got = [f_series(f, p, sched, spec, t) for t in (0.1, 1.1, 2.1)]
        np.testing.assert_allclose(got, expected, rtol=1e-12)
        areas = [r.area for r in sched.subdomains]
        np.testing.assert_allclose(got, areas, rtol=0.06)

    def test_sweep_matches_sample_exactly(self):
        f = random_field(seed=5)
        sched = self.sweep_schedule()
        p = PerturbParams(kind="identity")
        spec = FunctionalSpec(bias=0.2)
        for t, idx in ((0.0, 0), (1.5, 1), (2.9, 2), (3.2, 0)):
            assert f_series(f, p, sched, spec, t) == pytest.approx(
                sample(f, sched.subdomains[idx], spec), rel=1e-14
            )


class TestFreqEncode:
    def setup_method(self):
        self.f = random_field(seed=6)
        self.strips = horizontal_strips(-1, 1, -1, 1, 4)
        self.om = FrequencyAssignment.harmonic(4, 1.0)

    def test_zero_field(self):
        z = unit_field(value=0.0)
        for t in (0.0, 0.3, 2.0):
            assert freq_encode(z, 0.0, self.strips, self.om, "identity", t) == 0.0

    def test_single_strip_carrier_zero(self):
        strips = SamplingSchedule(
            mode="frequency-strips", subdomains=[Rect(-1, 1, -1, 1)], period=1.0
        )
        om = FrequencyAssignment([2.0])
        t = math.pi / 2.0  # omega * t = pi, sin^2 = 0 up to roundoff
        out = freq_encode(self.f, 0.0, strips, om, "identity", t)
        assert abs(out) < 1e-12

    def test_two_strip_hand_computed(self):
        strips = horizontal_strips(-1, 1, -1, 1, 2)
        om = FrequencyAssignment([1.0, 3.0])
        ints = strip_integrals(self.f, "identity", 0.0, strips)
        t = math.pi / 2.0  # sin^2(t) = sin^2(3t) = 1
        out = freq_encode(self.f, 0.0, strips, om, "identity", t)
        assert abs(out - (ints[0] + ints[1])) < 1e-12

    def test_bounded_by_strip_sums(self):
        ints = np.abs(strip_integrals(self.f, "identity", 0.0, self.strips))
        for t in np.linspace(0, 7, 40):
            out = freq_encode(self.f, 0.0, self.strips, self.om, "identity", float(t))
            assert abs(out) <= ints.sum() + 1e-12

    def test_carrier_count_mismatch(self):
        with pytest.raises(ConfigError):
            freq_encode(self.f, 0.0, self.strips, FrequencyAssignment([1.0]), "identity", 0.0)

    def test_distinct_frequencies_enforced(self):
        with pytest.raises(ParameterError):
            FrequencyAssignment([1.0, 1.0])


class TestScanPosition:
    def test_start(self):
        assert scan_position(0.0, 1.0, 176.0, 1.0) == 1.0

    def test_first_pass_endpoint(self):
        assert scan_position(175.0, 1.0, 176.0, 1.0) == 176.0

    def test_wraps(self):
        assert scan_position(180.0, 1.0, 176.0, 1.0) == pytest.approx(6.0, abs=1e-12)

    @given(t=st.floats(min_value=1e-9, max_value=1000, allow_nan=False))
    @settings(max_examples=40, deadline=None)
    def test_periodic(self, t):
        # periodic for every t > 0; t = 0 is the lone exception since the
        # very first pass starts at x_min while wrap instants carry x_max
        period = 175.0
        a = scan_position(t, 1.0, 176.0, 1.0)
        b = scan_position(t + period, 1.0, 176.0, 1.0)
        assert a == pytest.approx(b, abs=1e-9)

    def test_wrap_instants_consistent(self):
        for mult in (1, 2, 5):
            assert scan_position(175.0 * mult, 1.0, 176.0, 1.0) == 176.0

    def test_speed_scales_period(self):
        # period is (x_max - x_min)/k_s
        assert scan_position(5.0, 0.0, 10.0, 2.0) == 10.0
        assert scan_position(6.0, 0.0, 10.0, 2.0) == pytest.approx(2.0)


class TestEstimateD3D4:
    def test_constant_field_equal_strips(self):
        f = unit_field(n=32)
        strips = horizontal_strips(-1, 1, -1, 1, 4)
        om = FrequencyAssignment.harmonic(4)
        spec = FunctionalSpec()
        est = estimate_D3_D4(f, "identity", spec, strips, [0.0], horizon=2 * math.pi, omegas=om)
        # all-carriers-zero instants push the minimum to ~0
        assert est.d3 == pytest.approx(0.0, abs=1e-6)
        assert est.recommended_bias is not None

    def test_sweep_constant_field(self):
        f = unit_field(n=32)
        rects = [Rect(-1, 0, -1, 1), Rect(0, 1, -1, 1)]
        sched = SamplingSchedule(mode="sweep", subdomains=rects, period=2.0)
        est = estimate_D3_D4(f, "identity", FunctionalSpec(), sched, [0.0], horizon=2.0)
        assert est.d3 == pytest.approx(2.0, rel=0.05)
        assert est.d4 == pytest.approx(2.0, rel=0.05)
        assert est.recommended_bias is None

    def test_zero_field_recommends_bias(self):
        f = unit_field(value=0.0)
        strips = horizontal_strips(-1, 1, -1, 1, 2)
        om = FrequencyAssignment.harmonic(2)
        est = estimate_D3_D4(f, "identity", FunctionalSpec(), strips, [0.0], 4.0, omegas=om)
        assert est.d3 == 0.0
        assert est.recommended_bias == 0.0  # zero signal: floor is 0.05 * 0

    def test_matches_exhaustive_grid(self):
        rng = np.random.default_rng(8)
        f = ScalarField(rng.random((16, 16)))
        strips = horizontal_strips(-1, 1, -1, 1, 2)
        om = FrequencyAssignment([1.0, 2.0])
        grid = [0.1, 0.5]
        est = estimate_D3_D4(f, "rotate", FunctionalSpec(bias=0.1), strips, grid, math.pi, omegas=om)
        # exhaustive oracle over the identical sampling grid
        times = np.linspace(0, math.pi, max(2, int(math.ceil(math.pi / 1.0 * 64))), endpoint=False)
        vals = []
        for th in grid:
            for t in times:
                vals.append(freq_encode(f, th, strips, om, "rotate", float(t), bias=0.1))
        assert est.d3 == pytest.approx(min(vals), abs=1e-12)
        assert est.d4 == pytest.approx(max(vals), abs=1e-12)


class TestTabulatedEncoder:
    def test_matches_direct_freq_encode_on_grid_points(self):
        f = random_field(seed=10)
        strips = horizontal_strips(-1, 1, -1, 1, 4)
        om = FrequencyAssignment.harmonic(4)
        enc = TabulatedEncoder(f, "rotate", strips, (0.0, 2 * math.pi), om, bias=0.05, n_table=19)
        for th in enc.theta_grid[::6]:
            for t in (0.0, 0.37, 1.9):
                direct = freq_encode(f, float(th), strips, om, "rotate", t, bias=0.05)
                assert enc.fbar(t, float(th)) == pytest.approx(direct, rel=1e-12, abs=1e-12)

    def test_interpolates_between_grid_points(self):
        f = random_field(seed=11)
        strips = horizontal_strips(-1, 1, -1, 1, 2)
        om = FrequencyAssignment.harmonic(2)
        enc = TabulatedEncoder(f, "rotate", strips, (0.0, 1.0), om, n_table=5)
        mid = 0.5 * (enc.theta_grid[1] + enc.theta_grid[2])
        ints = enc.interp_integrals(mid)
        expected = 0.5 * (enc.tables[1] + enc.tables[2])
        np.testing.assert_allclose(ints, expected, rtol=1e-12)

    def test_sweep_mode_matches_f_series(self):
        f = random_field(seed=12)
        rects = [Rect(-1, 0, -1, 1), Rect(0, 1, -1, 1)]
        sched = SamplingSchedule(mode="sweep", subdomains=rects, period=1.0)
        enc = TabulatedEncoder(f, "identity", sched, (0.0, 1.0), bias=0.2, n_table=3)
        p = PerturbParams(kind="identity")
        for t in (0.05, 0.3, 0.55, 0.95):
            direct = f_series(f, p, sched, FunctionalSpec(bias=0.2), t)
            assert enc.fbar(t, 0.0) == pytest.approx(direct, rel=1e-12)


class TestScheduleValidation:
    def test_subdomain_containment(self):
        f = unit_field()
        sched = SamplingSchedule(mode="sweep", subdomains=[Rect(-2, 0, -1, 1)], period=1.0)
        with pytest.raises(ConfigError):
            validate_schedule(sched, f)

    def test_coverage(self):
        f = unit_field()
        half = SamplingSchedule(mode="sweep", subdomains=[Rect(-1, 0, -1, 1)], period=1.0)
        with pytest.raises(ConfigError):
            validate_schedule(half, f)
        full = horizontal_strips(-1, 1, -1, 1, 4)
        validate_schedule(full, f)  # must not raise

    def test_strips_partition_cells(self):
        f = random_field(seed=13)
        strips = horizontal_strips(-1, 1, -1, 1, 8)
        ints = strip_integrals(f, "identity", 0.0, strips)
        assert ints.sum() == pytest.approx(f.total_mass(), rel=1e-12)
