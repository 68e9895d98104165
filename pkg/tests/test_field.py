import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempomatch.errors import ParameterError
from tempomatch.field import (
    PerturbParams,
    ScalarField,
    apply_perturbation,
    defocus_blur,
    estimate_lipschitz_D,
    gaussian_blur,
    load_pgm,
    rotate,
    save_pgm,
    scale_x,
    translate_x,
)


def make_grid(n=32, lo=-1.0, hi=1.0):
    f = ScalarField(np.zeros((n, n)), lo, hi, lo, hi)
    return f


def bump(x0, y0, sigma):
    """Closed-form Gaussian bump used as an analytic oracle."""

    def g(x, y):
        return np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2 * sigma**2))

    return g


def field_from(fn, n=64, lo=-1.0, hi=1.0):
    base = make_grid(n, lo, hi)
    X, Y = np.meshgrid(base.x_coords(), base.y_coords())
    return base.with_values(fn(X, Y))


class TestTranslate:
    def test_zero_shift_is_identity(self):
        f = field_from(bump(0.2, -0.1, 0.3))
        out = translate_x(f, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_grid_aligned_impulse_shift(self):
        f = make_grid(16)
        vals = f.values.copy()
        vals[8, 9] = 1.0
        f = f.with_values(vals)
        out = translate_x(f, f.dx)
        expected = np.zeros_like(vals)
        expected[8, 8] = 1.0
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_half_cell_shift_matches_analytic_bump(self):
        g = bump(0.0, 0.0, 0.35)
        f = field_from(g, n=128)
        shift = 0.5 * f.dx
        out = translate_x(f, shift)
        X, Y = np.meshgrid(f.x_coords(), f.y_coords())
        exact = g(X + shift, Y)
        interior = (np.abs(X) < 0.7) & (np.abs(Y) < 0.7)
        rel = np.abs(out.values - exact)[interior] / np.abs(exact[interior]).max()
        assert rel.max() < 1e-3

    def test_nonfinite_shift_rejected(self):
        f = make_grid(8)
        with pytest.raises(ParameterError):
            translate_x(f, math.nan)


class TestRotate:
    def test_zero_angle_identity(self):
        f = field_from(bump(0.3, 0.0, 0.2))
        assert np.array_equal(rotate(f, 0.0).values, f.values)

    def test_quarter_turn_equals_index_permutation(self):
        rng = np.random.default_rng(7)
        f = make_grid(24)
        f = f.with_values(rng.random((24, 24)))
        out = rotate(f, math.pi / 2)
        # Brute-force oracle: source (x_r, y_r) = (y, -x) in centered
        # coordinates, which for a square cell-centered grid is the index
        # map (i, j) -> (j, n-1-i).
        expected = np.zeros_like(f.values)
        n = 24
        for i in range(n):
            for j in range(n):
                expected[i, j] = f.values[j, n - 1 - i]
        np.testing.assert_allclose(out.values, expected, atol=1e-6)

    def test_rotation_composition(self):
        g = bump(0.25, 0.1, 0.3)
        f = field_from(g, n=96)
        a, b = 0.4, 0.7
        once = rotate(rotate(f, a), b)
        direct = rotate(f, a + b)
        # composition error is bounded by twice the single-rotation
        # interpolation error on this smooth bump
        single_err = np.abs(
            rotate(f, a).values
            - field_from(lambda x, y: g(math.cos(a) * x - math.sin(a) * y,
                                        math.sin(a) * x + math.cos(a) * y), n=96).values
        ).max()
        comp_err = np.abs(once.values - direct.values).max()
        assert comp_err <= 2 * single_err + 1e-12

    def test_angle_wraps(self):
        f = field_from(bump(0.2, 0.3, 0.25), n=48)
        a = rotate(f, 0.5)
        b = rotate(f, 0.5 + 2 * math.pi)
        np.testing.assert_allclose(a.values, b.values, atol=1e-9)


class TestScale:
    def test_unit_scale_identity(self):
        f = field_from(bump(0.1, 0.0, 0.3))
        assert np.array_equal(scale_x(f, 1.0).values, f.values)

    def test_scale_matches_analytic_bump(self):
        g = bump(0.0, 0.0, 0.3)
        f = field_from(g, n=128)
        out = scale_x(f, 2.0)
        X, Y = np.meshgrid(f.x_coords(), f.y_coords())
        exact = g(2.0 * X, Y)
        interior = (np.abs(X) < 0.45) & (np.abs(Y) < 0.9)
        rel = np.abs(out.values - exact)[interior] / exact[interior].max()
        assert rel.max() < 1e-3

    def test_constant_field_interior_unchanged(self):
        f = make_grid(32).with_values(np.ones((32, 32)))
        out = scale_x(f, 0.5)
        # x in (-1, 1) maps to x/2, always interior, so values persist
        inner = out.values[:, 8:24]
        np.testing.assert_allclose(inner, 1.0, atol=1e-12)

    def test_nonpositive_scale_rejected(self):
        f = make_grid(8)
        with pytest.raises(ParameterError):
            scale_x(f, 0.0)
        with pytest.raises(ParameterError):
            scale_x(f, -1.0)


class TestGaussianBlur:
    def test_zero_field_stays_zero(self):
        f = make_grid(32, -3, 3)
        out = gaussian_blur(f, 0.5)
        assert np.all(out.values == 0.0)

    def test_constant_field_gives_kernel_integral(self):
        # The plane integral of exp(-r^2/theta2) is pi*theta2; compare at
        # the center of a domain large enough to contain the kernel.
        theta2 = 0.5
        n = 121
        f = ScalarField(np.ones((n, n)), -3, 3, -3, 3)
        out = gaussian_blur(f, theta2)
        center = out.values[n // 2, n // 2]
        assert abs(center - math.pi * theta2) < 1e-2

    def test_impulse_reproduces_kernel(self):
        theta2 = 0.3
        n = 101
        f = ScalarField(np.zeros((n, n)), -3, 3, -3, 3)
        vals = f.values.copy()
        vals[n // 2, n // 2] = 1.0
        f = f.with_values(vals)
        out = gaussian_blur(f, theta2)
        X, Y = np.meshgrid(f.x_coords(), f.y_coords())
        cx = f.x_coords()[n // 2]
        cy = f.y_coords()[n // 2]
        r2 = (X - cx) ** 2 + (Y - cy) ** 2
        expected = f.cell_area * np.exp(-r2 / theta2)
        expected[np.exp(-r2 / theta2) < 1e-12] = 0.0
        np.testing.assert_allclose(out.values, expected, atol=1e-14)

    def test_nonpositive_width_rejected(self):
        with pytest.raises(ParameterError):
            gaussian_blur(make_grid(8), 0.0)


class TestDefocusBlur:
    def test_constant_field_interior_preserved(self):
        theta2 = 0.5
        n = 181
        f = ScalarField(np.ones((n, n)), -3, 3, -3, 3)
        out = defocus_blur(f, theta2)
        center = out.values[n // 2, n // 2]
        assert abs(center - 1.0) < 1e-2

    def test_zero_field(self):
        out = defocus_blur(make_grid(16, -2, 2), 0.5)
        assert np.all(out.values == 0.0)

    def test_impulse_gives_disc(self):
        theta2 = 0.6
        n = 101
        f = ScalarField(np.zeros((n, n)), -3, 3, -3, 3)
        vals = f.values.copy()
        vals[n // 2, n // 2] = 1.0
        f = f.with_values(vals)
        out = defocus_blur(f, theta2)
        X, Y = np.meshgrid(f.x_coords(), f.y_coords())
        cx = f.x_coords()[n // 2]
        cy = f.y_coords()[n // 2]
        r2 = (X - cx) ** 2 + (Y - cy) ** 2
        expected = np.where(r2 <= theta2**2, f.cell_area / (math.pi * theta2**2), 0.0)
        np.testing.assert_allclose(out.values, expected, atol=1e-14)


class TestApplyPerturbation:
    def test_identity_kind(self):
        f = field_from(bump(0.0, 0.0, 0.4))
        p = PerturbParams(theta1=1.0, theta2=0.0, kind="identity")
        assert np.array_equal(apply_perturbation(f, p).values, f.values)

    def test_linear_gain(self):
        f = field_from(bump(0.0, 0.0, 0.4))
        p = PerturbParams(theta1=2.0, theta2=0.0, kind="identity")
        np.testing.assert_array_equal(apply_perturbation(f, p).values, 2.0 * f.values)

    def test_gain_composes_with_rotation(self):
        f = field_from(bump(0.2, 0.1, 0.3), n=48)
        p = PerturbParams(theta1=3.0, theta2=math.pi / 2, kind="rotate",
                          theta1_range=(0.0, 4.0))
        out = apply_perturbation(f, p)
        np.testing.assert_allclose(out.values, 3.0 * rotate(f, math.pi / 2).values, rtol=1e-12)

    @given(kappa=st.sampled_from([2.0 ** k for k in range(-4, 5)]))
    @settings(max_examples=9, deadline=None)
    def test_power_of_two_gain_bitwise(self, kappa):
        f = field_from(bump(0.1, -0.2, 0.3), n=24)
        p1 = PerturbParams(theta1=kappa, theta2=0.3, kind="rotate",
                           theta1_range=(-16, 16))
        base = PerturbParams(theta1=1.0, theta2=0.3, kind="rotate")
        assert np.array_equal(
            apply_perturbation(f, p1).values,
            kappa * apply_perturbation(f, base).values,
        )

    @given(kappa=st.floats(min_value=-8, max_value=8,
                           allow_nan=False, allow_infinity=False))
    @settings(max_examples=20, deadline=None)
    def test_general_gain_linearity(self, kappa):
        f = field_from(bump(0.1, -0.2, 0.3), n=24)
        p = PerturbParams(theta1=kappa, theta2=0.4, kind="rotate",
                          theta1_range=(-8, 8))
        base = PerturbParams(theta1=1.0, theta2=0.4, kind="rotate")
        got = apply_perturbation(f, p).values
        want = kappa * apply_perturbation(f, base).values
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-300)


class TestBlurLinearity:
    @pytest.mark.parametrize("op,theta2", [(gaussian_blur, 0.4), (defocus_blur, 0.5)])
    def test_linear_operator(self, op, theta2):
        rng = np.random.default_rng(3)
        f1 = ScalarField(rng.random((41, 41)), -2, 2, -2, 2)
        f2 = f1.with_values(rng.random((41, 41)))
        a, b = 1.7, -0.6
        combo = f1.with_values(a * f1.values + b * f2.values)
        lhs = op(combo, theta2).values
        rhs = a * op(f1, theta2).values + b * op(f2, theta2).values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


class TestLipschitz:
    def test_constant_field_translate_is_zero(self):
        f = make_grid(24).with_values(np.ones((24, 24)))
        d = estimate_lipschitz_D(f, "translate-x", [-0.2, 0.0, 0.2])
        assert abs(d) < 1e-12  # interpolation roundoff only

    def test_identity_is_zero(self):
        f = field_from(bump(0, 0, 0.3))
        assert estimate_lipschitz_D(f, "identity", [0.0, 1.0]) == 0.0

    def test_ramp_translate_slope(self):
        # finite-difference oracle: for S(x) = x the translation
        # difference quotient is exactly the slope 1
        n = 64
        base = make_grid(n)
        X, _ = np.meshgrid(base.x_coords(), base.y_coords())
        f = base.with_values(X)
        d = estimate_lipschitz_D(f, "translate-x", np.linspace(-0.2, 0.2, 5))
        assert abs(d - 1.0) < 0.05

    def test_monotone_under_refinement(self):
        f = field_from(bump(0.2, 0.0, 0.25), n=48)
        coarse = np.linspace(0.0, 1.0, 5)
        fine = np.linspace(0.0, 1.0, 9)  # superset of coarse
        d_coarse = estimate_lipschitz_D(f, "rotate", coarse)
        d_fine = estimate_lipschitz_D(f, "rotate", fine)
        assert d_fine >= d_coarse

    def test_single_point_grid_rejected(self):
        f = make_grid(8)
        with pytest.raises(ParameterError):
            estimate_lipschitz_D(f, "translate-x", [0.1])


class TestPerturbParamsValidation:
    def test_range_enforced(self):
        with pytest.raises(ParameterError):
            PerturbParams(theta1=5.0, theta1_range=(0.0, 2.0))

    def test_blur_needs_positive_theta2(self):
        with pytest.raises(ParameterError):
            PerturbParams(theta2=0.0, kind="gaussian-blur")

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            PerturbParams(kind="shear")


class TestPGM:
    def test_roundtrip_8bit(self, tmp_path):
        rng = np.random.default_rng(11)
        vals = np.round(rng.random((9, 13)) * 255) / 255.0
        f = ScalarField(vals)
        p = tmp_path / "img.pgm"
        save_pgm(p, f, maxval=255)
        back = load_pgm(p)
        assert back.nx == 13 and back.ny == 9
        np.testing.assert_allclose(back.values, vals, atol=1e-12)

    def test_roundtrip_16bit(self, tmp_path):
        rng = np.random.default_rng(12)
        vals = np.round(rng.random((5, 7)) * 65535) / 65535.0
        f = ScalarField(vals)
        p = tmp_path / "img16.pgm"
        save_pgm(p, f, maxval=65535)
        back = load_pgm(p)
        np.testing.assert_allclose(back.values, vals, atol=1e-12)

    def test_comment_in_header(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        f = load_pgm(p)
        np.testing.assert_allclose(
            f.values, np.array([[0, 128], [255, 64]]) / 255.0, atol=1e-12
        )

    def test_rejects_ascii_pgm(self, tmp_path):
        p = tmp_path / "bad.pgm"
        p.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
        with pytest.raises(ParameterError):
            load_pgm(p)


class TestScalarFieldInvariants:
    def test_rejects_nonfinite(self):
        with pytest.raises(ParameterError):
            ScalarField(np.array([[1.0, np.inf]]))

    def test_rejects_bad_bounds(self):
        with pytest.raises(ParameterError):
            ScalarField(np.ones((2, 2)), 1.0, -1.0)

    def test_total_mass_of_unit_field_is_domain_area(self):
        f = ScalarField(np.ones((10, 20)), 0, 4, -1, 1)
        assert abs(f.total_mass() - 8.0) < 1e-12
