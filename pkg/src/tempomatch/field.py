"""Discretized scalar images and parameterized perturbation operators.

A :class:`ScalarField` holds intensity values on a regular cell-centered
grid over a rectangular domain. Perturbations follow the two-parameter
factorization ``F[S, theta] = theta1 * Fbar[S, theta2]`` where ``theta1``
is a linear gain (brightness) and ``theta2`` drives one of the nonlinear
geometric/optical transforms: x-translation, x-scaling, rotation about
the domain center, Gaussian blur, or out-of-focus (disc) blur.

All transforms use bilinear interpolation with zero padding outside the
domain; blurs use direct truncated-kernel quadrature with cell-area
weights (no FFT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.signal import convolve2d

from .errors import DomainError, ParameterError

PERTURBATION_KINDS = (
    "translate-x",
    "scale-x",
    "rotate",
    "gaussian-blur",
    "defocus-blur",
    "identity",
)

# Blur kernels are truncated where the weight drops below this value.
KERNEL_TRUNCATION = 1e-12


@dataclass(eq=False)
class ScalarField:
    """Intensity samples on a cell-centered grid over a rectangle.

    Node (i, j) sits at ``(x_min + (j + 0.5) dx, y_min + (i + 0.5) dy)``
    with ``dx = (x_max - x_min) / nx``; ``values[i, j]`` is indexed row
    (y) first. Cell-area weights ``dx * dy`` turn sums into integrals.
    """

    values: np.ndarray
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ParameterError("field values must be a 2-D array")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ParameterError("field must have at least one cell per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ParameterError("domain bounds must satisfy max > min")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def x_coords(self) -> np.ndarray:
        """Cell-center x coordinates, length nx."""
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def y_coords(self) -> np.ndarray:
        """Cell-center y coordinates, length ny."""
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def total_mass(self) -> float:
        """Cell-area weighted sum (the discrete integral of the field)."""
        return float(self.values.sum() * self.cell_area)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.x_min, self.x_max, self.y_min, self.y_max)

    def copy(self) -> "ScalarField":
        return self.with_values(self.values.copy())

    def interp(self, x, y):
        """Bilinear interpolation at (x, y); zero outside the domain.

        Points beyond the outermost cell centers blend toward virtual
        zero cells, so the field tapers continuously to zero at the
        domain border.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        u = (x - self.x_min) / self.dx - 0.5
        v = (y - self.y_min) / self.dy - 0.5
        i0 = np.floor(v).astype(np.int64)
        j0 = np.floor(u).astype(np.int64)
        fv = v - i0
        fu = u - j0

        def node(ii, jj):
            valid = (ii >= 0) & (ii < self.ny) & (jj >= 0) & (jj < self.nx)
            out = np.zeros(np.broadcast(ii, jj).shape, dtype=np.float64)
            ii_c = np.clip(ii, 0, self.ny - 1)
            jj_c = np.clip(jj, 0, self.nx - 1)
            vals = self.values[ii_c, jj_c]
            out[...] = np.where(valid, vals, 0.0)
            return out

        w00 = node(i0, j0) * (1 - fu) * (1 - fv)
        w01 = node(i0, j0 + 1) * fu * (1 - fv)
        w10 = node(i0 + 1, j0) * (1 - fu) * fv
        w11 = node(i0 + 1, j0 + 1) * fu * fv
        out = w00 + w01 + w10 + w11
        inside = (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)
        return np.where(inside, out, 0.0)


@dataclass
class PerturbParams:
    """Ground-truth or estimated perturbation: gain theta1, nonlinear theta2."""

    theta1: float = 1.0
    theta2: float = 0.0
    kind: str = "identity"
    theta1_range: tuple[float, float] = (0.0, 2.0)
    theta2_range: tuple[float, float] = (0.0, 2.0 * math.pi)

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ParameterError(f"unknown perturbation kind {self.kind!r}")
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2)):
            raise ParameterError("theta1 and theta2 must be finite")
        lo1, hi1 = self.theta1_range
        lo2, hi2 = self.theta2_range
        if not (lo1 <= self.theta1 <= hi1):
            raise ParameterError(f"theta1={self.theta1} outside range {self.theta1_range}")
        if not (lo2 <= self.theta2 <= hi2):
            raise ParameterError(f"theta2={self.theta2} outside range {self.theta2_range}")
        if self.kind in ("scale-x", "gaussian-blur", "defocus-blur") and self.theta2 <= 0:
            raise ParameterError(f"{self.kind} requires theta2 > 0")


def _resample(field: ScalarField, src_x: np.ndarray, src_y: np.ndarray) -> ScalarField:
    """New field whose node (i, j) reads the input at (src_x, src_y)."""
    return field.with_values(field.interp(src_x, src_y))


def translate_x(field: ScalarField, theta2: float) -> ScalarField:
    """Shift the view window: output(x, y) = input(x + theta2, y)."""
    if not math.isfinite(theta2):
        raise ParameterError("translate-x: theta2 must be finite")
    if theta2 == 0.0:
        return field.copy()
    xs = field.x_coords() + theta2
    src_x, src_y = np.meshgrid(xs, field.y_coords())
    return _resample(field, src_x, src_y)


def scale_x(field: ScalarField, theta2: float) -> ScalarField:
    """Stretch/compress along x: output(x, y) = input(theta2 * x, y)."""
    if not math.isfinite(theta2) or theta2 <= 0:
        raise ParameterError("scale-x: theta2 must be positive")
    if theta2 == 1.0:
        return field.copy()
    xs = field.x_coords() * theta2
    src_x, src_y = np.meshgrid(xs, field.y_coords())
    return _resample(field, src_x, src_y)


def rotate(field: ScalarField, theta2: float) -> ScalarField:
    """Rotate about the domain center by theta2 (wrapped into [0, 2pi)).

    output(x, y) = input(x_r, y_r) in center-shifted coordinates, with
    x_r = cos(t) x - sin(t) y and y_r = sin(t) x + cos(t) y.
    """
    if not math.isfinite(theta2):
        raise ParameterError("rotate: theta2 must be finite")
    t = math.fmod(theta2, 2.0 * math.pi)
    if t < 0:
        t += 2.0 * math.pi
    if t == 0.0:
        return field.copy()
    cx, cy = field.center
    x, y = np.meshgrid(field.x_coords() - cx, field.y_coords() - cy)
    c, s = math.cos(t), math.sin(t)
    src_x = c * x - s * y + cx
    src_y = s * x + c * y + cy
    return _resample(field, src_x, src_y)


def gaussian_kernel_radius(theta2: float) -> float:
    """Physical radius beyond which exp(-r^2/theta2) < KERNEL_TRUNCATION."""
    return math.sqrt(theta2 * math.log(1.0 / KERNEL_TRUNCATION))


def _convolve(field: ScalarField, kernel: np.ndarray) -> ScalarField:
    # convolve2d performs direct summation (no FFT); zero-fill boundary
    # realizes the zero-padding convention.
    out = convolve2d(field.values, kernel, mode="same", boundary="fill", fillvalue=0.0)
    return field.with_values(out)


def gaussian_blur(field: ScalarField, theta2: float) -> ScalarField:
    """Unnormalized Gaussian blur.

    output(x, y) = sum over cells of exp(-((x-xi)^2+(y-eta)^2)/theta2)
    * input(xi, eta) * cell_area, the kernel truncated where the
    exponential falls below KERNEL_TRUNCATION. Note the kernel carries
    no normalization: blurring the unit field yields approximately
    pi * theta2 in the interior.
    """
    if not math.isfinite(theta2) or theta2 <= 0:
        raise ParameterError("gaussian-blur: theta2 must be positive")
    radius = gaussian_kernel_radius(theta2)
    mx = int(math.ceil(radius / field.dx))
    my = int(math.ceil(radius / field.dy))
    kx = np.arange(-mx, mx + 1) * field.dx
    ky = np.arange(-my, my + 1) * field.dy
    r2 = kx[None, :] ** 2 + ky[:, None] ** 2
    kernel = np.exp(-r2 / theta2)
    kernel[kernel < KERNEL_TRUNCATION] = 0.0
    return _convolve(field, kernel * field.cell_area)


def defocus_blur(field: ScalarField, theta2: float) -> ScalarField:
    """Out-of-focus blur: uniform disc kernel of radius theta2.

    The kernel value is 1/(pi theta2^2) inside the disc and 0 outside,
    so its continuous mass is exactly 1; the discrete sum deviates by
    the disc-sampling error of the grid.
    """
    if not math.isfinite(theta2) or theta2 <= 0:
        raise ParameterError("defocus-blur: theta2 must be positive")
    mx = int(math.ceil(theta2 / field.dx))
    my = int(math.ceil(theta2 / field.dy))
    kx = np.arange(-mx, mx + 1) * field.dx
    ky = np.arange(-my, my + 1) * field.dy
    r2 = kx[None, :] ** 2 + ky[:, None] ** 2
    kernel = np.where(r2 <= theta2 * theta2, 1.0 / (math.pi * theta2 * theta2), 0.0)
    return _convolve(field, kernel * field.cell_area)


_TRANSFORMS = {
    "translate-x": translate_x,
    "scale-x": scale_x,
    "rotate": rotate,
    "gaussian-blur": gaussian_blur,
    "defocus-blur": defocus_blur,
}


def transform(field: ScalarField, kind: str, theta2: float) -> ScalarField:
    """Apply the nonlinear part Fbar[S, theta2] for the given kind."""
    if kind == "identity":
        return field.copy()
    try:
        op = _TRANSFORMS[kind]
    except KeyError:
        raise ParameterError(f"unknown perturbation kind {kind!r}") from None
    return op(field, theta2)


def apply_perturbation(field: ScalarField, p: PerturbParams) -> ScalarField:
    """Full two-parameter perturbation theta1 * Fbar[S, theta2]."""
    bar = transform(field, p.kind, p.theta2)
    if p.theta1 == 1.0:
        return bar
    return bar.with_values(p.theta1 * bar.values)


def _valid_mask(field: ScalarField, kind: str, theta2_grid) -> np.ndarray:
    """Cells whose transformed reads stay inside the domain for every
    grid value, so zero padding cannot inflate difference quotients."""
    xs = field.x_coords()
    ys = field.y_coords()
    X, Y = np.meshgrid(xs, ys)
    mask = np.ones_like(X, dtype=bool)
    if kind == "identity":
        return mask
    # interpolated reads are exact only between the outermost node
    # centers; beyond them values taper toward the zero padding
    xi_lo, xi_hi = field.x_min + 0.5 * field.dx, field.x_max - 0.5 * field.dx
    yi_lo, yi_hi = field.y_min + 0.5 * field.dy, field.y_max - 0.5 * field.dy
    if kind == "translate-x":
        for t in theta2_grid:
            mask &= (X + t >= xi_lo) & (X + t <= xi_hi)
        return mask
    if kind == "scale-x":
        for t in theta2_grid:
            mask &= (X * t >= xi_lo) & (X * t <= xi_hi)
        return mask
    if kind == "rotate":
        cx, cy = field.center
        r_ok = min(xi_hi - cx, yi_hi - cy)
        return (X - cx) ** 2 + (Y - cy) ** 2 <= r_ok * r_ok
    if kind == "gaussian-blur":
        radius = gaussian_kernel_radius(max(theta2_grid))
    elif kind == "defocus-blur":
        radius = max(theta2_grid)
    else:
        raise ParameterError(f"unknown perturbation kind {kind!r}")
    return (
        (X - radius >= field.x_min)
        & (X + radius <= field.x_max)
        & (Y - radius >= field.y_min)
        & (Y + radius <= field.y_max)
    )


def estimate_lipschitz_D(field: ScalarField, kind: str, theta2_grid) -> float:
    """Empirical Lipschitz constant of Fbar[S, .] with respect to theta2.

    Maximum over all grid pairs and pixels of
    |Fbar[S, t'](x, y) - Fbar[S, t''](x, y)| / |t' - t''|, with a
    boundary margin excluded per kind so that zero padding does not
    inflate the estimate. The result is a lower bound of the true
    constant; callers apply their own safety factor.
    """
    grid = [float(t) for t in theta2_grid]
    if len(grid) < 2:
        raise ParameterError("theta2_grid needs at least 2 points")
    if kind == "identity":
        return 0.0
    mask = _valid_mask(field, kind, grid)
    if not mask.any():
        raise ParameterError(
            "no interior cells survive the boundary margin; "
            "enlarge the domain or shrink the theta2 range"
        )
    fields = [transform(field, kind, t).values[mask] for t in grid]
    best = 0.0
    for a in range(len(grid)):
        for b in range(a + 1, len(grid)):
            gap = abs(grid[a] - grid[b])
            if gap == 0.0:
                continue
            diff = float(np.max(np.abs(fields[a] - fields[b])))
            best = max(best, diff / gap)
    return best


def load_pgm(path) -> ScalarField:
    """Read a binary (P5) PGM image, mapping values to [0, 1].

    Supports 8-bit and 16-bit (big-endian) grayscale. Domain bounds
    default to [-1, 1]^2; callers rescale via dataclass replace if the
    physical extent differs.
    """
    with open(path, "rb") as f:
        data = f.read()

    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ParameterError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval

    magic, w_s, h_s, maxval_s = tokens
    if magic != b"P5":
        raise ParameterError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = int(w_s), int(h_s), int(maxval_s)
    if maxval <= 0 or maxval > 65535:
        raise ParameterError(f"{path}: invalid maxval {maxval}")
    count = width * height
    if maxval < 256:
        raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=count, offset=pos)
    if raw.size < count:
        raise ParameterError(f"{path}: truncated PGM pixel data")
    values = raw.reshape(height, width).astype(np.float64) / float(maxval)
    return ScalarField(values)


def save_pgm(path, field: ScalarField, maxval: int = 255) -> None:
    """Write a field as binary PGM, clipping values into [0, 1]."""
    if maxval not in (255, 65535):
        raise ParameterError("maxval must be 255 or 65535")
    scaled = np.clip(field.values, 0.0, 1.0) * maxval
    pixels = np.round(scaled).astype(np.uint8 if maxval == 255 else ">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{field.nx} {field.ny}\n{maxval}\n".encode("ascii"))
        f.write(pixels.tobytes())
