"""Spatial sampling and temporal encoding of scalar fields.

Turns a (perturbed) field into scalar time signals: a sampling schedule
selects which part of the domain is visible at time t, a functional maps
the restriction to a number, and an optional frequency assignment tags
strips with periodic carriers so the whole image is summed into one
amplitude-modulated signal. The linear gain theta1 always factors out of
these functionals, so encoders work with the nonlinear part only and the
caller multiplies by theta1 (true or estimated).
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ParameterError
from .field import PerturbParams, ScalarField, transform

MODES = ("sweep", "scan-line", "frequency-strips")
FUNCTIONAL_KINDS = ("strip-integral", "exp-kernel", "scan-point", "spectral-band")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ParameterError("rectangle must have positive extent")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def inside(self, field: ScalarField) -> bool:
        return (
            self.x0 >= field.x_min - 1e-12
            and self.x1 <= field.x_max + 1e-12
            and self.y0 >= field.y_min - 1e-12
            and self.y1 <= field.y_max + 1e-12
        )


@dataclass
class SamplingSchedule:
    """Time-structure of the spatial sampling.

    sweep: each subdomain is active for period/m time units, cyclically.
    scan-line: a point sweeps the x-range at speed k_s (y fixed).
    frequency-strips: all subdomains are active simultaneously, each
    modulated by its own carrier frequency.
    """

    mode: str
    subdomains: list = dc_field(default_factory=list)
    period: float = 1.0
    k_s: float = 1.0
    scan_y: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown schedule mode {self.mode!r}")
        if self.period <= 0:
            raise ParameterError("schedule period must be positive")
        if self.mode != "scan-line" and not self.subdomains:
            raise ConfigError(f"{self.mode} schedule needs at least one subdomain")


@dataclass
class FunctionalSpec:
    """How a field restriction becomes a scalar.

    bias is added once to the functional output; it is identical for
    image and template channels so it cancels out of their difference
    while keeping template signals separated from zero.
    """

    kind: str = "strip-integral"
    reference_point: tuple = (0.0, 0.0)
    band: tuple = (0.5, 2.0, 0.5, 2.0)
    bias: float = 0.0

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ConfigError(f"unknown functional kind {self.kind!r}")
        if self.bias < 0:
            raise ParameterError("bias must be nonnegative")


@dataclass
class FrequencyAssignment:
    """Distinct positive carrier frequencies, one per strip."""

    omegas: Sequence[float]

    def __post_init__(self):
        om = [float(w) for w in self.omegas]
        if any(w <= 0 or not math.isfinite(w) for w in om):
            raise ParameterError("carrier frequencies must be positive and finite")
        if len(set(om)) != len(om):
            raise ParameterError("carrier frequencies must be pairwise distinct")
        self.omegas = om

    @staticmethod
    def harmonic(count: int, omega_base: float = 1.0) -> "FrequencyAssignment":
        """omega_nu = omega_base * nu, ordered by strip index."""
        return FrequencyAssignment([omega_base * (nu + 1) for nu in range(count)])


def sin_squared(x):
    """Default carrier: bounded, periodic, nonnegative."""
    s = np.sin(x)
    return s * s


CARRIERS: dict[str, Callable] = {"sin2": sin_squared}


def _cell_mask(field: ScalarField, rect: Rect) -> np.ndarray:
    xs = field.x_coords()
    ys = field.y_coords()
    # half-open on the high edge so adjacent strips partition the cells
    in_x = (xs >= rect.x0) & (xs < rect.x1)
    in_y = (ys >= rect.y0) & (ys < rect.y1)
    return np.outer(in_y, in_x)


def sample(field: ScalarField, subdomain, spec: FunctionalSpec) -> float:
    """Evaluate the sampling functional on a field restriction.

    subdomain is a Rect for integral kinds or an (x, y) point for the
    scan-point kind (the singular case of a one-point restriction).
    """
    if spec.kind == "scan-point":
        if isinstance(subdomain, Rect):
            raise ConfigError("scan-point expects an (x, y) point, not a Rect")
        x, y = subdomain
        if not (field.x_min <= x <= field.x_max and field.y_min <= y <= field.y_max):
            raise DomainError(f"scan point ({x}, {y}) outside field domain")
        return float(field.interp(x, y)) + spec.bias

    if not isinstance(subdomain, Rect):
        subdomain = Rect(*subdomain)
    if not subdomain.inside(field):
        raise DomainError("subdomain extends outside the field domain")
    mask = _cell_mask(field, subdomain)

    if spec.kind == "strip-integral":
        raw = float(field.values[mask].sum() * field.cell_area)
    elif spec.kind == "exp-kernel":
        x0, y0 = spec.reference_point
        X, Y = np.meshgrid(field.x_coords(), field.y_coords())
        w = np.exp(-np.abs(X - x0) - np.abs(Y - y0))
        raw = float((field.values * w)[mask].sum() * field.cell_area)
    elif spec.kind == "spectral-band":
        # Direct discrete Fourier sum; band quadrature on an 8x8 midpoint
        # grid. Experimental: modulus makes this homogeneous only for
        # nonnegative gains.
        wa, wb, wc, wd = spec.band
        if not (wb > wa and wd > wc):
            raise ConfigError("spectral band must have positive extent")
        n_om = 8
        wx = wa + (np.arange(n_om) + 0.5) * (wb - wa) / n_om
        wy = wc + (np.arange(n_om) + 0.5) * (wd - wc) / n_om
        X, Y = np.meshgrid(field.x_coords(), field.y_coords())
        vals = np.where(mask, field.values, 0.0)
        total = 0.0
        for ox in wx:
            for oy in wy:
                z = np.sum(vals * np.exp(-1j * (ox * X + oy * Y))) * field.cell_area
                total += abs(z)
        raw = float(total * (wb - wa) * (wd - wc) / (n_om * n_om))
    else:
        raise ConfigError(f"unknown functional kind {spec.kind!r}")
    return raw + spec.bias


# nonlinear-transform results keyed by source field, then (kind, theta2)
_transform_cache: "weakref.WeakKeyDictionary[ScalarField, dict]" = weakref.WeakKeyDictionary()


def _cached_transform(field: ScalarField, kind: str, theta2: float) -> ScalarField:
    per_field = _transform_cache.setdefault(field, {})
    key = (kind, float(theta2))
    if key not in per_field:
        per_field[key] = transform(field, kind, theta2)
    return per_field[key]


def active_subdomain(schedule: SamplingSchedule, t: float):
    """Subdomain (or scan point x) visible at time t."""
    if schedule.mode == "sweep":
        m = len(schedule.subdomains)
        slot = schedule.period / m
        idx = int(math.fmod(t, schedule.period) / slot)
        return schedule.subdomains[min(idx, m - 1)]
    raise ConfigError("active_subdomain applies to sweep schedules only")


def f_series(
    field: ScalarField,
    p,
    schedule: SamplingSchedule,
    spec: FunctionalSpec,
    t: float,
) -> float:
    """theta1 * f(Fbar_t[S, theta2]): the encoded signal at time t.

    The subdomain active at t comes from the schedule: piecewise-constant
    slots in sweep mode, a continuously moving point in scan-line mode.
    """
    if t < 0:
        raise ParameterError("time must be nonnegative")
    bar = _cached_transform(field, p.kind, p.theta2)
    if schedule.mode == "sweep":
        sub = active_subdomain(schedule, t)
        return p.theta1 * sample(bar, sub, spec)
    if schedule.mode == "scan-line":
        x = scan_position(t, field.x_min, field.x_max, schedule.k_s)
        point_spec = FunctionalSpec(kind="scan-point", bias=spec.bias)
        return p.theta1 * sample(bar, (x, schedule.scan_y), point_spec)
    raise ConfigError("use freq_encode for frequency-strips schedules")


def strip_integrals(
    field: ScalarField,
    kind: str,
    theta2: float,
    strips: SamplingSchedule,
) -> np.ndarray:
    """Integral of Fbar[S, theta2] over each strip (no bias)."""
    bar = _cached_transform(field, kind, theta2)
    spec = FunctionalSpec(kind="strip-integral", bias=0.0)
    return np.array([sample(bar, sub, spec) for sub in strips.subdomains])


def freq_encode(
    field: ScalarField,
    theta2: float,
    strips: SamplingSchedule,
    omegas: FrequencyAssignment,
    kind: str,
    t,
    bias: float = 0.0,
    carrier: Callable = sin_squared,
):
    """Frequency-tagged sum over strips at time t.

    Each strip's integral of the transformed field is modulated by
    carrier(omega_nu * t) and the contributions are summed; bias is
    added once to the total. Strip integrals are computed once per
    (field, theta2) and cached.
    """
    if strips.mode != "frequency-strips":
        raise ConfigError("freq_encode requires a frequency-strips schedule")
    if len(omegas.omegas) != len(strips.subdomains):
        raise ConfigError(
            f"{len(omegas.omegas)} carriers for {len(strips.subdomains)} strips"
        )
    ints = strip_integrals(field, kind, theta2, strips)
    t_arr = np.asarray(t, dtype=np.float64)
    om = np.asarray(omegas.omegas)
    w = carrier(om * t_arr[..., None])
    out = w @ ints + bias
    return float(out) if out.ndim == 0 else out


def scan_position(t: float, x_min: float, x_max: float, k_s: float = 1.0) -> float:
    """Periodic scanning ramp x(t) = x_min + k_s * t, wrapped.

    The first pass runs t in [0, (x_max - x_min)/k_s] inclusive, so the
    endpoint maps to x_max; afterwards the ramp repeats with that period.
    """
    if t < 0:
        raise ParameterError("time must be nonnegative")
    if not (x_max > x_min and k_s > 0):
        raise ParameterError("need x_max > x_min and k_s > 0")
    period = (x_max - x_min) / k_s
    if t > period:
        r = math.fmod(t, period)
        t = period if r == 0.0 else r
    return x_min + k_s * t


class BoundsEstimate(NamedTuple):
    """Empirical (min, max) of the template signal plus a bias hint."""

    d3: float
    d4: float
    recommended_bias: float | None


def estimate_D3_D4(
    field: ScalarField,
    kind: str,
    spec: FunctionalSpec,
    schedule: SamplingSchedule,
    theta2_grid,
    horizon: float,
    omegas: FrequencyAssignment | None = None,
    samples_per_period: int = 64,
    floor_frac: float = 0.05,
) -> BoundsEstimate:
    """Sampled lower/upper bounds of f(t, theta2) over a time x theta2 grid.

    Heuristic estimates: 64 time samples per schedule period (default)
    across the horizon times the supplied theta2 grid. If the minimum is
    not positive, the returned hint is the bias needed to lift it to
    floor_frac * max.
    """
    grid = [float(v) for v in theta2_grid]
    if not grid:
        raise ParameterError("theta2_grid must be nonempty")
    if horizon < schedule.period:
        raise ParameterError("horizon must cover at least one schedule period")
    n_t = max(2, int(math.ceil(horizon / schedule.period * samples_per_period)))
    times = np.linspace(0.0, horizon, n_t, endpoint=False)

    lo = math.inf
    hi = -math.inf
    for theta2 in grid:
        if schedule.mode == "frequency-strips":
            if omegas is None:
                raise ConfigError("frequency-strips estimation needs carrier frequencies")
            vals = freq_encode(field, theta2, schedule, omegas, kind, times, bias=spec.bias)
        else:
            p = PerturbParams(
                theta1=1.0,
                theta2=theta2,
                kind=kind,
                theta1_range=(0.0, 1.0),
                theta2_range=(min(grid), max(grid)),
            )
            vals = np.array([f_series(field, p, schedule, spec, float(t)) for t in times])
        lo = min(lo, float(np.min(vals)))
        hi = max(hi, float(np.max(vals)))

    if not (math.isfinite(hi) and math.isfinite(lo)):
        raise ParameterError("encoded signal is not finite over the sampling grid")
    rec = None
    if lo <= 0.0:
        rec = floor_frac * hi - lo
    return BoundsEstimate(lo, hi, rec)


def horizontal_strips(
    x_min: float, x_max: float, y_min: float, y_max: float, count: int
) -> SamplingSchedule:
    """Partition the domain into equal-height horizontal strips."""
    if count < 1:
        raise ParameterError("strip count must be positive")
    edges = np.linspace(y_min, y_max, count + 1)
    rects = [Rect(x_min, x_max, float(edges[i]), float(edges[i + 1])) for i in range(count)]
    return SamplingSchedule(mode="frequency-strips", subdomains=rects, period=1.0)


def validate_schedule(schedule: SamplingSchedule, field: ScalarField, region: Rect | None = None):
    """Check containment and coverage of a schedule against a field.

    Every subdomain must lie inside the field domain, and over one period
    the subdomains must jointly cover the requested region (all of its
    cell centers belong to some subdomain).
    """
    if schedule.mode == "scan-line":
        if not (field.y_min <= schedule.scan_y <= field.y_max):
            raise ConfigError("scan row lies outside the field domain")
        return
    for sub in schedule.subdomains:
        if not sub.inside(field):
            raise ConfigError("schedule subdomain extends outside the field domain")
    if region is None:
        region = Rect(field.x_min, field.x_max, field.y_min, field.y_max)
    want = _cell_mask(field, region)
    got = np.zeros_like(want)
    for sub in schedule.subdomains:
        got |= _cell_mask(field, sub)
    if not np.all(got[want]):
        raise ConfigError("schedule subdomains do not cover the configured region")


class TabulatedEncoder:
    """Template-side signal evaluator with a precomputed theta2 table.

    The searching dynamics queries f(t, theta2) at a continuum of theta2
    values, so strip integrals are tabulated on a uniform theta2 grid
    once and interpolated linearly afterwards. Works for frequency-strips
    (carrier-weighted sum) and sweep (slot-gated) schedules.
    """

    def __init__(
        self,
        field: ScalarField,
        kind: str,
        schedule: SamplingSchedule,
        theta2_range: tuple[float, float],
        omegas: FrequencyAssignment | None = None,
        bias: float = 0.0,
        n_table: int = 361,
        carrier: Callable = sin_squared,
    ):
        if schedule.mode not in ("frequency-strips", "sweep"):
            raise ConfigError("tabulated encoding needs strips or a sweep schedule")
        if schedule.mode == "frequency-strips":
            if omegas is None:
                raise ConfigError("frequency-strips encoding needs carrier frequencies")
            if len(omegas.omegas) != len(schedule.subdomains):
                raise ConfigError("carrier count must equal strip count")
        lo, hi = theta2_range
        if not hi > lo:
            raise ConfigError("theta2 range must have positive width")
        if n_table < 2:
            raise ParameterError("table needs at least 2 theta2 points")
        self.kind = kind
        self.schedule = schedule
        self.omegas = np.asarray(omegas.omegas) if omegas is not None else None
        self.bias = float(bias)
        self.carrier = carrier
        self.theta_lo = float(lo)
        self.theta_hi = float(hi)
        self.n_table = int(n_table)
        self.theta_grid = np.linspace(lo, hi, n_table)
        self.tables = np.stack(
            [strip_integrals(field, kind, th, schedule) for th in self.theta_grid]
        )  # (n_table, n_strips)

    @property
    def n_strips(self) -> int:
        return self.tables.shape[1]

    def weights(self, t):
        """Carrier weights (frequency mode) or slot indicator (sweep)."""
        if self.schedule.mode == "frequency-strips":
            t_arr = np.asarray(t, dtype=np.float64)
            return self.carrier(self.omegas * t_arr[..., None])
        m = self.n_strips
        slot = self.schedule.period / m
        idx = min(int(math.fmod(t, self.schedule.period) / slot), m - 1)
        w = np.zeros(m)
        w[idx] = 1.0
        return w

    def interp_integrals(self, theta2):
        """Linear interpolation of the strip-integral table at theta2."""
        th = np.clip(np.asarray(theta2, dtype=np.float64), self.theta_lo, self.theta_hi)
        pos = (th - self.theta_lo) / (self.theta_hi - self.theta_lo) * (self.n_table - 1)
        i0 = np.minimum(pos.astype(np.int64), self.n_table - 2)
        w = pos - i0
        return self.tables[i0] * (1.0 - w)[..., None] + self.tables[i0 + 1] * w[..., None]

    def fbar(self, t, theta2):
        """f(t, theta2) including bias (gain theta1 excluded)."""
        ints = self.interp_integrals(theta2)
        w = self.weights(t)
        out = np.sum(w * ints, axis=-1) + self.bias
        return float(out) if np.ndim(out) == 0 else out
