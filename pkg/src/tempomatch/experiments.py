"""Reference studies: rotation census, microscope tracking, sampling cost.

Three desk-scale experiments exercise the whole pipeline:

* dot patterns of controlled rotational symmetry, matched under unknown
  rotation and brightness; an ensemble census counts the distinct
  resting sets (two per admissible angle, one per search-circle branch);
* a synthetic 1-D scanning-microscope scenario with photobleaching
  (drifting gain) and Gaussian scattering blur, tracked online;
* the cost/ambiguity tradeoff showing that sampled representations with
  an interior granularity minimize combined losses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .adapt import branch_lambda3
from .config import FieldSpec, RunConfig
from .detect import HRParams, sync_metrics, sync_upper_bound
from .encode import scan_position
from .engine import (
    MatchReport,
    PreparedMatch,
    Trajectory,
    prepare_match,
    run_prepared,
    summarize_member,
)
from .errors import ConfigError, ParameterError
from .field import ScalarField, load_pgm

__all__ = [
    "GarnerSpec",
    "garner_pattern",
    "GarnerCensus",
    "run_garner",
    "MicroscopeScenario",
    "make_spine_profile",
    "MeasuredScan",
    "synth_microscope",
    "TrackingReport",
    "run_microscope",
    "sampling_tradeoff",
    "build_field",
]

SUPPORTED_ORDERS = (1, 2, 4)


@dataclass
class GarnerSpec:
    """Dot pattern with a prescribed rotational symmetry order."""

    symmetry_order: int = 1
    n: int = 32
    seed: int = 0
    dots: int = 5
    dot_sigma: float = 0.11
    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.symmetry_order not in SUPPORTED_ORDERS:
            raise ParameterError(
                f"symmetry order must be one of {SUPPORTED_ORDERS}, got {self.symmetry_order}"
            )
        if self.dots < 1:
            raise ParameterError("need at least one dot")


def garner_pattern(spec: GarnerSpec) -> ScalarField:
    """Smooth dot pattern, total intensity normalized to 1.

    Base dots are placed in one angular sector and replicated by
    rotating multiples of 2pi/order, so the analytic field has the
    requested symmetry exactly. Dots live strictly inside the inscribed
    disc (3 sigma margin) so rotations keep all mass inside the domain,
    and every dot is a Gaussian bump, keeping transforms Lipschitz.
    """
    rng = np.random.default_rng(spec.seed)
    order = spec.symmetry_order
    base = ScalarField(
        np.zeros((spec.n, spec.n)), spec.x_min, spec.x_max, spec.y_min, spec.y_max
    )
    cx, cy = base.center
    r_ins = min(0.5 * (spec.x_max - spec.x_min), 0.5 * (spec.y_max - spec.y_min))
    r_hi = r_ins - 3.0 * spec.dot_sigma
    r_lo = 0.25 * r_ins
    if r_hi <= r_lo:
        raise ParameterError("dot_sigma too large for the domain")

    radii = rng.uniform(r_lo, r_hi, spec.dots)
    angles = rng.uniform(0.0, 2.0 * math.pi / order, spec.dots)
    X, Y = np.meshgrid(base.x_coords() - cx, base.y_coords() - cy)
    vals = np.zeros_like(X)
    for rad, ang in zip(radii, angles):
        for rep in range(order):
            a = ang + rep * 2.0 * math.pi / order
            dx = X - rad * math.cos(a)
            dy = Y - rad * math.sin(a)
            vals += np.exp(-(dx * dx + dy * dy) / (2.0 * spec.dot_sigma**2))
    out = base.with_values(vals)
    return out.with_values(vals / out.total_mass())


@dataclass
class GarnerCluster:
    branch: int  # sign of lambda3 at rest
    angle: float  # circular mean of final theta2 estimates (radians)
    count: int
    spread: float  # largest member deviation from the cluster mean

    def as_dict(self) -> dict:
        return {
            "branch": self.branch,
            "angle": self.angle,
            "count": self.count,
            "spread": self.spread,
        }


@dataclass
class GarnerCensus:
    order: int
    rotation: float
    brightness: float
    ensemble: int
    convergent: int
    clusters: list
    members: list  # per-member dicts (converged, theta2_hat, branch)

    @property
    def census(self) -> int:
        return len(self.clusters)

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "rotation": self.rotation,
            "brightness": self.brightness,
            "ensemble": self.ensemble,
            "convergent": self.convergent,
            "census": self.census,
            "clusters": [c.as_dict() for c in self.clusters],
            "members": self.members,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, indent=2)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
                f.write("\n")
        return text


def _circular_clusters(angles: np.ndarray, linkage: float) -> list:
    """Single-linkage clustering of angles on the circle (radians)."""
    if angles.size == 0:
        return []
    two_pi = 2.0 * math.pi
    wrapped = np.mod(angles, two_pi)
    order = np.argsort(wrapped)
    sorted_a = wrapped[order]
    gaps = np.diff(sorted_a)
    wrap_gap = two_pi - (sorted_a[-1] - sorted_a[0])
    # break the circle at the largest gap, then link sequentially
    breaks = [g > linkage for g in gaps]
    clusters = []
    current = [sorted_a[0]]
    for val, brk in zip(sorted_a[1:], breaks):
        if brk:
            clusters.append(current)
            current = [val]
        else:
            current.append(val)
    clusters.append(current)
    if len(clusters) > 1 and wrap_gap <= linkage:
        first = clusters.pop(0)
        clusters[-1] = clusters[-1] + [a + two_pi for a in first]
    out = []
    for members in clusters:
        arr = np.asarray(members)
        mean = float(np.mod(arr.mean(), two_pi))
        spread = float(np.max(np.abs(arr - arr.mean())))
        out.append((mean, len(members), spread))
    return out


def default_garner_config(rotation: float, brightness: float, seed: int = 0) -> RunConfig:
    """Run configuration tuned for the rotation-census experiment."""
    cfg = RunConfig()
    cfg.run.seed = seed
    cfg.run.dt = None
    cfg.run.horizon = 30000.0
    cfg.run.record_stride = 200
    cfg.run.init = "circle-random"
    cfg.perturb.kind = "rotate"
    cfg.perturb.theta1 = brightness
    cfg.perturb.theta2 = rotation
    cfg.perturb.theta1_range = (0.5, 2.0)
    cfg.perturb.theta2_range = (0.0, 2.0 * math.pi)
    cfg.encoder.strips = 8
    cfg.encoder.omega_base = 1.0
    cfg.encoder.bias_floor_frac = 0.25
    cfg.adapt.epsilon_floor = 0.004
    cfg.adapt.gamma2_safety = 0.9
    return cfg


def run_garner(
    spec: GarnerSpec,
    rotation: float,
    brightness: float = 1.0,
    ensemble: int = 40,
    cfg: RunConfig | None = None,
    linkage_deg: float = 5.0,
) -> GarnerCensus:
    """Ensemble census of resting sets for a rotated, rescaled pattern.

    Members start from seeded points spread over the search circle,
    alternating the lambda3 branch so both rotation directions are
    populated. Non-convergent members (dead-zone residual not settled or
    estimate still drifting) are reported but excluded from clustering.
    """
    if not (0.0 <= rotation < 2.0 * math.pi):
        raise ParameterError("rotation must lie in [0, 2pi)")
    if ensemble < 2:
        raise ParameterError("ensemble must have at least 2 members")
    if cfg is None:
        cfg = default_garner_config(rotation, brightness)
    pattern = garner_pattern(spec)
    prep = prepare_match(pattern, [pattern], cfg)

    rng = np.random.default_rng(cfg.run.seed)
    y0 = np.zeros((ensemble, prep.dim))
    for bdx in range(ensemble):
        l2 = rng.uniform(-0.95, 0.95)
        up, down = branch_lambda3(l2)
        y0[bdx, 3] = l2
        y0[bdx, 4] = up if bdx % 2 == 0 else down
        hr_off = 1 + 4 * prep.m
        n = prep.n_nodes
        y0[bdx, hr_off : hr_off + n] = rng.uniform(-2.0, 2.0, n)
        y0[bdx, hr_off + n : hr_off + 2 * n] = rng.uniform(-10.0, 2.0, n)
        y0[bdx, hr_off + 2 * n : hr_off + 3 * n] = rng.uniform(0.0, 6.0, n)

    times, states = run_prepared(prep, y0)

    members = []
    final_angles = []
    final_branches = []
    for bdx in range(ensemble):
        verdicts, _ = summarize_member(prep, times, states[:, bdx, :])
        v = verdicts[0]
        lam3_final = float(states[-1, bdx, 4])
        branch = 1 if lam3_final >= 0 else -1
        converged = v.residual_zero_final and v.converged
        members.append(
            {
                "member": bdx,
                "converged": bool(converged),
                "theta2_hat": v.theta2_hat,
                "theta1_hat": v.theta1_hat,
                "branch": branch,
            }
        )
        if converged:
            final_angles.append(v.theta2_hat)
            final_branches.append(branch)

    linkage = math.radians(linkage_deg)
    clusters = []
    final_angles = np.asarray(final_angles)
    final_branches = np.asarray(final_branches)
    for branch in (1, -1):
        sel = final_angles[final_branches == branch]
        for mean, count, spread in _circular_clusters(sel, linkage):
            clusters.append(GarnerCluster(branch=branch, angle=mean, count=count, spread=spread))
    clusters.sort(key=lambda c: (c.branch, c.angle))
    return GarnerCensus(
        order=spec.symmetry_order,
        rotation=rotation,
        brightness=brightness,
        ensemble=ensemble,
        convergent=int(len(final_angles)),
        clusters=clusters,
        members=members,
    )


@dataclass
class MicroscopeScenario:
    """Synthetic 1-D scanning scenario with bleaching and blur.

    The template is a fixed 176-sample emission profile; the observed
    signal scans it with a Gaussian kernel exp(-theta2 (xi - x(t))^2)
    whose width encodes focal scattering, a per-pass gain models
    photobleaching, and zero-mean noise (averaged over n_avg trials)
    models measurement noise.
    """

    base_profile: ScalarField
    theta1_schedule: tuple = (1.0,)
    theta2: float = 0.04
    noise_sigma: float = 0.0
    n_avg: int = 8
    k_s: float = 1.0
    bias: float = 0.0
    theta1_range: tuple = (0.25, 2.0)
    theta2_range: tuple = (0.005, 0.2)

    def __post_init__(self):
        if self.base_profile.ny != 1 or self.base_profile.nx != 176:
            raise ParameterError("base profile must be a 1-D scan line of 176 samples")
        if self.n_avg < 1:
            raise ParameterError("n_avg must be >= 1")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")
        if not self.theta2 > 0:
            raise ParameterError("theta2 must be positive")
        self.theta1_schedule = tuple(float(v) for v in self.theta1_schedule)

    @property
    def scan_period(self) -> float:
        f = self.base_profile
        return (f.x_max - f.x_min) / self.k_s


def make_spine_profile(seed: int = 0, n: int = 176,
                       x_min: float = 1.0, x_max: float = 176.0) -> ScalarField:
    """Pedestal plus two bright protrusions, the stand-in scan template."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(x_min, x_max, n, endpoint=False) + 0.5 * (x_max - x_min) / n
    vals = np.full(n, 0.12)
    centers = rng.uniform(x_min + 0.2 * (x_max - x_min), x_max - 0.2 * (x_max - x_min), 2)
    widths = rng.uniform(5.0, 9.0, 2)
    amps = rng.uniform(0.6, 1.0, 2)
    for cpos, wdt, amp in zip(centers, widths, amps):
        vals += amp * np.exp(-((xs - cpos) ** 2) / (2 * wdt * wdt))
    return ScalarField(vals[None, :], x_min, x_max, 0.0, 1.0)


class MeasuredScan:
    """Seeded measured-signal generator for a microscope scenario.

    measured(t) = theta1(t) * (bias + integral of the blur kernel
    against the profile at the scan position) + averaged noise held
    constant over each pixel interval.
    """

    def __init__(self, scn: MicroscopeScenario, seed: int, horizon: float):
        self.scn = scn
        f = scn.base_profile
        self.xs = f.x_coords()
        self.profile = f.values[0]
        self.dxi = f.dx
        self.noise_dt = f.dx / scn.k_s
        n_noise = int(math.ceil(horizon / self.noise_dt)) + 2
        rng = np.random.default_rng(seed)
        if scn.noise_sigma > 0:
            draws = rng.normal(0.0, scn.noise_sigma, size=(n_noise, scn.n_avg))
            self.noise = draws.mean(axis=1)
        else:
            self.noise = np.zeros(n_noise)

    def scan_x(self, t: float) -> float:
        f = self.scn.base_profile
        return scan_position(t, f.x_min, f.x_max, self.scn.k_s)

    def exact_fbar(self, t: float, theta2: float | None = None) -> float:
        th2 = self.scn.theta2 if theta2 is None else theta2
        xt = self.scan_x(t)
        kern = np.exp(-th2 * (self.xs - xt) ** 2)
        return self.scn.bias + float(kern @ self.profile) * self.dxi

    def theta1_at(self, t: float) -> float:
        sched = self.scn.theta1_schedule
        idx = min(int(t / self.scn.scan_period), len(sched) - 1)
        return sched[idx]

    def noise_at(self, t: float) -> float:
        idx = min(int(t / self.noise_dt), len(self.noise) - 1)
        return float(self.noise[idx])

    def exact(self, t: float) -> float:
        return self.theta1_at(t) * self.exact_fbar(t)

    def measured(self, t: float) -> float:
        return self.exact(t) + self.noise_at(t)


def synth_microscope(scn: MicroscopeScenario, seed: int, horizon: float | None = None) -> MeasuredScan:
    """Instantiate the measured-signal generator for a scenario."""
    if horizon is None:
        horizon = 4.0 * scn.scan_period
    return MeasuredScan(scn, seed, horizon)


@dataclass
class TrackingReport:
    matched: bool
    theta1_true_final: float
    theta2_true: float
    theta1_hat_final: float
    theta2_hat_final: float
    theta1_rel_error: float
    residual_max_final: float
    residual_zero_final: bool
    sync: dict
    resolved: dict
    trajectory: Trajectory | None = None

    def as_dict(self) -> dict:
        return {
            "matched": bool(self.matched),
            "theta1_true_final": self.theta1_true_final,
            "theta2_true": self.theta2_true,
            "theta1_hat_final": self.theta1_hat_final,
            "theta2_hat_final": self.theta2_hat_final,
            "theta1_rel_error": self.theta1_rel_error,
            "residual_max_final": self.residual_max_final,
            "residual_zero_final": bool(self.residual_zero_final),
            "sync": self.sync,
            "resolved": self.resolved,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, indent=2)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
                f.write("\n")
        return text


def default_microscope_config(seed: int = 0) -> RunConfig:
    cfg = RunConfig()
    cfg.run.seed = seed
    cfg.run.horizon = 6.0 * 175.0
    cfg.run.record_stride = 20
    cfg.adapt.tau = 2.0
    cfg.adapt.epsilon_floor = 0.01
    cfg.adapt.gamma2_safety = 0.9
    return cfg


def _microscope_constants(scn: MicroscopeScenario, gen: MeasuredScan, n_t: int = 129,
                          n_theta: int = 25):
    """Signal bounds and theta2 sensitivity sampled on a (t, theta2) grid."""
    lo, hi = scn.theta2_range
    t_grid = np.linspace(0.0, scn.scan_period, n_t, endpoint=False)
    th_grid = np.linspace(lo, hi, n_theta)
    vals = np.empty((n_theta, n_t))
    for i, th in enumerate(th_grid):
        for j, t in enumerate(t_grid):
            vals[i, j] = gen.exact_fbar(float(t), float(th))
    d3 = float(vals.min())
    d4 = float(vals.max())
    dgrid = np.abs(np.diff(vals, axis=0)) / np.diff(th_grid)[:, None]
    d_eff = float(dgrid.max())
    return d3, d4, d_eff


def run_microscope(
    scn: MicroscopeScenario,
    cfg: RunConfig | None = None,
    pinned_theta2: float | None = None,
) -> TrackingReport:
    """Track bleaching gain and blur width online for a synthetic scan.

    The template channel evaluates the same blur-kernel integral with
    its own estimates; when pinned_theta2 is given the search is frozen
    there (a deliberately wrong width never lets the residual settle,
    the no-false-match control).
    """
    if cfg is None:
        cfg = default_microscope_config()
    gen = synth_microscope(scn, cfg.run.seed, horizon=cfg.run.horizon)

    d3_raw, d4_raw, d_eff = _microscope_constants(scn, gen)
    bias_extra = 0.0
    if cfg.encoder.bias is not None:
        bias_extra = float(cfg.encoder.bias)
    elif d3_raw <= 0:
        bias_extra = cfg.encoder.bias_floor_frac * d4_raw - d3_raw
    total_bias = scn.bias + bias_extra
    if bias_extra > 0:
        scn = MicroscopeScenario(
            base_profile=scn.base_profile,
            theta1_schedule=scn.theta1_schedule,
            theta2=scn.theta2,
            noise_sigma=scn.noise_sigma,
            n_avg=scn.n_avg,
            k_s=scn.k_s,
            bias=total_bias,
            theta1_range=scn.theta1_range,
            theta2_range=scn.theta2_range,
        )
        gen = synth_microscope(scn, cfg.run.seed, horizon=cfg.run.horizon)
        d3_raw += bias_extra
        d4_raw += bias_extra

    from .adapt import AdaptParams, MatchConstants, design_params as _design
    noise_eff = 4.0 * scn.noise_sigma / math.sqrt(scn.n_avg)
    delta = cfg.constants.delta if cfg.constants.delta is not None else max(noise_eff, 1e-9)
    constants = MatchConstants(
        d=(cfg.constants.d if cfg.constants.d is not None
           else d_eff * cfg.constants.lipschitz_safety),
        d2=(cfg.constants.d2 if cfg.constants.d2 is not None else 1.0),
        d3=(cfg.constants.d3 if cfg.constants.d3 is not None else d3_raw),
        d4=(cfg.constants.d4 if cfg.constants.d4 is not None else d4_raw),
        delta=delta,
    )
    ac = cfg.adapt
    if ac.gamma1 is not None and ac.gamma2 is not None and ac.epsilon is not None:
        params = AdaptParams(
            tau=ac.tau, k=ac.k, gamma1=ac.gamma1, gamma2=ac.gamma2, epsilon=ac.epsilon,
            theta1_range=scn.theta1_range, theta2_range=scn.theta2_range,
        )
    else:
        params = _design(
            constants, tau=ac.tau, k=ac.k,
            theta1_range=scn.theta1_range, theta2_range=scn.theta2_range,
            timescale_ratio=ac.timescale_ratio, gamma2_safety=ac.gamma2_safety,
            epsilon_margin=ac.epsilon_margin, epsilon_floor=ac.epsilon_floor,
        )
    from .adapt import check_params as _check
    validity = _check(params, constants)
    if not validity.ok:
        names = ", ".join(r.name for r in validity.failures())
        raise ConfigError(f"parameter validity check failed: {names}")

    hr = HRParams(a=cfg.hr.a, b=cfg.hr.b, c=cfg.hr.c, d=cfg.hr.d, s=cfg.hr.s,
                  x0=cfg.hr.x0, eps=cfg.hr.eps, current=cfg.hr.current)
    gamma = cfg.hr.gamma if cfg.hr.gamma is not None else cfg.hr.gamma_margin * sync_upper_bound(1, hr)

    guard = 0.1 * min(params.tau, 1.0 / (params.gamma1 * params.k * constants.d4), 1.0)
    dt = cfg.run.dt if cfg.run.dt is not None else min(guard, 2.2 / (2 * gamma + 30.0))
    if dt > guard * (1 + 1e-9):
        raise ConfigError(f"dt={dt} exceeds the stability guard {guard:.6g}")

    stride = cfg.run.record_stride
    n_steps = int(math.ceil(cfg.run.horizon / dt))
    n_steps = int(math.ceil(n_steps / stride) * stride)
    n_rec = n_steps // stride + 1

    rng = np.random.default_rng(cfg.run.seed)
    y = np.zeros((1, 11))
    y[0, 4] = 1.0
    y[0, 5:7] = rng.uniform(-2.0, 2.0, 2)
    y[0, 7:9] = rng.uniform(-10.0, 2.0, 2)
    y[0, 9:11] = rng.uniform(0.0, 6.0, 2)

    rec_states = np.empty((n_rec, 1, 11))
    rec_times = np.empty(n_rec)
    f = scn.base_profile
    status, bad_step = _kernels.microscope_kernel(
        y, gen.xs, gen.profile, gen.dxi, f.x_min, f.x_max, scn.k_s,
        scn.bias, scn.theta2, np.asarray(scn.theta1_schedule), scn.scan_period,
        gen.noise, gen.noise_dt,
        params.tau, params.k, params.gamma1, params.gamma2, params.epsilon,
        scn.theta2_range[0], scn.theta2_range[1],
        1 if pinned_theta2 is not None else 0,
        float(pinned_theta2 if pinned_theta2 is not None else 0.0),
        hr.a, hr.b, hr.c, hr.d, hr.s, hr.x0, hr.eps, hr.current, gamma,
        0.0, dt, n_steps, stride, rec_states, rec_times,
    )
    if status != _kernels.STATUS_OK:
        from .errors import StepError
        raise StepError(f"integration failed near t={bad_step * dt:.6g}", t=bad_step * dt)

    times = rec_times
    s = rec_states[:, 0, :]
    e = s[:, 0] - s[:, 1]
    th1 = e * params.gamma1 + s[:, 2]
    if pinned_theta2 is not None:
        th2 = np.full_like(th1, float(pinned_theta2))
    else:
        lo, hi = scn.theta2_range
        th2 = lo + (np.clip(s[:, 3], -1, 1) + 1.0) * (hi - lo) / 2.0
    resid = np.maximum(np.abs(e) - params.epsilon, 0.0)

    span = times[-1] - times[0]
    win = cfg.run.final_window_frac * span
    in_win = times >= times[-1] - win
    residual_max_final = float(resid[in_win].max())
    residual_zero = residual_max_final == 0.0

    x = s[:, 5:7]
    yv = s[:, 7:9]
    z = s[:, 9:11]
    (pair,) = sync_metrics(times, x, yv, z, window=win, delta_thresh=cfg.hr.delta_thresh)

    th1_true = gen.theta1_at(float(times[-1]))
    channels = {
        "phi0": s[:, 0], "phi_1": s[:, 1], "lam1_1": s[:, 2],
        "lam2_1": s[:, 3], "lam3_1": s[:, 4],
        "th1_1": th1, "th2_1": th2, "e_1": e, "r_1": resid,
        "x0": s[:, 5], "x1": s[:, 6], "y0": s[:, 7], "y1": s[:, 8],
        "z0": s[:, 9], "z1": s[:, 10],
    }
    return TrackingReport(
        matched=residual_zero and pair.synchronized,
        theta1_true_final=th1_true,
        theta2_true=scn.theta2,
        theta1_hat_final=float(th1[-1]),
        theta2_hat_final=float(th2[-1]),
        theta1_rel_error=float(abs(th1[-1] - th1_true) / max(abs(th1_true), 1e-12)),
        residual_max_final=residual_max_final,
        residual_zero_final=residual_zero,
        sync=pair.as_dict(),
        resolved={
            "tau": params.tau, "k": params.k, "gamma1": params.gamma1,
            "gamma2": params.gamma2, "epsilon": params.epsilon,
            "hr_gamma": gamma, "dt": dt, "bias": scn.bias,
            "d3": constants.d3, "d4": constants.d4, "d": constants.d,
            "delta": constants.delta, "seed": cfg.run.seed,
        },
        trajectory=Trajectory(times=times, channels=channels),
    )


def sampling_tradeoff(nx: int, ny: int, n_levels: int, probs, lam1: float, lam2: float, ks):
    """Cost/ambiguity table over sensor granularities.

    For k cells aggregated per sensor: cost C(k) = nx*ny/k sensors,
    representation entropy H(k) = log2(nx*ny/k) + level entropy, and
    combined loss Q(k) = lam1*C(k) + lam2/H(k). Returns the table rows
    and the argmin granularity.
    """
    if lam1 <= 0 or lam2 <= 0:
        raise ParameterError("weights must be positive")
    total = nx * ny
    if isinstance(probs, str):
        if probs != "uniform":
            raise ParameterError(f"unknown distribution {probs!r}")
        p = np.full(n_levels, 1.0 / n_levels)
    else:
        p = np.asarray(probs, dtype=np.float64)
        if p.size != n_levels:
            raise ParameterError("probability vector length must equal n_levels")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError("probabilities must be nonnegative and sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    h_levels = -float(terms.sum())

    rows = []
    for k in ks:
        k = int(k)
        if k < 1 or total % k != 0:
            raise ParameterError(f"k={k} must be a positive divisor of nx*ny={total}")
        c = total / k
        h = math.log2(total / k) + h_levels
        if h <= 0:
            raise ParameterError(
                f"degenerate representation at k={k}: entropy {h} is not positive"
            )
        q = lam1 * c + lam2 / h
        rows.append({"k": k, "C": c, "H": h, "Q": q})
    best = min(rows, key=lambda r: r["Q"])
    return rows, best["k"]


def build_field(spec: FieldSpec) -> ScalarField:
    """Materialize an image/template from its config description."""
    if spec.source == "garner":
        return garner_pattern(
            GarnerSpec(
                symmetry_order=spec.order, n=spec.n, seed=spec.pattern_seed,
                dots=spec.dots, dot_sigma=spec.dot_sigma,
                x_min=spec.x_min, x_max=spec.x_max, y_min=spec.y_min, y_max=spec.y_max,
            )
        )
    if spec.source == "pgm":
        f = load_pgm(spec.path)
        return ScalarField(f.values, spec.x_min, spec.x_max, spec.y_min, spec.y_max)
    if spec.source == "constant":
        return ScalarField(
            np.full((spec.n, spec.n), spec.value),
            spec.x_min, spec.x_max, spec.y_min, spec.y_max,
        )
    raise ConfigError(f"unknown field source {spec.source!r}")
