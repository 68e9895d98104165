"""Deterministic fixed-step simulation of the full matching pipeline.

A prepared run tabulates the template encoders, estimates (or accepts)
the design constants, validates the gains against their bounds, and
integrates the coupled system with classical RK4 on a single global
clock: the adaptive level (integrators + fast/slow adaptation per
template channel) feeding the detector level (one bursting oscillator
per channel plus one for the image, diffusively coupled). Identical
configurations produce bit-identical trajectories and reports.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .adapt import (
    AdaptParams,
    MatchConstants,
    ValidityReport,
    branch_lambda3,
    check_params,
    deadzone,
    design_params,
    epsilon_lower_bound,
    gamma2_upper_bound,
    theta_hats,
)
from .config import RunConfig
from .detect import HRParams, PairSync, sync_metrics, sync_upper_bound
from .encode import (
    FrequencyAssignment,
    Rect,
    SamplingSchedule,
    TabulatedEncoder,
    horizontal_strips,
    strip_integrals,
    validate_schedule,
)
from .errors import ConfigError, StepError
from .field import ScalarField, estimate_lipschitz_D

__all__ = [
    "rk4_step",
    "integrate",
    "Trajectory",
    "TemplateVerdict",
    "MatchReport",
    "PreparedMatch",
    "prepare_match",
    "initial_state",
    "run_prepared",
    "run_match",
    "run_hr_network",
    "sweep",
]


def rk4_step(rhs, state, t: float, dt: float):
    """One classical 4th-order Runge-Kutta update.

    rhs(t, state) must return the derivative with the same shape as
    state; the updated state is checked for finiteness.
    """
    state = np.asarray(state, dtype=np.float64)
    k1 = rhs(t, state)
    k2 = rhs(t + dt / 2.0, state + (dt / 2.0) * k1)
    k3 = rhs(t + dt / 2.0, state + (dt / 2.0) * k2)
    k4 = rhs(t + dt, state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise StepError(f"non-finite state after step at t={t!r}", t=t)
    return out


def integrate(rhs, y0, t0: float, dt: float, n_steps: int, record_stride: int = 1):
    """Reference fixed-step driver (python loop, any rhs callable).

    Records the state every record_stride steps plus the final state.
    Returns (times, states) with states[k] the state at times[k].
    """
    y = np.asarray(y0, dtype=np.float64).copy()
    times = [t0]
    states = [y.copy()]
    t = t0
    for step in range(n_steps):
        y = rk4_step(rhs, y, t, dt)
        t = t0 + (step + 1) * dt
        if (step + 1) % record_stride == 0 or step + 1 == n_steps:
            times.append(t)
            states.append(y.copy())
    return np.array(times), np.array(states)


@dataclass
class Trajectory:
    """Recorded run: strictly increasing times plus named channels."""

    times: np.ndarray
    channels: dict

    def __post_init__(self):
        n = len(self.times)
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        for name, arr in self.channels.items():
            if len(arr) != n:
                raise ConfigError(f"channel {name} length differs from times")

    def to_csv(self, path):
        names = list(self.channels)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t"] + names)
            for idx in range(len(self.times)):
                row = [repr(float(self.times[idx]))]
                row += [repr(float(self.channels[name][idx])) for name in names]
                w.writerow(row)


@dataclass
class TemplateVerdict:
    index: int
    matched: bool
    theta1_hat: float
    theta2_hat: float
    residual_max_final: float
    residual_zero_final: bool
    theta2_tv_final: float
    converged: bool
    delta_estimated: float
    sync: PairSync

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "matched": bool(self.matched),
            "theta1_hat": self.theta1_hat,
            "theta2_hat": self.theta2_hat,
            "residual_max_final": self.residual_max_final,
            "residual_zero_final": bool(self.residual_zero_final),
            "theta2_tv_final": self.theta2_tv_final,
            "converged": bool(self.converged),
            "delta_estimated": self.delta_estimated,
            "sync": self.sync.as_dict(),
        }


@dataclass
class MatchReport:
    matched: bool
    templates: list
    validity: ValidityReport
    bounds: dict
    constants: dict
    resolved: dict
    trajectory: Trajectory | None = None

    def as_dict(self) -> dict:
        return {
            "matched": bool(self.matched),
            "templates": [t.as_dict() for t in self.templates],
            "validity": self.validity.as_dict(),
            "bounds": self.bounds,
            "constants": self.constants,
            "resolved": self.resolved,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True, indent=2)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
                f.write("\n")
        return text


@dataclass
class PreparedMatch:
    """Everything a match run needs, resolved to numbers."""

    cfg: RunConfig
    m: int
    n_nodes: int
    dim: int
    schedule: SamplingSchedule
    omegas: FrequencyAssignment | None
    mode: int
    period: float
    img_ints: np.ndarray
    tables: np.ndarray
    theta_lo: float
    theta_hi: float
    bias: float
    params: AdaptParams
    constants: MatchConstants
    d_pixel: float
    validity: ValidityReport
    delta_per_template: list
    hr: HRParams
    gamma: float
    dt: float
    n_steps: int
    stride: int
    n_rec: int
    horizon_actual: float
    bounds: dict = dc_field(default_factory=dict)

    def f0_drive(self, t):
        """Observed-channel signal theta1* x (bias + weighted strips)."""
        w = self._weights(t)
        return self.cfg.perturb.theta1 * (self.bias + w @ self.img_ints)

    def _weights(self, t):
        if self.mode == _kernels.MODE_FREQ:
            s = np.sin(np.asarray(self.omegas.omegas) * t)
            return s * s
        mslots = self.img_ints.shape[0]
        slot = self.period / mslots
        idx = min(int(math.fmod(t, self.period) / slot), mslots - 1)
        w = np.zeros(mslots)
        w[idx] = 1.0
        return w


# validity rows that abort a run when they fail; the dead-zone floor row
# is reported but advisory
HARD_CONDITIONS = ("search-gain-bound", "timescale-separation", "signal-floor")


def _bounds_time_grid(period: float, n: int = 257) -> np.ndarray:
    return np.linspace(0.0, period, n, endpoint=False)


def _auto_dt(params: AdaptParams, d4: float, gamma: float, n_nodes: int, omega_max: float) -> float:
    guard = 0.1 * min(params.tau, 1.0 / (params.gamma1 * params.k * d4), 1.0)
    hr_stab = 2.2 / (gamma * n_nodes + 30.0)
    carrier = 0.35 / max(omega_max, 1e-9)
    return min(guard, hr_stab, carrier)


def dt_guard_limit(params: AdaptParams, d4: float) -> float:
    """Stability guard tied to the stiffest loop of the adaptive level."""
    return 0.1 * min(params.tau, 1.0 / (params.gamma1 * params.k * d4), 1.0)


def prepare_match(image: ScalarField, templates, cfg: RunConfig) -> PreparedMatch:
    """Tabulate encoders, estimate constants, resolve and gate parameters."""
    if not templates:
        raise ConfigError("at least one template is required")
    for tmpl in templates:
        if (tmpl.x_min, tmpl.x_max, tmpl.y_min, tmpl.y_max) != (
            image.x_min,
            image.x_max,
            image.y_min,
            image.y_max,
        ):
            raise ConfigError("image and template domains must agree")
    m = len(templates)
    enc_cfg = cfg.encoder
    kind = cfg.perturb.kind
    th_lo, th_hi = cfg.perturb.theta2_range
    if not th_hi > th_lo:
        raise ConfigError("theta2 search range must have positive width")

    if enc_cfg.mode == "frequency-strips":
        schedule = horizontal_strips(image.x_min, image.x_max, image.y_min, image.y_max,
                                     enc_cfg.strips)
        omegas = FrequencyAssignment.harmonic(enc_cfg.strips, enc_cfg.omega_base)
        mode = _kernels.MODE_FREQ
        period = math.pi / enc_cfg.omega_base  # common carrier period
    else:
        base = horizontal_strips(image.x_min, image.x_max, image.y_min, image.y_max,
                                 enc_cfg.strips)
        schedule = SamplingSchedule(mode="sweep", subdomains=base.subdomains,
                                    period=enc_cfg.period)
        omegas = None
        mode = _kernels.MODE_SWEEP
        period = enc_cfg.period
    validate_schedule(schedule, image)

    encoders = [
        TabulatedEncoder(tmpl, kind, schedule, (th_lo, th_hi), omegas,
                         bias=0.0, n_table=enc_cfg.n_table)
        for tmpl in templates
    ]

    t_grid = _bounds_time_grid(period)
    theta_grid = np.linspace(th_lo, th_hi, cfg.constants.theta2_grid_points)
    d3_raw = math.inf
    d4_raw = -math.inf
    for enc in encoders:
        for th in theta_grid:
            vals = enc.fbar(t_grid, float(th))
            d3_raw = min(d3_raw, float(np.min(vals)))
            d4_raw = max(d4_raw, float(np.max(vals)))

    if enc_cfg.bias is not None:
        bias = float(enc_cfg.bias)
    else:
        bias = max(0.0, enc_cfg.bias_floor_frac * d4_raw - d3_raw)
    for enc in encoders:
        enc.bias = bias
    d3 = (cfg.constants.d3 if cfg.constants.d3 is not None else d3_raw + bias)
    d4 = (cfg.constants.d4 if cfg.constants.d4 is not None else d4_raw + bias)

    if cfg.constants.d2 is not None:
        d2 = cfg.constants.d2
    else:
        areas = [r.area for r in schedule.subdomains]
        d2 = float(sum(areas)) if mode == _kernels.MODE_FREQ else float(max(areas))
    d_pixel = max(
        estimate_lipschitz_D(tmpl, kind, theta_grid) for tmpl in templates
    ) * cfg.constants.lipschitz_safety
    if cfg.constants.d is not None:
        d_lip = cfg.constants.d
    elif cfg.constants.method == "pixel":
        d_lip = d_pixel
    else:
        # The design bounds involve d and d2 only through their product,
        # which bounds the encoded signal's theta2 sensitivity. Measure
        # that sensitivity directly on the tabulated evaluator (max slope
        # of carrier-weighted strip integrals) instead of propagating the
        # far looser worst-case-pixel constant.
        sens = 0.0
        if mode == _kernels.MODE_FREQ:
            om_arr = np.asarray(omegas.omegas)
            sgrid = np.sin(om_arr[None, :] * t_grid[:, None])
            weights_t = sgrid * sgrid  # (T, S)
        for enc in encoders:
            dtheta = enc.theta_grid[1] - enc.theta_grid[0]
            slopes = (enc.tables[1:] - enc.tables[:-1]) / dtheta  # (G-1, S)
            if mode == _kernels.MODE_FREQ:
                sens = max(sens, float(np.abs(weights_t @ slopes.T).max()))
            else:
                sens = max(sens, float(np.abs(slopes).max()))
        d_lip = sens * cfg.constants.lipschitz_safety / d2

    # image/template mismatch at equal parameters, evaluated against the
    # implemented template evaluator (table interpolation included)
    theta_delta = np.linspace(th_lo, th_hi, cfg.constants.delta_grid_points)
    theta_delta = np.append(theta_delta, cfg.perturb.theta2)
    delta_per_template = []
    for enc in encoders:
        worst = 0.0
        for th in theta_delta:
            img_i = strip_integrals(image, kind, float(th), schedule)
            if mode == _kernels.MODE_FREQ:
                s = np.sin(np.asarray(omegas.omegas)[None, :] * t_grid[:, None])
                img_vals = (s * s) @ img_i + bias
            else:
                img_vals = np.array(
                    [float(enc.weights(float(t)) @ img_i) + bias for t in t_grid]
                )
            tmpl_vals = enc.fbar(t_grid, float(th))
            worst = max(worst, float(np.max(np.abs(img_vals - tmpl_vals))))
        delta_per_template.append(worst)
    delta_used = (
        cfg.constants.delta if cfg.constants.delta is not None else min(delta_per_template)
    )

    constants = MatchConstants(d=d_lip, d2=d2, d3=d3, d4=d4, delta=delta_used)

    ac = cfg.adapt
    if ac.gamma1 is not None and ac.gamma2 is not None and ac.epsilon is not None:
        params = AdaptParams(
            tau=ac.tau, k=ac.k, gamma1=ac.gamma1, gamma2=ac.gamma2, epsilon=ac.epsilon,
            theta1_range=cfg.perturb.theta1_range, theta2_range=cfg.perturb.theta2_range,
        )
    else:
        params = design_params(
            constants,
            tau=ac.tau,
            k=ac.k,
            theta1_range=cfg.perturb.theta1_range,
            theta2_range=cfg.perturb.theta2_range,
            timescale_ratio=ac.timescale_ratio,
            gamma2_safety=ac.gamma2_safety,
            epsilon_margin=ac.epsilon_margin,
            epsilon_floor=ac.epsilon_floor,
        )
        if ac.gamma2 is not None:
            params.gamma2 = ac.gamma2
            params.gamma1 = ac.timescale_ratio * ac.gamma2
        if ac.gamma1 is not None:
            params.gamma1 = ac.gamma1
        if ac.epsilon is not None:
            params.epsilon = ac.epsilon

    # All conditions are evaluated and reported; the dead-zone floor is
    # advisory (its printed sufficient bound is orders of magnitude above
    # workable dead zones), the rest reject the run.
    validity = check_params(params, constants)
    hard = [r for r in validity.failures() if r.name in HARD_CONDITIONS]
    if hard:
        names = ", ".join(r.name for r in hard)
        raise ConfigError(f"parameter validity check failed: {names}")

    hr = HRParams(a=cfg.hr.a, b=cfg.hr.b, c=cfg.hr.c, d=cfg.hr.d, s=cfg.hr.s,
                  x0=cfg.hr.x0, eps=cfg.hr.eps, current=cfg.hr.current)
    gamma = (
        cfg.hr.gamma if cfg.hr.gamma is not None
        else cfg.hr.gamma_margin * sync_upper_bound(m, hr)
    )

    omega_max = max(omegas.omegas) if omegas is not None else 1.0
    dt = cfg.run.dt if cfg.run.dt is not None else _auto_dt(params, d4, gamma, m + 1, omega_max)
    guard = dt_guard_limit(params, d4)
    if dt > guard * (1 + 1e-9):
        raise ConfigError(
            f"dt={dt} exceeds the stability guard {guard:.6g} "
            "(0.1 x min(tau, 1/(gamma1 k d4), 1))"
        )

    stride = cfg.run.record_stride
    n_steps = int(math.ceil(cfg.run.horizon / dt))
    n_steps = int(math.ceil(n_steps / stride) * stride)
    n_rec = n_steps // stride + 1

    img_ints = strip_integrals(image, kind, cfg.perturb.theta2, schedule)
    tables = np.stack([enc.tables for enc in encoders])

    bounds = {
        "dead_zone_floor": epsilon_lower_bound(constants, params),
        "search_gain_upper": gamma2_upper_bound(constants, params),
        "hr_sync_threshold": sync_upper_bound(m, hr),
    }

    return PreparedMatch(
        cfg=cfg, m=m, n_nodes=m + 1, dim=1 + 4 * m + 3 * (m + 1),
        schedule=schedule, omegas=omegas, mode=mode, period=period,
        img_ints=img_ints, tables=tables, theta_lo=th_lo, theta_hi=th_hi,
        bias=bias, params=params, constants=constants, d_pixel=d_pixel,
        validity=validity,
        delta_per_template=delta_per_template, hr=hr, gamma=gamma,
        dt=dt, n_steps=n_steps, stride=stride, n_rec=n_rec,
        horizon_actual=n_steps * dt, bounds=bounds,
    )


def initial_state(prep: PreparedMatch, rng: np.random.Generator, batch: int = 1) -> np.ndarray:
    """Seeded initial conditions for a batch of runs.

    Default mode starts the search at (lambda2, lambda3) = (0, 1);
    circle-random spreads lambda2 over (-0.95, 0.95) and draws the
    lambda3 branch sign so ensembles populate both resting families.
    Oscillator states are uniform in the standard seeding box.
    """
    y = np.zeros((batch, prep.dim))
    for i in range(prep.m):
        y[:, 4 + 4 * i] = 1.0
    if prep.cfg.run.init == "circle-random":
        for bdx in range(batch):
            for i in range(prep.m):
                l2 = rng.uniform(-0.95, 0.95)
                up, down = branch_lambda3(l2)
                l3 = up if rng.integers(0, 2) == 0 else down
                y[bdx, 3 + 4 * i] = l2
                y[bdx, 4 + 4 * i] = l3
    hr_off = 1 + 4 * prep.m
    n = prep.n_nodes
    for bdx in range(batch):
        y[bdx, hr_off : hr_off + n] = rng.uniform(-2.0, 2.0, n)
        y[bdx, hr_off + n : hr_off + 2 * n] = rng.uniform(-10.0, 2.0, n)
        y[bdx, hr_off + 2 * n : hr_off + 3 * n] = rng.uniform(0.0, 6.0, n)
    return y


def run_prepared(prep: PreparedMatch, y0: np.ndarray):
    """Integrate a prepared run (batched); returns (times, states)."""
    y = np.array(y0, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    rec_states = np.empty((prep.n_rec, y.shape[0], prep.dim))
    rec_times = np.empty(prep.n_rec)
    om = np.asarray(prep.omegas.omegas) if prep.omegas is not None else np.zeros(
        prep.img_ints.shape[0]
    )
    p = prep.params
    hr = prep.hr
    status, bad_step = _kernels.match_kernel(
        y, prep.m, prep.img_ints, prep.tables, prep.theta_lo, prep.theta_hi,
        om, prep.mode, prep.period, prep.bias, prep.cfg.perturb.theta1,
        p.tau, p.k, p.gamma1, p.gamma2, p.epsilon,
        p.theta2_range[0], p.theta2_range[1],
        hr.a, hr.b, hr.c, hr.d, hr.s, hr.x0, hr.eps, hr.current, prep.gamma,
        0.0, prep.dt, prep.n_steps, prep.stride, rec_states, rec_times,
    )
    if status == _kernels.STATUS_NONFINITE:
        raise StepError(
            f"non-finite state near t={bad_step * prep.dt:.6g}", t=bad_step * prep.dt
        )
    if status == _kernels.STATUS_CIRCLE_DRIFT:
        raise StepError(
            f"search-circle drift beyond tolerance near t={bad_step * prep.dt:.6g}; "
            "reduce dt", t=bad_step * prep.dt,
        )
    return rec_times, rec_states


def _channels_from_states(prep: PreparedMatch, states: np.ndarray) -> dict:
    """Named channel arrays for one batch member's recorded states."""
    p = prep.params
    ch: dict = {"phi0": states[:, 0]}
    hr_off = 1 + 4 * prep.m
    n = prep.n_nodes
    lo, hi = p.theta2_range
    for i in range(prep.m):
        base = 1 + 4 * i
        tag = i + 1
        phii = states[:, base]
        l1 = states[:, base + 1]
        l2 = states[:, base + 2]
        l3 = states[:, base + 3]
        e = states[:, 0] - phii
        ch[f"phi_{tag}"] = phii
        ch[f"lam1_{tag}"] = l1
        ch[f"lam2_{tag}"] = l2
        ch[f"lam3_{tag}"] = l3
        ch[f"th1_{tag}"] = e * p.gamma1 + l1
        ch[f"th2_{tag}"] = lo + (np.clip(l2, -1.0, 1.0) + 1.0) * (hi - lo) / 2.0
        ch[f"e_{tag}"] = e
        ch[f"r_{tag}"] = deadzone(e, p.epsilon)
    for j in range(n):
        ch[f"x{j}"] = states[:, hr_off + j]
        ch[f"y{j}"] = states[:, hr_off + n + j]
        ch[f"z{j}"] = states[:, hr_off + 2 * n + j]
    return ch


def summarize_member(prep: PreparedMatch, times: np.ndarray, states: np.ndarray):
    """Per-template verdicts for one batch member's trajectory."""
    cfg = prep.cfg
    ch = _channels_from_states(prep, states)
    span = times[-1] - times[0]
    win = cfg.run.final_window_frac * span
    in_win = times >= times[-1] - win
    conv_win = cfg.run.convergence_window_frac * span
    in_conv = times >= times[-1] - conv_win
    width = prep.theta_hi - prep.theta_lo

    n = prep.n_nodes
    x = np.stack([ch[f"x{j}"] for j in range(n)], axis=1)
    yv = np.stack([ch[f"y{j}"] for j in range(n)], axis=1)
    z = np.stack([ch[f"z{j}"] for j in range(n)], axis=1)
    pairs = sync_metrics(times, x, yv, z, window=win, delta_thresh=cfg.hr.delta_thresh)
    pair_of = {(s.i, s.j): s for s in pairs}

    verdicts = []
    for i in range(prep.m):
        tag = i + 1
        resid = ch[f"r_{tag}"]
        th2 = ch[f"th2_{tag}"]
        residual_max_final = float(resid[in_win].max())
        residual_zero = residual_max_final == 0.0
        tv = float(np.abs(np.diff(th2[in_conv])).sum())
        converged = tv <= cfg.run.theta2_tv_tol * width
        sync = pair_of[(0, tag)]
        verdicts.append(
            TemplateVerdict(
                index=i,
                matched=residual_zero and sync.synchronized,
                theta1_hat=float(ch[f"th1_{tag}"][-1]),
                theta2_hat=float(th2[-1]),
                residual_max_final=residual_max_final,
                residual_zero_final=residual_zero,
                theta2_tv_final=tv,
                converged=converged,
                delta_estimated=prep.delta_per_template[i],
                sync=sync,
            )
        )
    return verdicts, ch


def run_match(image: ScalarField, templates, cfg: RunConfig) -> MatchReport:
    """Full pipeline for one image against one or more templates."""
    prep = prepare_match(image, templates, cfg)
    rng = np.random.default_rng(cfg.run.seed)
    y0 = initial_state(prep, rng, batch=1)
    times, states = run_prepared(prep, y0)
    verdicts, ch = summarize_member(prep, times, states[:, 0, :])
    trajectory = Trajectory(times=times, channels=ch)
    p = prep.params
    report = MatchReport(
        matched=any(v.matched for v in verdicts),
        templates=verdicts,
        validity=prep.validity,
        bounds=prep.bounds,
        constants={
            "d": prep.constants.d,
            "d_pixel": prep.d_pixel,
            "d2": prep.constants.d2,
            "d3": prep.constants.d3,
            "d4": prep.constants.d4,
            "delta": prep.constants.delta,
            "bias": prep.bias,
        },
        resolved={
            "tau": p.tau,
            "k": p.k,
            "gamma1": p.gamma1,
            "gamma2": p.gamma2,
            "epsilon": p.epsilon,
            "hr_gamma": prep.gamma,
            "dt": prep.dt,
            "n_steps": prep.n_steps,
            "record_stride": prep.stride,
            "horizon": prep.horizon_actual,
            "seed": cfg.run.seed,
        },
        trajectory=trajectory,
    )
    return report


def run_hr_network(
    hr: HRParams,
    gammas,
    n_nodes: int,
    y0: np.ndarray,
    dt: float,
    horizon: float,
    record_stride: int = 1,
    drive_offsets=None,
    drive_amps=None,
    drive_freqs=None,
    drive_phases=None,
):
    """Integrate a detector-only network with sinusoidal per-node drives.

    gammas is one coupling value per batch row; each drive parameter is
    one value per node (defaults: zero drive). Returns (times, states)
    with states shaped (n_rec, batch, 3*n_nodes).
    """
    y = np.array(y0, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    gammas = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if gammas.shape[0] != y.shape[0]:
        raise ConfigError("one gamma per batch row is required")

    def as_nodes(v):
        if v is None:
            return np.zeros(n_nodes)
        return np.asarray(v, dtype=np.float64)

    off = as_nodes(drive_offsets)
    amp = as_nodes(drive_amps)
    freq = as_nodes(drive_freqs)
    phase = as_nodes(drive_phases)
    n_steps = int(math.ceil(horizon / dt))
    n_steps = int(math.ceil(n_steps / record_stride) * record_stride)
    n_rec = n_steps // record_stride + 1
    rec_states = np.empty((n_rec, y.shape[0], y.shape[1]))
    rec_times = np.empty(n_rec)
    status, bad_step = _kernels.hr_kernel(
        y, gammas, off, amp, freq, phase,
        hr.a, hr.b, hr.c, hr.d, hr.s, hr.x0, hr.eps, hr.current,
        0.0, dt, n_steps, record_stride, rec_states, rec_times,
    )
    if status != _kernels.STATUS_OK:
        raise StepError(f"non-finite state near t={bad_step * dt:.6g}", t=bad_step * dt)
    return rec_times, rec_states


def sweep(image: ScalarField, templates, cfg_template: RunConfig, axis: str, values):
    """Independent runs along one numeric config axis, seeds fixed."""
    reports = []
    for v in values:
        cfg = cfg_template.copy()
        cfg.set_path(axis, v)
        reports.append(run_match(image, templates, cfg))
    return reports
