"""Adaptive invariance engine: fast gain tracking and slow parameter search.

Per template channel the state is (phi0, phi_i, lambda1, lambda2, lambda3):
two leaky temporal integrators plus a three-variable adaptation system.
lambda1 integrates the channel error and, combined with a proportional
feed-through, tracks the unknown linear gain exponentially fast. The pair
(lambda2, lambda3) rotates on the unit circle at a rate proportional to
the dead-zone error, sweeping the nonlinear-parameter interval until the
template signal reproduces the observed one; the rotation stalls exactly
when the error stays inside the dead zone, leaving behind a weakly
attracting resting set rather than an asymptotically stable point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import EvaluationError, ParameterError

__all__ = [
    "AdaptState",
    "AdaptParams",
    "MatchConstants",
    "ValidityReport",
    "deadzone",
    "theta_hats",
    "adapt_rhs",
    "epsilon_lower_bound",
    "gamma2_upper_bound",
    "check_params",
    "branch_lambda3",
    "design_params",
]


def deadzone(x, delta):
    """|x| - delta where |x| exceeds delta, else 0."""
    if np.any(np.asarray(delta) < 0):
        raise ParameterError("dead zone width must be nonnegative")
    return np.maximum(np.abs(x) - delta, 0.0)


@dataclass
class AdaptState:
    """One template channel's integrators and adaptation variables."""

    phi0: float = 0.0
    phi_i: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi0, self.phi_i, self.lambda1, self.lambda2, self.lambda3])

    @staticmethod
    def from_array(a) -> "AdaptState":
        return AdaptState(*(float(v) for v in a))

    def circle_residual(self) -> float:
        """|lambda2^2 + lambda3^2 - 1|, conserved by the exact flow."""
        return abs(self.lambda2**2 + self.lambda3**2 - 1.0)


@dataclass
class AdaptParams:
    """Gains and ranges of the adaptation laws.

    gamma1 (fast) must dominate gamma2 (slow); the ratio floor is
    enforced at construction. epsilon is the dead-zone width that sets
    the acceptable image/template mismatch.
    """

    tau: float = 1.0
    k: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 0.01
    epsilon: float = 0.1
    theta1_range: tuple[float, float] = (0.0, 2.0)
    theta2_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    min_timescale_ratio: float = 10.0

    def __post_init__(self):
        for name in ("tau", "k", "gamma1", "gamma2", "epsilon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v}")
        if self.theta1_range[1] < self.theta1_range[0]:
            raise ParameterError("theta1_range must be ordered")
        if self.theta2_range[1] < self.theta2_range[0]:
            raise ParameterError("theta2_range must be ordered")
        if self.gamma1 / self.gamma2 < self.min_timescale_ratio:
            raise ParameterError(
                f"gamma1/gamma2 = {self.gamma1 / self.gamma2:.3g} below the "
                f"required timescale separation {self.min_timescale_ratio}"
            )

    @property
    def theta1_max(self) -> float:
        return self.theta1_range[1]

    @property
    def theta2_width(self) -> float:
        return self.theta2_range[1] - self.theta2_range[0]


@dataclass
class MatchConstants:
    """Empirical constants of one image/template/encoder combination.

    d: Lipschitz constant of the transform in theta2 (pixelwise).
    d2: Lipschitz constant of the sampling functional.
    d3, d4: lower/upper bounds of the template signal (bias included).
    delta: worst-case image/template signal mismatch at equal parameters.
    recommended_bias: carried over from signal-bound estimation when the
    raw signal was not separated from zero.
    """

    d: float = 0.0
    d2: float = 0.0
    d3: float = 1.0
    d4: float = 1.0
    delta: float = 0.0
    recommended_bias: float | None = None

    def __post_init__(self):
        if self.d < 0 or self.d2 < 0 or self.delta < 0:
            raise ParameterError("d, d2 and delta must be nonnegative")
        if self.d4 < self.d3:
            raise ParameterError("d4 must be >= d3")

    def m1(self, params: AdaptParams) -> float:
        """Disturbance bound on the fast loop: mismatch plus the worst
        signal change the nonlinear parameter can cause."""
        return self.delta + params.k * params.theta1_max * self.d * self.d2 * abs(
            params.theta2_width
        )


def theta_hats(state: AdaptState, params: AdaptParams) -> tuple[float, float]:
    """Parameter estimates reconstructed from the channel state.

    theta1_hat combines the proportional feed-through with the integral
    state; theta2_hat maps lambda2 affinely onto the search interval
    (clipped if numerical drift pushes |lambda2| above 1).
    """
    e = state.phi0 - state.phi_i
    th1 = e * params.gamma1 + state.lambda1
    lo, hi = params.theta2_range
    l2 = min(max(state.lambda2, -1.0), 1.0)
    th2 = lo + (l2 + 1.0) * (hi - lo) / 2.0
    return th1, th2


def adapt_rhs(
    state: AdaptState,
    t: float,
    f0_value: float,
    f_template,
    params: AdaptParams,
) -> AdaptState:
    """Time derivative of one template channel.

    f0_value is the already-formed observed signal theta1*f0(t, theta2);
    f_template(t, theta2_hat) evaluates the template's internal model at
    the current estimate.
    """
    th1, th2 = theta_hats(state, params)
    fi = f_template(t, th2)
    if not np.all(np.isfinite(fi)):
        raise EvaluationError("template evaluator returned a non-finite value", t=t, theta2=th2)
    e = state.phi0 - state.phi_i
    dz = deadzone(e, params.epsilon)
    return AdaptState(
        phi0=-state.phi0 / params.tau + params.k * f0_value,
        phi_i=-state.phi_i / params.tau + params.k * th1 * fi,
        lambda1=(params.gamma1 / params.tau) * e,
        lambda2=params.gamma2 * state.lambda3 * dz,
        lambda3=-params.gamma2 * state.lambda2 * dz,
    )


def epsilon_lower_bound(c: MatchConstants, params: AdaptParams) -> float:
    """Dead-zone width floor for a valid configuration.

    The second term scales with gamma2/gamma1: the stronger the
    timescale separation, the closer the admissible dead zone gets to
    tau * delta * (1 + d4/d3).
    """
    if c.d3 <= 0:
        raise ParameterError("d3 must be positive to evaluate the dead-zone floor")
    r = c.d4 / c.d3
    width = params.theta2_width
    bracket = (
        (params.theta1_max * c.d * c.d2 * c.d4 / (c.d3**2))
        * c.m1(params)
        * params.tau
        * (1.0 + r)
        * (width / 2.0)
    )
    return params.tau * (c.delta * (1.0 + r) + (params.gamma2 / params.gamma1) * bracket)


def gamma2_upper_bound(c: MatchConstants, params: AdaptParams) -> float:
    """Largest admissible search gain for convergence of the slow loop."""
    if c.d3 <= 0:
        raise ParameterError("d3 must be positive to evaluate the search-gain bound")
    bracket = (
        params.k
        * params.theta1_max
        * c.d
        * c.d2
        * (1.0 + c.d4 / c.d3)
        * (params.theta2_width / 2.0)
    )
    if bracket <= 0:
        raise ParameterError(
            "search-gain bound undefined: k, theta1_max, d, d2 and the "
            "theta2 width must all be positive"
        )
    return (1.0 / (4.0 * params.tau)) ** 2 / bracket


@dataclass
class ConditionRow:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "detail": self.detail,
        }


@dataclass
class ValidityReport:
    rows: list = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "conditions": [r.as_dict() for r in self.rows]}


def check_params(params: AdaptParams, c: MatchConstants) -> ValidityReport:
    """Evaluate every convergence condition with its margin.

    Margins are positive when satisfied: bound - gamma2 for the search
    gain, epsilon - bound for the dead zone, ratio surplus for timescale
    separation, and d3 itself for the signal floor.
    """
    rows = []

    if c.d3 > 0:
        g2_bound = gamma2_upper_bound(c, params)
        rows.append(
            ConditionRow(
                "search-gain-bound",
                params.gamma2 < g2_bound,
                g2_bound - params.gamma2,
                f"gamma2={params.gamma2:.6g} vs upper bound {g2_bound:.6g}",
            )
        )
        eps_bound = epsilon_lower_bound(c, params)
        rows.append(
            ConditionRow(
                "dead-zone-floor",
                params.epsilon > eps_bound,
                params.epsilon - eps_bound,
                f"epsilon={params.epsilon:.6g} vs lower bound {eps_bound:.6g}",
            )
        )
    ratio = params.gamma1 / params.gamma2
    rows.append(
        ConditionRow(
            "timescale-separation",
            ratio >= params.min_timescale_ratio,
            ratio - params.min_timescale_ratio,
            f"gamma1/gamma2={ratio:.6g}",
        )
    )
    detail = f"d3={c.d3:.6g}"
    if c.d3 <= 0 and c.recommended_bias is not None:
        detail += f"; add bias >= {c.recommended_bias:.6g} to lift the signal floor"
    rows.append(ConditionRow("signal-floor", c.d3 > 0, c.d3, detail))
    return ValidityReport(rows)


def branch_lambda3(lambda2: float) -> tuple[float, float]:
    """Both circle points compatible with a given lambda2.

    Away from lambda2 = +-1 the constraint lambda2^2 + lambda3^2 = 1
    admits two lambda3 values; seeding both branches lets ensembles
    populate every resting set.
    """
    if abs(lambda2) > 1.0:
        raise ParameterError(f"|lambda2| must be <= 1, got {lambda2}")
    root = math.sqrt(max(0.0, 1.0 - lambda2 * lambda2))
    return root, -root


def design_params(
    c: MatchConstants,
    tau: float = 1.0,
    k: float = 1.0,
    theta1_range: tuple[float, float] = (0.0, 2.0),
    theta2_range: tuple[float, float] = (0.0, 2.0 * math.pi),
    timescale_ratio: float = 100.0,
    gamma2_safety: float = 0.5,
    epsilon_margin: float = 1.2,
    epsilon_floor: float = 0.0,
) -> AdaptParams:
    """Pick workable gains from the constants.

    gamma2 sits at gamma2_safety times its upper bound and gamma1 at
    timescale_ratio times gamma2. The dead zone targets the asymptotic
    floor tau * delta * (1 + d4/d3) times epsilon_margin (the value the
    full printed bound approaches as the timescale ratio grows), never
    below epsilon_floor; the full bound with the finite-ratio term is
    far more conservative and is reported by check_params instead.
    """
    if not (0 < gamma2_safety < 1):
        raise ParameterError("gamma2_safety must be in (0, 1)")
    if epsilon_margin <= 1:
        raise ParameterError("epsilon_margin must exceed 1")
    probe = AdaptParams(
        tau=tau,
        k=k,
        gamma1=timescale_ratio,
        gamma2=1.0,
        epsilon=1.0,
        theta1_range=theta1_range,
        theta2_range=theta2_range,
        min_timescale_ratio=min(10.0, timescale_ratio),
    )
    g2 = gamma2_safety * gamma2_upper_bound(c, probe)
    g1 = timescale_ratio * g2
    eps = max(epsilon_margin * tau * c.delta * (1.0 + c.d4 / c.d3), epsilon_floor)
    if eps <= 0:
        raise ParameterError("designed dead zone is not positive; supply epsilon_floor")
    return AdaptParams(
        tau=tau,
        k=k,
        gamma1=g1,
        gamma2=g2,
        epsilon=eps,
        theta1_range=theta1_range,
        theta2_range=theta2_range,
        min_timescale_ratio=min(10.0, timescale_ratio),
    )
