"""Coincidence detection by synchronization of coupled bursting neurons.

Each node is a three-variable Hindmarsh-Rose oscillator (membrane
potential x, fast current y, slow current z) driven by one template
channel's integrator output. Nodes are linked through a symmetric
diffusive coupling in the x equation whose rows sum to zero, so the
coupling vanishes identically on the synchronous set and pulls
trajectories toward it otherwise. A pair of nodes synchronizes when its
two inputs agree; the residual x-gap is the match signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "HRParams",
    "HRNetState",
    "PairSync",
    "coupling_matrix",
    "hr_rhs",
    "sync_upper_bound",
    "unstable_region_max",
    "sync_metrics",
    "random_initial_state",
    "INIT_BOX",
]

# seeding box for node states (x, y, z), wide enough to straddle the
# bursting attractor
INIT_BOX = ((-2.0, 2.0), (-10.0, 2.0), (0.0, 6.0))


@dataclass
class HRParams:
    """Membrane constants and drive current of one oscillator.

    Defaults put the uncoupled node in a chaotic-bursting regime. The
    drive current I is the bifurcation parameter selecting spiking vs
    bursting and is deliberately configurable.
    """

    a: float = 1.0
    b: float = 3.0
    c: float = 1.0
    d: float = 5.0
    s: float = 4.0
    x0: float = 1.6
    eps: float = 0.001
    current: float = 3.25

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "s", "eps"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"HR parameter {name} must be positive, got {v}")
        if not math.isfinite(self.current) or not math.isfinite(self.x0):
            raise ParameterError("HR current and x0 must be finite")


@dataclass
class HRNetState:
    """Per-node state vectors of an (n+1)-node network."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        self.z = np.atleast_1d(np.asarray(self.z, dtype=np.float64))
        if not (self.x.shape == self.y.shape == self.z.shape):
            raise ParameterError("x, y, z must have identical shapes")

    @property
    def n_nodes(self) -> int:
        return self.x.shape[-1]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.z], axis=-1)

    @staticmethod
    def from_array(a) -> "HRNetState":
        a = np.asarray(a, dtype=np.float64)
        n = a.shape[-1] // 3
        return HRNetState(a[..., :n], a[..., n : 2 * n], a[..., 2 * n :])


def coupling_matrix(n: int, gamma: float) -> np.ndarray:
    """Symmetric diffusive coupling for n+1 nodes.

    gamma * (ones off the diagonal, -n on it): every row sums to zero,
    so the coupling term gamma * G @ x vanishes when all x agree.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if gamma < 0:
        raise ParameterError("gamma must be nonnegative")
    g = np.full((n + 1, n + 1), gamma)
    np.fill_diagonal(g, -n * gamma)
    return g


def hr_rhs(state: HRNetState, p: HRParams, gamma: float, phi) -> HRNetState:
    """Network derivative with per-node inputs phi.

    x' = -a x^3 + b x^2 + y - z + I + u + phi
    y' = c - d x^2 - y
    z' = eps (s (x + x0) - z)

    with u = gamma * (sum_j x_j - (n+1) x), equivalent to the coupling
    matrix product but formed without materializing the matrix.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != state.x.shape:
        raise ParameterError(
            f"phi shape {phi.shape} does not match node count {state.x.shape}"
        )
    x, y, z = state.x, state.y, state.z
    n_total = state.n_nodes
    u = gamma * (x.sum(axis=-1, keepdims=True) - n_total * x)
    dx = -p.a * x**3 + p.b * x**2 + y - z + p.current + u + phi
    dy = p.c - p.d * x**2 - y
    dz = p.eps * (p.s * (x + p.x0) - z)
    return HRNetState(dx, dy, dz)


def sync_upper_bound(n: int, p: HRParams) -> float:
    """Coupling strength above which a synchronizing pair is guaranteed.

    (d^2/2 + b^2) / ((n+1) a): independent of the drive current and of
    the slow-variable timescale, hence valid across bursting regimes.
    """
    if p.a <= 0:
        raise ParameterError("a must be positive")
    if n < 0:
        raise ParameterError("n must be nonnegative")
    return (p.d * p.d / 2.0 + p.b * p.b) / ((n + 1) * p.a)


def unstable_region_max(n: int, p: HRParams) -> float:
    """Supremum of coupling strengths where unstable/itinerant
    synchronization can persist; numerically equal to sync_upper_bound."""
    return sync_upper_bound(n, p)


@dataclass
class PairSync:
    """Synchronization metrics for one node pair."""

    i: int
    j: int
    rms_x: float
    rms_y: float
    rms_z: float
    max_x: float
    max_y: float
    max_z: float
    t_syn: float
    synchronized: bool

    def as_dict(self) -> dict:
        return {
            "i": self.i,
            "j": self.j,
            "rms_x": self.rms_x,
            "rms_y": self.rms_y,
            "rms_z": self.rms_z,
            "max_x": self.max_x,
            "max_y": self.max_y,
            "max_z": self.max_z,
            "t_syn": self.t_syn,
            "synchronized": bool(self.synchronized),
        }


def sync_metrics(
    times: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    window: float,
    delta_thresh: float,
) -> list[PairSync]:
    """Windowed pairwise synchronization report.

    Arrays are (n_samples, n_nodes). RMS and max gaps are taken over the
    final `window` time units; t_syn counts the total time the x-gap
    stayed below delta_thresh over the whole trajectory; the verdict is
    final-window max x-gap < delta_thresh.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0:
        raise ParameterError("empty trajectory")
    if window <= 0 or delta_thresh <= 0:
        raise ParameterError("window and delta_thresh must be positive")
    span = times[-1] - times[0]
    if span < 2 * window:
        raise ParameterError("trajectory must cover at least twice the metrics window")
    in_win = times >= times[-1] - window
    dt_steps = np.diff(times, append=times[-1])

    n_nodes = x.shape[1]
    out = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            gx = np.abs(x[:, i] - x[:, j])
            gy = np.abs(y[:, i] - y[:, j])
            gz = np.abs(z[:, i] - z[:, j])
            t_syn = float(np.sum(dt_steps[gx < delta_thresh]))
            max_x = float(gx[in_win].max())
            out.append(
                PairSync(
                    i=i,
                    j=j,
                    rms_x=float(np.sqrt(np.mean(gx[in_win] ** 2))),
                    rms_y=float(np.sqrt(np.mean(gy[in_win] ** 2))),
                    rms_z=float(np.sqrt(np.mean(gz[in_win] ** 2))),
                    max_x=max_x,
                    max_y=float(gy[in_win].max()),
                    max_z=float(gz[in_win].max()),
                    t_syn=t_syn,
                    synchronized=max_x < delta_thresh,
                )
            )
    return out


def random_initial_state(n_nodes: int, rng: np.random.Generator) -> HRNetState:
    """Node states drawn uniformly from the standard seeding box."""
    (xl, xh), (yl, yh), (zl, zh) = INIT_BOX
    return HRNetState(
        rng.uniform(xl, xh, n_nodes),
        rng.uniform(yl, yh, n_nodes),
        rng.uniform(zl, zh, n_nodes),
    )
