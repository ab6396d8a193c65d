"""SEIR ground truth: fixed-step Dormand-Prince integration, dense output and
observation sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainError, IntegrationError

COMPARTMENTS = ("S", "E", "I", "R")
RNG_ALGORITHM = "numpy.random.Philox"

# tolerance for roundoff excursions outside [0, 1]
NEGATIVE_GUARD = 1e-6
CONSERVATION_TOL = 1e-9

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
# Shampine's continuous extension; row j gives the coefficients of
# theta, theta^2, theta^3, theta^4 for stage j.
_DENSE = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass(frozen=True)
class EpiParams:
    beta: float
    epsilon: float
    gamma: float

    def __post_init__(self):
        vals = (self.beta, self.epsilon, self.gamma)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite epidemiological parameter in {vals}")
        if self.beta <= 0 or self.gamma <= 0:
            raise DomainError("beta and gamma must be positive")
        if self.epsilon < 0:
            raise DomainError("epsilon must be non-negative")

    def with_epsilon(self, epsilon: float) -> "EpiParams":
        return replace(self, epsilon=float(epsilon))


@dataclass(frozen=True)
class SeirState:
    s: float
    e: float
    i: float
    r: float

    def __post_init__(self):
        comps = self.as_array()
        if not np.all(np.isfinite(comps)):
            raise DomainError(f"non-finite SEIR state {tuple(comps)}")
        if np.any(comps < -NEGATIVE_GUARD) or np.any(comps > 1 + NEGATIVE_GUARD):
            raise DomainError(f"SEIR state {tuple(comps)} outside [0, 1]")
        if abs(comps.sum() - 1.0) > CONSERVATION_TOL:
            raise DomainError(f"SEIR state sums to {comps.sum()!r}, expected 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.i, self.r], dtype=float)

    @classmethod
    def from_array(cls, x) -> "SeirState":
        s, e, i, r = (float(v) for v in x)
        return cls(s, e, i, r)


def seir_rhs(params: EpiParams, x: np.ndarray) -> np.ndarray:
    """Right-hand side of the SEIR system for a state vector (or a stack of them
    along the last axis)."""
    s, e, i = x[..., 0], x[..., 1], x[..., 2]
    infection = params.beta * s * i
    onset = params.epsilon * e
    removal = params.gamma * i
    return np.stack([-infection, infection - onset, onset - removal, removal], axis=-1)


@dataclass
class Trajectory:
    """Grid solution of the SEIR system.

    ``states`` has shape ``(len(times), 4)``; ``stages`` keeps the seven
    Dormand-Prince stage derivatives of every step for dense output.
    """

    times: np.ndarray
    states: np.ndarray
    params: EpiParams
    dt: float
    stages: np.ndarray = field(repr=False)
    embedded_error: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state(self, k: int) -> SeirState:
        return SeirState.from_array(self.states[k])


def simulate(params: EpiParams, init: SeirState, t_end: float, dt: float) -> Trajectory:
    """Integrate the SEIR system on the grid ``0, dt, 2 dt, ..., t_end`` with the
    fifth-order Dormand-Prince formula at a fixed step."""
    if not dt > 0 or not t_end > 0:
        raise DomainError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise DomainError(f"t_end={t_end} is not a multiple of dt={dt}")

    times = np.arange(n_steps + 1) * dt
    times[-1] = t_end
    states = np.empty((n_steps + 1, 4))
    stages = np.empty((n_steps, 7, 4))
    err = np.empty((n_steps, 4))
    states[0] = init.as_array()

    y = states[0].copy()
    for n in range(n_steps):
        h = times[n + 1] - times[n]
        k = stages[n]
        k[0] = seir_rhs(params, y)
        for j in range(1, 7):
            k[j] = seir_rhs(params, y + h * (np.asarray(_A[j]) @ k[:j]))
        # stage 7 is evaluated at the fifth-order solution (FSAL)
        y_new = y + h * (_B5 @ k)
        err[n] = h * ((_B5 - _B4) @ k)
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(f"non-finite state at step {n + 1} (t={times[n + 1]:g})")
        if np.any(y_new < -NEGATIVE_GUARD) or np.any(y_new > 1 + NEGATIVE_GUARD):
            raise IntegrationError(
                f"state left [0, 1] at step {n + 1} (t={times[n + 1]:g}): {y_new}"
            )
        states[n + 1] = y_new
        y = y_new
    return Trajectory(times, states, params, float(dt), stages, err)


def eval_many(traj: Trajectory, t) -> np.ndarray:
    """Dense-output states at the times ``t``; returns shape ``(len(t), 4)``.
    Grid times return the stored grid state exactly."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(t)) or np.any(t < traj.times[0]) or np.any(t > traj.t_end):
        raise DomainError(f"time outside [{traj.times[0]}, {traj.t_end}]")
    idx = np.searchsorted(traj.times, t, side="right") - 1
    idx = np.clip(idx, 0, len(traj.times) - 2)
    out = np.empty((len(t), 4))
    for m, (tm, k) in enumerate(zip(t, idx)):
        t0, t1 = traj.times[k], traj.times[k + 1]
        if tm == t0:
            out[m] = traj.states[k]
        elif tm == t1:
            out[m] = traj.states[k + 1]
        else:
            h = t1 - t0
            theta = (tm - t0) / h
            powers = theta ** np.arange(1, 5)
            out[m] = traj.states[k] + h * ((_DENSE @ powers) @ traj.stages[k])
    return out


def eval_at(traj: Trajectory, t: float) -> SeirState:
    return SeirState.from_array(eval_many(traj, [t])[0])


def analytic_i_derivatives(params: EpiParams, state) -> tuple:
    """First and second time derivatives of I implied by the model.

    ``state`` may be a :class:`SeirState` or an array whose last axis holds
    (S, E, I, R); the result then broadcasts accordingly.
    """
    x = state.as_array() if isinstance(state, SeirState) else np.asarray(state, dtype=float)
    s, e, i = x[..., 0], x[..., 1], x[..., 2]
    b, eps, g = params.beta, params.epsilon, params.gamma
    i_dot = eps * e - g * i
    e_dot = b * s * i - eps * e
    i_ddot = eps * e_dot - g * i_dot
    if np.ndim(i_dot) == 0:
        return float(i_dot), float(i_ddot)
    return i_dot, i_ddot


@dataclass
class ObservationSet:
    times: np.ndarray
    i_obs: np.ndarray
    i_dot: np.ndarray
    i_ddot: np.ndarray
    pseudo_s: Optional[np.ndarray] = None
    pseudo_e: Optional[np.ndarray] = None
    pseudo_r: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.times)
        for name in ("i_obs", "i_dot", "i_ddot", "pseudo_s", "pseudo_e", "pseudo_r"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ValueError(f"{name} has length {len(v)}, expected {n}")

    def __len__(self):
        return len(self.times)

    @property
    def has_pseudo(self) -> bool:
        return all(v is not None for v in (self.pseudo_s, self.pseudo_e, self.pseudo_r))

    def compartment(self, name: str) -> Optional[np.ndarray]:
        return {
            "S": self.pseudo_s,
            "E": self.pseudo_e,
            "I": self.i_obs,
            "R": self.pseudo_r,
        }[name]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so that sampled sets are bit-reproducible."""
    return np.random.Generator(np.random.Philox(seed))


def sample_times(t0: float, t_end: float, n: int, mode: str, seed: int = 0) -> np.ndarray:
    if n < 2:
        raise DomainError("need at least two observation points")
    if mode == "train":
        times = np.linspace(t0, t_end, n)
    elif mode == "test":
        times = np.sort(make_rng(seed).uniform(t0, t_end, size=n))
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return times


def sample_observations(
    traj: Trajectory, params: EpiParams, n: int, mode: str, seed: int = 0
) -> ObservationSet:
    """Observe I (with its exact first two derivatives) at ``n`` times.

    ``mode="train"`` uses an even grid including both endpoints; ``"test"``
    draws uniform times from ``seed``.
    """
    times = sample_times(float(traj.times[0]), traj.t_end, n, mode, seed)
    x = eval_many(traj, times)
    i_dot, i_ddot = analytic_i_derivatives(params, x)
    return ObservationSet(times, x[:, 2].copy(), np.asarray(i_dot), np.asarray(i_ddot))
