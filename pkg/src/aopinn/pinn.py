"""Four-output PINN for the SEIR system: model, composite loss, Adam and the
two training modes (``proposed``: fixed epsilon with full pseudo-data;
``baseline``: trainable epsilon with I-only data)."""

from __future__ import annotations

import json
import logging
import math
import zipfile
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import diffkit as dk
from .errors import ConfigError, NumericFailure
from .seir import COMPARTMENTS, EpiParams, ObservationSet, SeirState, make_rng

log = logging.getLogger(__name__)

HIDDEN = (50, 50, 50)
T_SCALE = 200.0
MODES = ("proposed", "baseline")


@dataclass
class PinnModel:
    """MLP t -> (S, E, I, R) with tanh hidden layers and a linear output.

    The network sees ``t / t_scale``; derivatives returned by :meth:`predict`
    are per unit of the original time.
    """

    weights: list
    biases: list
    epsilon: Optional[float] = None
    t_scale: float = T_SCALE

    @property
    def layer_sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def trainable_epsilon(self) -> bool:
        return self.epsilon is not None

    def parameters(self) -> list:
        """Weights and biases interleaved per layer, then epsilon (0-d) if trainable."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        if self.epsilon is not None:
            out.append(np.array(self.epsilon, dtype=float))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "PinnModel":
        n = len(self.weights)
        weights = [np.array(p, dtype=float) for p in params[0 : 2 * n : 2]]
        biases = [np.array(p, dtype=float) for p in params[1 : 2 * n : 2]]
        eps = float(params[2 * n]) if self.epsilon is not None else None
        return PinnModel(weights, biases, eps, self.t_scale)

    @property
    def n_params(self) -> int:
        return sum(int(np.size(p)) for p in self.parameters())

    def copy(self) -> "PinnModel":
        return self.with_parameters(self.parameters())

    def predict(self, t) -> tuple:
        """Values and time-derivatives of the four outputs, each ``(len(t), 4)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = dk.Dual(t[:, None] / self.t_scale, np.full((len(t), 1), 1.0 / self.t_scale))
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = dk.affine(h, w, b)
            if k < last:
                h = dk.tanh(h)
        return h.value, h.deriv

    def values(self, t) -> np.ndarray:
        """Forward pass without derivatives."""
        h = np.atleast_1d(np.asarray(t, dtype=float))[:, None] / self.t_scale
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.tanh(h)
        return h


def init_glorot(
    seed: int,
    hidden: Sequence[int] = HIDDEN,
    epsilon: Optional[float] = None,
    t_scale: float = T_SCALE,
) -> PinnModel:
    """Glorot-uniform weights, zero biases."""
    rng = make_rng(seed)
    sizes = (1, *hidden, 4)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return PinnModel(weights, biases, None if epsilon is None else float(epsilon), t_scale)


def expected_param_count(hidden: Sequence[int] = HIDDEN, trainable_epsilon=False) -> int:
    sizes = (1, *hidden, 4)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + int(trainable_epsilon)


@dataclass(frozen=True)
class LossWeights:
    c_s: float = 1.0
    c_e: float = 1.0
    c_i: float = 1.0
    c_r: float = 1.0
    lambda_data: float = 1.0
    lambda_eq: float = 1.0
    lambda_init: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"loss weight {name}={v} must be finite and >= 0")

    @property
    def c(self) -> tuple:
        return (self.c_s, self.c_e, self.c_i, self.c_r)

    @classmethod
    def proposed(cls) -> "LossWeights":
        return cls(1.0, 1.0, 1.0, 1.0)

    @classmethod
    def baseline(cls) -> "LossWeights":
        return cls(0.0, 0.0, 1.0, 0.0)


# -- loss terms ----------------------------------------------------------------
# Written once over "columns" that are either numpy arrays or tape Vars.


def _mean(x):
    return x._tape.mean(x) if isinstance(x, dk.Var) else np.mean(x)


def _data_targets(obs: ObservationSet, w: LossWeights) -> list:
    targets = []
    for name, c in zip(COMPARTMENTS, w.c):
        if c == 0:
            targets.append(None)
            continue
        y = obs.compartment(name)
        if y is None:
            raise ConfigError(f"data weight C_{name}={c} but no {name} data in the observation set")
        targets.append(np.asarray(y, dtype=float))
    return targets


def _data_term(cols, targets, w: LossWeights):
    total = None
    for col, y, c in zip(cols, targets, w.c):
        if y is None:
            continue
        term = c * dk.square(col - y)
        total = term if total is None else total + term
    if total is None:
        return 0.0
    return _mean(total)


def _eq_term(vals, ders, beta, eps, gamma):
    s, e, i, r = vals
    ds, de, di, dr = ders
    infection = beta * s * i
    onset = eps * e
    removal = gamma * i
    res = (
        dk.square(ds + infection)
        + dk.square(de - (infection - onset))
        + dk.square(di - (onset - removal))
        + dk.square(dr - removal)
        + dk.square(s + e + i + r - 1.0)
    )
    return _mean(res)


def _init_term(vals0, init: np.ndarray):
    total = None
    for col, y in zip(vals0, init):
        term = dk.square(col - y)
        total = term if total is None else total + term
    return _mean(total) / 4.0


def _epsilon(model, params: EpiParams) -> float:
    eps = getattr(model, "epsilon", None)
    return params.epsilon if eps is None else eps


def _cols(a: np.ndarray):
    return [a[:, j] for j in range(4)]


def loss_data(model, obs: ObservationSet, w: LossWeights) -> float:
    """Mean over observation points of the C-weighted squared errors."""
    targets = _data_targets(obs, w)
    vals, _ = model.predict(obs.times)
    return float(_data_term(_cols(vals), targets, w))


def loss_eq(model, times, params: EpiParams) -> float:
    """Mean over collocation times of the five squared ODE/conservation residuals."""
    vals, ders = model.predict(times)
    return float(_eq_term(_cols(vals), _cols(ders), params.beta, _epsilon(model, params), params.gamma))


def loss_init(model, init: SeirState) -> float:
    vals, _ = model.predict([0.0])
    return float(_init_term(_cols(vals), init.as_array()))


def total_loss(model, obs: ObservationSet, params: EpiParams, w: LossWeights, init: SeirState) -> float:
    total = 0.0
    if w.lambda_data:
        total += w.lambda_data * loss_data(model, obs, w)
    if w.lambda_eq:
        total += w.lambda_eq * loss_eq(model, obs.times, params)
    if w.lambda_init:
        total += w.lambda_init * loss_init(model, init)
    return total


def _taped_forward(tape, model: PinnModel, param_vars, times):
    t = np.asarray(times, dtype=float)
    x = tape.dual_input(t[:, None] / model.t_scale, np.full((len(t), 1), 1.0 / model.t_scale))
    n = len(model.weights)
    h = x
    for k in range(n):
        h = dk.affine(h, param_vars[2 * k], param_vars[2 * k + 1])
        if k < n - 1:
            h = dk.tanh(h)
    return h


def make_loss_fn(
    model: PinnModel,
    obs: ObservationSet,
    params: EpiParams,
    w: LossWeights,
    init: SeirState,
) -> Callable:
    """Build ``fn(tape, *param_vars) -> scalar Var`` for the total loss, with
    collocation at the observation times."""
    targets = _data_targets(obs, w) if w.lambda_data else None
    init_arr = init.as_array()
    n_layers = len(model.weights)
    times = np.asarray(obs.times, dtype=float)

    def fn(tape, *pv):
        eps = pv[2 * n_layers] if model.trainable_epsilon else params.epsilon
        out = _taped_forward(tape, model, pv, times)
        vals = [tape.column(out, j) for j in range(4)]
        total = 0.0
        if w.lambda_data:
            total = total + w.lambda_data * _data_term(vals, targets, w)
        if w.lambda_eq:
            ders = [tape.time_derivative(v) for v in vals]
            total = total + w.lambda_eq * _eq_term(vals, ders, params.beta, eps, params.gamma)
        if w.lambda_init:
            out0 = _taped_forward(tape, model, pv, [0.0])
            vals0 = [tape.column(out0, j) for j in range(4)]
            total = total + w.lambda_init * _init_term(vals0, init_arr)
        if not isinstance(total, dk.Var):
            # every term switched off; anchor a zero on the tape
            total = tape.sum(pv[0]) * 0.0
        return total

    return fn


def loss_and_grad(model, obs, params, w, init):
    return dk.value_and_gradient(make_loss_fn(model, obs, params, w, init), model.parameters())


# -- optimizer -----------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p, dtype=float) for p in params], [np.zeros_like(p, dtype=float) for p in params])


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``;
    inputs are not modified."""
    if len(params) != len(grads):
        raise ValueError("parameter and gradient lists differ in length")
    for g in grads:
        if not np.all(np.isfinite(g)):
            norms = [float(np.linalg.norm(np.nan_to_num(gg))) for gg in grads]
            raise NumericFailure(f"non-finite gradient at Adam step {state.step + 1}; finite-part norms {norms}")
    b1, b2 = state.beta1, state.beta2
    step = state.step + 1
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, step, b1, b2, state.eps)


# -- training ------------------------------------------------------------------


@dataclass
class TrainRecord:
    train_loss: list = field(default_factory=list)
    test_error: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    best_test_params: Optional[list] = field(default=None, repr=False)
    best_train_params: Optional[list] = field(default=None, repr=False)

    def __len__(self):
        return len(self.train_loss)

    @property
    def best_test_epoch(self) -> int:
        return int(np.argmin(self.test_error))

    @property
    def best_train_epoch(self) -> int:
        return int(np.argmin(self.train_loss))

    @property
    def min_test_error(self) -> float:
        return float(np.min(self.test_error))

    @property
    def epsilon_at_min_test(self) -> float:
        return float(self.epsilon[self.best_test_epoch])

    @property
    def epsilon_at_min_train(self) -> float:
        return float(self.epsilon[self.best_train_epoch])

    def rows(self):
        for k, (a, b, c) in enumerate(zip(self.train_loss, self.test_error, self.epsilon)):
            yield k, a, b, c


def _check_mode(model: PinnModel, obs_train, obs_test, w: LossWeights, mode: str):
    if mode not in MODES:
        raise ConfigError(f"unknown training mode {mode!r}")
    if mode == "proposed":
        if model.trainable_epsilon:
            raise ConfigError("proposed mode keeps epsilon fixed; model has a trainable epsilon")
        if not (obs_train.has_pseudo and obs_test.has_pseudo):
            raise ConfigError("proposed mode needs reconstructed S, E, R on train and test sets")
    else:
        if not model.trainable_epsilon:
            raise ConfigError("baseline mode needs a trainable epsilon")
        if w.c != (0.0, 0.0, 1.0, 0.0):
            raise ConfigError(f"baseline mode uses C=(0,0,1,0), got {w.c}")


def train(
    model: PinnModel,
    obs_train: ObservationSet,
    obs_test: ObservationSet,
    params: EpiParams,
    w: LossWeights,
    mode: str,
    epochs: int,
    init: SeirState,
    lr: float = 1e-3,
    progress: Optional[Callable[[int, TrainRecord], None]] = None,
):
    """Full-batch Adam on the total loss for ``epochs`` iterations.

    Epoch ``k`` of the record holds the train loss, test error and epsilon
    of the parameters *before* the k-th update, so the three columns always
    describe the same network.
    """
    _check_mode(model, obs_train, obs_test, w, mode)
    record = TrainRecord()
    if epochs <= 0:
        return model, record

    loss_fn = make_loss_fn(model, obs_train, params, w, init)
    test_targets = _data_targets(obs_test, w)
    theta = model.parameters()
    state = AdamState.zeros_like(theta)
    best_test = best_train = math.inf
    current = model
    for epoch in range(epochs):
        current = model.with_parameters(theta)
        try:
            loss, grads = dk.value_and_gradient(loss_fn, theta)
            test_err = float(_data_term(_cols(current.values(obs_test.times)), test_targets, w))
            if not math.isfinite(test_err):
                raise NumericFailure(f"non-finite test error at epoch {epoch}")
            new_theta, state = adam_step(theta, grads, state, lr)
        except NumericFailure as exc:
            exc.record = record
            exc.model = current
            log.error("training aborted at epoch %d: %s", epoch, exc)
            raise
        record.train_loss.append(loss)
        record.test_error.append(test_err)
        record.epsilon.append(current.epsilon if current.trainable_epsilon else params.epsilon)
        if test_err < best_test:
            best_test = test_err
            record.best_test_params = theta
        if loss < best_train:
            best_train = loss
            record.best_train_params = theta
        theta = new_theta
        if progress is not None:
            progress(epoch, record)
    return model.with_parameters(theta), record


# -- checkpoints ---------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: PinnModel, seeds: Optional[dict] = None) -> None:
    arrays = {f"p{k}": p for k, p in enumerate(model.parameters())}
    meta = {
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "t_scale": model.t_scale,
        "trainable_epsilon": model.trainable_epsilon,
        "seeds": seeds or {},
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    # an npz archive with fixed member timestamps, so equal models give equal bytes
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w") as fh:
                np.lib.format.write_array(fh, np.asarray(arr), allow_pickle=False)


def load_checkpoint(path) -> tuple:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {meta.get('version')}")
        n = len([k for k in data.files if k.startswith("p")])
        params = [data[f"p{k}"] for k in range(n)]
    sizes = meta["layer_sizes"]
    template = PinnModel(
        [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
        [np.zeros(b) for b in sizes[1:]],
        0.0 if meta["trainable_epsilon"] else None,
        meta["t_scale"],
    )
    return template.with_parameters(params), meta.get("seeds", {})
