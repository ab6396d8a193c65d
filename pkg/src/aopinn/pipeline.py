"""Experiment orchestration: ground truth, inner PINN trainings and the two
outer Bayesian-optimization loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import RunConfig
from .errors import NumericFailure
from .gpbo import BoResult, run_bo
from .pinn import PinnModel, TrainRecord, init_glorot, train
from .recon import ReconConfig, reconstruct
from .seir import ObservationSet, Trajectory, sample_observations, simulate

log = logging.getLogger(__name__)


@dataclass
class Scenario:
    cfg: RunConfig
    truth: Trajectory
    obs_train: ObservationSet
    obs_test: ObservationSet


def build_scenario(cfg: RunConfig) -> Scenario:
    truth = simulate(cfg.params, cfg.init, cfg.t_end, cfg.dt)
    # the test times are drawn once per run from seed_data
    obs_train = sample_observations(truth, cfg.params, cfg.n_train, "train")
    obs_test = sample_observations(truth, cfg.params, cfg.n_test, "test", seed=cfg.seed_data)
    return Scenario(cfg, truth, obs_train, obs_test)


def train_proposed(scn: Scenario, epsilon: float, progress=None):
    """Reconstruct S, E, R with ``epsilon`` and train the PINN with it fixed."""
    cfg = scn.cfg
    rc = ReconConfig(epsilon, cfg.beta, cfg.gamma, cfg.i_floor)
    train_set = reconstruct(scn.obs_train, rc)
    test_set = reconstruct(scn.obs_test, rc)
    model = init_glorot(cfg.seed_init, cfg.hidden, t_scale=cfg.t_end)
    return train(
        model, train_set, test_set, cfg.params.with_epsilon(epsilon), cfg.weights("proposed"),
        "proposed", cfg.epochs, cfg.init, cfg.lr, progress,
    )


def train_inverse(scn: Scenario, epsilon0: float, progress=None):
    """I-only training with epsilon as a trainable parameter starting at ``epsilon0``."""
    cfg = scn.cfg
    model = init_glorot(cfg.seed_init, cfg.hidden, epsilon=epsilon0, t_scale=cfg.t_end)
    return train(
        model, scn.obs_train, scn.obs_test, cfg.params, cfg.weights("baseline"),
        "baseline", cfg.epochs, cfg.init, cfg.lr, progress,
    )


@dataclass
class _BestRun:
    epsilon: Optional[float] = None
    objective: float = float("inf")
    model: Optional[PinnModel] = None
    record: Optional[TrainRecord] = None

    def offer(self, eps, model, record):
        obj = record.min_test_error
        if obj < self.objective:
            self.epsilon, self.objective, self.model, self.record = eps, obj, model, record
        return obj


@dataclass
class ProposedResult:
    bo: BoResult
    epsilon_hat: float
    model: PinnModel
    record: TrainRecord


@dataclass
class BaselineResult:
    bo: BoResult
    epsilon0: float
    model: PinnModel
    record: TrainRecord
    extras: dict = field(default_factory=dict)

    @property
    def epsilon1(self) -> float:
        """Epsilon at the epoch of minimal test error."""
        return self.record.epsilon_at_min_test

    @property
    def epsilon2(self) -> float:
        """Epsilon at the epoch of minimal training loss."""
        return self.record.epsilon_at_min_train


def _bo(cfg: RunConfig, objective: Callable, callback=None) -> BoResult:
    return run_bo(
        objective, cfg.bo_iterations, cfg.bo_init, cfg.seed_bo, cfg.box, cfg.bo_xi,
        transform=cfg.bo_transform, callback=callback,
    )


def run_proposed(scn: Scenario, callback=None) -> ProposedResult:
    """Outer loop over epsilon; objective = minimum test error of the inner run."""
    best = _BestRun()

    def objective(eps):
        model, record = train_proposed(scn, eps)
        return best.offer(eps, model, record)

    bo = _bo(scn.cfg, objective, callback)
    if best.model is None:
        raise NumericFailure("every proposed-method evaluation failed")
    assert best.epsilon == bo.epsilon_hat
    return ProposedResult(bo, bo.epsilon_hat, best.model, best.record)


def run_baseline(scn: Scenario, callback=None) -> BaselineResult:
    """Outer loop over the initial epsilon of the inverse problem, then the
    inverse-problem run from the best initial value."""
    best = _BestRun()

    def objective(eps0):
        model, record = train_inverse(scn, eps0)
        return best.offer(eps0, model, record)

    bo = _bo(scn.cfg, objective, callback)
    if best.model is None:
        raise NumericFailure("every baseline evaluation failed")
    # training is deterministic, so the BO evaluation at eps0 is the inverse run
    return BaselineResult(bo, bo.epsilon_hat, best.model, best.record)


def trajectory_rmse(model, truth: Trajectory, n_points: int = 201) -> np.ndarray:
    """Per-compartment RMSE of the model against the truth on an even grid."""
    from .seir import eval_many

    grid = np.linspace(truth.times[0], truth.t_end, n_points)
    err = model.values(grid) - eval_many(truth, grid)
    return np.sqrt(np.mean(err * err, axis=0))
