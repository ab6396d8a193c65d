"""One-dimensional Gaussian-process Bayesian optimization with Expected
Improvement (minimization)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.stats import norm

from .seir import make_rng

log = logging.getLogger(__name__)

NOISE_FLOOR = 1e-10
XI = 0.01
INIT_COUNT = 5
GRID_POINTS = 1001
PENALTY = 1e6
LENGTH_SCALES = tuple(np.geomspace(0.01, 0.5, 10))
BOX = (0.0, 0.5)
TRANSFORMS = ("none", "log")


def matern52(a, b, length_scale: float) -> np.ndarray:
    r = np.abs(np.subtract.outer(np.asarray(a, float), np.asarray(b, float))) / length_scale
    s5r = math.sqrt(5.0) * r
    return (1.0 + s5r + 5.0 / 3.0 * r * r) * np.exp(-s5r)


@dataclass
class GpPosterior:
    """Exact GP regression on standardized targets (unit signal variance)."""

    x: np.ndarray
    y: np.ndarray
    y_mean: float
    y_scale: float
    length_scale: float
    noise: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    log_marginal_likelihood: float = float("nan")
    signal_variance: float = 1.0

    def predict_standardized(self, xq) -> tuple:
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        ks = matern52(xq, self.x, self.length_scale)
        mu = ks @ self.alpha
        v = cho_solve((self.chol, True), ks.T)
        var = self.signal_variance - np.sum(ks * v.T, axis=1)
        return mu, np.sqrt(np.clip(var, 0.0, None))

    def predict(self, xq) -> tuple:
        """Posterior mean and standard deviation in objective units."""
        mu, sd = self.predict_standardized(xq)
        return self.y_mean + self.y_scale * mu, self.y_scale * sd

    def standardize(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale


def _factor(k: np.ndarray, noise: float):
    jitter = noise
    n = len(k)
    while True:
        try:
            return cholesky(k + jitter * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12)
            if jitter > 1e-2:
                raise


def gp_fit(
    points: Sequence[tuple],
    noise_floor: float = NOISE_FLOOR,
    length_scales: Sequence[float] = LENGTH_SCALES,
) -> GpPosterior:
    """Matérn-5/2 GP through ``(x, y)`` points; the length scale is the
    maximizer of the log marginal likelihood over ``length_scales``."""
    pts = [(float(x), float(y)) for x, y in points]
    keep = [(x, y) for x, y in pts if math.isfinite(y) and math.isfinite(x)]
    for x, y in pts:
        if (x, y) not in keep:
            log.warning("excluding non-finite observation (%r, %r) from GP fit", x, y)
    if not keep:
        raise ValueError("GP fit needs at least one finite observation")
    x = np.array([p[0] for p in keep])
    y = np.array([p[1] for p in keep])
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if not y_scale > 0:
        y_scale = 1.0
    ys = (y - y_mean) / y_scale

    best = None
    for ls in length_scales:
        chol, jitter = _factor(matern52(x, x, ls), noise_floor)
        alpha = cho_solve((chol, True), ys)
        lml = -0.5 * ys @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * len(x) * math.log(2 * math.pi)
        if best is None or lml > best[0]:
            best = (lml, ls, chol, alpha, jitter)
    lml, ls, chol, alpha, jitter = best
    return GpPosterior(x, y, y_mean, y_scale, float(ls), jitter, chol, alpha, float(lml))


def ei_closed_form(mu, sigma, best, xi):
    """EI for minimization; falls back to ``max(best - mu - xi, 0)`` where sigma is 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    improve = best - mu - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, improve / np.where(sigma > 0, sigma, 1.0), 0.0)
        ei = improve * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma > 0, ei, np.maximum(improve, 0.0))
    ei = np.maximum(ei, 0.0)
    return ei if ei.ndim else float(ei)


def expected_improvement(post: GpPosterior, eps, best: float, xi: float = XI):
    """EI at ``eps`` in the posterior's standardized units.

    ``best`` is in objective units and gets standardized here; ``xi`` is a
    margin in standardized units, so it does not depend on the objective's
    magnitude.
    """
    mu, sd = post.predict_standardized(eps)
    out = ei_closed_form(mu, sd, float(post.standardize(best)), xi)
    return out if np.ndim(eps) else float(np.asarray(out).ravel()[0])


def propose_next(
    post: GpPosterior,
    box: tuple = BOX,
    seed: Optional[int] = None,
    xi: float = XI,
    grid_points: int = GRID_POINTS,
) -> float:
    """Grid argmax of EI over the box; ties go to the smallest point.

    The grid search is deterministic, so ``seed`` does not influence the
    result; it is accepted for a uniform call signature.
    """
    grid = np.linspace(box[0], box[1], grid_points)
    ei = expected_improvement(post, grid, float(post.y.min()), xi)
    return float(grid[int(np.argmax(ei))])


@dataclass
class BoResult:
    epsilons: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    is_initial: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.objectives))

    @property
    def epsilon_hat(self) -> float:
        return float(self.epsilons[self.best_index])

    @property
    def best_objective(self) -> float:
        return float(self.objectives[self.best_index])

    def rows(self):
        for k, (e, y, init) in enumerate(zip(self.epsilons, self.objectives, self.is_initial)):
            yield k, e, y, init


def initial_design(count: int, box: tuple, seed: int) -> np.ndarray:
    """Stratified sample: one uniform draw in each of ``count`` equal slices."""
    u = make_rng(seed).uniform(size=count)
    lo, hi = box
    return lo + (np.arange(count) + u) / count * (hi - lo)


def _transform(y: float, how: str) -> float:
    if how == "log":
        return math.log(max(y, 1e-300))
    return y


def run_bo(
    objective: Callable[[float], float],
    iterations: int = 30,
    init_count: int = INIT_COUNT,
    seed: int = 0,
    box: tuple = BOX,
    xi: float = XI,
    noise_floor: float = NOISE_FLOOR,
    transform: str = "none",
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> BoResult:
    """Minimize ``objective`` over ``box`` with ``iterations`` evaluations.

    Failing evaluations (an exception or a non-finite value) are recorded as
    :data:`PENALTY`. With ``transform="log"`` the GP models the log of the
    objective; the recorded objective values stay untransformed.
    """
    if not iterations >= init_count >= 1:
        raise ValueError("need iterations >= init_count >= 1")
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown objective transform {transform!r}")
    result = BoResult(
        settings={
            "kernel": "matern52",
            "xi": xi,
            "noise_floor": noise_floor,
            "init_count": init_count,
            "grid_points": GRID_POINTS,
            "length_scales": [float(v) for v in LENGTH_SCALES],
            "penalty": PENALTY,
            "transform": transform,
            "box": list(box),
            "seed": seed,
        }
    )
    pending = list(initial_design(init_count, box, seed))
    for it in range(iterations):
        initial = bool(pending)
        if initial:
            eps = float(pending.pop(0))
        else:
            pts = [(e, _transform(y, transform)) for e, y in zip(result.epsilons, result.objectives)]
            eps = propose_next(gp_fit(pts, noise_floor), box, seed, xi)
        failed = False
        try:
            y = float(objective(eps))
            if not math.isfinite(y):
                raise ArithmeticError(f"non-finite objective {y}")
        except Exception as exc:  # noqa: BLE001 - the outer loop must survive inner failures
            log.warning("objective failed at eps=%.6g (%s); recording penalty", eps, exc)
            y, failed = PENALTY, True
        result.epsilons.append(eps)
        result.objectives.append(y)
        result.is_initial.append(initial)
        result.failed.append(failed)
        if callback is not None:
            callback(it, eps, y)
    return result
