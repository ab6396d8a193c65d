"""Run directories: CSV writers, SVG plots and the checksummed manifest.

Files are staged in a hidden directory next to the output directory and only
moved into place, together with the manifest, once a run has succeeded.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .seir import COMPARTMENTS, RNG_ALGORITHM

MANIFEST = "manifest.json"


def fmt(x) -> str:
    """Round-trip float formatting used in every CSV."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RunDir:
    """Collects the files of one subcommand invocation."""

    def __init__(self, out: Path, command: str, config: dict):
        self.out = Path(out)
        self.command = command
        self.config = config
        self.timings: Dict[str, float] = {}
        self.results: dict = {}
        self.stage: Optional[Path] = None

    def path(self, name: str) -> Path:
        return self.stage / name

    @contextmanager
    def timed(self, label: str):
        t0 = time.perf_counter()
        yield
        self.timings[label] = round(time.perf_counter() - t0, 6)

    def __enter__(self):
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(dir=self.out.parent, prefix=f".{self.out.name}.staging-"))
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self._commit()
        finally:
            shutil.rmtree(self.stage, ignore_errors=True)
        return False

    def _commit(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        names = sorted(p.name for p in self.stage.iterdir())
        inventory = {}
        for name in names:
            inventory[name] = sha256(self.stage / name)
            os.replace(self.stage / name, self.out / name)
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "rng": {"data": RNG_ALGORITHM, "init": RNG_ALGORITHM, "bo": RNG_ALGORITHM},
            "timings_s": self.timings,
            "results": self.results,
            "files": inventory,
        }
        write_atomic(self.out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- tables --------------------------------------------------------------------


def trajectory_rows(times, states):
    for t, x in zip(times, states):
        yield (t, *x, float(np.sum(x)))


TRAJECTORY_HEADER = ("t", *COMPARTMENTS, "total")
OBSERVATION_HEADER = ("t", "I", "dI", "ddI", "S_hat", "E_hat", "R_hat")
RECORD_HEADER = ("epoch", "train_loss", "test_error", "epsilon")
BO_HEADER = ("iteration", "epsilon", "objective", "is_initial")
PREDICTION_HEADER = ("t", *COMPARTMENTS, *(f"{c}_pred" for c in COMPARTMENTS))


def observation_rows(obs):
    nan = np.full(len(obs.times), np.nan)
    cols = [obs.times, obs.i_obs, obs.i_dot, obs.i_ddot]
    for name in ("pseudo_s", "pseudo_e", "pseudo_r"):
        v = getattr(obs, name)
        cols.append(nan if v is None else v)
    return zip(*cols)


def prediction_rows(grid, truth_states, pred_states):
    for t, a, b in zip(grid, truth_states, pred_states):
        yield (t, *a, *b)


# -- plots ---------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "aopinn"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    import matplotlib.pyplot as plt

    plt.close(fig)


def plot_compartments(path: Path, grid, truth_states, pred_states=None, obs=None, title: str = "") -> None:
    """Ground truth (and optionally a prediction) for S, E, I, R."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 2, figsize=(8, 6), sharex=True)
    for k, (ax, name) in enumerate(zip(axes.ravel(), COMPARTMENTS)):
        ax.plot(grid, truth_states[:, k], color="black", lw=1.5, label="ground truth")
        if pred_states is not None:
            ax.plot(grid, pred_states[:, k], color="tab:red", ls="--", lw=1.2, label="PINN")
        if obs is not None and name == "I":
            ax.plot(obs.times, obs.i_obs, "o", ms=3, color="tab:blue", label="observed")
        ax.set_title(name)
        ax.set_xlabel("t")
    axes[0, 0].legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_bo_trace(path: Path, bo, title: str = "") -> None:
    plt = _pyplot()
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    its = np.arange(len(bo.epsilons))
    obj = np.asarray(bo.objectives, dtype=float)
    a.semilogy(its, obj, "o-", ms=3)
    a.set_xlabel("iteration")
    a.set_ylabel("objective")
    b.semilogy(bo.epsilons, obj, "o", ms=4)
    b.axvline(bo.epsilon_hat, color="tab:red", ls="--")
    b.set_xlabel("epsilon")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_epsilon_history(path: Path, record, epsilon_true: float) -> None:
    """Trainable epsilon per epoch, with the two selection epochs marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(len(record.epsilon)), record.epsilon, lw=1.2, label="epsilon")
    ax.axhline(epsilon_true, color="black", ls=":", label="true")
    ax.axvline(record.best_test_epoch, color="tab:green", ls="--", label="min test error")
    ax.axvline(record.best_train_epoch, color="tab:orange", ls="--", label="min train loss")
    ax.set_xlabel("epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
