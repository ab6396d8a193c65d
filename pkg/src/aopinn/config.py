"""Run configuration with every default of the standard experiment baked in."""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .gpbo import TRANSFORMS
from .pinn import LossWeights
from .seir import EpiParams, SeirState

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class RunConfig:
    # scenario
    beta: float = 0.26
    gamma: float = 0.1
    epsilon_true: float = 0.2
    s0: float = 0.99
    e0: float = 0.0
    i0: float = 0.01
    r0: float = 0.0
    t_end: float = 200.0
    dt: float = 0.2
    # observations
    n_train: int = 50
    n_test: int = 50
    # seeds
    seed_data: int = 0
    seed_init: int = 0
    seed_bo: int = 0
    # network and training
    hidden: tuple = (50, 50, 50)
    epochs: int = 30000
    lr: float = 1e-3
    lambda_data: float = 1.0
    lambda_eq: float = 1.0
    lambda_init: float = 1.0
    c_proposed: tuple = (1.0, 1.0, 1.0, 1.0)
    c_baseline: tuple = (0.0, 0.0, 1.0, 0.0)
    i_floor: float = 1e-12
    # outer loop
    bo_iterations: int = 30
    bo_init: int = 5
    bo_lo: float = 0.0
    bo_hi: float = 0.5
    bo_xi: float = 0.01
    bo_transform: str = "log"
    # fixed epsilon for train-forward / initial epsilon for train-inverse
    epsilon_forward: Optional[float] = None
    epsilon_initial: float = 0.1
    out: str = "runs/default"

    def validate(self) -> "RunConfig":
        try:
            EpiParams(self.beta, self.epsilon_true, self.gamma)
            SeirState(self.s0, self.e0, self.i0, self.r0)
            LossWeights(*self.c_proposed, self.lambda_data, self.lambda_eq, self.lambda_init)
            LossWeights(*self.c_baseline, self.lambda_data, self.lambda_eq, self.lambda_init)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        checks = [
            (self.t_end > 0 and self.dt > 0, "t_end and dt must be positive"),
            (abs(round(self.t_end / self.dt) * self.dt - self.t_end) <= 1e-9 * self.t_end,
             "t_end must be a multiple of dt"),
            (self.n_train >= 2 and self.n_test >= 2, "need at least 2 train and test points"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.lr > 0 and math.isfinite(self.lr), "lr must be positive"),
            (len(self.c_proposed) == 4 and len(self.c_baseline) == 4, "C weights need 4 entries"),
            (tuple(map(float, self.c_baseline)) == (0.0, 0.0, 1.0, 0.0),
             "baseline C weights must be (0, 0, 1, 0)"),
            (len(self.hidden) >= 1 and all(int(h) > 0 for h in self.hidden), "bad hidden sizes"),
            (self.bo_iterations >= self.bo_init >= 1, "need bo_iterations >= bo_init >= 1"),
            (0 <= self.bo_lo < self.bo_hi, "need 0 <= bo_lo < bo_hi"),
            (self.bo_xi >= 0, "bo_xi must be >= 0"),
            (self.bo_transform in TRANSFORMS, f"bo_transform must be one of {TRANSFORMS}"),
            (self.i_floor > 0, "i_floor must be positive"),
            (self.epsilon_forward is None or self.epsilon_forward > 0, "epsilon_forward must be > 0"),
            (math.isfinite(self.epsilon_initial), "epsilon_initial must be finite"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @property
    def params(self) -> EpiParams:
        return EpiParams(self.beta, self.epsilon_true, self.gamma)

    @property
    def init(self) -> SeirState:
        return SeirState(self.s0, self.e0, self.i0, self.r0)

    def weights(self, mode: str) -> LossWeights:
        c = self.c_proposed if mode == "proposed" else self.c_baseline
        return LossWeights(*map(float, c), self.lambda_data, self.lambda_eq, self.lambda_init)

    @property
    def box(self) -> tuple:
        return (self.bo_lo, self.bo_hi)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("hidden", "c_proposed", "c_baseline"):
            d[k] = list(d[k])
        return d

    def override(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return coerce(replace(self, **kw))


_FIELDS = {f.name: f for f in fields(RunConfig)}


def coerce(cfg: RunConfig) -> RunConfig:
    values = {}
    for name, f in _FIELDS.items():
        v = getattr(cfg, name)
        default = f.default
        try:
            if isinstance(default, tuple):
                v = tuple(int(x) if name == "hidden" else float(x) for x in v)
            elif isinstance(default, bool):
                v = bool(v)
            elif isinstance(default, int):
                if isinstance(v, float) and not v.is_integer():
                    raise ValueError(f"{v} is not an integer")
                v = int(v)
            elif isinstance(default, float) or (name == "epsilon_forward" and v is not None):
                v = float(v)
            elif isinstance(default, str):
                v = str(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {v!r} ({exc})") from exc
        values[name] = v
    return RunConfig(**values)


def load_config(path: Optional[str | Path]) -> RunConfig:
    """Read a flat TOML file of ``key = value`` pairs over the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return coerce(replace(RunConfig(), **data))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if v is None:
            continue
        if isinstance(v, str):
            lines.append(f'{k} = "{v}"')
        elif isinstance(v, list):
            lines.append(f"{k} = [{', '.join(repr(x) for x in v)}]")
        else:
            lines.append(f"{k} = {v!r}")
    return "\n".join(lines) + "\n"
