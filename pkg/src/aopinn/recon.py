"""Pseudo-observations of the unobserved compartments from I and its derivatives.

With only I observed, E and S follow from the model equations:

    E = (I' + gamma I) / eps
    S = (I'' + (eps + gamma) I' + eps gamma I) / (beta eps I)

and R is the complement 1 - (S + E + I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, SingularityError
from .seir import ObservationSet

I_FLOOR = 1e-12


@dataclass(frozen=True)
class ReconConfig:
    epsilon_candidate: float
    beta: float
    gamma: float
    i_floor: float = I_FLOOR

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise DomainError("beta and gamma must be positive")
        if not self.i_floor > 0:
            raise DomainError("i_floor must be positive")


def reconstruct(obs: ObservationSet, cfg: ReconConfig) -> ObservationSet:
    eps = cfg.epsilon_candidate
    if not (math.isfinite(eps) and eps > 0):
        raise DomainError(f"epsilon candidate must be positive, got {eps}")
    i = np.asarray(obs.i_obs, dtype=float)
    di = np.asarray(obs.i_dot, dtype=float)
    ddi = np.asarray(obs.i_ddot, dtype=float)
    small = np.flatnonzero(np.abs(i) < cfg.i_floor)
    if small.size:
        k = int(small[0])
        raise SingularityError(
            f"|I| = {abs(i[k]):.3g} below floor {cfg.i_floor:g} at point {k} (t={obs.times[k]:g})"
        )
    b, g = cfg.beta, cfg.gamma
    e = (di + g * i) / eps
    s = (ddi + (eps + g) * di + eps * g * i) / (b * eps * i)
    r = 1.0 - (s + e + i)
    return replace(obs, pseudo_s=s, pseudo_e=e, pseudo_r=r)
