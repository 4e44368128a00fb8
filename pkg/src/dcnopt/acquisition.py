"""Trial splitting and next-candidate selection.

Completed trials are split at an error quantile into a good set (the
lowest ``max(1, ceil(gamma * t))`` errors) and a bad set.  Two scoring
rules rank uniformly drawn candidates:

* the density-ratio score ``e* * g_ratio`` with
  ``g_ratio = gamma*l / (gamma*l + (1-gamma)*g)``, evaluated stably from
  log-densities;
* a simplified score that ranks by the good-set log-density alone (any
  positive prefactor cannot change an argmax).

:func:`propose_next` mixes the two: with probability ``p_hybrid`` it uses
the ratio rule, otherwise the simplified rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import DensityModel
from .space import Assignment, SearchSpace, log_uniform_density, sample_uniform
from .store import BRANCH_SIMPLIFIED, BRANCH_TPE, Trial, TrialDatabase

__all__ = [
    "AcquisitionConfig",
    "SplitResult",
    "split_trials",
    "score_tpe",
    "score_simplified",
    "propose_next",
]


@dataclass(frozen=True)
class AcquisitionConfig:
    gamma: float = 0.5
    p_hybrid: float = 0.9
    n_candidates: int = 64

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.p_hybrid <= 1.0:
            raise ValueError(f"p_hybrid must be in [0, 1], got {self.p_hybrid}")
        if self.n_candidates < 1:
            raise ValueError(f"n_candidates must be >= 1, got {self.n_candidates}")


@dataclass(frozen=True)
class SplitResult:
    """Good/bad partition of the trials at the error quantile ``e_star``."""

    e_star: float
    good: tuple[Trial, ...]
    bad: tuple[Trial, ...]
    gamma: float


def _trials_of(db: TrialDatabase | Sequence[Trial]) -> list[Trial]:
    return list(db.trials) if isinstance(db, TrialDatabase) else list(db)


def split_trials(db: TrialDatabase | Sequence[Trial], gamma: float) -> SplitResult:
    """Sort by (error, id) and cut after ``max(1, ceil(gamma * t))`` trials.

    ``e_star`` is the largest error in the good set.
    """
    trials = _trials_of(db)
    if not trials:
        raise ValueError("cannot split an empty trial database")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    ranked = sorted(trials, key=lambda t: (t.error, t.id))
    n_good = max(1, math.ceil(gamma * len(ranked)))
    good, bad = ranked[:n_good], ranked[n_good:]
    return SplitResult(e_star=good[-1].error, good=tuple(good), bad=tuple(bad), gamma=gamma)


def score_tpe(l_log: float, g_log: float, e_star: float, gamma: float) -> float:
    """Ratio score ``e* * gamma*l / (gamma*l + (1-gamma)*g)`` from log inputs."""
    m = max(l_log, g_log)
    lw = gamma * math.exp(l_log - m)
    gw = (1.0 - gamma) * math.exp(g_log - m)
    return e_star * lw / (lw + gw)


def score_simplified(l_log: float) -> float:
    """Rank by the good-set log-density itself (monotone surrogate)."""
    return l_log


def _argmax_first(scores: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def propose_next(
    db: TrialDatabase | Sequence[Trial],
    space: SearchSpace,
    cfg: AcquisitionConfig,
    rng: np.random.Generator,
) -> tuple[Assignment, str]:
    """Pick the next assignment and report which branch chose it.

    Draw order is fixed for reproducibility: one uniform variate selects
    the branch, then ``n_candidates`` uniform assignments are drawn.  With
    probability ``p_hybrid`` candidates are ranked by :func:`score_tpe`
    (an empty bad set falls back to the uniform prior for g); otherwise by
    :func:`score_simplified`.  Score ties keep the lowest candidate index.
    """
    trials = _trials_of(db)
    if not trials:
        raise ValueError("cannot propose from an empty trial database")
    use_ratio = rng.random() < cfg.p_hybrid
    split = split_trials(trials, cfg.gamma)
    l_model = DensityModel.fit(space, [t.assignment for t in split.good])
    candidates = [sample_uniform(space, rng) for _ in range(cfg.n_candidates)]
    if use_ratio:
        g_model = DensityModel.fit(space, [t.assignment for t in split.bad]) if split.bad else None
        scores = []
        for a in candidates:
            l_log = l_model.log_density(a)
            g_log = g_model.log_density(a) if g_model else log_uniform_density(space, a)
            scores.append(score_tpe(l_log, g_log, split.e_star, cfg.gamma))
        return candidates[_argmax_first(scores)], BRANCH_TPE
    scores = [score_simplified(l_model.log_density(a)) for a in candidates]
    return candidates[_argmax_first(scores)], BRANCH_SIMPLIFIED
