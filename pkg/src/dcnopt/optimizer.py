"""The sequential optimization loop with durable, resumable state.

The first ``t_init`` trials are uniform draws; every later trial comes
from :func:`~dcnopt.acquisition.propose_next` over all prior trials.
Each trial is persisted (flushed) before the next proposal, so a crash
loses at most the in-flight evaluation and :func:`resume` continues a
partial run to an end state byte-identical with an uninterrupted one.

Determinism: every trial gets its own generator streams derived from
``(master_seed, trial_id)``, one for proposing and one for evaluating,
so replay never depends on how much of the run already happened.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import acquisition
from .acquisition import AcquisitionConfig
from .space import Assignment, SearchSpace, sample_uniform, space_to_json
from .store import (
    BRANCH_RANDOM,
    RunHeader,
    StoreError,
    Trial,
    TrialDatabase,
    TrialStore,
)

__all__ = ["OptimizerConfig", "RunState", "run_optimizer", "resume", "config_digest"]

logger = logging.getLogger(__name__)

_PROPOSE_STREAM = 0
_EVAL_STREAM = 1


class Evaluator(Protocol):
    def __call__(
        self, assignment: Assignment, *, trial_id: int, rng: np.random.Generator
    ) -> "object": ...


@dataclass(frozen=True)
class OptimizerConfig:
    n_total: int
    t_init: int = 32
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    master_seed: int = 0

    def __post_init__(self):
        if self.t_init < 1:
            raise ValueError(f"t_init must be >= 1, got {self.t_init}")
        if self.n_total < self.t_init:
            raise ValueError(f"n_total {self.n_total} must be >= t_init {self.t_init}")


@dataclass
class RunState:
    """Progress snapshot: the database plus the derived iteration counter."""

    db: TrialDatabase

    @property
    def iteration(self) -> int:
        return len(self.db.trials)


def config_digest(space: SearchSpace, cfg: OptimizerConfig) -> str:
    """Fingerprint of everything a resumed run must not silently change.

    Covers the space content and the acquisition/seeding configuration,
    but not ``n_total``: extending a finished run is legitimate.
    """
    doc = {
        "space": space_to_json(space),
        "t_init": cfg.t_init,
        "gamma": cfg.acquisition.gamma,
        "p_hybrid": cfg.acquisition.p_hybrid,
        "n_candidates": cfg.acquisition.n_candidates,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def run_header(space: SearchSpace, cfg: OptimizerConfig) -> RunHeader:
    return RunHeader(
        space_name=space.name,
        space_version=space.version,
        master_seed=cfg.master_seed,
        config_digest=config_digest(space, cfg),
    )


def _stream_rng(master_seed: int, trial_id: int, stream: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_id, stream))
    return np.random.default_rng(seq)


def _trial_seed(master_seed: int, trial_id: int) -> int:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_id,))
    return int(seq.generate_state(1, np.uint64)[0])


def _advance(
    space: SearchSpace,
    evaluator: Evaluator,
    cfg: OptimizerConfig,
    store: TrialStore,
    db: TrialDatabase,
) -> TrialDatabase:
    while len(db.trials) < cfg.n_total:
        trial_id = len(db.trials)
        propose_rng = _stream_rng(cfg.master_seed, trial_id, _PROPOSE_STREAM)
        if trial_id < cfg.t_init:
            assignment, branch = sample_uniform(space, propose_rng), BRANCH_RANDOM
        else:
            assignment, branch = acquisition.propose_next(
                db, space, cfg.acquisition, propose_rng
            )
        result = evaluator(
            assignment,
            trial_id=trial_id,
            rng=_stream_rng(cfg.master_seed, trial_id, _EVAL_STREAM),
        )
        trial = Trial(
            id=trial_id,
            assignment=assignment,
            error=result.error,
            status=result.status,
            branch=branch,
            seed=_trial_seed(cfg.master_seed, trial_id),
            detail=result.detail,
        )
        store.append(trial)
        db.trials.append(trial)
        logger.info(
            "trial %d/%d: branch=%s status=%s error=%.4f",
            trial_id + 1, cfg.n_total, branch, trial.status, trial.error,
        )
    return db


def run_optimizer(
    space: SearchSpace,
    evaluator: Evaluator,
    cfg: OptimizerConfig,
    store: TrialStore,
) -> TrialDatabase:
    """Execute a fresh run of ``cfg.n_total`` trials into an empty store.

    An evaluator exception aborts the loop; everything already appended
    stays on disk and the run can be continued with :func:`resume`.
    """
    if store.exists():
        raise StoreError(f"{store.path}: already contains a run, use resume()")
    header = run_header(space, cfg)
    store.initialize(header)
    return _advance(space, evaluator, cfg, store, TrialDatabase(header=header))


def resume(
    space: SearchSpace,
    evaluator: Evaluator,
    cfg: OptimizerConfig,
    store: TrialStore,
    recover: bool = False,
) -> TrialDatabase:
    """Continue a persisted run up to ``cfg.n_total`` trials.

    Refuses stores whose header does not match the given space and
    configuration (name, version, master seed, config digest).  Resuming
    an already-complete run is a no-op that returns the database.
    """
    db = store.load(recover=recover, expected_header=run_header(space, cfg))
    if len(db.trials) > cfg.n_total:
        raise StoreError(
            f"{store.path}: run already has {len(db.trials)} trials, more than n_total={cfg.n_total}"
        )
    return _advance(space, evaluator, cfg, store, db)
