"""Objective evaluators: analytic surrogate surfaces and external commands.

The surrogate is a deterministic response surface over a search space:
each numeric parameter contributes a weighted squared distance to a
hidden optimum (normalized by its domain width), each categorical one a
penalty table lookup, plus an optional seeded Gaussian noise term; the
sum is clamped to ``[0, 1]``.  Hidden optima are exactly recoverable by
enumeration on small spaces, which makes surrogate runs desk-checkable.

External protocol (one child process per evaluation): the child receives
a single JSON document on stdin, ``{"trial_id": ..., "assignment": ...,
"config_path": ...}``, and must print exactly one decimal number in
``[0, 1]`` on stdout.  Exit code 0 plus a parseable number means ``ok``;
anything else (non-zero exit, unparseable output, timeout) yields a
``failed`` result with error 1.0 and captured diagnostics.  A command
that cannot be spawned at all raises :class:`EvaluatorError` and aborts
the run.  The environment carries ``TRIAL_ID`` and ``RUN_DIR``.
"""
from __future__ import annotations

import json
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .dcn import InvalidArchitecture, decode
from .space import Assignment, SearchSpace, SpaceError, validate
from .store import STATUS_FAILED, STATUS_INVALID_ARCH, STATUS_OK

__all__ = [
    "EvaluationResult",
    "EvaluatorError",
    "SurfaceSpec",
    "SurrogateEvaluator",
    "ExternalEvaluator",
    "ArchValidityGate",
    "eval_surrogate",
    "eval_external",
]


class EvaluatorError(Exception):
    """Hard evaluator fault (e.g. the command cannot be spawned)."""


@dataclass(frozen=True)
class EvaluationResult:
    error: float
    status: str = STATUS_OK
    wall_time: float = 0.0
    detail: str = ""

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise ValueError(f"error {self.error} outside [0, 1]")
        if self.status != STATUS_OK and self.error != 1.0:
            raise ValueError("non-ok results must carry error 1.0")


@dataclass(frozen=True)
class SurfaceSpec:
    """Analytic response surface over ``space``.

    ``numeric_targets`` maps parameter names to (target, weight);
    ``categorical_penalties`` maps names to per-value penalty tables
    (absent values penalize 0).  Inactive parameters contribute nothing.
    """

    space: SearchSpace
    floor: float = 0.0
    numeric_targets: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    categorical_penalties: Mapping[str, Mapping[Any, float]] = field(default_factory=dict)
    noise_sigma: float = 0.0

    def error_at(self, assignment: Mapping[str, Any]) -> float:
        """Noise-free surface value, clamped to [0, 1]."""
        total = self.floor
        for name, value in assignment.items():
            if name in self.numeric_targets:
                target, weight = self.numeric_targets[name]
                spec = self.space.param(name)
                width = spec.hi - spec.lo
                if spec.kind == "integer":
                    width += 1
                total += weight * ((value - target) / width) ** 2
            elif name in self.categorical_penalties:
                table = self.categorical_penalties[name]
                for choice, penalty in table.items():
                    if choice == value:
                        total += penalty
                        break
        return min(1.0, max(0.0, total))

    @classmethod
    def default_for_space(cls, space: SearchSpace, seed: int = 0) -> "SurfaceSpec":
        """A reproducible surface with a hidden optimum derived from ``seed``."""
        rng = np.random.default_rng([seed, len(space)])
        weight = 1.0 / max(1, len(space))
        numeric: dict[str, tuple[float, float]] = {}
        categorical: dict[str, dict[Any, float]] = {}
        for spec in space:
            if spec.kind in ("integer", "real"):
                numeric[spec.name] = (spec.sample(rng), weight)
            else:
                best = spec.sample(rng)
                categorical[spec.name] = {
                    c: 0.0 if c == best else weight for c in spec.choices
                }
        return cls(
            space=space,
            floor=0.05,
            numeric_targets=numeric,
            categorical_penalties=categorical,
        )


def eval_surrogate(
    assignment: Assignment,
    surface: SurfaceSpec,
    rng: np.random.Generator | None = None,
) -> EvaluationResult:
    """Score an assignment on the surface; bit-deterministic at sigma = 0."""
    problems = validate(surface.space, assignment)
    if problems:
        raise SpaceError("invalid assignment: " + "; ".join(problems))
    start = time.monotonic()
    error = surface.error_at(assignment)
    if surface.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("a generator is required when noise_sigma > 0")
        error = min(1.0, max(0.0, error + surface.noise_sigma * float(rng.standard_normal())))
    return EvaluationResult(error=error, wall_time=time.monotonic() - start)


def _failed(detail: str, wall_time: float) -> EvaluationResult:
    return EvaluationResult(error=1.0, status=STATUS_FAILED, wall_time=wall_time, detail=detail)


def eval_external(
    assignment: Assignment,
    cmd: str | Sequence[str],
    timeout: float = 86_400.0,
    *,
    trial_id: int = 0,
    run_dir: str | Path | None = None,
    config_path: str | Path | None = None,
) -> EvaluationResult:
    """Run one child evaluation following the stdin/stdout protocol.

    ``cmd`` is an argv sequence or a shell-style string (split without a
    shell).  See the module docstring for the protocol and failure rules.
    """
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    payload = json.dumps(
        {
            "trial_id": trial_id,
            "assignment": dict(assignment),
            "config_path": str(config_path) if config_path is not None else None,
        },
        sort_keys=True,
    )
    env = dict(os.environ)
    env["TRIAL_ID"] = str(trial_id)
    env["RUN_DIR"] = str(run_dir) if run_dir is not None else os.getcwd()
    start = time.monotonic()
    try:
        proc = subprocess.run(
            argv,
            input=payload,
            capture_output=True,
            text=True,
            timeout=timeout,
            env=env,
        )
    except subprocess.TimeoutExpired:
        return _failed(f"timeout after {timeout}s", time.monotonic() - start)
    except (FileNotFoundError, PermissionError, OSError) as e:
        raise EvaluatorError(f"cannot spawn {argv[0]!r}: {e}") from e
    wall = time.monotonic() - start
    stderr_tail = proc.stderr.strip()[-500:]
    if proc.returncode != 0:
        return _failed(f"exit code {proc.returncode}; stderr: {stderr_tail}", wall)
    tokens = proc.stdout.split()
    if len(tokens) != 1:
        return _failed(f"expected one number on stdout, got {proc.stdout!r:.200}", wall)
    try:
        error = float(tokens[0])
    except ValueError:
        return _failed(f"unparseable stdout {tokens[0]!r}", wall)
    if not 0.0 <= error <= 1.0:
        return _failed(f"reported error {error} outside [0, 1]", wall)
    return EvaluationResult(error=error, wall_time=wall, detail="")


class SurrogateEvaluator:
    """Callable wrapper binding a surface, for use with the run loop."""

    def __init__(self, surface: SurfaceSpec):
        self.surface = surface

    def __call__(
        self,
        assignment: Assignment,
        *,
        trial_id: int = 0,
        rng: np.random.Generator | None = None,
    ) -> EvaluationResult:
        return eval_surrogate(assignment, self.surface, rng)


class ArchValidityGate:
    """Scores undecodable genomes as ``invalid-arch`` with error 1.0.

    Decodable assignments pass through to the inner evaluator untouched.
    Keeping invalid genomes in the database (rather than resampling) lets
    the fitted densities learn to avoid the broken regions.
    """

    def __init__(self, inner, space: SearchSpace):
        self.inner = inner
        self.space = space

    def __call__(
        self,
        assignment: Assignment,
        *,
        trial_id: int = 0,
        rng: np.random.Generator | None = None,
    ) -> EvaluationResult:
        arch = decode(self.space, assignment)
        if isinstance(arch, InvalidArchitecture):
            return EvaluationResult(error=1.0, status=STATUS_INVALID_ARCH, detail=arch.reason)
        return self.inner(assignment, trial_id=trial_id, rng=rng)


class ExternalEvaluator:
    """Callable wrapper binding a command, timeout and optional exporter.

    ``exporter(assignment, trial_id)`` may produce a config file path for
    the child, or an :class:`~dcnopt.dcn.InvalidArchitecture`, which is
    reported as an ``invalid-arch`` result without spawning anything.
    """

    def __init__(
        self,
        cmd: str | Sequence[str],
        timeout: float = 86_400.0,
        run_dir: str | Path | None = None,
        exporter: Callable[[Assignment, int], Path | InvalidArchitecture] | None = None,
    ):
        self.cmd = cmd
        self.timeout = timeout
        self.run_dir = run_dir
        self.exporter = exporter

    def __call__(
        self,
        assignment: Assignment,
        *,
        trial_id: int = 0,
        rng: np.random.Generator | None = None,
    ) -> EvaluationResult:
        config_path = None
        if self.exporter is not None:
            out = self.exporter(assignment, trial_id)
            if isinstance(out, InvalidArchitecture):
                return EvaluationResult(
                    error=1.0, status=STATUS_INVALID_ARCH, detail=out.reason
                )
            config_path = out
        return eval_external(
            assignment,
            self.cmd,
            self.timeout,
            trial_id=trial_id,
            run_dir=self.run_dir,
            config_path=config_path,
        )
