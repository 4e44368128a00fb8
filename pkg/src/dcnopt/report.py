"""Convergence statistics over a trial database.

For each iteration i: the mean and population standard deviation of the
errors in the trailing window of ``min(i + 1, window)`` trials, the
running minimum error, and the branch tag of trial i.  The CSV rendering
uses ``repr`` floats, so values round-trip through text exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

from .store import TrialDatabase

__all__ = ["CurvePoint", "compute_curves", "curves_to_csv"]

CSV_HEADER = "i,mean,std,min,branch"


@dataclass(frozen=True)
class CurvePoint:
    iteration: int
    mean: float
    std: float
    minimum: float
    branch: str


def compute_curves(db: TrialDatabase, window: int = 10) -> list[CurvePoint]:
    """One point per trial; running min is non-increasing by construction."""
    if not db.trials:
        raise ValueError("cannot compute curves for an empty database")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    points: list[CurvePoint] = []
    running_min = float("inf")
    errors = db.errors()
    for i, trial in enumerate(db.trials):
        running_min = min(running_min, errors[i])
        tail = errors[max(0, i + 1 - window): i + 1]
        mean = sum(tail) / len(tail)
        std = (sum((e - mean) ** 2 for e in tail) / len(tail)) ** 0.5
        points.append(
            CurvePoint(iteration=i, mean=mean, std=std, minimum=running_min, branch=trial.branch)
        )
    return points


def curves_to_csv(points: list[CurvePoint]) -> str:
    lines = [CSV_HEADER]
    for p in points:
        lines.append(f"{p.iteration},{p.mean!r},{p.std!r},{p.minimum!r},{p.branch}")
    return "\n".join(lines) + "\n"
