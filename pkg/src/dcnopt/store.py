"""Append-only, line-delimited JSON persistence for optimization runs.

File layout (UTF-8, LF line endings):

    line 1      header object: {"format_version": 1, "space_name": ...,
                "space_version": ..., "master_seed": ..., "config_digest": ...}
    lines 2..   one trial object per line, ids dense from 0

Records are serialized canonically (sorted keys, no whitespace), so runs
with equal seeds and deterministic evaluators produce byte-identical
files.  Appends are flushed and fsynced before they are acknowledged.  A
trailing line without its newline is a crash artifact: it is rejected by
default and dropped (with a warning) when loading with ``recover=True``.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .space import Assignment

__all__ = [
    "Trial",
    "RunHeader",
    "TrialDatabase",
    "TrialStore",
    "StoreError",
    "load",
    "STATUS_OK",
    "STATUS_FAILED",
    "STATUS_INVALID_ARCH",
    "BRANCH_RANDOM",
    "BRANCH_TPE",
    "BRANCH_SIMPLIFIED",
]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_INVALID_ARCH = "invalid-arch"
_STATUSES = (STATUS_OK, STATUS_FAILED, STATUS_INVALID_ARCH)

BRANCH_RANDOM = "random"
BRANCH_TPE = "tpe"
BRANCH_SIMPLIFIED = "simplified"
_BRANCHES = (BRANCH_RANDOM, BRANCH_TPE, BRANCH_SIMPLIFIED)


class StoreError(Exception):
    """Unusable store file or contract violation on append."""


@dataclass(frozen=True)
class Trial:
    """One evaluated assignment."""

    id: int
    assignment: Assignment
    error: float
    status: str = STATUS_OK
    branch: str = BRANCH_RANDOM
    seed: int = 0
    detail: str = ""

    def __post_init__(self):
        if not 0.0 <= self.error <= 1.0:
            raise StoreError(f"trial {self.id}: error {self.error} outside [0, 1]")
        if self.status not in _STATUSES:
            raise StoreError(f"trial {self.id}: unknown status {self.status!r}")
        if self.branch not in _BRANCHES:
            raise StoreError(f"trial {self.id}: unknown branch {self.branch!r}")


@dataclass(frozen=True)
class RunHeader:
    space_name: str
    space_version: int
    master_seed: int
    config_digest: str
    format_version: int = FORMAT_VERSION


@dataclass
class TrialDatabase:
    """A run header plus its ordered trials (ids dense from 0)."""

    header: RunHeader
    trials: list[Trial] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    def errors(self) -> list[float]:
        return [t.error for t in self.trials]

    def best(self, k: int = 1) -> list[Trial]:
        """Lowest-error trials, ties broken by ascending id."""
        return sorted(self.trials, key=lambda t: (t.error, t.id))[:k]


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _trial_to_doc(trial: Trial) -> dict:
    return {
        "id": trial.id,
        "assignment": trial.assignment,
        "error": trial.error,
        "status": trial.status,
        "branch": trial.branch,
        "seed": trial.seed,
        "detail": trial.detail,
    }


_TRIAL_FIELDS = {f.name for f in fields(Trial)}


def _trial_from_doc(doc: Any, lineno: int) -> Trial:
    if not isinstance(doc, dict) or set(doc) != _TRIAL_FIELDS:
        raise StoreError(f"line {lineno}: not a trial record")
    try:
        return Trial(**doc)
    except (TypeError, StoreError) as e:
        raise StoreError(f"line {lineno}: {e}") from None


def _header_from_doc(doc: Any) -> RunHeader:
    expected = {f.name for f in fields(RunHeader)}
    if not isinstance(doc, dict) or set(doc) != expected:
        raise StoreError("line 1: not a run header")
    header = RunHeader(**doc)
    if header.format_version != FORMAT_VERSION:
        raise StoreError(f"unsupported format_version {header.format_version}")
    return header


def load(
    path: str | Path,
    recover: bool = False,
    expected_header: RunHeader | None = None,
) -> TrialDatabase:
    """Parse a store file into a :class:`TrialDatabase`.

    A malformed non-trailing line is a hard error carrying its line
    number.  A trailing record without its newline is rejected unless
    ``recover`` is set, in which case it is dropped with a warning.  When
    ``expected_header`` is given, any mismatch is an error.
    """
    path = Path(path)
    if not path.exists():
        raise StoreError(f"{path}: no such store file")
    raw = path.read_text(encoding="utf-8")
    if raw == "":
        raise StoreError(f"{path}: missing header")
    lines = raw.split("\n")
    unterminated = lines.pop()  # "" when the file ends with a newline
    if not lines:
        raise StoreError(f"{path}: missing header")
    if unterminated:
        lineno = len(lines) + 1
        if lineno == 1:
            raise StoreError(f"{path}: missing header")
        if not recover:
            raise StoreError(
                f"{path}: truncated record at line {lineno} (pass recover to drop it)"
            )
        logger.warning("%s: dropping truncated record at line %d", path, lineno)
    try:
        header = _header_from_doc(json.loads(lines[0]))
    except json.JSONDecodeError:
        raise StoreError(f"{path}: line 1: invalid JSON in header") from None
    if expected_header is not None and header != expected_header:
        raise StoreError(f"{path}: header mismatch: found {header}, expected {expected_header}")
    trials: list[Trial] = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            raise StoreError(f"{path}: line {i}: invalid JSON") from None
        trial = _trial_from_doc(doc, i)
        if trial.id != len(trials):
            raise StoreError(f"{path}: line {i}: trial id {trial.id}, expected {len(trials)}")
        trials.append(trial)
    return TrialDatabase(header=header, trials=trials)


class TrialStore:
    """Durable append-only writer bound to one store file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._count: int | None = None
        self._tail_repaired = False

    def exists(self) -> bool:
        return self.path.exists() and self.path.stat().st_size > 0

    def initialize(self, header: RunHeader) -> None:
        """Write the header of a fresh store; refuses to clobber data."""
        if self.exists():
            raise StoreError(f"{self.path}: already initialized")
        self._write(_dumps(_header_doc(header)))
        self._count = 0

    def load(self, recover: bool = False, expected_header: RunHeader | None = None) -> TrialDatabase:
        db = load(self.path, recover=recover, expected_header=expected_header)
        self._count = len(db.trials)
        return db

    def append(self, trial: Trial) -> None:
        """Durably append one trial; its id must equal the current count."""
        if self._count is None:
            if not self.exists():
                raise StoreError(f"{self.path}: store not initialized")
            self._count = len(load(self.path).trials)
        if trial.id != self._count:
            raise StoreError(f"append out of order: trial id {trial.id}, expected {self._count}")
        self._write(_dumps(_trial_to_doc(trial)))
        self._count += 1

    def _write(self, line: str) -> None:
        if not self._tail_repaired:
            self._repair_tail()
            self._tail_repaired = True
        with open(self.path, "a", encoding="utf-8", newline="\n") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    def _repair_tail(self) -> None:
        # Drop unterminated trailing bytes left by a crash before appending;
        # only reachable after an explicit recover-load (a plain load raises).
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if not data or data.endswith(b"\n"):
            return
        keep = data.rfind(b"\n") + 1
        with open(self.path, "r+b") as f:
            f.truncate(keep)
            f.flush()
            os.fsync(f.fileno())


def _header_doc(header: RunHeader) -> dict:
    return {
        "format_version": header.format_version,
        "space_name": header.space_name,
        "space_version": header.space_version,
        "master_seed": header.master_seed,
        "config_digest": header.config_digest,
    }
