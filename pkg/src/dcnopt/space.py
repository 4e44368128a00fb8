"""Conditional mixed-type parameter spaces with uniform sampling.

A :class:`SearchSpace` is an ordered collection of parameters.  Each
parameter is categorical, integer, real or boolean and may carry an
activation condition on a single parent parameter: the child is *active*
only while the parent is active and equal to one required value.  An
assignment maps exactly the active parameter names to values; children of
an inactive parent are absent rather than null.

Integer bounds are inclusive; real intervals are sampled half-open
``[lo, hi)`` so that interval lengths (and hence uniform densities) are
well defined.  Spaces round-trip through a small JSON document format,
see :func:`load_space`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

__all__ = [
    "Assignment",
    "Condition",
    "ParamSpec",
    "SearchSpace",
    "SpaceError",
    "SpaceFormatError",
    "validate",
    "sample_uniform",
    "log_uniform_density",
    "space_to_json",
    "space_from_json",
    "load_space",
]

# One concrete setting of the active parameters: name -> value.
Assignment = dict[str, Any]

_KINDS = ("categorical", "integer", "real", "boolean")


class SpaceError(ValueError):
    """Malformed space definition or assignment."""


class SpaceFormatError(SpaceError):
    """Schema violation in a space document; ``where`` locates the element."""

    def __init__(self, message: str, where: str = "$"):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Condition:
    """Activation gate: active iff ``parent`` is active and equals ``equals``."""

    parent: str
    equals: Any


@dataclass(frozen=True)
class ParamSpec:
    """One parameter: a name, a domain and an optional activation condition.

    kind:
        ``categorical`` -- ordered ``choices`` (at least one, all distinct);
        ``integer``     -- inclusive bounds ``[lo, hi]``;
        ``real``        -- half-open interval ``[lo, hi)`` with ``lo < hi``;
        ``boolean``     -- fixed domain ``(False, True)``.
    """

    name: str
    kind: str
    lo: int | float | None = None
    hi: int | float | None = None
    choices: tuple[Any, ...] | None = None
    condition: Condition | None = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise SpaceError("parameter name must be a non-empty string")
        if self.kind not in _KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if self.lo is not None or self.hi is not None:
                raise SpaceError(f"{self.name}: categorical takes no bounds")
            if not self.choices:
                raise SpaceError(f"{self.name}: categorical needs at least one choice")
            choices = tuple(self.choices)
            if len({_choice_key(c) for c in choices}) != len(choices):
                raise SpaceError(f"{self.name}: categorical choices must be distinct")
            object.__setattr__(self, "choices", choices)
        elif self.kind == "boolean":
            if self.lo is not None or self.hi is not None or self.choices is not None:
                raise SpaceError(f"{self.name}: boolean takes no bounds or choices")
            object.__setattr__(self, "choices", (False, True))
        else:
            if self.choices is not None:
                raise SpaceError(f"{self.name}: numeric kinds take no choices")
            if self.lo is None or self.hi is None:
                raise SpaceError(f"{self.name}: numeric kinds need lo and hi")
            if self.kind == "integer":
                if isinstance(self.lo, bool) or isinstance(self.hi, bool) or (
                    not isinstance(self.lo, int) or not isinstance(self.hi, int)
                ):
                    raise SpaceError(f"{self.name}: integer bounds must be ints")
                if self.lo > self.hi:
                    raise SpaceError(f"{self.name}: lo {self.lo} > hi {self.hi}")
            else:
                lo, hi = float(self.lo), float(self.hi)
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    raise SpaceError(f"{self.name}: real bounds must be finite")
                if lo >= hi:
                    # A real interval [lo, hi) with lo >= hi is empty.
                    raise SpaceError(f"{self.name}: real interval needs lo < hi")
                object.__setattr__(self, "lo", lo)
                object.__setattr__(self, "hi", hi)

    def domain_contains(self, value: Any) -> bool:
        if self.kind == "categorical":
            return any(value == c for c in self.choices)
        if self.kind == "boolean":
            return isinstance(value, bool)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        if self.kind == "integer":
            return isinstance(value, int) and self.lo <= value <= self.hi
        return self.lo <= value <= self.hi

    def domain_text(self) -> str:
        if self.kind in ("categorical", "boolean"):
            return "{" + ", ".join(repr(c) for c in self.choices) + "}"
        return f"[{self.lo}, {self.hi}]"

    def log_domain_size(self) -> float:
        """log of the choice count (categorical/boolean/integer) or interval length."""
        if self.kind in ("categorical", "boolean"):
            return math.log(len(self.choices))
        if self.kind == "integer":
            return math.log(self.hi - self.lo + 1)
        return math.log(self.hi - self.lo)

    def sample(self, rng: np.random.Generator) -> Any:
        """One uniform draw from the domain, returned as a plain Python scalar."""
        if self.kind == "categorical":
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.kind == "boolean":
            return bool(rng.integers(2))
        if self.kind == "integer":
            return int(rng.integers(self.lo, self.hi + 1))
        return float(rng.uniform(self.lo, self.hi))


def _choice_key(c: Any) -> tuple:
    # bool is an int subclass; keep False distinct from 0 in duplicate checks.
    return (type(c).__name__, c)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered, immutable collection of :class:`ParamSpec`.

    Iteration follows declaration order.  Conditions must reference earlier
    or later parameters without forming cycles; sampling and activation
    internally use a parent-first order.
    """

    name: str
    params: tuple[ParamSpec, ...]
    version: int = 1

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SpaceError(f"duplicate parameter names: {', '.join(dup)}")
        by_name = {p.name: p for p in self.params}
        for p in self.params:
            if p.condition is None:
                continue
            parent = by_name.get(p.condition.parent)
            if parent is None:
                raise SpaceError(f"{p.name}: condition parent {p.condition.parent!r} not defined")
            if parent.name == p.name:
                raise SpaceError(f"{p.name}: condition on itself")
            if not parent.domain_contains(p.condition.equals):
                raise SpaceError(
                    f"{p.name}: condition value {p.condition.equals!r} "
                    f"not in domain of {parent.name}"
                )
        # Single-parent edges: a cycle shows up as a revisit on the parent chain.
        depth: dict[str, int] = {}

        def chain_depth(name: str, visiting: frozenset[str]) -> int:
            if name in depth:
                return depth[name]
            if name in visiting:
                raise SpaceError(f"condition cycle through {name!r}")
            spec = by_name[name]
            d = 0
            if spec.condition is not None:
                d = chain_depth(spec.condition.parent, visiting | {name}) + 1
            depth[name] = d
            return d

        for p in self.params:
            chain_depth(p.name, frozenset())
        object.__setattr__(self, "_by_name", by_name)
        order = sorted(range(len(self.params)), key=lambda i: (depth[names[i]], i))
        object.__setattr__(self, "_topo", tuple(self.params[i] for i in order))

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def param(self, name: str) -> ParamSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise SpaceError(f"no parameter named {name!r}") from None

    def topological(self) -> tuple[ParamSpec, ...]:
        """Parameters ordered parents-first (ties by declaration order)."""
        return self._topo

    def active_params(self, values: Mapping[str, Any]) -> list[ParamSpec]:
        """Parameters active under ``values``, in declaration order.

        Roots are always active; a conditioned parameter is active when its
        parent is active and carries the required value in ``values``.
        """
        active: dict[str, bool] = {}
        for spec in self.topological():
            if spec.condition is None:
                active[spec.name] = True
            else:
                c = spec.condition
                active[spec.name] = (
                    active[c.parent] and c.parent in values and values[c.parent] == c.equals
                )
        return [p for p in self.params if active[p.name]]


def validate(space: SearchSpace, assignment: Mapping[str, Any]) -> list[str]:
    """Return every violation of ``assignment`` against ``space``.

    An empty list means the assignment is valid: it contains exactly the
    active parameters and every value lies in its domain.
    """
    problems = [f"{n}: unknown parameter" for n in assignment if n not in space._by_name]
    active = {p.name for p in space.active_params(assignment)}
    for spec in space:
        present = spec.name in assignment
        if spec.name in active and not present:
            problems.append(f"{spec.name}: active but missing")
        elif present and spec.name not in active:
            problems.append(f"{spec.name}: inactive but present")
        elif present and not spec.domain_contains(assignment[spec.name]):
            problems.append(
                f"{spec.name}: value {assignment[spec.name]!r} out of domain {spec.domain_text()}"
            )
    return problems


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Assignment:
    """Draw one uniform assignment; children are drawn only after their parent.

    Deterministic given the generator state, and the result always passes
    :func:`validate`.
    """
    values: Assignment = {}
    active: dict[str, bool] = {}
    for spec in space.topological():
        if spec.condition is None:
            act = True
        else:
            c = spec.condition
            act = active[c.parent] and values.get(c.parent) == c.equals
        active[spec.name] = act
        if act:
            values[spec.name] = spec.sample(rng)
    return {p.name: values[p.name] for p in space if active[p.name]}


def log_uniform_density(space: SearchSpace, assignment: Mapping[str, Any]) -> float:
    """Log-density of ``assignment`` under the uniform prior over the space.

    The sum of ``-log(domain size)`` over the active parameters; inactive
    parameters contribute nothing.
    """
    problems = validate(space, assignment)
    if problems:
        raise SpaceError("invalid assignment: " + "; ".join(problems))
    return -sum(spec.log_domain_size() for spec in space.active_params(assignment))


# ---------------------------------------------------------------------------
# JSON document format
# ---------------------------------------------------------------------------

def space_to_json(space: SearchSpace) -> dict:
    """Plain-JSON representation accepted back by :func:`space_from_json`."""
    params = []
    for p in space:
        doc: dict[str, Any] = {"name": p.name, "kind": p.kind}
        if p.kind == "categorical":
            doc["choices"] = list(p.choices)
        elif p.kind in ("integer", "real"):
            doc["lo"] = p.lo
            doc["hi"] = p.hi
        if p.condition is not None:
            doc["condition"] = {"parent": p.condition.parent, "equals": p.condition.equals}
        params.append(doc)
    return {"name": space.name, "version": space.version, "params": params}


def _require(doc: Mapping, key: str, types, where: str):
    if key not in doc:
        raise SpaceFormatError(f"missing required key {key!r}", where)
    value = doc[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in _as_tuple(types):
        raise SpaceFormatError(f"key {key!r} has wrong type {type(value).__name__}", where)
    return value


def _as_tuple(types):
    return types if isinstance(types, tuple) else (types,)


_PARAM_KEYS = {"name", "kind", "lo", "hi", "choices", "condition"}


def space_from_json(doc: Any) -> SearchSpace:
    """Build a space from a parsed JSON document; schema errors carry a path."""
    if not isinstance(doc, Mapping):
        raise SpaceFormatError("document must be an object")
    extra = set(doc) - {"name", "version", "params"}
    if extra:
        raise SpaceFormatError(f"unknown keys: {', '.join(sorted(extra))}")
    name = _require(doc, "name", str, "$")
    version = _require(doc, "version", int, "$")
    raw_params = _require(doc, "params", list, "$")
    params = []
    for i, p in enumerate(raw_params):
        where = f"params[{i}]"
        if not isinstance(p, Mapping):
            raise SpaceFormatError("parameter must be an object", where)
        extra = set(p) - _PARAM_KEYS
        if extra:
            raise SpaceFormatError(f"unknown keys: {', '.join(sorted(extra))}", where)
        pname = _require(p, "name", str, where)
        kind = _require(p, "kind", str, where)
        condition = None
        if "condition" in p:
            cdoc = p["condition"]
            if not isinstance(cdoc, Mapping) or set(cdoc) != {"parent", "equals"}:
                raise SpaceFormatError(
                    "condition must be {parent, equals}", f"{where}.condition"
                )
            condition = Condition(
                parent=_require(cdoc, "parent", str, f"{where}.condition"),
                equals=cdoc["equals"],
            )
        kwargs: dict[str, Any] = {}
        if "choices" in p:
            if not isinstance(p["choices"], list):
                raise SpaceFormatError("choices must be a list", f"{where}.choices")
            kwargs["choices"] = tuple(p["choices"])
        for bound in ("lo", "hi"):
            if bound in p:
                v = p[bound]
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SpaceFormatError(f"{bound} must be a number", f"{where}.{bound}")
                kwargs[bound] = v
        try:
            params.append(ParamSpec(name=pname, kind=kind, condition=condition, **kwargs))
        except SpaceError as e:
            raise SpaceFormatError(str(e), where) from None
    try:
        return SearchSpace(name=name, params=tuple(params), version=version)
    except SpaceError as e:
        raise SpaceFormatError(str(e)) from None


def load_space(path: str | Path) -> SearchSpace:
    """Read a space definition file; malformed input raises with a location."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpaceFormatError(f"invalid JSON: {e.msg}", where=f"line {e.lineno}") from None
    return space_from_json(doc)
