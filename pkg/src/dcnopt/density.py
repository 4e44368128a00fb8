"""Factorized density estimation over assignments.

A :class:`DensityModel` is fitted from a set of valid assignments and
evaluates the log-density of further assignments as a product (sum of
logs) of independent per-parameter estimators:

* categorical / boolean: Laplace-smoothed frequency table,
  ``p(v) = (count(v) + 1) / (n + K)`` over the K domain values;
* integer / real: Gaussian kernel mixture centred on the observed values
  with one shared bandwidth per parameter,
  ``h = max(sigma * n^(-1/5), 0.01 * (hi - lo))``, where ``sigma`` is the
  sample standard deviation (``0.25 * (hi - lo)`` when fewer than two
  observations are available).

Kernels are not truncated or renormalized at the domain boundary; the
small mass leak is harmless because only density ratios and rankings are
consumed downstream.  A parameter that is active in the query but was
never observed active contributes its uniform domain density, so the
log-density of a valid assignment is always finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .space import ParamSpec, SearchSpace, SpaceError, validate

__all__ = ["DensityModel"]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class _FrequencyTable:
    """Smoothed categorical estimator; ``probs`` covers the whole domain."""

    probs: dict[Any, float]

    def log_prob(self, value: Any) -> float:
        for v, p in self.probs.items():
            if v == value:
                return math.log(p)
        raise SpaceError(f"value {value!r} outside fitted domain")


@dataclass(frozen=True)
class _KernelMixture:
    """Equal-weight Gaussian mixture with a shared bandwidth."""

    centers: np.ndarray
    bandwidth: float

    def log_prob(self, x: float) -> float:
        z = (x - self.centers) / self.bandwidth
        expo = -0.5 * z * z
        m = float(expo.max())
        s = float(np.exp(expo - m).sum())
        return m + math.log(s) - math.log(len(self.centers)) - math.log(self.bandwidth) - _LOG_SQRT_2PI


def _fit_frequency(spec: ParamSpec, values: Sequence[Any]) -> _FrequencyTable:
    n = len(values)
    k = len(spec.choices)
    counts = {c: 0 for c in spec.choices}
    for v in values:
        for c in counts:
            if c == v:
                counts[c] += 1
                break
    return _FrequencyTable({c: (counts[c] + 1) / (n + k) for c in spec.choices})


def _fit_kernel(spec: ParamSpec, values: Sequence[Any]) -> _KernelMixture:
    centers = np.asarray(values, dtype=float)
    n = len(centers)
    width = float(spec.hi - spec.lo)
    sigma = float(centers.std(ddof=1)) if n >= 2 else 0.25 * width
    bandwidth = max(sigma * n ** (-0.2), 0.01 * width)
    return _KernelMixture(centers, bandwidth)


@dataclass(frozen=True)
class DensityModel:
    """Per-parameter estimators fitted from observed assignments.

    Immutable after :meth:`fit`; evaluation is read-only.
    """

    space: SearchSpace
    estimators: dict[str, _FrequencyTable | _KernelMixture]
    n_observations: int

    @classmethod
    def fit(cls, space: SearchSpace, observations: Sequence[Mapping[str, Any]]) -> "DensityModel":
        """Fit one estimator per parameter from its active observations.

        Every observation must be valid in ``space``; the list must be
        non-empty.  Parameters never observed active get no estimator and
        fall back to the uniform domain density at query time, as do
        numeric parameters with a single-point domain.
        """
        if not observations:
            raise ValueError("cannot fit a density model from zero observations")
        values_by_param: dict[str, list[Any]] = {}
        for i, obs in enumerate(observations):
            problems = validate(space, obs)
            if problems:
                raise SpaceError(f"observation {i} invalid: " + "; ".join(problems))
            for name, value in obs.items():
                values_by_param.setdefault(name, []).append(value)
        estimators: dict[str, _FrequencyTable | _KernelMixture] = {}
        for spec in space:
            values = values_by_param.get(spec.name)
            if not values:
                continue
            if spec.kind in ("categorical", "boolean"):
                estimators[spec.name] = _fit_frequency(spec, values)
            elif spec.hi > spec.lo:
                estimators[spec.name] = _fit_kernel(spec, values)
        return cls(space=space, estimators=estimators, n_observations=len(observations))

    def log_density(self, assignment: Mapping[str, Any]) -> float:
        """Sum of per-parameter log-densities over the active parameters.

        Finite for every valid assignment; raises on an invalid one.
        """
        problems = validate(self.space, assignment)
        if problems:
            raise SpaceError("invalid assignment: " + "; ".join(problems))
        return self._log_density_checked(assignment)

    def _log_density_checked(self, assignment: Mapping[str, Any]) -> float:
        total = 0.0
        for name, value in assignment.items():
            est = self.estimators.get(name)
            if est is not None:
                total += est.log_prob(value)
            else:
                total -= self.space.param(name).log_domain_size()
        return total
