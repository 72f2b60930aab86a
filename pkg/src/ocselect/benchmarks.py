"""Instances, arrival orders, and the exact benchmark recursions.

An instance is a multiset of boxes with known value distributions.  The two
benchmarks evaluated here are the order-aware online optimum (backward
induction over the arrival order) and the prophet value (expectation of the
overall maximum).  Single-threshold policies and their closed-form lower
bound live here too, since both are stated against the max distribution.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

from .distributions import (
    DiscreteDistribution,
    as_probability,
    expected_max_with,
    max_distribution,
)

# Slack allowed when validating computed per-stage values as nonnegative.
VALUE_TOL = 1e-9


class OrderError(ValueError):
    """An arrival order is not a bijection over the instance's box ids."""


@dataclass(frozen=True)
class Box:
    box_id: str
    dist: DiscreteDistribution

    def __post_init__(self) -> None:
        if not self.box_id:
            raise ValueError("box id must be nonempty")


@dataclass(frozen=True)
class Instance:
    """An immutable collection of boxes with distinct ids."""

    boxes: tuple[Box, ...]

    def __post_init__(self) -> None:
        if not self.boxes:
            raise ValueError("instance needs at least one box")
        ids = [b.box_id for b in self.boxes]
        if len(set(ids)) != len(ids):
            raise ValueError("box ids must be unique")

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(b.box_id for b in self.boxes)

    @cached_property
    def by_id(self) -> dict[str, Box]:
        return {b.box_id: b for b in self.boxes}

    @cached_property
    def dists(self) -> tuple[DiscreteDistribution, ...]:
        return tuple(b.dist for b in self.boxes)

    @property
    def n(self) -> int:
        return len(self.boxes)

    @cached_property
    def _memo(self) -> dict:
        # Internal scratch space for per-order tables; keyed by descriptive
        # tuples.  Safe because the instance itself is immutable.
        return {}


# An arrival order is a permutation of the instance's box ids.
ArrivalOrder = tuple[str, ...]


def ordered_dists(
    instance: Instance, order: ArrivalOrder
) -> tuple[DiscreteDistribution, ...]:
    """Distributions in arrival order, validating the order is a bijection."""
    key = ("dists", order)
    hit = instance._memo.get(key)
    if hit is not None:
        return hit
    if len(order) != instance.n or set(order) != set(instance.ids):
        raise OrderError(
            f"order {order!r} is not a permutation of instance ids {instance.ids!r}"
        )
    out = tuple(instance.by_id[box_id].dist for box_id in order)
    instance._memo[key] = out
    return out


@dataclass(frozen=True)
class EvaluationResult:
    """Per-stage expected values of one exact recursion.

    ``per_stage[t]`` is the expected reward collected from stage t onward
    (0-based); the final entry is the empty-suffix value 0.  ``kind`` records
    which recursion produced the numbers.  For targeted policies ``targets``
    holds the threshold sequence actually used (truncated at the switch
    stage for the detecting variant), and ``switch_stage``/``threshold``
    describe the permanent switch to a single threshold if one happened.
    """

    kind: str
    per_stage: tuple[float, ...]
    targets: tuple[float, ...] | None = None
    switch_stage: int | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if not self.per_stage or self.per_stage[-1] != 0.0:
            raise ValueError("per_stage must end with the empty-suffix value 0")
        for v in self.per_stage:
            if not math.isfinite(v) or v < -VALUE_TOL:
                raise ValueError(f"per-stage value out of range: {v!r}")

    @property
    def total(self) -> float:
        return self.per_stage[0]


def opt_online(instance: Instance, order: ArrivalOrder) -> EvaluationResult:
    """Order-aware online optimum by backward induction.

    Value-to-go from stage t is E[max(v_t, value-to-go from t+1)], zero past
    the last box.  Accepting at equality is optimal and is the convention
    used by every evaluator in this package.
    """
    key = ("opt", order)
    hit = instance._memo.get(key)
    if hit is not None:
        return hit
    dists = ordered_dists(instance, order)
    stages = [0.0]
    acc = 0.0
    for d in reversed(dists):
        acc = expected_max_with(d, acc)
        stages.append(acc)
    result = EvaluationResult("opt", tuple(reversed(stages)))
    instance._memo[key] = result
    return result


def prophet_value(instance: Instance) -> float:
    """E[max over all boxes], the order-free offline benchmark."""
    hit = instance._memo.get("prophet")
    if hit is not None:
        return hit
    value = instance_max_distribution(instance).mean
    instance._memo["prophet"] = value
    return value


def instance_max_distribution(instance: Instance) -> DiscreteDistribution:
    """Distribution of the maximum over all boxes (cached)."""
    hit = instance._memo.get("maxdist")
    if hit is None:
        hit = max_distribution(instance.dists)
        instance._memo["maxdist"] = hit
    return hit


def sta_exact(instance: Instance, order: ArrivalOrder, tau: float) -> EvaluationResult:
    """Exact value of the single-threshold policy: accept the first v >= tau."""
    if not (tau >= 0.0):
        raise ValueError(f"threshold must be >= 0: {tau!r}")
    dists = ordered_dists(instance, order)
    stages = [0.0]
    acc = 0.0
    for d in reversed(dists):
        idx = bisect_left(d.values, tau)
        acc = d.tail_mean[idx] + d.head_mass[idx] * acc
        stages.append(acc)
    return EvaluationResult("sta", tuple(reversed(stages)), threshold=tau)


def sta_lower_bound(instance: Instance, tau: float) -> float:
    """Closed-form lower bound on any single-threshold run at tau.

    With M the overall maximum: P[M >= tau] * tau + P[M < tau] * E[(M-tau)^+].
    The bound is order-free, which is what makes it useful: it certifies all
    arrival orders at once.
    """
    if not (tau >= 0.0):
        raise ValueError(f"threshold must be >= 0: {tau!r}")
    md = instance_max_distribution(instance)
    idx = bisect_left(md.values, tau)
    p_ge = as_probability(md.tail_mass[idx])
    p_lt = as_probability(md.head_mass[idx])
    plus = max(0.0, md.tail_mean[idx] - tau * md.tail_mass[idx])
    return p_ge * tau + p_lt * plus


class ThresholdChoice(NamedTuple):
    tau: float
    value: float


def best_single_threshold(
    dists: Sequence[DiscreteDistribution],
) -> ThresholdChoice:
    """Maximise the single-threshold lower bound over tau >= 0.

    The objective f(tau) = P[M >= tau] * tau + P[M < tau] * E[(M - tau)^+]
    is linear and increasing between consecutive atoms of the max
    distribution, so its maximum is attained on {0} plus the atoms.  Ties go
    to the smallest tau.
    """
    if not dists:
        raise ValueError("need at least one distribution")
    md = max_distribution(list(dists))
    best_tau, best_val = 0.0, _threshold_bound(md, 0.0)
    for v in md.values:
        val = _threshold_bound(md, v)
        if val > best_val:
            best_tau, best_val = v, val
    return ThresholdChoice(best_tau, best_val)


def _threshold_bound(md: DiscreteDistribution, tau: float) -> float:
    idx = bisect_left(md.values, tau)
    p_ge = md.tail_mass[idx]
    p_lt = md.head_mass[idx]
    plus = max(0.0, md.tail_mean[idx] - tau * md.tail_mass[idx])
    return p_ge * tau + p_lt * plus
