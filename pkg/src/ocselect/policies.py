"""Order-unaware selection policies and their exact evaluators.

The targeted policy carries a running target: before each box it lowers the
target to the smallest fallback x whose E[max(v, x)] still reaches the
previous target, then accepts any value at or above the new target.  The
detecting variant additionally compares the updated target against the
expected maximum of the boxes still to come; the first time the target is
strictly larger, the run is known to be in the overestimation regime and
the policy switches, permanently, to the best single threshold computed
over the remaining boxes (the current one included).

Every evaluator here is exact: acceptance decisions depend on thresholds
and distributions only, so expected values are finite backward recursions.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .benchmarks import (
    ArrivalOrder,
    EvaluationResult,
    Instance,
    ThresholdChoice,
    best_single_threshold,
    prophet_value,
    ordered_dists,
)
from .densities import DensitySpec, density_pdf
from .distributions import DiscreteDistribution, inverse_target, sample

TARGETED = "targeted"
CONSERVATIVE = "conservative"
TERMINATED = "terminated"

# Exact-evaluation policies selectable by name.
EXACT_POLICIES = ("sta", "tva", "tvd")

MIN_QUADRATURE_POINTS = 100


class PolicyError(ValueError):
    """A step machine was driven outside its contract."""


class Decision(NamedTuple):
    accept: bool


@dataclass(frozen=True)
class PolicyState:
    """State of a policy run between boxes.

    ``stage`` counts boxes already stepped (0-based index of the next box).
    ``target`` is the current targeted value; ``threshold`` and
    ``switch_stage`` are populated once the detecting policy has switched to
    conservative single-threshold mode.
    """

    stage: int
    mode: str
    target: float
    switch_stage: int | None = None
    threshold: float | None = None

    @staticmethod
    def initial(g0: float) -> "PolicyState":
        if not (g0 >= 0.0):
            raise ValueError(f"initial target must be >= 0: {g0!r}")
        return PolicyState(stage=0, mode=TARGETED, target=g0)


def tva_step(
    state: PolicyState, box_dist: DiscreteDistribution, realized_value: float
) -> tuple[PolicyState, Decision]:
    """Advance the plain targeted policy by one box."""
    if state.mode != TARGETED:
        raise PolicyError(f"targeted step in mode {state.mode!r}")
    g = inverse_target(box_dist, state.target)
    accept = realized_value >= g
    new = replace(
        state,
        stage=state.stage + 1,
        mode=TERMINATED if accept else TARGETED,
        target=g,
    )
    return new, Decision(accept)


def tvd_step(
    state: PolicyState,
    box_dist: DiscreteDistribution,
    remaining_dists: Sequence[DiscreteDistribution],
    realized_value: float,
) -> tuple[PolicyState, Decision]:
    """Advance the detecting targeted policy by one box.

    ``remaining_dists`` are the boxes strictly after the current one.  The
    switch test compares the updated target against the expected maximum of
    those remaining boxes; a tie stays targeted.  The conservative threshold
    is computed over the suffix including the current box, and the switch is
    permanent.
    """
    if state.mode == TERMINATED:
        raise PolicyError("stepping a terminated policy")
    if state.mode == CONSERVATIVE:
        accept = realized_value >= state.threshold
        new = replace(
            state,
            stage=state.stage + 1,
            mode=TERMINATED if accept else CONSERVATIVE,
        )
        return new, Decision(accept)
    g = inverse_target(box_dist, state.target)
    future = _expected_max(remaining_dists)
    if g <= future:
        accept = realized_value >= g
        new = replace(
            state,
            stage=state.stage + 1,
            mode=TERMINATED if accept else TARGETED,
            target=g,
        )
        return new, Decision(accept)
    choice = best_single_threshold([box_dist, *remaining_dists])
    accept = realized_value >= choice.tau
    new = replace(
        state,
        stage=state.stage + 1,
        mode=TERMINATED if accept else CONSERVATIVE,
        target=g,
        switch_stage=state.stage,
        threshold=choice.tau,
    )
    return new, Decision(accept)


def _expected_max(dists: Sequence[DiscreteDistribution]) -> float:
    if not dists:
        return 0.0
    values: list[float] = []
    cdf: list[float] = []
    for d in dists:
        values, cdf = _merge_max(values, cdf, d)
    return _mean_from_cdf(values, cdf)


# ---------------------------------------------------------------------------
# Per-(instance, order) cached tables.


class _OrderContext:
    __slots__ = ("dists", "_emax_after", "_switch_taus", "instance", "order")

    def __init__(self, instance: Instance, order: ArrivalOrder):
        self.instance = instance
        self.order = order
        self.dists = ordered_dists(instance, order)
        self._emax_after: tuple[float, ...] | None = None
        self._switch_taus: dict[int, ThresholdChoice] = {}

    def emax_after(self) -> tuple[float, ...]:
        """emax_after[t] = E[max of boxes strictly after stage t]."""
        if self._emax_after is None:
            n = len(self.dists)
            values: list[float] = []
            cdf: list[float] = []
            acc = [0.0] * (n + 1)
            for t in range(n - 1, 0, -1):
                values, cdf = _merge_max(values, cdf, self.dists[t])
                acc[t - 1] = _mean_from_cdf(values, cdf)
            self._emax_after = tuple(acc)
        return self._emax_after

    def switch_tau(self, s: int) -> ThresholdChoice:
        hit = self._switch_taus.get(s)
        if hit is None:
            hit = best_single_threshold(self.dists[s:])
            self._switch_taus[s] = hit
        return hit


def _order_context(instance: Instance, order: ArrivalOrder) -> _OrderContext:
    key = ("ctx", order)
    ctx = instance._memo.get(key)
    if ctx is None:
        ctx = _OrderContext(instance, order)
        instance._memo[key] = ctx
    return ctx


def _merge_max(
    values: list[float], cdf: list[float], d: DiscreteDistribution
) -> tuple[list[float], list[float]]:
    """CDF of max(current, fresh draw from d); inputs are parallel lists."""
    if not values:
        return list(d.values), list(d._cdf_norm_list)
    dv, dc = d.values, d._cdf_norm_list
    out_v: list[float] = []
    out_a: list[float] = []
    out_b: list[float] = []
    i = j = 0
    na, nb = len(values), len(dv)
    while i < na or j < nb:
        if j >= nb or (i < na and values[i] < dv[j]):
            v = values[i]
        elif i >= na or dv[j] < values[i]:
            v = dv[j]
        else:
            v = values[i]
        if i < na and values[i] == v:
            i += 1
        if j < nb and dv[j] == v:
            j += 1
        out_v.append(v)
        out_a.append(cdf[i - 1] if i > 0 else 0.0)
        out_b.append(dc[j - 1] if j > 0 else 0.0)
    merged = [a * b for a, b in zip(out_a, out_b)]
    # Drop zero-probability lower tail to keep suffix supports small.
    keep = 0
    while keep + 1 < len(merged) and merged[keep] == 0.0:
        keep += 1
    return out_v[keep:], merged[keep:]


def _mean_from_cdf(values: list[float], cdf: list[float]) -> float:
    acc = 0.0
    prev = 0.0
    for v, c in zip(values, cdf):
        acc += v * (c - prev)
        prev = c
    return acc


# ---------------------------------------------------------------------------
# Exact policy values.


def tva_exact(instance: Instance, order: ArrivalOrder, g0: float) -> EvaluationResult:
    """Exact expected value of the targeted policy started at target g0."""
    if not (g0 >= 0.0):
        raise ValueError(f"initial target must be >= 0: {g0!r}")
    ctx = _order_context(instance, order)
    targets = _target_walk(ctx.dists, g0)
    stages = [0.0]
    acc = 0.0
    for t in range(len(ctx.dists) - 1, -1, -1):
        acc = _accept_at(ctx.dists[t], targets[t], acc)
        stages.append(acc)
    return EvaluationResult("tva", tuple(reversed(stages)), targets=tuple(targets))


def tvd_exact(instance: Instance, order: ArrivalOrder, g0: float) -> EvaluationResult:
    """Exact expected value of the detecting targeted policy.

    Until the switch the run is identical to the plain targeted policy; from
    the switch stage on it is a single-threshold run over the suffix.  The
    switch stage depends only on the target walk and the distributions, so
    the whole evaluation stays an exact backward recursion.
    """
    if not (g0 >= 0.0):
        raise ValueError(f"initial target must be >= 0: {g0!r}")
    ctx = _order_context(instance, order)
    dists = ctx.dists
    n = len(dists)
    emax_after = ctx.emax_after()
    targets: list[float] = []
    g = g0
    switch: int | None = None
    for t in range(n):
        g = inverse_target(dists[t], g)
        targets.append(g)
        if g > emax_after[t]:
            switch = t
            break
    if switch is None:
        stages = [0.0]
        acc = 0.0
        for t in range(n - 1, -1, -1):
            acc = _accept_at(dists[t], targets[t], acc)
            stages.append(acc)
        return EvaluationResult("tvd", tuple(reversed(stages)), targets=tuple(targets))
    choice = ctx.switch_tau(switch)
    stages = [0.0]
    acc = 0.0
    for t in range(n - 1, switch - 1, -1):
        acc = _accept_at(dists[t], choice.tau, acc)
        stages.append(acc)
    for t in range(switch - 1, -1, -1):
        acc = _accept_at(dists[t], targets[t], acc)
        stages.append(acc)
    return EvaluationResult(
        "tvd",
        tuple(reversed(stages)),
        targets=tuple(targets),
        switch_stage=switch,
        threshold=choice.tau,
    )


def _target_walk(dists: Sequence[DiscreteDistribution], g0: float) -> list[float]:
    out = []
    g = g0
    for d in dists:
        g = inverse_target(d, g)
        out.append(g)
    return out


def _accept_at(d: DiscreteDistribution, threshold: float, continuation: float) -> float:
    """One backward step: accept v >= threshold, else keep the continuation."""
    idx = bisect_left(d.values, threshold)
    return d.tail_mean[idx] + d.head_mass[idx] * continuation


# ---------------------------------------------------------------------------
# Sampled runs and the randomized mixture value.


def run_policy_sampled(
    policy_kind: str,
    g0: float,
    instance: Instance,
    order: ArrivalOrder,
    rng: np.random.Generator,
) -> float:
    """Sample every box once and run the named policy; 0.0 if nothing taken.

    For ``sta`` the parameter ``g0`` is the fixed acceptance threshold.
    """
    if policy_kind not in EXACT_POLICIES:
        raise PolicyError(f"unknown policy kind: {policy_kind!r}")
    dists = ordered_dists(instance, order)
    values = [sample(d, rng) for d in dists]
    if policy_kind == "sta":
        if not (g0 >= 0.0):
            raise ValueError(f"threshold must be >= 0: {g0!r}")
        for v in values:
            if v >= g0:
                return v
        return 0.0
    state = PolicyState.initial(g0)
    for i, (d, v) in enumerate(zip(dists, values)):
        if policy_kind == "tva":
            state, decision = tva_step(state, d, v)
        else:
            state, decision = tvd_step(state, d, list(dists[i + 1 :]), v)
        if decision.accept:
            return v
    return 0.0


class QuadratureValue(NamedTuple):
    """A quadrature estimate together with a grid-refinement error bound."""

    value: float
    error_estimate: float


def randomized_value(
    instance: Instance,
    order: ArrivalOrder,
    density: DensitySpec,
    grid_points: int,
    policy_kind: str = "tvd",
) -> QuadratureValue:
    """Expected exact policy value when g0 = x * prophet with x ~ density.

    Midpoint quadrature is applied per smooth piece of the density (the
    pieces split exactly at its breakpoints).  Weights are normalised to sum
    to one, so the estimate is a convex combination of exact policy values
    and can never exceed the online optimum.  The reported error estimate is
    the difference between the ``grid_points`` run and one with twice as
    many points; the finer value is returned.
    """
    if policy_kind not in ("tva", "tvd"):
        raise ValueError(f"randomized mixture needs tva or tvd, got {policy_kind!r}")
    evaluate = tva_exact if policy_kind == "tva" else tvd_exact
    prophet = prophet_value(instance)
    if density.point_mass is not None:
        total = evaluate(instance, order, density.point_mass * prophet).total
        return QuadratureValue(total, 0.0)
    if grid_points < MIN_QUADRATURE_POINTS:
        raise ValueError(f"need at least {MIN_QUADRATURE_POINTS} grid points")

    pieces = [p for p in density.pieces if p.kind != "zero" and p.hi > p.lo]
    span = sum(p.hi - p.lo for p in pieces)

    def estimate(n_points: int) -> float:
        num = 0.0
        den = 0.0
        for p in pieces:
            k = max(2, round(n_points * (p.hi - p.lo) / span))
            h = (p.hi - p.lo) / k
            for j in range(k):
                x = p.lo + (j + 0.5) * h
                w = density_pdf(density, x) * h
                num += w * evaluate(instance, order, x * prophet).total
                den += w
        return num / den

    coarse = estimate(grid_points)
    fine = estimate(2 * grid_points)
    return QuadratureValue(fine, abs(fine - coarse))
