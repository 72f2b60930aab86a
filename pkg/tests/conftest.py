"""Shared fixtures: deterministic random instance generation.

Instances drawn here keep every atom probability at least MIN_ATOM_PROB so
exact recursions stay well conditioned, and values on a modest range so
brute-force oracles are cheap.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ocselect import Box, DiscreteDistribution, Instance

MIN_ATOM_PROB = 0.02


def random_instance(
    rng: np.random.Generator,
    n_boxes: int,
    max_atoms: int = 4,
    value_cap: float = 10.0,
) -> Instance:
    boxes = []
    for b in range(n_boxes):
        k = int(rng.integers(1, max_atoms + 1))
        values = np.sort(rng.uniform(0.0, value_cap, size=k))
        while len(np.unique(np.round(values, 9))) < k:
            values = np.sort(rng.uniform(0.0, value_cap, size=k))
        raw = rng.uniform(MIN_ATOM_PROB, 1.0, size=k)
        probs = raw / raw.sum()
        # renormalized draws stay above MIN_ATOM_PROB / total <= 1 scaling loss
        probs = np.maximum(probs, MIN_ATOM_PROB)
        probs = probs / probs.sum()
        atoms = tuple((float(v), float(p)) for v, p in zip(values, probs))
        boxes.append(Box(f"b{b}", DiscreteDistribution(atoms)))
    return Instance(tuple(boxes))


def all_orders(instance: Instance):
    return [tuple(p) for p in itertools.permutations(sorted(instance.ids))]


@pytest.fixture(scope="session")
def sweep_instances() -> list[Instance]:
    """500 small instances reused by the behavioural sweeps."""
    rng = np.random.default_rng(20260822)
    out = []
    for _ in range(500):
        n = int(rng.integers(1, 7))
        out.append(random_instance(rng, n))
    return out


def g0_grid(instance: Instance, points: int = 20) -> list[float]:
    from ocselect import prophet_value

    top = max(prophet_value(instance), 1e-6) * 1.5
    return [top * i / (points - 1) for i in range(points)]


def brute_force_opt(instance: Instance, order) -> float:
    """Realization-tree optimum: exact backward induction by enumeration."""
    dists = [instance.by_id[b].dist for b in order]

    def go(t: int) -> float:
        if t == len(dists):
            return 0.0
        cont = go(t + 1)
        d = dists[t]
        return math.fsum(p * max(v, cont) for v, p in zip(d.values, d.probs))

    return go(0)
