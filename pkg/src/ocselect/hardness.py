"""Hard ladder instances, their discretized programs, and dual certificates.

Two upper-bound families are implemented.  The general family combines a
descending ladder of deterministic boxes on [1, phi] with one free-reward
box (huge value, tiny probability, unit expectation); it caps every
order-unaware algorithm near 0.8293.  The detection family uses a ladder
on [0, c] with multiplicities plus a batch of small free-reward boxes; it
caps the detecting targeted policy near 0.7582.

Each family ships three things: instance/order builders for end-to-end
policy evaluation, a finite LP whose optimum upper-bounds the achievable
ratio on the family, and an analytic dual certificate whose feasibility is
re-verified numerically rather than trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .benchmarks import ArrivalOrder, Box, Instance
from .densities import PHI, bisect_decreasing
from .distributions import DiscreteDistribution
from .policies import tvd_exact
from .simplex import FiniteLP

GRID_MATCH_TOL = 1e-9
MIN_DUAL_GRID = 10**4

SQRT5 = math.sqrt(5.0)


class HardnessParameterError(ValueError):
    """Construction parameters outside the supported regime."""


def _require_scale_separation(epsilon: float, delta: float) -> None:
    if not (0.0 < delta < epsilon * epsilon):
        raise HardnessParameterError(
            f"need 0 < delta < epsilon^2, got epsilon={epsilon!r} delta={delta!r}"
        )


def _det_dist(value: float) -> DiscreteDistribution:
    return DiscreteDistribution(((value, 1.0),))


def _free_dist(expectation: float, delta: float) -> DiscreteDistribution:
    return DiscreteDistribution(((0.0, 1.0 - delta), (expectation / delta, delta)))


# ---------------------------------------------------------------------------
# General family: ladder on [1, phi] plus one unit-expectation free box.


@dataclass(frozen=True)
class GeneralHardInstance:
    epsilon: float
    delta: float
    step: float
    grid: tuple[float, ...]
    instance: Instance
    free_id: str


def make_general_hard_instance(epsilon: float, delta: float) -> GeneralHardInstance:
    """Ladder phi, phi-step, ..., 1 (step snapped to divide the span) + free box."""
    if not (epsilon > 0.0):
        raise HardnessParameterError(f"epsilon must be positive: {epsilon!r}")
    _require_scale_separation(epsilon, delta)
    span = PHI - 1.0
    if epsilon >= span:
        grid = (PHI,)
        step = span
    else:
        cells = max(1, round(span / epsilon))
        step = span / cells
        values = [PHI - j * step for j in range(cells + 1)]
        values[-1] = 1.0
        grid = tuple(values)
    boxes = [Box(f"d{j:04d}", _det_dist(v)) for j, v in enumerate(grid)]
    boxes.append(Box("free", _free_dist(1.0, delta)))
    return GeneralHardInstance(
        epsilon=epsilon,
        delta=delta,
        step=step,
        grid=grid,
        instance=Instance(tuple(boxes)),
        free_id="free",
    )


def _grid_index(grid: tuple[float, ...], x: float) -> int:
    for j, v in enumerate(grid):
        if abs(v - x) <= GRID_MATCH_TOL:
            return j
    raise ValueError(f"value {x!r} is not on the ladder grid")


def free_last_order(hard: GeneralHardInstance) -> ArrivalOrder:
    """Deterministic boxes descending, free-reward box last."""
    return tuple(b.box_id for b in hard.instance.boxes[:-1]) + (hard.free_id,)


def free_after_order(hard: GeneralHardInstance, x: float) -> ArrivalOrder:
    """Descending ladder with the free-reward box right after the x box."""
    j = _grid_index(hard.grid, x)
    det = [b.box_id for b in hard.instance.boxes[:-1]]
    return tuple(det[: j + 1]) + (hard.free_id,) + tuple(det[j + 1 :])


def general_opt_prediction(hard: GeneralHardInstance, x: float) -> float:
    """Exact backward-induction value of the free-after-x order.

    Waiting for the free box and falling back to the next ladder value is
    optimal for every x above the ladder foot; at the foot the order equals
    the free-last order, whose value is the ladder top.
    """
    j = _grid_index(hard.grid, x)
    if j == len(hard.grid) - 1:
        return hard.grid[0]
    return 1.0 + (1.0 - hard.delta) * hard.grid[j + 1]


def build_primal_general(grid_step: float) -> FiniteLP:
    """Finite acceptance-probability program for the general family.

    Variables are (ratio, p_x for ladder x descending).  Row one is the
    free-last order; each ladder x adds the free-after-x order; the final
    row caps total acceptance probability at one.
    """
    if not (0.0 < grid_step < PHI - 1.0):
        raise HardnessParameterError(f"grid_step must be in (0, phi-1): {grid_step!r}")
    cells = max(1, round((PHI - 1.0) / grid_step))
    step = (PHI - 1.0) / cells
    grid = [PHI - j * step for j in range(cells + 1)]
    grid[-1] = 1.0
    n = len(grid)
    rows = []
    rhs = []
    rows.append((PHI,) + tuple(1.0 - x for x in grid))
    rhs.append(1.0)
    for i, x in enumerate(grid):
        row = [x + 1.0]
        for j, y in enumerate(grid):
            row.append(x + 1.0 - y if j <= i else 0.0)
        rows.append(tuple(row))
        rhs.append(x + 1.0)
    rows.append((0.0,) + (1.0,) * n)
    rhs.append(1.0)
    objective = (1.0,) + (0.0,) * n
    return FiniteLP(objective=objective, rows=tuple(rows), rhs=tuple(rhs))


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Closed-form dual point: multiplier mu and density lam on [lo, hi]."""

    mu: float
    bound: float
    lo: float
    hi: float
    lam: Callable[[float], float]


class GeneralDualReport(NamedTuple):
    objective: float
    max_violation: float
    normalization_slack: float
    certificate: DualCertificate


def verify_dual_general(grid: int, inject_error: float = 0.0) -> GeneralDualReport:
    """Check the exponential dual certificate for the general family.

    The certificate is mu = K e and lam(y) = K e^y on [1, phi] with
    K = (sqrt(5)-1) / (3e - sqrt(5) e + 2 e^phi).  Both constraint families
    are evaluated with analytic antiderivatives on a grid of [1, phi]:
    the normalization row phi mu + int lam(y)(y+1) dy >= 1 and, for each x,
    mu (x-1) + int_1^x lam(y)(x-y-1) dy <= 0.  ``inject_error`` shifts mu
    upward; it exists so negative tests can watch verification fail.
    """
    if grid < MIN_DUAL_GRID:
        raise ValueError(f"need at least {MIN_DUAL_GRID} grid points")
    k_const = (SQRT5 - 1.0) / (3.0 * math.e - SQRT5 * math.e + 2.0 * math.exp(PHI))
    mu = k_const * math.e + inject_error
    # int_1^phi e^y (y+1) dy = [y e^y] = phi e^phi - e
    weighted_tail = k_const * (PHI * math.exp(PHI) - math.e)
    objective = mu + weighted_tail
    normalization = PHI * mu + weighted_tail
    worst = max(0.0, 1.0 - normalization)
    for i in range(grid):
        x = 1.0 + (PHI - 1.0) * i / (grid - 1)
        # int_1^x e^y (x-y-1) dy = [e^y (x-y)] = -e (x-1)
        lhs = mu * (x - 1.0) - k_const * math.e * (x - 1.0)
        worst = max(worst, lhs)
    certificate = DualCertificate(
        mu=mu,
        bound=objective,
        lo=1.0,
        hi=PHI,
        lam=lambda y: k_const * math.exp(y),
    )
    return GeneralDualReport(objective, worst, normalization - 1.0, certificate)


# ---------------------------------------------------------------------------
# Detection family: ladder on [0, c] with multiplicities plus small free boxes.


@dataclass(frozen=True)
class DetectionHardInstance:
    c: float
    epsilon: float
    delta: float
    step: float
    multiplicity: int
    grid: tuple[float, ...]
    instance: Instance
    free_ids: tuple[str, ...]


def make_detection_hard_instance(c: float, epsilon: float, delta: float) -> DetectionHardInstance:
    """Ladder c, c-step, ..., 0 with multiplicity round((1-c)/step) each,
    plus the same count of free-reward boxes of expectation step."""
    if not (0.5 < c < 1.0):
        raise HardnessParameterError(f"c must be in (0.5, 1): {c!r}")
    if not (0.0 < epsilon <= c):
        raise HardnessParameterError(f"epsilon must be in (0, c]: {epsilon!r}")
    _require_scale_separation(epsilon, delta)
    cells = max(1, round(c / epsilon))
    step = c / cells
    values = [c - j * step for j in range(cells + 1)]
    values[-1] = 0.0
    multiplicity = max(1, round((1.0 - c) / step))
    boxes = []
    for j, v in enumerate(values):
        for i in range(multiplicity):
            boxes.append(Box(f"d{j:04d}x{i:04d}", _det_dist(v)))
    free_ids = tuple(f"f{i:04d}" for i in range(multiplicity))
    for fid in free_ids:
        boxes.append(Box(fid, _free_dist(step, delta)))
    return DetectionHardInstance(
        c=c,
        epsilon=epsilon,
        delta=delta,
        step=step,
        multiplicity=multiplicity,
        grid=tuple(values),
        instance=Instance(tuple(boxes)),
        free_ids=free_ids,
    )


def detection_hard_order(hard: DetectionHardInstance, x: float) -> ArrivalOrder:
    """Three stages: ladder above x descending; alternating (free, x copy)
    pairs; then the remaining ladder descending."""
    j = _grid_index(hard.grid, x)
    if hard.grid[j] <= 2.0 * hard.c - 1.0 + GRID_MATCH_TOL:
        raise ValueError(f"x={x!r} must exceed 2c-1 for the hard order")
    m = hard.multiplicity
    det_id = lambda jj, ii: f"d{jj:04d}x{ii:04d}"
    order: list[str] = []
    for jj in range(j):
        order.extend(det_id(jj, ii) for ii in range(m))
    for ii in range(m):
        order.append(hard.free_ids[ii])
        order.append(det_id(j, ii))
    for jj in range(j + 1, len(hard.grid)):
        order.extend(det_id(jj, ii) for ii in range(m))
    return tuple(order)


def detection_opt_prediction(hard: DetectionHardInstance, x: float) -> float:
    """Exact backward-induction value of the detection hard order at x:
    survive all free boxes to the last x copy, banking realized rewards."""
    m = hard.multiplicity
    keep = (1.0 - hard.delta) ** m
    return keep * x + hard.step * (1.0 - keep) / hard.delta


def detection_formula(c: float, x: float, g0: float) -> float:
    """Limiting value of the detecting policy on the hard order."""
    if g0 <= 1.0 - c + x:
        return g0
    return max(1.0 - c, g0 - (1.0 - c))


def tvd_on_detection_order(hard: DetectionHardInstance, x: float, g0: float) -> float:
    if not (hard.c - GRID_MATCH_TOL <= g0 <= 1.0 + GRID_MATCH_TOL):
        raise ValueError(f"g0 must lie in [c, 1]: {g0!r}")
    order = detection_hard_order(hard, x)
    return tvd_exact(hard.instance, order, g0).total


def build_primal_tvd(c: float, grid_step: float) -> FiniteLP:
    """Finite initial-target-density program for the detection family.

    Variables are (ratio, q_i) where q_i is the probability that the
    initial target lands in the i-th cell of [c, 1].  Each x in (2c-1, c]
    contributes one hard order whose limiting value per cell midpoint is
    the midpoint itself below 1-c+x and max(1-c, y-(1-c)) above.
    """
    if not (0.5 < c < 1.0):
        raise HardnessParameterError(f"c must be in (0.5, 1): {c!r}")
    if not (0.0 < grid_step <= 1.0 - c):
        raise HardnessParameterError(f"grid_step must be in (0, 1-c]: {grid_step!r}")
    cells = max(2, round((1.0 - c) / grid_step))
    h = (1.0 - c) / cells
    mids = [c + (i + 0.5) * h for i in range(cells)]
    xs = [2.0 * c - 1.0 + (j + 1) * h for j in range(cells)]
    xs[-1] = c
    rows = []
    rhs = []
    for x in xs:
        opt_x = 1.0 - c + x
        row = [opt_x]
        for y in mids:
            value = y if y <= opt_x else max(1.0 - c, y - (1.0 - c))
            row.append(-value)
        rows.append(tuple(row))
        rhs.append(0.0)
    rows.append((0.0,) + (1.0,) * cells)
    rhs.append(1.0)
    objective = (1.0,) + (0.0,) * cells
    return FiniteLP(objective=objective, rows=tuple(rows), rhs=tuple(rhs))


def solve_c_detection() -> float:
    """c with c = -1 + 1/(2(1-c)) + (1-c) ln((1-c)/(2c-1)), on [0.51, 0.65].

    The defining residual has a second crossing near 0.9; the bracket pins
    the relevant root.
    """

    def residual(c: float) -> float:
        rhs = -1.0 + 1.0 / (2.0 * (1.0 - c)) + (1.0 - c) * math.log((1.0 - c) / (2.0 * c - 1.0))
        return rhs - c

    return bisect_decreasing(residual, 0.51, 0.65)


class TvdDualReport(NamedTuple):
    c: float
    a: float
    b: float
    objective: float
    max_violation: float
    normalization_residual: float
    certificate: DualCertificate


def verify_dual_tvd(grid: int, inject_error: float = 0.0) -> TvdDualReport:
    """Re-derive and check the two-piece dual certificate for detection.

    lam is a/x^2 on [2c-1, 1-c) and b/(1-c) on [1-c, c].  (a, b) solve the
    2x2 linear system: total lam mass equals b, and the (1-c+x)-weighted
    mass equals one; both coefficient rows are analytic integrals.  The
    certificate is then checked on a y-grid of [c, 1]: for every y,
    y * (lam mass above y-(1-c)) + max(1-c, y-(1-c)) * (lam mass below)
    must stay at or below mu = c * (total lam mass).  ``inject_error``
    lowers mu so negative tests can watch verification fail.
    """
    if grid < MIN_DUAL_GRID:
        raise ValueError(f"need at least {MIN_DUAL_GRID} grid points")
    c = solve_c_detection()
    lo = 2.0 * c - 1.0
    mid = 1.0 - c
    # Row 1: (integral of lam) - b = 0; row 2: integral of (1-c+x) lam = 1.
    a11 = 1.0 / lo - 1.0 / mid
    a12 = (2.0 * c - 1.0) / mid - 1.0
    a21 = mid / lo - 1.0 + math.log(mid / lo)
    a22 = (2.0 * c - 1.0) * (1.0 + 1.0 / (2.0 * mid))
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-9:
        raise ArithmeticError(f"certificate system is singular: det={det!r}")
    a = -a12 / det
    b = a11 / det
    total_mass = a * a11 + b * (2.0 * c - 1.0) / mid
    mu = c * total_mass - inject_error

    def mass_below(z: float) -> float:
        """integral of lam over [2c-1, z]."""
        if z <= lo:
            return 0.0
        if z < mid:
            return a * (1.0 / lo - 1.0 / z)
        return a * a11 + b * (min(z, c) - mid) / mid

    worst = 0.0
    for i in range(grid):
        y = c + (1.0 - c) * i / (grid - 1)
        z = y - (1.0 - c)
        below = mass_below(z)
        above = total_mass - below
        lhs = y * above + max(1.0 - c, z) * below
        worst = max(worst, lhs - mu)
    normalization = a * a21 + b * a22
    worst = max(worst, 1.0 - normalization)

    def lam(x: float) -> float:
        if x < mid:
            return a / (x * x)
        return b / mid

    certificate = DualCertificate(mu=mu, bound=mu, lo=lo, hi=c, lam=lam)
    return TvdDualReport(c, a, b, mu, worst, normalization - 1.0, certificate)
