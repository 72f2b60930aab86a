"""Closed-form densities for drawing the initial target fraction.

A randomized run draws x from one of these densities and starts the
targeted policy at g0 = x * E[max].  Both shipped densities live on
[1/2, 1] and are built from two closed forms, coef/(2x-1) and coef/x,
which makes every integral used in verification available analytically.

The constants c (left edge of the positive part) and gamma (the ratio the
density certifies) come from one-dimensional root finding; the defining
residual equations are monotone on the documented brackets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

ROOT_TOL = 1e-12
NORMALIZATION_TOL = 1e-8
EDGE_TOL = 1e-12
MIN_VERIFY_GRID = 1000

PHI = (1.0 + math.sqrt(5.0)) / 2.0

PIECE_ZERO = "zero"
PIECE_INV_SHIFTED = "reciprocal_2x_minus_1"
PIECE_INV = "reciprocal_x"

_PIECE_KINDS = (PIECE_ZERO, PIECE_INV_SHIFTED, PIECE_INV)

WEIGHT_ONE = "one"
WEIGHT_X = "x"
WEIGHT_ONE_MINUS_X = "one_minus_x"
WEIGHT_HALF_X = "half_x"

_WEIGHTS = (WEIGHT_ONE, WEIGHT_X, WEIGHT_ONE_MINUS_X, WEIGHT_HALF_X)

ENVELOPE_TVA = "tva"
ENVELOPE_TVD = "tvd"


@dataclass(frozen=True)
class DensityPiece:
    """One smooth piece: pdf(x) = coefficient * kernel(kind) on [lo, hi)."""

    kind: str
    lo: float
    hi: float
    coefficient: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _PIECE_KINDS:
            raise ValueError(f"unknown piece kind: {self.kind!r}")
        if not (0.5 - EDGE_TOL <= self.lo < self.hi <= 1.0 + EDGE_TOL):
            raise ValueError(f"piece [{self.lo}, {self.hi}] not inside [1/2, 1]")
        if self.kind == PIECE_ZERO:
            if self.coefficient != 0.0:
                raise ValueError("zero piece with nonzero coefficient")
        elif not (self.coefficient > 0.0):
            raise ValueError(f"coefficient must be positive: {self.coefficient!r}")
        if self.kind == PIECE_INV_SHIFTED and self.lo <= 0.5:
            raise ValueError("kernel 1/(2x-1) needs lo > 1/2")


@dataclass(frozen=True)
class DensitySpec:
    """A density on [1/2, 1], or a single point mass.

    ``pieces`` must partition [1/2, 1] contiguously and integrate to one.
    A point-mass spec carries no pieces; it represents the deterministic
    choice of the target fraction and is exempt from the pdf machinery.
    """

    name: str
    pieces: tuple[DensityPiece, ...]
    c: float | None = None
    gamma: float | None = None
    point_mass: float | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("density needs a name")
        if self.point_mass is not None:
            if self.pieces:
                raise ValueError("point mass and pieces are mutually exclusive")
            if not (0.0 <= self.point_mass <= 1.0):
                raise ValueError(f"point mass outside [0, 1]: {self.point_mass!r}")
            return
        if not self.pieces:
            raise ValueError("density needs pieces or a point mass")
        if abs(self.pieces[0].lo - 0.5) > EDGE_TOL:
            raise ValueError("pieces must start at 1/2")
        if abs(self.pieces[-1].hi - 1.0) > EDGE_TOL:
            raise ValueError("pieces must end at 1")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.hi != right.lo:
                raise ValueError("pieces must be contiguous")
        mass = sum(_piece_integral(p, WEIGHT_ONE, p.lo, p.hi) for p in self.pieces)
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"density mass {mass!r} is not 1")


class GuaranteeCheck(NamedTuple):
    min_ratio: float
    argmin_y: float


def bisect_decreasing(residual, lo: float, hi: float) -> float:
    """Root of a decreasing residual, bisected to float resolution."""
    r_lo = residual(lo)
    r_hi = residual(hi)
    if not (r_lo > 0.0 > r_hi):
        raise ValueError("bracket does not straddle the root")
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(residual(root)) > ROOT_TOL:
        raise ArithmeticError(f"residual {residual(root)!r} above tolerance")
    return root


@lru_cache(maxsize=1)
def solve_c_656() -> tuple[float, float]:
    """Left edge and ratio of the one-kernel density.

    c solves ln(1/(2c-1)) - 2c = 2; the gamma below is equivalent to
    1/(1+c) after substituting the defining equation.
    """
    c = bisect_decreasing(lambda t: math.log(1.0 / (2.0 * t - 1.0)) - 2.0 * t - 2.0, 0.51, 0.75)
    gamma = 2.0 / math.log(1.0 / (2.0 * c - 1.0))
    return c, gamma


@lru_cache(maxsize=1)
def solve_c_732() -> tuple[float, float]:
    """Left edge and ratio of the two-kernel density.

    c solves 1/(6c-3) = e^(2c) on (1/2, 2/3)."""
    c = bisect_decreasing(
        lambda t: 1.0 / (6.0 * t - 3.0) - math.exp(2.0 * t), 0.5 + 1e-6, 2.0 / 3.0
    )
    gamma = -2.0 / math.log((16.0 / 27.0) * (2.0 * c - 1.0))
    return c, gamma


@lru_cache(maxsize=1)
def rho_656() -> DensitySpec:
    c, gamma = solve_c_656()
    return DensitySpec(
        name="rho-656",
        pieces=(
            DensityPiece(PIECE_ZERO, 0.5, c),
            DensityPiece(PIECE_INV_SHIFTED, c, 1.0, gamma),
        ),
        c=c,
        gamma=gamma,
    )


@lru_cache(maxsize=1)
def rho_732() -> DensitySpec:
    c, gamma = solve_c_732()
    return DensitySpec(
        name="rho-732",
        pieces=(
            DensityPiece(PIECE_ZERO, 0.5, c),
            DensityPiece(PIECE_INV_SHIFTED, c, 2.0 / 3.0, gamma),
            DensityPiece(PIECE_INV, 2.0 / 3.0, 1.0, 2.0 * gamma),
        ),
        c=c,
        gamma=gamma,
    )


def point_density(fraction: float, name: str | None = None) -> DensitySpec:
    """Deterministic target fraction as a degenerate density."""
    return DensitySpec(name=name or f"point-{fraction:.6g}", pieces=(), point_mass=fraction)


def _piece_integral(piece: DensityPiece, weight: str, lo: float, hi: float) -> float:
    """Closed-form integral of weight(x) * pdf over [lo, hi] ∩ piece."""
    a = max(lo, piece.lo)
    b = min(hi, piece.hi)
    if b <= a or piece.kind == PIECE_ZERO:
        return 0.0
    k = piece.coefficient

    if piece.kind == PIECE_INV_SHIFTED:
        la, lb = math.log(2.0 * a - 1.0), math.log(2.0 * b - 1.0)
        if weight == WEIGHT_ONE:
            return k * 0.5 * (lb - la)
        if weight == WEIGHT_X:
            return k * ((b - a) / 2.0 + (lb - la) / 4.0)
        if weight == WEIGHT_ONE_MINUS_X:
            return k * ((lb - la) / 4.0 - (b - a) / 2.0)
        if weight == WEIGHT_HALF_X:
            return k * ((b - a) / 4.0 + (lb - la) / 8.0)
    else:
        la, lb = math.log(a), math.log(b)
        if weight == WEIGHT_ONE:
            return k * (lb - la)
        if weight == WEIGHT_X:
            return k * (b - a)
        if weight == WEIGHT_ONE_MINUS_X:
            return k * ((lb - la) - (b - a))
        if weight == WEIGHT_HALF_X:
            return k * (b - a) / 2.0
    raise ValueError(f"unknown weight: {weight!r}")


def integrate_weighted(spec: DensitySpec, weight: str, lo: float, hi: float) -> float:
    """∫ weight(x) ρ(x) dx over [lo, hi], by analytic antiderivatives."""
    if weight not in _WEIGHTS:
        raise ValueError(f"unknown weight: {weight!r}")
    if spec.point_mass is not None:
        if lo <= spec.point_mass <= hi:
            return _weight_value(weight, spec.point_mass)
        return 0.0
    return sum(_piece_integral(p, weight, lo, hi) for p in spec.pieces)


def _weight_value(weight: str, x: float) -> float:
    if weight == WEIGHT_ONE:
        return 1.0
    if weight == WEIGHT_X:
        return x
    if weight == WEIGHT_ONE_MINUS_X:
        return 1.0 - x
    return x / 2.0


def density_pdf(spec: DensitySpec, x: float) -> float:
    """pdf at x; pieces are half-open [lo, hi) except the last (closed)."""
    if spec.point_mass is not None:
        raise ValueError("a point mass has no density function")
    if not (0.5 - EDGE_TOL <= x <= 1.0 + EDGE_TOL):
        raise ValueError(f"pdf argument outside [1/2, 1]: {x!r}")
    x = min(max(x, 0.5), 1.0)
    for i, piece in enumerate(spec.pieces):
        closing = i == len(spec.pieces) - 1
        if piece.lo <= x < piece.hi or (closing and x == piece.hi):
            if piece.kind == PIECE_ZERO:
                return 0.0
            if piece.kind == PIECE_INV_SHIFTED:
                return piece.coefficient / (2.0 * x - 1.0)
            return piece.coefficient / x
    return 0.0


def density_cdf(spec: DensitySpec, x: float) -> float:
    if spec.point_mass is not None:
        return 1.0 if x >= spec.point_mass else 0.0
    if x <= 0.5:
        return 0.0
    return min(1.0, integrate_weighted(spec, WEIGHT_ONE, 0.5, min(x, 1.0)))


def density_ppf(spec: DensitySpec, u: float) -> float:
    """Inverse CDF; u=0 maps to the left edge of the positive part."""
    if not (-EDGE_TOL <= u <= 1.0 + EDGE_TOL):
        raise ValueError(f"quantile outside [0, 1]: {u!r}")
    if spec.point_mass is not None:
        return spec.point_mass
    u = min(max(u, 0.0), 1.0)
    cum = 0.0
    positive = [p for p in spec.pieces if p.kind != PIECE_ZERO]
    for piece in positive:
        mass = _piece_integral(piece, WEIGHT_ONE, piece.lo, piece.hi)
        if u <= cum + mass or piece is positive[-1]:
            m = max(0.0, u - cum)
            k = piece.coefficient
            if piece.kind == PIECE_INV_SHIFTED:
                x = ((2.0 * piece.lo - 1.0) * math.exp(2.0 * m / k) + 1.0) / 2.0
            else:
                x = piece.lo * math.exp(m / k)
            return min(max(x, piece.lo), piece.hi)
        cum += mass
    raise AssertionError("density has no positive piece")


def sample_density(spec: DensitySpec, rng: np.random.Generator) -> float:
    return density_ppf(spec, rng.random())


def _envelope_integral(spec: DensitySpec, envelope: str, y: float) -> float:
    """∫ over x ≤ y of x ρ plus ∫ over x > y of the overestimation floor."""
    if spec.point_mass is not None:
        x = spec.point_mass
        if x <= y:
            return x
        return 1.0 - x if envelope == ENVELOPE_TVA else max(1.0 - x, x / 2.0)
    taken = integrate_weighted(spec, WEIGHT_X, 0.5, y)
    if envelope == ENVELOPE_TVA:
        return taken + integrate_weighted(spec, WEIGHT_ONE_MINUS_X, y, 1.0)
    split = max(y, 2.0 / 3.0)
    return (
        taken
        + integrate_weighted(spec, WEIGHT_ONE_MINUS_X, y, split)
        + integrate_weighted(spec, WEIGHT_HALF_X, split, 1.0)
    )


def verify_guarantee(spec: DensitySpec, lower_envelope: str, y_grid: int) -> GuaranteeCheck:
    """Minimum over y of (certified lower bound at y) / y.

    y ranges over [1/2, 1] (the scaled online optimum).  For x ≤ y the run
    is consistent and delivers x; beyond y the overestimation floor applies:
    1-x for the plain targeted policy, max(x/2, 1-x) for the detecting one.
    All integrals are closed-form; the grid only scans the ratio.
    """
    if lower_envelope not in (ENVELOPE_TVA, ENVELOPE_TVD):
        raise ValueError(f"unknown envelope: {lower_envelope!r}")
    if y_grid < MIN_VERIFY_GRID:
        raise ValueError(f"need at least {MIN_VERIFY_GRID} grid points")
    best = math.inf
    best_y = 0.5
    for y in np.linspace(0.5, 1.0, y_grid):
        ratio = _envelope_integral(spec, lower_envelope, float(y)) / float(y)
        if ratio < best:
            best = ratio
            best_y = float(y)
    return GuaranteeCheck(best, best_y)
