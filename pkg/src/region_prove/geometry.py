"""Axis-aligned boxes and the operations the refinement loop needs on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ALIGN_RTOL = 1e-9
REGION_KINDS = ("safe", "unsafe", "unknown")


@dataclass(frozen=True)
class Hyperrectangle:
    """Closed box ``[lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}]``.

    Bounds are stored as tuples of Python floats so boxes are hashable and
    compare by value.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __init__(self, lower: Iterable[float], upper: Iterable[float]):
        lo = tuple(float(v) for v in lower)
        hi = tuple(float(v) for v in upper)
        if len(lo) != len(hi):
            raise ValueError(f"bound length mismatch: {len(lo)} lower vs {len(hi)} upper")
        if not lo:
            raise ValueError("a box needs at least one dimension")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"non-finite bound in dimension {i}")
            if a > b:
                raise ValueError(f"lower > upper in dimension {i}: {a} > {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lower), np.array(self.upper)

    def contains_box(self, other: "Hyperrectangle") -> bool:
        return all(
            a <= c and d <= b
            for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def bounds(self) -> list[tuple[float, float]]:
        return list(zip(self.lower, self.upper))

    def __repr__(self) -> str:
        inner = ", ".join(f"[{a:.9g}, {b:.9g}]" for a, b in zip(self.lower, self.upper))
        return f"Hyperrectangle({inner})"


def unit_box(d: int) -> Hyperrectangle:
    return Hyperrectangle([0.0] * d, [1.0] * d)


def volume(r: Hyperrectangle) -> float:
    v = 1.0
    for s in r.sides:
        v *= s
    return v


def split(r: Hyperrectangle, dim: int, at: float) -> tuple[Hyperrectangle, Hyperrectangle]:
    """Cut ``r`` with the hyperplane ``x[dim] = at``.

    Returns the (lower, upper) halves. ``at`` must lie strictly inside the
    side; callers clamp heuristic split points before calling.
    """
    if not 0 <= dim < r.dim:
        raise ValueError(f"split dimension {dim} out of range for d={r.dim}")
    lo, hi = r.lower[dim], r.upper[dim]
    if not lo < at < hi:
        raise ValueError(f"split point {at!r} not inside open interval ({lo!r}, {hi!r})")
    left_upper = list(r.upper)
    left_upper[dim] = at
    right_lower = list(r.lower)
    right_lower[dim] = at
    return Hyperrectangle(r.lower, left_upper), Hyperrectangle(right_lower, r.upper)


def is_eps_bounded(r: Hyperrectangle, eps: float) -> bool:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return all(s >= eps for s in r.sides)


def _is_multiple(v: float, eps: float) -> bool:
    q = v / eps
    return abs(q - round(q)) <= ALIGN_RTOL * max(1.0, abs(q))


def is_eps_aligned(r: Hyperrectangle, eps: float) -> bool:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return all(_is_multiple(v, eps) for v in r.lower + r.upper)


def eps_align_shrink(r: Hyperrectangle, eps: float) -> Hyperrectangle | None:
    """Largest eps-aligned box inside ``r``, or ``None`` if some side collapses.

    Each lower bound is rounded up and each upper bound down to the eps grid.
    Bounds already on the grid (within the alignment tolerance) are kept.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    lower, upper = [], []
    for a, b in zip(r.lower, r.upper):
        qa, qb = a / eps, b / eps
        ka = round(qa) if _is_multiple(a, eps) else math.ceil(qa)
        kb = round(qb) if _is_multiple(b, eps) else math.floor(qb)
        if kb <= ka:
            return None
        # keep the result inside r when rounding snapped to a grid point just outside
        lower.append(max(ka * eps, a))
        upper.append(min(kb * eps, b))
    return Hyperrectangle(lower, upper)


def overlap_volume(a: Hyperrectangle, b: Hyperrectangle) -> float:
    v = 1.0
    for la, ua, lb, ub in zip(a.lower, a.upper, b.lower, b.upper):
        w = min(ua, ub) - max(la, lb)
        if w <= 0:
            return 0.0
        v *= w
    return v


@dataclass
class RegionSet:
    """Interior-disjoint boxes sharing one classification label."""

    label: str
    regions: list[Hyperrectangle] = field(default_factory=list)

    def __post_init__(self):
        if self.label not in REGION_KINDS:
            raise ValueError(f"unknown region label {self.label!r}")

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)


def total_volume(rs: RegionSet | Sequence[Hyperrectangle]) -> float:
    regions = rs.regions if isinstance(rs, RegionSet) else rs
    return math.fsum(volume(r) for r in regions)


def pairwise_disjoint(regions: Sequence[Hyperrectangle], rtol: float = 1e-12) -> bool:
    """True when no two boxes share interior volume (O(k log k) sweep on dim 0)."""
    if len(regions) < 2:
        return True
    scale = max(volume(r) for r in regions) or 1.0
    order = sorted(range(len(regions)), key=lambda i: regions[i].lower[0])
    active: list[int] = []
    for i in order:
        r = regions[i]
        active = [j for j in active if regions[j].upper[0] > r.lower[0]]
        for j in active:
            if overlap_volume(regions[j], r) > rtol * scale:
                return False
        active.append(i)
    return True
