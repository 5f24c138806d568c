"""Support boxes on R^d and causal separation predicates.

Conventions: coordinate 0 is time; the metric is (+,-,...,-).  Support
bookkeeping is box-valued (axis-aligned hulls), so all predicates here are
sufficient conditions on the hulls, which is what the causality checks need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box; bounds may be infinite."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("bound rank mismatch")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def is_empty(self) -> bool:
        return any(l > h for l, h in zip(self.lo, self.hi))

    def is_bounded(self) -> bool:
        return all(math.isfinite(l) and math.isfinite(h)
                   for l, h in zip(self.lo, self.hi))

    def intersect(self, other: "Box") -> "Box":
        return Box(tuple(max(a, b) for a, b in zip(self.lo, other.lo)),
                   tuple(min(a, b) for a, b in zip(self.hi, other.hi)))

    def hull(self, other: "Box") -> "Box":
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        return Box(tuple(min(a, b) for a, b in zip(self.lo, other.lo)),
                   tuple(max(a, b) for a, b in zip(self.hi, other.hi)))

    def shift(self, vec) -> "Box":
        return Box(tuple(l + v for l, v in zip(self.lo, vec)),
                   tuple(h + v for h, v in zip(self.hi, vec)))

    def scale(self, factor: float) -> "Box":
        pts = [tuple(l * factor for l in self.lo), tuple(h * factor for h in self.hi)]
        return Box(tuple(min(p) for p in zip(*pts)), tuple(max(p) for p in zip(*pts)))

    def contains(self, point) -> bool:
        return all(l <= p <= h for l, p, h in zip(self.lo, point, self.hi))

    def widths(self):
        return tuple(h - l for l, h in zip(self.lo, self.hi))


def empty_box(dim: int) -> Box:
    return Box((math.inf,) * dim, (-math.inf,) * dim)


def unbounded_box(dim: int) -> Box:
    return Box((-math.inf,) * dim, (math.inf,) * dim)


def _interval_distance(lo1, hi1, lo2, hi2) -> float:
    """Distance between two closed intervals (0 when they overlap)."""
    if hi1 < lo2:
        return lo2 - hi1
    if hi2 < lo1:
        return lo1 - hi2
    return 0.0


def spatial_distance(a: Box, b: Box) -> float:
    """Euclidean distance between the spatial projections of two boxes."""
    if a.dim == 1:
        return 0.0
    sq = 0.0
    for i in range(1, a.dim):
        sq += _interval_distance(a.lo[i], a.hi[i], b.lo[i], b.hi[i]) ** 2
    return math.sqrt(sq)


def avoids_past_shadow(g: Box, f: Box) -> bool:
    """True when g does not meet f + (closed backward cone).

    Equivalently: every point of g lies strictly later than the past shadow
    of f.  This is the support condition under which perturbing the
    interaction by something supported in g cannot affect fields in f.
    """
    if g.is_empty() or f.is_empty():
        return True
    return g.lo[0] > f.hi[0] - spatial_distance(g, f)


def spacelike_separated(a: Box, b: Box) -> bool:
    """True when every point pair (one from each box) is spacelike."""
    if a.is_empty() or b.is_empty():
        return True
    if a.dim == 1:
        return False
    dt = max(a.hi[0] - b.lo[0], b.hi[0] - a.lo[0], 0.0)
    return dt < spatial_distance(a, b)
