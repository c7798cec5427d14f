"""Angles and closed-arc sets on the unit circle.

Angles are stored reduced to [0, 2*pi). An arc is a (center, halfwidth) pair
and covers ``[center - halfwidth, center + halfwidth]``; a halfwidth of zero
is a single point and a halfwidth >= pi is the whole circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap(angle):
    """Reduce angle(s) to [0, 2*pi)."""
    out = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    if np.ndim(out) == 0:
        return 0.0 if out >= TWO_PI else float(out)
    out[out >= TWO_PI] = 0.0
    return out


def circular_distance(a, b):
    """Shortest distance between angles along the circle, in [0, pi]."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi)
    return d if np.ndim(d) else float(d)


@dataclass(frozen=True)
class ArcSet:
    """Finite union of closed arcs, canonicalized (disjoint, sorted by start)."""

    arcs: tuple[tuple[float, float], ...]

    @classmethod
    def from_arcs(cls, arcs: Iterable[tuple[float, float]]) -> "ArcSet":
        return cls(_canonical(list(arcs)))

    @classmethod
    def full(cls) -> "ArcSet":
        return cls(((np.pi, np.pi),))

    @property
    def is_full(self) -> bool:
        return len(self.arcs) == 1 and self.arcs[0][1] >= np.pi

    @property
    def measure(self) -> float:
        return float(sum(min(2 * h, TWO_PI) for _, h in self.arcs))

    def distance(self, angle):
        """Circular distance from angle(s) to the set (zero inside)."""
        angle = np.asarray(angle, dtype=float)
        if self.is_full:
            return np.zeros_like(angle) if angle.ndim else 0.0
        best = np.full(angle.shape, np.inf)
        for c, h in self.arcs:
            best = np.minimum(best, np.maximum(circular_distance(angle, c) - h, 0.0))
        return best if best.ndim else float(best)

    def contains(self, angle, eps: float = 0.0):
        return self.distance(angle) <= eps

    def fattened(self, eps: float) -> "ArcSet":
        return ArcSet.from_arcs((c, h + eps) for c, h in self.arcs)

    def rotated_union(self, other: "ArcSet") -> "ArcSet":
        """Minkowski sum {e^{ia} e^{ib}} of two arc sets."""
        return ArcSet.from_arcs(
            (c1 + c2, h1 + h2) for c1, h1 in self.arcs for c2, h2 in other.arcs
        )

    def to_json(self) -> list[dict]:
        return [{"center": c, "halfwidth": h} for c, h in self.arcs]


def _canonical(arcs: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    if not arcs:
        return ()
    if any(h >= np.pi for _, h in arcs):
        return ((np.pi, np.pi),)
    intervals = sorted((wrap(c - h), 2 * h) for c, h in arcs)
    # merge on the unrolled line [0, 4*pi)
    merged: list[list[float]] = []
    for start, length in intervals:
        end = start + length
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    # an interval running past 2*pi may swallow the first ones
    last = merged[-1]
    while len(merged) > 1 and last[1] - TWO_PI >= merged[0][0]:
        first = merged.pop(0)
        last[1] = max(last[1], first[1] + TWO_PI)
    if last[1] - last[0] >= TWO_PI:
        return ((np.pi, np.pi),)
    return tuple(
        (wrap(0.5 * (s + e)), 0.5 * (e - s)) for s, e in sorted(merged, key=lambda m: wrap(m[0]))
    )
