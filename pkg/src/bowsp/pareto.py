"""Non-dominated sets of ``(omega_C, omega_A)`` weight points."""
from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .core import Plan, Schema


def dominates(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """``a`` dominates ``b``: no worse in both weights and strictly smaller in sum."""
    return a[0] <= b[0] and a[1] <= b[1] and a[0] + a[1] < b[0] + b[1]


@dataclass
class FrontPoint:
    omega_C: int
    omega_A: int
    plan: Plan

    @property
    def weights(self) -> tuple[int, int]:
        return self.omega_C, self.omega_A


@dataclass
class ParetoFront:
    """Antichain kept sorted by ``omega_C`` ascending (so ``omega_A`` descending)."""

    BA: int | None = None
    BC: int | None = None
    points: list[FrontPoint] = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.omega_C)
        self._c = [p.omega_C for p in self.points]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[FrontPoint]:
        return iter(self.points)

    def weight_set(self) -> set[tuple[int, int]]:
        return {p.weights for p in self.points}

    def weights(self) -> list[tuple[int, int]]:
        return [p.weights for p in self.points]

    def within_bounds(self, wc: int, wa: int) -> bool:
        return (self.BA is None or wa <= self.BA) and (self.BC is None or wc <= self.BC)

    def covered(self, wc: int, wa: int) -> bool:
        """True if some point is no worse than ``(wc, wa)`` in both weights."""
        i = bisect.bisect_right(self._c, wc)
        # points[:i] have omega_C <= wc; the last of them has the smallest omega_A
        return i > 0 and self.points[i - 1].omega_A <= wa

    def offer(self, wc: int, wa: int, plan: Plan) -> bool:
        """Insert the candidate unless dominated or weight-equal; drop what it dominates."""
        if not self.within_bounds(wc, wa):
            return False
        if self.covered(wc, wa):
            return False
        lo = bisect.bisect_left(self._c, wc)
        hi = lo
        # points at or right of lo have omega_C >= wc; they are dominated while omega_A >= wa
        while hi < len(self.points) and self.points[hi].omega_A >= wa:
            hi += 1
        self.points[lo:hi] = [FrontPoint(wc, wa, plan)]
        self._c[lo:hi] = [wc]
        return True

    def merge(self, other: "ParetoFront") -> None:
        for p in other.points:
            self.offer(p.omega_C, p.omega_A, p.plan)

    def to_csv(self, schema: Schema | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega_C", "omega_A", "plan"])
        for p in self.points:
            w.writerow([p.omega_C, p.omega_A, p.plan.describe(schema)])
        return buf.getvalue()


def front_from_points(points: Iterable[tuple[int, int, Plan]], BA=None, BC=None) -> ParetoFront:
    front = ParetoFront(BA, BC)
    for wc, wa, plan in points:
        front.offer(wc, wa, plan)
    return front
