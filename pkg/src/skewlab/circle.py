"""Points and half-open arcs on the unit circle, with exact operations.

An ``Arc`` is stored as (lo, length) so the empty (length 0) and full
(length 1) cases are unambiguous and wrapping is a property of the
representation, not a separate type. ``ArcUnion`` keeps a canonical
sorted list of disjoint non-wrapping pieces (wrapping arcs are split at
0); it is the exact measure oracle behind the shrinking-target checks.

All membership, distance and measure computations are exact QReal
comparisons; nothing here ever rounds.
"""

from __future__ import annotations

from functools import cmp_to_key
from typing import Iterable, Sequence

from skewlab.qfield import QReal, compare

__all__ = [
    "CirclePoint",
    "Arc",
    "ArcUnion",
    "rotate",
    "arc_contains",
    "circle_dist",
    "separation",
    "sort_circle_points",
]

_ZERO = QReal(0)
_ONE = QReal(1)


class CirclePoint:
    """A point of [0, 1), canonicalized by frac on construction."""

    __slots__ = ("x",)

    def __init__(self, x: QReal):
        object.__setattr__(self, "x", x.frac())

    def __setattr__(self, *_):
        raise AttributeError("CirclePoint is immutable")

    def __eq__(self, other):
        return isinstance(other, CirclePoint) and self.x == other.x

    def __hash__(self):
        return hash(("CirclePoint", self.x))

    def __repr__(self):
        return f"CirclePoint({self.x!r})"


def rotate(p: CirclePoint, alpha: QReal) -> CirclePoint:
    """R(x) = x + alpha mod 1, exactly."""
    return CirclePoint(p.x + alpha)


def circle_dist(p: CirclePoint, q: CirclePoint) -> QReal:
    """min(|x-y|, 1-|x-y|), exactly."""
    t = (p.x - q.x).frac()
    comp = _ONE - t
    return t if t <= comp else comp


class Arc:
    """Half-open arc [lo, lo+length) mod 1, 0 <= length <= 1."""

    __slots__ = ("lo", "length")

    def __init__(self, lo: CirclePoint, length: QReal):
        if length.sign() < 0 or length > 1:
            raise ValueError("arc length must lie in [0, 1]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "length", length)

    def __setattr__(self, *_):
        raise AttributeError("Arc is immutable")

    @staticmethod
    def from_endpoints(lo: QReal, hi: QReal) -> "Arc":
        """Arc [lo, hi) taken forward from lo to hi; hi = lo + 1 means full."""
        width = hi - lo
        if width == 1:
            return Arc(CirclePoint(lo), _ONE)
        return Arc(CirclePoint(lo), width.frac())

    def contains(self, p: CirclePoint) -> bool:
        if not self.length:
            return False
        if self.length == 1:
            return True
        return (p.x - self.lo.x).frac() < self.length

    def translate(self, delta: QReal) -> "Arc":
        return Arc(CirclePoint(self.lo.x + delta), self.length)

    def pieces(self) -> list[tuple[QReal, QReal]]:
        """Non-wrapping pieces [lo, hi), 0 <= lo < hi <= 1, covering the arc."""
        if not self.length:
            return []
        if self.length == 1:
            return [(_ZERO, _ONE)]
        lo = self.lo.x
        hi = lo + self.length
        if hi <= 1:
            return [(lo, hi)]
        return [(lo, _ONE), (_ZERO, hi - 1)]

    def __eq__(self, other):
        return (
            isinstance(other, Arc) and self.lo == other.lo and self.length == other.length
        )

    def __hash__(self):
        return hash(("Arc", self.lo, self.length))

    def __repr__(self):
        return f"Arc(lo={self.lo.x!r}, length={self.length!r})"


def arc_contains(a: Arc, p: CirclePoint) -> bool:
    """Exact wrap-aware half-open membership."""
    return a.contains(p)


class ArcUnion:
    """Canonical disjoint union of non-wrapping pieces, merged and sorted.

    Pieces touching at an endpoint are merged ([a,b) u [b,c) = [a,c)); the
    only unmerged touching pair is across 0, which is the canonical-form
    convention for wrapped content. Instances are immutable; ``insert``
    returns a new union. Total measure is the sum of piece lengths.
    """

    __slots__ = ("pieces",)

    def __init__(self, pieces: Sequence[tuple[QReal, QReal]] = ()):
        object.__setattr__(self, "pieces", tuple(pieces))

    def __setattr__(self, *_):
        raise AttributeError("ArcUnion is immutable")

    @staticmethod
    def from_arcs(arcs: Iterable[Arc]) -> "ArcUnion":
        u = ArcUnion()
        for a in arcs:
            u = u.insert(a)
        return u

    def insert(self, arc: Arc) -> "ArcUnion":
        new = list(self.pieces)
        for lo, hi in arc.pieces():
            new = _merge_piece(new, lo, hi)
        return ArcUnion(new)

    def insert_piece(self, lo: QReal, hi: QReal) -> "ArcUnion":
        if hi <= lo:
            return self
        return ArcUnion(_merge_piece(list(self.pieces), lo, hi))

    def measure(self) -> QReal:
        total = _ZERO
        for lo, hi in self.pieces:
            total = total + (hi - lo)
        return total

    def contains(self, p: CirclePoint) -> bool:
        x = p.x
        for lo, hi in self.pieces:
            if lo <= x < hi:
                return True
        return False

    def __eq__(self, other):
        return isinstance(other, ArcUnion) and self.pieces == other.pieces

    def __hash__(self):
        return hash(("ArcUnion", self.pieces))

    def __repr__(self):
        return f"ArcUnion({len(self.pieces)} pieces, measure={self.measure()!r})"


def _merge_piece(
    pieces: list[tuple[QReal, QReal]], lo: QReal, hi: QReal
) -> list[tuple[QReal, QReal]]:
    """Insert [lo, hi) into a sorted disjoint list, merging overlap/adjacency."""
    out: list[tuple[QReal, QReal]] = []
    i, n = 0, len(pieces)
    while i < n and pieces[i][1] < lo:
        out.append(pieces[i])
        i += 1
    while i < n and pieces[i][0] <= hi:
        plo, phi = pieces[i]
        if plo < lo:
            lo = plo
        if phi > hi:
            hi = phi
        i += 1
    out.append((lo, hi))
    out.extend(pieces[i:])
    return out


def _qreal_key(x: QReal) -> int:
    """Monotone integer key: floor(x * 2^80). Equal keys need an exact tiebreak."""
    return (x * (1 << 80)).floor()


def sort_circle_points(points: Sequence[CirclePoint]) -> list[CirclePoint]:
    """Sort by circle coordinate; integer keys, exact compare on key ties."""
    keyed = sorted(((_qreal_key(p.x), i) for i, p in enumerate(points)))
    out: list[CirclePoint] = []
    j = 0
    while j < len(keyed):
        k = j
        while k < len(keyed) and keyed[k][0] == keyed[j][0]:
            k += 1
        group = [points[i] for _, i in keyed[j:k]]
        if len(group) > 1:
            group.sort(key=cmp_to_key(lambda p, q: compare(p.x, q.x)))
        out.extend(group)
        j = k
    return out


def separation(points: Sequence[CirclePoint]) -> QReal:
    """Minimum pairwise circle distance, exactly.

    On a circle the minimum pairwise distance is attained by a pair that
    is consecutive in sorted order (wrap-around pair included), so one
    sort and a linear scan suffice; with >= 2 points the minimal gap is
    at most 1/2, so the gap already is the distance.
    """
    if len(points) < 2:
        raise ValueError("separation needs at least 2 points")
    pts = sort_circle_points(points)
    best = pts[1].x - pts[0].x
    for i in range(1, len(pts) - 1):
        gap = pts[i + 1].x - pts[i].x
        if gap < best:
            best = gap
    wrap = _ONE - pts[-1].x + pts[0].x
    if wrap < best:
        best = wrap
    return best
