"""The dynamical systems: two-sheet and integer-fiber skew products.

Each system is a rotation by alpha on the base circle with a fiber
increment that is a signed sum of half-open-interval indicators; the
systems differ only in their interval tables:

  Tk(k)      two-sheet, windows [0,theta_k) and y_k + [0,theta_k)
  Sk(k)      two-sheet, anchor one level behind: y_{k-1} + [0,theta_k)
  Ttrunc     two-sheet truncation of the limit system; membership in the
             unresolved tail bands takes the Out branch and raises the
             state's uncertain flag
  That(k)    integer fiber, +1 on the level-k growth strip, -1 on its
             y_k translate (the strip pair driving one level's drift)
  Shat(k)    integer fiber, +1 on the anchor gap, -1 on its theta_k translate
  Fk(k)      integer fiber, That(k) + Shat(k) jumps (level_sum=True sums
             all levels 1..k instead; see the module notes)
  ThatTrunc  integer fiber, +1 on the base window, -1 on the offset window
  G          ThatTrunc plus a second window pair with opposite signs
             (needs h-maps in the construction)
  F2         ThatTrunc plus +2 on [0,1/2), -2 on [1/2,1)

Forward and backward stepping are exact; step_back is the exact inverse
of step. Orbits, Birkhoff sums and scans delegate to the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from skewlab._engine import JumpTable, fiber_scan
from skewlab.circle import Arc, ArcUnion, CirclePoint, circle_dist, rotate
from skewlab.construction import Construction, ConstructionError, Membership3
from skewlab.qfield import QReal, frac_multiple, to_float

__all__ = [
    "FiberGroup",
    "SystemKind",
    "System",
    "SkewState",
    "OrbitSummary",
    "step",
    "step_back",
    "orbit",
    "birkhoff",
    "BirkhoffSummary",
    "jump_table",
    "IetMap",
    "as_iet",
    "iet_apply",
    "iet_conjugacy",
    "iet_displacement_bound",
]


class FiberGroup(Enum):
    Z2 = "Z2"
    Z = "Z"


class SystemKind(Enum):
    TK = "Tk"
    SK = "Sk"
    T_TRUNC = "Ttrunc"
    THAT_K = "That"
    SHAT_K = "Shat"
    FK = "Fk"
    THAT_TRUNC = "ThatTrunc"
    G = "G"
    F2 = "F2"


_LEVELED = {SystemKind.TK, SystemKind.SK, SystemKind.THAT_K, SystemKind.SHAT_K, SystemKind.FK}
_Z2 = {SystemKind.TK, SystemKind.SK, SystemKind.T_TRUNC}


@dataclass(frozen=True)
class System:
    """A system kind plus its level (where applicable)."""

    kind: SystemKind
    k: int | None = None
    level_sum: bool = False  # Fk only: sum jump functions of all levels <= k

    def __post_init__(self):
        if self.kind in _LEVELED and (self.k is None or self.k < 1):
            raise ValueError(f"{self.kind.value} needs a level k >= 1")
        if self.kind not in _LEVELED and self.k is not None:
            raise ValueError(f"{self.kind.value} takes no level")

    @property
    def fiber_group(self) -> FiberGroup:
        return FiberGroup.Z2 if self.kind in _Z2 else FiberGroup.Z

    @property
    def mod2(self) -> bool:
        return self.kind in _Z2

    @staticmethod
    def parse(spec: str, k: int | None = None) -> "System":
        """Parse a CLI token like 'Tk', 'That', 'F2' plus an optional level."""
        for kind in SystemKind:
            if kind.value.lower() == spec.lower():
                return System(kind, k if kind in _LEVELED else None)
        raise ValueError(f"unknown system {spec!r}")

    def label(self) -> str:
        return f"{self.kind.value}({self.k})" if self.k is not None else self.kind.value


@dataclass(frozen=True)
class SkewState:
    """A point of base circle x fiber; ``uncertain`` is monotone along orbits."""

    x: CirclePoint
    h: int
    uncertain: bool = False


# ---------------------------------------------------------------------------
# jump tables
# ---------------------------------------------------------------------------


def jump_table(c: Construction, system: System) -> JumpTable:
    """The system's segment/band table over the construction (cached on c)."""
    cache = getattr(c, "_jump_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(c, "_jump_cache", cache)  # frozen dataclass, private cache
    key = (system.kind, system.k, system.level_sum)
    tbl = cache.get(key)
    if tbl is None:
        tbl = _build_table(c, system)
        cache[key] = tbl
    return tbl


def _build_table(c: Construction, system: System) -> JumpTable:
    zero = QReal(0, 0, c.alpha.d)
    K = c.depth
    segs: list[tuple[QReal, QReal, int]] = []
    bands: list[tuple[QReal, QReal]] = []
    kind, k = system.kind, system.k

    def require_level(limit: int):
        if k is None or not 1 <= k <= limit:
            raise ConstructionError(
                f"{kind.value} level {k} out of range 1..{limit} at depth {K}"
            )

    if kind is SystemKind.TK:
        require_level(K)
        segs += [(zero, c.theta[k], 1), (c.y[k], c.y[k] + c.theta[k], 1)]
    elif kind is SystemKind.SK:
        require_level(K)
        segs += [(zero, c.theta[k], 1), (c.y[k - 1], c.y[k - 1] + c.theta[k], 1)]
    elif kind in (SystemKind.T_TRUNC, SystemKind.THAT_TRUNC, SystemKind.G, SystemKind.F2):
        w2 = 1 if kind is SystemKind.T_TRUNC else -1
        thetaK, yK = c.theta[K], c.y[K]
        segs += [(zero, thetaK, 1), (yK + c.tail_b, yK + thetaK, w2)]
        bands += [
            (thetaK, thetaK + c.tail_c),
            (yK, yK + c.tail_b),
            (yK + thetaK, yK + thetaK + c.tail_b + c.tail_c),
        ]
        if kind is SystemKind.G:
            if c.u_anchor is None:
                raise ConstructionError(
                    "system G needs the second window pair; build with h-maps "
                    "(presets 'paper' or 'linear-z')"
                )
            u0, uw = c.u_anchor, c.u_width
            z0 = c.z_anchor
            segs += [
                (u0, u0 + uw, -1),
                (z0 + u0 + c.tail_z, z0 + u0 + uw, 1),
            ]
            bands += [
                (u0 + uw, u0 + uw + c.tail_u),
                (z0 + u0, z0 + u0 + c.tail_z),
                (z0 + u0 + uw, z0 + u0 + uw + c.tail_z + c.tail_u),
            ]
        elif kind is SystemKind.F2:
            half = QReal(Fraction(1, 2), 0, c.alpha.d)
            segs += [(zero, half, 2), (half, QReal(1, 0, c.alpha.d), -2)]
    elif kind is SystemKind.THAT_K:
        require_level(K - 1)
        lo, hi = c.theta[k], c.theta[k + 1]
        segs += [(lo, hi, 1), (c.y[k] + lo, c.y[k] + hi, -1)]
    elif kind is SystemKind.SHAT_K:
        require_level(K)
        lo, hi = c.y[k - 1], c.y[k]
        segs += [(lo, hi, 1), (c.theta[k] + lo, c.theta[k] + hi, -1)]
    elif kind is SystemKind.FK:
        require_level(K - 1)
        levels = range(1, k + 1) if system.level_sum else (k,)
        for lv in levels:
            t = _build_table(c, System(SystemKind.THAT_K, lv))
            segs += list(t.segments)
            t = _build_table(c, System(SystemKind.SHAT_K, lv))
            segs += list(t.segments)
    else:  # pragma: no cover
        raise ValueError(kind)

    for lo, hi in [(s[0], s[1]) for s in segs] + bands:
        if lo.sign() < 0 or hi > 1 or not lo < hi:
            raise ConstructionError("system interval leaves [0, 1); alpha too large")
    return JumpTable(
        alpha=c.alpha, segments=tuple(segs), bands=tuple(bands), mod2=system.mod2
    )


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def step(system: System, c: Construction, s: SkewState) -> SkewState:
    """One forward step: (x, h) -> (x + alpha, h + w(x))."""
    table = jump_table(c, system)
    w, unc = table.jump_at(s.x.x)
    h = (s.h + w) % 2 if table.mod2 else s.h + w
    return SkewState(rotate(s.x, c.alpha), h, s.uncertain or unc)


def step_back(system: System, c: Construction, s: SkewState) -> SkewState:
    """Exact inverse of step: weigh the jump at the preimage point."""
    table = jump_table(c, system)
    x_prev = CirclePoint(s.x.x - c.alpha)
    w, unc = table.jump_at(x_prev.x)
    h = (s.h - w) % 2 if table.mod2 else s.h - w
    return SkewState(x_prev, h, s.uncertain or unc)


@dataclass
class OrbitSummary:
    system: str
    steps: int
    final: SkewState
    uncertain_steps: int
    first_uncertain: int | None
    min_fiber: int
    max_fiber: int


def orbit(
    system: System,
    c: Construction,
    start: SkewState,
    n: int,
    observer: Callable[[int, SkewState], None] | None = None,
    engine: str = "auto",
) -> OrbitSummary:
    """Iterate n steps (n < 0 means backward), streaming states if asked.

    Without an observer the scan runs on the fast engine; with one, the
    orbit is materialized state by state (exact, slower).
    """
    backward = n < 0
    steps = abs(n)
    if observer is not None:
        table = jump_table(c, system)
        s = start
        observer(0, s)
        unc = 0
        first_unc = None
        mn = mx = s.h
        for m in range(1, steps + 1):
            if backward:
                x_new = CirclePoint(s.x.x - c.alpha)
                w, u = table.jump_at(x_new.x)
                h = (s.h - w) % 2 if table.mod2 else s.h - w
            else:
                w, u = table.jump_at(s.x.x)
                h = (s.h + w) % 2 if table.mod2 else s.h + w
                x_new = rotate(s.x, c.alpha)
            if u:
                unc += 1
                if first_unc is None:
                    first_unc = m
            s = SkewState(x_new, h, s.uncertain or u)
            mn, mx = min(mn, s.h), max(mx, s.h)
            observer(m * (-1 if backward else 1), s)
        return OrbitSummary(system.label(), steps, s, unc, first_unc, mn, mx)
    table = jump_table(c, system)
    scan = fiber_scan(
        table, start.x.x, start.h, steps, backward=backward, engine=engine
    )
    final_x = CirclePoint(
        start.x.x + frac_multiple(c.alpha, steps)
        if not backward
        else start.x.x - frac_multiple(c.alpha, steps)
    )
    final = SkewState(final_x, scan.final_h, start.uncertain or scan.uncertain > 0)
    return OrbitSummary(
        system.label(), steps, final, scan.uncertain, scan.first_uncertain,
        scan.min_h, scan.max_h,
    )


# ---------------------------------------------------------------------------
# Birkhoff sums
# ---------------------------------------------------------------------------


@dataclass
class BirkhoffSummary:
    observable: str
    steps: int
    final_sum: int
    min_sum: int
    argmin: int
    max_sum: int
    argmax: int
    uncertain: int
    samples: dict[int, int]  # S_N at logarithmically spaced N


def _log_checkpoints(n: int, per_decade: int = 4) -> list[int]:
    cps = {n}
    v = 1
    while v < n:
        for j in range(per_decade):
            cp = int(round(v * 10 ** (j / per_decade)))
            if 1 <= cp <= n:
                cps.add(cp)
        v *= 10
    return sorted(cps)


def birkhoff(
    c: Construction,
    arcs: Sequence[tuple[Arc, int]],
    start: CirclePoint,
    n: int,
    engine: str = "auto",
    bands: Sequence[tuple[QReal, QReal]] = (),
) -> BirkhoffSummary:
    """Running sums S_N = sum_{m<N} f(x_m) of a weighted-indicator f
    along the base rotation orbit of ``start``.

    ``arcs`` lists (arc, weight); S_N is an exact integer for every N.
    Min/argmin, max/argmax and log-spaced samples are recorded.
    """
    segs: list[tuple[QReal, QReal, int]] = []
    for arc, w in arcs:
        for lo, hi in arc.pieces():
            segs.append((lo, hi, w))
    table = JumpTable(
        alpha=c.alpha, segments=tuple(segs), bands=tuple(bands), mod2=False
    )
    cps = _log_checkpoints(max(n, 1))
    scan = fiber_scan(table, start.x, 0, n, checkpoints=cps, engine=engine)
    return BirkhoffSummary(
        observable="+".join(f"{w}*chi[{to_float(a.lo.x):.6f},+{to_float(a.length):.6f})" for a, w in arcs),
        steps=n,
        final_sum=scan.final_h,
        min_sum=scan.min_h,
        argmin=scan.argmin,
        max_sum=scan.max_h,
        argmax=scan.argmax,
        uncertain=scan.uncertain,
        samples=dict(sorted(scan.checkpoint_h.items())),
    )


# ---------------------------------------------------------------------------
# the interval-exchange view of the two-sheet system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IetMap:
    """Piecewise rigid translation of [0,1): (domain piece, shift) pairs.

    Conjugate to the two-sheet system Tk under (x, s) -> (x + s)/2;
    sheet 0 occupies [0, 1/2), sheet 1 occupies [1/2, 1).
    """

    pieces: tuple[tuple[QReal, QReal, QReal], ...]  # (lo, hi, translation mod 1)

    def __len__(self):
        return len(self.pieces)


def iet_conjugacy(s: SkewState) -> CirclePoint:
    return CirclePoint((s.x.x + s.h) * Fraction(1, 2))


def as_iet(c: Construction, k: int) -> IetMap:
    """Explicit IET conjugate to Tk(k), with an exact bijectivity check."""
    table = jump_table(c, System(SystemKind.TK, k))
    zero = QReal(0, 0, c.alpha.d)
    one = QReal(1, 0, c.alpha.d)
    wrap_cut = (one - c.alpha).frac()
    cuts = {zero, wrap_cut}
    for lo, hi, _ in table.segments:
        cuts.add(lo)
        cuts.add(hi.frac() if hi < 1 else zero)
    xs = sorted(cuts, key=to_float)
    xs = _exact_sort(xs)
    pieces: list[tuple[QReal, QReal, QReal]] = []
    half = Fraction(1, 2)
    for i, lo in enumerate(xs):
        hi = xs[i + 1] if i + 1 < len(xs) else one
        chi, _ = table.jump_at(lo)
        wrap = 1 if lo >= wrap_cut and wrap_cut != zero else 0
        for s in (0, 1):
            s_new = (s + chi) % 2
            shift = ((c.alpha - wrap + (s_new - s)) * half).frac()
            pieces.append(((lo + s) * half, (hi + s) * half, shift))
    pieces.sort(key=lambda p: to_float(p[0]))
    # exact bijectivity: translated pieces must tile [0,1) with measure 1
    u = ArcUnion()
    total = zero
    for lo, hi, shift in pieces:
        width = hi - lo
        total = total + width
        img = Arc(CirclePoint(lo + shift), width)
        for plo, phi in img.pieces():
            before = u.measure()
            u = u.insert_piece(plo, phi)
            if not u.measure() == before + (phi - plo):
                raise ConstructionError("IET image arcs overlap; conjugacy broken")
    if not (total == 1 and u.measure() == 1):
        raise ConstructionError("IET pieces do not tile the interval")
    return IetMap(tuple(pieces))


def _exact_sort(xs: list[QReal]) -> list[QReal]:
    out = list(xs)
    for i in range(1, len(out)):
        j = i
        while j > 0 and out[j] < out[j - 1]:
            out[j - 1], out[j] = out[j], out[j - 1]
            j -= 1
    return out


def iet_apply(iet: IetMap, z: CirclePoint) -> CirclePoint:
    x = z.x
    for lo, hi, shift in iet.pieces:
        if lo <= x < hi:
            return CirclePoint(x + shift)
    raise ValueError("point escaped the IET domain partition")


def iet_displacement_bound(
    c: Construction, n_max: int
) -> tuple[QReal, int, list[tuple[int, QReal]]]:
    """(min over n <= n_max of n*d_n, argmin, exact values at convergent times).

    d_n = min over s in {0,1} of circle_dist(frac((n*alpha + s)/2), 0),
    a valid displacement lower bound for every point of the IET: each
    continuity piece of the n-th iterate translates by (n*alpha + s)/2
    mod 1 for some sheet parity s. Since (x+1)/2 mirrors x/2 about 1/2,
    d_n = d(n*alpha, Z)/2; the scan uses a float prefilter and settles
    every candidate minimum exactly.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    af = to_float(c.alpha)
    half = Fraction(1, 2)
    ns = np.arange(1, n_max + 1, dtype=np.float64)
    x = (ns * af) % 1.0
    vals = ns * np.minimum(x, 1.0 - x) * 0.5
    vmin = float(vals.min())
    cand = set(int(i) + 1 for i in np.nonzero(vals <= vmin * (1.0 + 1e-6))[0])
    cand.update(cv.q for cv in c.convergent_table if 1 <= cv.q <= n_max)

    def exact_nd(n: int) -> QReal:
        xn = frac_multiple(c.alpha, n)
        one_minus = 1 - xn
        dist = xn if xn <= one_minus else one_minus
        return dist * n * half

    best: QReal | None = None
    best_n = 0
    for n in sorted(cand):
        v = exact_nd(n)
        if best is None or v < best:
            best, best_n = v, n
    conv_values = [
        (cv.q, exact_nd(cv.q)) for cv in c.convergent_table if 1 <= cv.q <= n_max
    ]
    assert best is not None
    return best, best_n, conv_values
