"""The truncated construction: window sequences, endpoints, tail bounds.

A ``Construction`` fixes an irrational quadratic alpha in (0, 1/3), a
pair of index maps picking even-index convergent denominators
c_k = q_{f(k)} and b_k = q_{g(k)} (strictly interleaved), and a depth K.
From these it computes, exactly:

  * gamma[k] = frac(c_k * alpha) and beta[k] = frac(b_k * alpha),
    both verified to be the positive-side fractional parts;
  * theta[k] = gamma[1] + ... + gamma[k], the right endpoint of the
    truncated base window [0, theta[K]);
  * y[k] = frac(alpha + beta[1] + ... + beta[k]), the left endpoint of
    the truncated offset window [y[K], y[K] + theta[K]);
  * rigorous tail bounds tail_c, tail_b for everything beyond depth K,
    so membership in the limit windows is decided three-valued
    (In / Out / Uncertain) with an explicit uncertain band;
  * the exceptional "wake" sets (forward images of the level gaps) and
    their measure bounds, which cap how often consecutive approximants
    disagree.

Optionally two more index maps h1, h2 build the second window pair used
by the four-interval integer-fiber system.

Everything is exact; build fails loudly when a sign condition,
interleaving condition, or disjointness requirement does not hold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

from skewlab.circle import Arc, CirclePoint
from skewlab.qfield import (
    Convergent,
    QReal,
    convergents,
    frac_multiple,
    integerize_common_den,
    make_qreal,
    sign_int_pair,
)

__all__ = [
    "Membership3",
    "IndexMaps",
    "Construction",
    "ConstructionError",
    "IterationBudgetError",
    "build",
    "check_index_maps",
    "validate_growth",
    "construction_from_config",
    "config_digest",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**8


class ConstructionError(ValueError):
    """A build-time requirement failed (range, sign, interleaving, overlap)."""


class IterationBudgetError(RuntimeError):
    """A scan would exceed the iteration budget; refused, never sampled."""


class Membership3(Enum):
    """Three-valued membership in a limit window known only up to a tail band."""

    IN = "in"
    OUT = "out"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class IndexMaps:
    """Index maps k -> convergent index for the window sequences.

    ``f`` drives the base-window increments, ``g`` the offset anchors,
    and the optional ``h1``/``h2`` the second window pair. All selected
    indices must be even (positive-side convergents) and strictly
    interleaved: f(k) < g(k) [< h1(k) < h2(k)] < f(k+1).
    """

    name: str
    f: Callable[[int], int]
    g: Callable[[int], int]
    h1: Callable[[int], int] | None = None
    h2: Callable[[int], int] | None = None

    @property
    def has_second_pair(self) -> bool:
        return self.h1 is not None and self.h2 is not None

    @staticmethod
    def preset(name: str) -> "IndexMaps":
        try:
            return _PRESETS[name]
        except KeyError:
            raise ConstructionError(
                f"unknown preset {name!r}; choose from {sorted(_PRESETS)}"
            ) from None

    @staticmethod
    def from_lists(
        f: Sequence[int],
        g: Sequence[int],
        h1: Sequence[int] | None = None,
        h2: Sequence[int] | None = None,
    ) -> "IndexMaps":
        """Explicit per-level indices; lists must cover depth + 2 levels."""

        def at(seq: Sequence[int], k: int) -> int:
            if not 1 <= k <= len(seq):
                raise ConstructionError(
                    f"index list too short: need level {k}, have {len(seq)}"
                )
            return seq[k - 1]

        return IndexMaps(
            name="explicit",
            f=lambda k: at(f, k),
            g=lambda k: at(g, k),
            h1=(lambda k: at(h1, k)) if h1 else None,
            h2=(lambda k: at(h2, k)) if h2 else None,
        )


_PRESETS = {
    # the paper-scale maps; depth beyond 2 is astronomically out of desk range
    "paper": IndexMaps(
        "paper",
        f=lambda k: 10**k,
        g=lambda k: 2 * 10**k,
        h1=lambda k: 3 * 10**k,
        h2=lambda k: 6 * 10**k,
    ),
    "geometric": IndexMaps("geometric", f=lambda k: 2 * 3**k, g=lambda k: 4 * 3**k),
    # desk-scale default: depth-2..4 structure visible within 1e6..1e8 iterations
    "linear": IndexMaps("linear", f=lambda k: 4 * k - 2, g=lambda k: 4 * k),
    # linear-style maps with room for the second window pair
    "linear-z": IndexMaps(
        "linear-z",
        f=lambda k: 8 * k - 6,
        g=lambda k: 8 * k - 4,
        h1=lambda k: 8 * k - 2,
        h2=lambda k: 8 * k,
    ),
}


def check_index_maps(maps: IndexMaps, depth: int) -> list[str]:
    """Interleaving / positivity violations for levels 1..depth+2 (if evaluable)."""
    problems: list[str] = []
    try:
        for k in range(1, depth + 3):
            seq = [maps.f(k), maps.g(k)]
            if maps.has_second_pair:
                seq += [maps.h1(k), maps.h2(k)]  # type: ignore[misc]
            seq.append(maps.f(k + 1))
            for u, v in zip(seq, seq[1:]):
                if not u < v:
                    problems.append(f"level {k}: indices not strictly interleaved ({u} !< {v})")
            for m in seq[:-1]:
                if m < 1:
                    problems.append(f"level {k}: non-positive index {m}")
    except ConstructionError as exc:
        problems.append(str(exc))
    return problems


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelBounds:
    """Per-level disagreement/measure bounds derived from the construction.

    ``wake_measure_b`` caps the measure of the level-k anchor-gap wake
    (count of shifts x gap width); ``wake_measure_c`` the growth-strip
    wake. ``density_ts`` bounds the asymptotic disagreement density of
    the level-k approximant against the next anchor-shifted one (window
    span 1 + sum(b), one extra step because the anchor carries a leading
    alpha); ``density_st`` the in-level pair (span sum(c), no extra
    step). ``skew_prereq_ok`` records c_{k+1} > sum_{i<=k} b_i, the
    condition keeping integer-fiber excursions in {0, 1}.
    """

    level: int
    wake_measure_b: QReal
    wake_measure_c: QReal | None
    density_ts: QReal | None
    density_st: QReal
    skew_prereq_ok: bool | None
    wake_b_overlaps: bool
    wake_c_overlaps: bool | None


@dataclass(frozen=True)
class Construction:
    alpha: QReal
    maps: IndexMaps
    depth: int
    budget: int
    convergent_table: tuple[Convergent, ...]
    c: tuple[int, ...]  # c[k-1] = q_{f(k)}
    b: tuple[int, ...]
    gamma: tuple[QReal, ...]  # frac(c_k alpha), positive side
    beta: tuple[QReal, ...]
    theta: tuple[QReal, ...]  # theta[k] = sum_{i<=k} gamma_i, theta[0] = 0
    y: tuple[QReal, ...]  # y[k] = frac(alpha + sum_{i<=k} beta_i), y[0] = alpha
    sum_c: tuple[int, ...]  # sum_c[k] = c_1 + ... + c_k, sum_c[0] = 0
    sum_b: tuple[int, ...]
    tail_c: QReal
    tail_b: QReal
    level_bounds: tuple[LevelBounds, ...]
    few_move_sum: QReal
    warnings: tuple[str, ...] = ()
    # second window pair (integer-fiber four-interval system), if h-maps given
    u_anchor: QReal | None = None
    u_width: QReal | None = None
    tail_u: QReal | None = None
    z_anchor: QReal | None = None
    tail_z: QReal | None = None

    # -- derived geometry ---------------------------------------------------

    def q(self, i: int) -> int:
        return self.convergent_table[i].q

    def base_arc(self, k: int | None = None) -> Arc:
        """Truncated base window [0, theta[k]) (k defaults to depth)."""
        k = self.depth if k is None else k
        return Arc(CirclePoint(QReal(0, 0, self.alpha.d)), self.theta[k])

    def offset_arc(self, k: int | None = None) -> Arc:
        """Truncated offset window [y[k], y[k] + theta[k])."""
        k = self.depth if k is None else k
        return Arc(CirclePoint(self.y[k]), self.theta[k])

    def anchor_gap(self, k: int) -> tuple[QReal, QReal]:
        """[y_{k-1}, y_k): where consecutive anchor choices differ."""
        if not 1 <= k <= self.depth:
            raise ConstructionError(f"anchor gap level {k} out of range 1..{self.depth}")
        return (self.y[k - 1], self.y[k])

    def growth_strip(self, k: int) -> tuple[QReal, QReal]:
        """[theta_k, theta_{k+1}): the level-(k+1) base-window increment."""
        if not 1 <= k <= self.depth - 1:
            raise ConstructionError(
                f"growth strip level {k} needs gamma[{k + 1}]; have depth {self.depth}"
            )
        return (self.theta[k], self.theta[k + 1])

    # -- three-valued membership in the limit windows ------------------------

    def base_window_membership(self, p: CirclePoint) -> Membership3:
        """Membership of p in the limit base window [0, theta_infinity)."""
        x = p.x
        if x < self.theta[self.depth]:
            return Membership3.IN
        if x < self.theta[self.depth] + self.tail_c:
            return Membership3.UNCERTAIN
        return Membership3.OUT

    def offset_window_membership(self, p: CirclePoint) -> Membership3:
        """Membership in the limit offset window; the anchor itself is a limit,
        so the uncertain band is widened by tail_b on both sides."""
        x = p.x
        yk = self.y[self.depth]
        if x < yk:
            return Membership3.OUT
        if x < yk + self.tail_b:
            return Membership3.UNCERTAIN
        if x < yk + self.theta[self.depth]:
            return Membership3.IN
        if x < yk + self.theta[self.depth] + self.tail_b + self.tail_c:
            return Membership3.UNCERTAIN
        return Membership3.OUT

    # -- exceptional wake sets ------------------------------------------------

    def in_anchor_wake(self, k: int, p: CirclePoint) -> bool:
        """Is p a forward image (1..sum c_i steps) of the anchor gap [y_{k-1}, y_k)?"""
        lo, hi = self.anchor_gap(k)
        return self._window_scan(p, lo, hi, self.sum_c[k], backward=True)

    def in_strip_wake(self, k: int, p: CirclePoint) -> bool:
        """Is p a forward image (1..sum b_i steps) of the growth strip?"""
        lo, hi = self.growth_strip(k)
        return self._window_scan(p, lo, hi, self.sum_b[k], backward=True)

    def in_anchor_approach(self, k: int, p: CirclePoint) -> bool:
        """Will p hit the anchor gap within k^2 * c_k forward steps?"""
        lo, hi = self.anchor_gap(k)
        return self._window_scan(p, lo, hi, k * k * self.c[k - 1], backward=False)

    def in_strip_approach(self, k: int, p: CirclePoint) -> bool:
        """Will p hit the growth strip within k^2 * b_k forward steps?"""
        lo, hi = self.growth_strip(k)
        return self._window_scan(p, lo, hi, k * k * self.b[k - 1], backward=False)

    def _window_scan(
        self, p: CirclePoint, lo: QReal, hi: QReal, steps: int, backward: bool
    ) -> bool:
        """Exact scan: does frac(p -/+ l*alpha) enter [lo, hi) for some l in 1..steps?

        Integerized over the common denominator; refuses beyond the budget.
        """
        if steps > self.budget:
            raise IterationBudgetError(
                f"scan range {steps} exceeds iteration budget {self.budget}"
            )
        d = self.alpha.d
        den, (ax, bx), (aa, ba), (al, bl), (ah, bh) = integerize_common_den(
            p.x, self.alpha, lo, hi
        )
        if backward:
            aa, ba = -aa, -ba
        sgn = sign_int_pair
        for _ in range(steps):
            ax += aa
            bx += ba
            # renormalize into [0, den): one step moves by less than 1
            if sgn(ax, bx, d) < 0:
                ax += den
            elif sgn(ax - den, bx, d) >= 0:
                ax -= den
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                return True
        return False

    def min_orbit_gap(self, max_steps: int) -> QReal:
        """min over 1 <= m <= max_steps of d(m*alpha, Z), via convergents."""
        best: QReal | None = None
        for conv in self.convergent_table:
            if conv.q > max_steps or conv.q == 0:
                continue
            err = abs(self.alpha * conv.q - conv.p)
            if best is None or err < best:
                best = err
        if best is None:
            best = min(self.alpha.frac(), (1 - self.alpha).frac())
        return best

    def to_config(self) -> dict:
        a = self.alpha
        return {
            "alpha": {
                "a_num": a.a.numerator,
                "a_den": a.a.denominator,
                "b_num": a.b.numerator,
                "b_den": a.b.denominator,
                "d": a.d,
            },
            "preset": self.maps.name,
            "depth": self.depth,
        }


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def build(
    alpha: QReal,
    maps: IndexMaps | str = "linear",
    depth: int = 2,
    budget: int = DEFAULT_BUDGET,
) -> Construction:
    """Compute the full apparatus at truncation depth ``depth``, exactly.

    Raises ConstructionError when alpha is out of range, an index map
    selects a negative-side convergent, or the truncated windows (with
    their tail bands) fail to be disjoint. A level-bound sum >= 1 is a
    warning carried on the result, not an error.
    """
    if isinstance(maps, str):
        maps = IndexMaps.preset(maps)
    if depth < 1:
        raise ConstructionError("depth must be >= 1")
    if alpha.is_rational:
        raise ConstructionError("alpha must be irrational (quadratic)")
    if not (QReal(0, 0, alpha.d) < alpha < QReal(Fraction(1, 3), 0, alpha.d)):
        raise ConstructionError("alpha must lie in (0, 1/3)")

    problems = check_index_maps(maps, depth)
    if problems:
        raise ConstructionError("bad index maps: " + "; ".join(problems))

    need = [maps.f(k) for k in range(1, depth + 3)] + [maps.g(k) for k in range(1, depth + 3)]
    if maps.has_second_pair:
        need += [maps.h1(k) for k in range(1, depth + 3)]  # type: ignore[misc]
        need += [maps.h2(k) for k in range(1, depth + 3)]  # type: ignore[misc]
    table = tuple(convergents(alpha, max(need) + 1))

    def positive_frac(index: int, role: str) -> QReal:
        """frac(q_index * alpha), verified to be the positive-side error."""
        value = frac_multiple(alpha, table[index].q)
        if not value < QReal(Fraction(1, table[index + 1].q), 0, alpha.d):
            raise ConstructionError(
                f"{role} index {index} selects the negative-side convergent "
                f"(frac(q*alpha) is not below 1/q_next); use even indices"
            )
        return value

    c = tuple(table[maps.f(k)].q for k in range(1, depth + 1))
    b = tuple(table[maps.g(k)].q for k in range(1, depth + 1))
    gamma = tuple(positive_frac(maps.f(k), "f") for k in range(1, depth + 1))
    beta = tuple(positive_frac(maps.g(k), "g") for k in range(1, depth + 1))
    # sign condition must also hold at the two tail levels
    for k in (depth + 1, depth + 2):
        positive_frac(maps.f(k), "f")
        positive_frac(maps.g(k), "g")

    zero = QReal(0, 0, alpha.d)
    theta = [zero]
    for gk in gamma:
        theta.append(theta[-1] + gk)
    y = [alpha.frac()]
    for bk in beta:
        y.append((y[-1] + bk).frac())

    sum_c = [0]
    for ck in c:
        sum_c.append(sum_c[-1] + ck)
    sum_b = [0]
    for bk in b:
        sum_b.append(sum_b[-1] + bk)

    # build invariants: the summed fractional parts equal the single big multiple
    for k in range(1, depth + 1):
        if frac_multiple(alpha, sum_c[k]) != theta[k]:
            raise ConstructionError("fractional parts wrapped; growth condition violated")
        if frac_multiple(alpha, 1 + sum_b[k]) != y[k]:
            raise ConstructionError("anchor sum wrapped; growth condition violated")
    for seq, label in ((gamma, "gamma"), (beta, "beta")):
        for u, v in zip(seq, seq[1:]):
            if not v < u:
                raise ConstructionError(f"{label} is not strictly decreasing")

    tail_c = QReal(Fraction(2, table[maps.f(depth + 1) + 1].q), 0, alpha.d)
    tail_b = QReal(Fraction(2, table[maps.g(depth + 1) + 1].q), 0, alpha.d)
    # factor-2 slack: the next omitted term is at most half the bound
    if not 2 * table[maps.f(depth + 1) + 1].q <= table[maps.f(depth + 2) + 1].q:
        raise ConstructionError("tail bound slack violated for f map")
    if not 2 * table[maps.g(depth + 1) + 1].q <= table[maps.g(depth + 2) + 1].q:
        raise ConstructionError("tail bound slack violated for g map")

    # the truncated windows, fattened by their tails, must stay disjoint and unwrapped
    thetaK, yK = theta[depth], y[depth]
    if not thetaK + tail_c <= yK:
        raise ConstructionError("base and offset windows overlap (theta + tail > y)")
    if not yK + thetaK + tail_b + tail_c <= 1:
        raise ConstructionError("offset window wraps past 1")

    warnings: list[str] = []
    levels: list[LevelBounds] = []
    few_move = zero
    for k in range(1, depth + 1):
        # anchor-gap wake: sum_c[k] translates of a width-beta_k window
        width_b = beta[k - 1]
        lam_b = QReal(sum_c[k], 0, alpha.d) * width_b
        gap_b = _min_gap(alpha, table, sum_c[k] - 1)
        overlap_b = gap_b < width_b if sum_c[k] > 1 else False
        lam_c = density_ts = None
        overlap_c = None
        skew_ok = None
        if k <= depth - 1:
            # growth-strip wake: sum_b[k] translates of a width-gamma_{k+1} window
            strip_width = gamma[k]  # gamma tuple is 0-based: gamma[k] = gamma_{k+1}
            lam_c = QReal(sum_b[k], 0, alpha.d) * strip_width
            density_ts = QReal(1 + sum_b[k], 0, alpha.d) * strip_width
            gap_c = _min_gap(alpha, table, sum_b[k] - 1)
            overlap_c = gap_c < strip_width if sum_b[k] > 1 else False
            skew_ok = c[k] > sum_b[k]
        density_st = lam_b
        levels.append(
            LevelBounds(
                level=k,
                wake_measure_b=lam_b,
                wake_measure_c=lam_c,
                density_ts=density_ts,
                density_st=density_st,
                skew_prereq_ok=skew_ok,
                wake_b_overlaps=overlap_b,
                wake_c_overlaps=overlap_c,
            )
        )
        if k <= depth - 1:
            few_move = few_move + lam_b + lam_c  # type: ignore[operator]
    if not few_move < 1:
        warnings.append(f"sum of wake measures below depth is >= 1 ({few_move!r})")
    for lv in levels:
        if lv.wake_b_overlaps or lv.wake_c_overlaps:
            warnings.append(
                f"level {lv.level}: wake translates overlap; measure formula over-counts"
            )
        if lv.skew_prereq_ok is False:
            warnings.append(f"level {lv.level}: c_(k+1) <= sum b_i; fiber may exceed 1")

    u_anchor = u_width = tail_u = z_anchor = tail_z = None
    if maps.has_second_pair:
        u_anchor = frac_multiple(alpha, 5)
        u_width = zero
        z_anchor = zero
        for k in range(1, depth + 1):
            u_width = u_width + positive_frac(maps.h1(k), "h1")  # type: ignore[misc]
            z_anchor = z_anchor + positive_frac(maps.h2(k), "h2")  # type: ignore[misc]
        z_anchor = z_anchor.frac()
        for k in (depth + 1, depth + 2):
            positive_frac(maps.h1(k), "h1")  # type: ignore[misc]
            positive_frac(maps.h2(k), "h2")  # type: ignore[misc]
        tail_u = QReal(Fraction(2, table[maps.h1(depth + 1) + 1].q), 0, alpha.d)  # type: ignore[misc]
        tail_z = QReal(Fraction(2, table[maps.h2(depth + 1) + 1].q), 0, alpha.d)  # type: ignore[misc]

    return Construction(
        alpha=alpha,
        maps=maps,
        depth=depth,
        budget=budget,
        convergent_table=table,
        c=c,
        b=b,
        gamma=gamma,
        beta=beta,
        theta=tuple(theta),
        y=tuple(y),
        sum_c=tuple(sum_c),
        sum_b=tuple(sum_b),
        tail_c=tail_c,
        tail_b=tail_b,
        level_bounds=tuple(levels),
        few_move_sum=few_move,
        warnings=tuple(warnings),
        u_anchor=u_anchor,
        u_width=u_width,
        tail_u=tail_u,
        z_anchor=z_anchor,
        tail_z=tail_z,
    )


def _min_gap(alpha: QReal, table: Sequence[Convergent], max_steps: int) -> QReal:
    """min over 1 <= m <= max_steps of d(m*alpha, Z); min over convergents."""
    best: QReal | None = None
    if max_steps < 1:
        return QReal(1, 0, alpha.d)
    for conv in table:
        if 1 <= conv.q <= max_steps:
            err = abs(alpha * conv.q - conv.p)
            if best is None or err < best:
                best = err
    if best is None:
        best = min(alpha.frac(), (1 - alpha).frac())
    return best


def validate_growth(construction: Construction) -> dict:
    """Per-level bound table with pass/warn verdict, JSON-ready."""
    rows = []
    running = QReal(0, 0, construction.alpha.d)
    from skewlab.qfield import decimal_str  # local import to avoid cycle at module load

    for lv in construction.level_bounds:
        if lv.wake_measure_c is not None:
            running = running + lv.wake_measure_b + lv.wake_measure_c
        rows.append(
            {
                "level": lv.level,
                "wake_measure_b": decimal_str(lv.wake_measure_b),
                "wake_measure_c": decimal_str(lv.wake_measure_c)
                if lv.wake_measure_c is not None
                else None,
                "density_bound_ts": decimal_str(lv.density_ts)
                if lv.density_ts is not None
                else None,
                "density_bound_st": decimal_str(lv.density_st),
                "running_sum": decimal_str(running),
                "skew_prereq_ok": lv.skew_prereq_ok,
                "wake_overlaps": bool(lv.wake_b_overlaps or lv.wake_c_overlaps),
            }
        )
    verdict = "pass" if not construction.warnings else "warn"
    return {
        "preset": construction.maps.name,
        "depth": construction.depth,
        "levels": rows,
        "few_move_sum": decimal_str(construction.few_move_sum),
        "warnings": list(construction.warnings),
        "verdict": verdict,
    }


# ---------------------------------------------------------------------------
# JSON config
# ---------------------------------------------------------------------------


def construction_from_config(cfg: dict, budget: int = DEFAULT_BUDGET) -> Construction:
    """Build from the canonical JSON config shape.

    {"alpha": {"a_num":-2,"a_den":1,"b_num":1,"b_den":1,"d":5},
     "preset": "linear" | "geometric" | "paper" | "linear-z"
               | {"f":[...],"g":[...],"h1":[...],"h2":[...]},
     "depth": K}
    """
    a = cfg["alpha"]
    alpha = make_qreal(a["a_num"], a["a_den"], a["b_num"], a["b_den"], a["d"])
    preset = cfg.get("preset", "linear")
    if isinstance(preset, str):
        maps = IndexMaps.preset(preset)
    else:
        maps = IndexMaps.from_lists(
            preset["f"], preset["g"], preset.get("h1"), preset.get("h2")
        )
    return build(alpha, maps, int(cfg.get("depth", 2)), budget=budget)


def config_digest(cfg: dict) -> str:
    """Stable digest of a config mapping (determinism receipts)."""
    import hashlib

    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
