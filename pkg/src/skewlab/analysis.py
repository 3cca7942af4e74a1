"""The verification suite: each checkable claim as a named experiment.

Every experiment returns a ``Verdict``: Verified / Violated /
NoCertificate plus a witness (always reproducible from the config) and
free-form numeric metrics. Experiments that certify exact statements
(partial-sum nonnegativity, orbit agreement, the shift identity,
separation, displacement) involve no randomness and no tolerance: the
comparisons are exact integer/order comparisons. Statements about
limits are certified only as finite-horizon consequences and labelled
as trends.

NoCertificate is reserved for honest inability: an orbit touched an
unresolved tail band, or a scan was refused by the iteration budget.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from skewlab._engine import fiber_scan, mismatch_scan
from skewlab.circle import Arc, ArcUnion, CirclePoint, circle_dist, separation
from skewlab.construction import (
    Construction,
    IterationBudgetError,
    config_digest,
)
from skewlab.dynamics import (
    System,
    SystemKind,
    iet_displacement_bound,
    jump_table,
)
from skewlab.qfield import (
    QReal,
    continued_fraction,
    decimal_str,
    frac_multiple,
    rotation_hit_count,
    to_float,
)

__all__ = [
    "Verdict",
    "VerdictStatus",
    "ShrinkRule",
    "check_j_first",
    "check_comparison",
    "check_small_shift",
    "disagreement_density",
    "occupancy",
    "dense_orbit_certificate",
    "halfstrip_scan",
    "dio_check",
    "separation_check",
    "shrink_estimate",
    "shrink_exact",
    "default_sample_points",
    "max_partial_quotient",
]


class VerdictStatus(Enum):
    VERIFIED = "Verified"
    VIOLATED = "Violated"
    NO_CERTIFICATE = "NoCertificate"


@dataclass
class Verdict:
    name: str
    status: VerdictStatus
    witness: dict | None
    metrics: dict
    config: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def exit_code(self) -> int:
        return {"Verified": 0, "Violated": 1, "NoCertificate": 3}[self.status.value]

    def to_json_dict(self) -> dict:
        out = {
            "name": self.name,
            "status": self.status.value,
            "metrics": self.metrics,
            "config_digest": config_digest(self.config) if self.config else None,
            "seed": self.seed,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ": "))


def _zero(c: Construction) -> CirclePoint:
    return CirclePoint(QReal(0, 0, c.alpha.d))


# ---------------------------------------------------------------------------
# exact lemma checks
# ---------------------------------------------------------------------------


def check_j_first(
    c: Construction, n_steps: int, swap: bool = False, engine: str = "auto"
) -> Verdict:
    """Partial sums of (base-window hits - offset-window hits) along the
    orbit of 0 must be nonnegative at every horizon.

    Runs the truncation-aware difference (uncertain band membership
    takes the Out branch and forfeits the certificate). ``swap``
    exchanges the two windows, an adversarial control that must fail.
    """
    table = jump_table(c, System(SystemKind.THAT_TRUNC))
    if swap:
        table = type(table)(
            alpha=table.alpha,
            segments=tuple((lo, hi, -w) for lo, hi, w in table.segments),
            bands=table.bands,
            mod2=False,
        )
    scan = fiber_scan(table, QReal(0, 0, c.alpha.d), 0, n_steps + 1, engine=engine)
    metrics = {
        "steps": n_steps,
        "min_partial_sum": scan.min_h,
        "argmin": scan.argmin,
        "final_sum": scan.final_h,
        "uncertain_steps": scan.uncertain,
    }
    if scan.uncertain:
        return Verdict(
            "j-first",
            VerdictStatus.NO_CERTIFICATE,
            {"first_uncertain_step": scan.first_uncertain},
            metrics,
            c.to_config(),
        )
    if scan.min_h < 0:
        return Verdict(
            "j-first",
            VerdictStatus.VIOLATED,
            {"n": scan.argmin - 1, "partial_sum": scan.min_h},
            metrics,
            c.to_config(),
        )
    return Verdict("j-first", VerdictStatus.VERIFIED, None, metrics, c.to_config())


def check_comparison(
    c: Construction,
    k: int | None = None,
    cap: int = 10**6,
    engine: str = "auto",
) -> Verdict:
    """The truncated system and the level-k approximant agree state by
    state from (0, 0) for n < sum_{i<=k} c_i, exactly; and (when the
    horizon is within the cap) they diverge at exactly that index."""
    k = c.depth - 1 if k is None else k
    horizon = c.sum_c[k]
    n = min(horizon, cap)
    ta = jump_table(c, System(SystemKind.T_TRUNC))
    tb = jump_table(c, System(SystemKind.TK, k))
    # when the full horizon fits, scan 2 extra states to witness sharpness
    probe_extra = 2 if (horizon < cap and k < c.depth) else 0
    scan = mismatch_scan(
        ta, tb, QReal(0, 0, c.alpha.d), 0, n + probe_extra, checkpoints=[n], engine=engine
    )
    within = scan.checkpoint_mismatches.get(n, scan.mismatches)
    metrics = {
        "level": k,
        "agreement_horizon": horizon,
        "checked_states": n,
        "mismatches_within_horizon": within,
        "uncertain_steps": scan.uncertain,
    }
    if probe_extra:
        metrics["diverges_at"] = scan.first_mismatch
        metrics["sharp"] = bool(scan.first_mismatch == horizon + 1)
    if scan.uncertain:
        return Verdict(
            "comparison", VerdictStatus.NO_CERTIFICATE, None, metrics, c.to_config()
        )
    if within:
        return Verdict(
            "comparison",
            VerdictStatus.VIOLATED,
            {"n": scan.first_mismatch},
            metrics,
            c.to_config(),
        )
    return Verdict("comparison", VerdictStatus.VERIFIED, None, metrics, c.to_config())


def check_small_shift(
    c: Construction, k: int, j_max: int | None = None, perturb: int = 0
) -> Verdict:
    """T^(j+1+b_{k+1})(0,0) = T^j(0,0) + (frac((1+b_{k+1}) alpha), flip).

    Checked exactly for j = 1..j_max: the x-identity by exact
    arithmetic, the fiber flip by exact hit counting over the window
    [j, j+b_{k+1}] (closed-form floor sums plus incremental sliding, so
    shifts of ~1e10 steps cost nothing). The identity is licensed for
    j < sum_{i<=k} c_i and is empirically sharp there. ``perturb``
    offsets the shift (control: must be Violated at j = 1).
    """
    if k + 1 > c.depth:
        raise IterationBudgetError(
            f"small-shift at level {k} needs depth >= {k + 1} (b_(k+1))"
        )
    b_next = c.b[k]  # b_{k+1}: tuple is 0-based
    license_max = c.sum_c[k] - 1
    if j_max is None:
        j_max = min(license_max, 10**4)
    shift = 1 + b_next + perturb
    alpha = c.alpha
    zero = QReal(0, 0, alpha.d)
    thetaK, yK = c.theta[c.depth], c.y[c.depth]
    seg1 = (zero, thetaK)
    seg2 = (yK + c.tail_b, yK + thetaK)
    bands = [
        (thetaK, thetaK + c.tail_c),
        (yK, yK + c.tail_b),
        (yK + thetaK, yK + thetaK + c.tail_b + c.tail_c),
    ]
    span = j_max + 1 + shift
    unc = sum(rotation_hit_count(alpha, zero, lo, hi, span) for lo, hi in bands)
    metrics = {
        "level": k,
        "j_max": j_max,
        "shift": shift,
        "licensed_j_below": license_max + 1,
        "uncertain_steps_in_range": unc,
    }
    if unc:
        return Verdict(
            "small-shift", VerdictStatus.NO_CERTIFICATE, None, metrics, c.to_config()
        )
    expected_dx = frac_multiple(alpha, 1 + b_next)
    actual_dx = frac_multiple(alpha, shift)
    if actual_dx != expected_dx:
        return Verdict(
            "small-shift",
            VerdictStatus.VIOLATED,
            {"j": 1, "reason": "x-shift mismatch"},
            metrics,
            c.to_config(),
        )

    def chi(x: QReal) -> int:
        return int(seg1[0] <= x < seg1[1]) + int(seg2[0] <= x < seg2[1])

    # H(0) = sum_{n in [0, shift-1]} chi(x_n), then slide the window
    h_window = sum(
        rotation_hit_count(alpha, zero, lo, hi, shift) for lo, hi in (seg1, seg2)
    )
    x_low = zero  # x_j
    x_high = frac_multiple(alpha, shift)  # x_{j+shift}
    first_fail = None
    for j in range(1, j_max + 1):
        # slide [j-1, j-1+shift-1] -> [j, j+shift-1]
        h_window += chi(x_high) - chi(x_low)
        x_low = (x_low + alpha).frac()
        x_high = (x_high + alpha).frac()
        if h_window % 2 != 1:
            first_fail = j
            break
    metrics["first_fail"] = first_fail
    if first_fail is not None:
        return Verdict(
            "small-shift",
            VerdictStatus.VIOLATED,
            {"j": first_fail, "reason": "fiber flip parity"},
            metrics,
            c.to_config(),
        )
    return Verdict("small-shift", VerdictStatus.VERIFIED, None, metrics, c.to_config())


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def _density_bound(c: Construction, sys_a: System, sys_b: System, n: int):
    """Operational bound for a recognized approximant pair, or None.

    Spans are exact correction lags: the offset anchor carries a
    leading alpha, so the level-k pair (Tk, Sk+1) corrects after
    1 + sum b_i steps; (Sk, Tk) corrects after sum c_i steps. The
    finite-horizon allowance is 3 windows (2 edges + 1 for the hit-count
    remainder of the bounded-remainder interval).
    """
    pair = {sys_a.kind, sys_b.kind}
    d = c.alpha.d
    if sys_a == sys_b:
        return QReal(0, 0, d), QReal(0, 0, d), 0
    if pair == {SystemKind.TK, SystemKind.SK}:
        ka = sys_a.k if sys_a.kind is SystemKind.TK else sys_b.k
        kb = sys_a.k if sys_a.kind is SystemKind.SK else sys_b.k
        if kb == ka + 1 and ka is not None and ka <= c.depth - 1:
            span = 1 + c.sum_b[ka]
            width = c.gamma[ka]  # gamma_{k+1}
            bound = QReal(span, 0, d) * width + QReal(Fraction(3 * span, n), 0, d)
            paper_form = QReal(c.sum_b[ka], 0, d) * width
            return bound, paper_form, span
        if kb == ka and ka is not None:
            span = c.sum_c[ka]
            width = c.beta[ka - 1]
            bound = QReal(span, 0, d) * width + QReal(Fraction(3 * span, n), 0, d)
            paper_form = QReal(span, 0, d) * width
            return bound, paper_form, span
    if pair == {SystemKind.FK} and sys_a.k is not None and sys_b.k is not None:
        hi, lo = max(sys_a.k, sys_b.k), min(sys_a.k, sys_b.k)
        if hi == lo + 1 and hi <= c.depth - 1:
            span = c.sum_c[hi] + c.sum_b[hi - 1]
            val = (
                QReal(c.sum_c[hi], 0, d) * c.beta[hi - 1]
                + QReal(c.sum_b[hi - 1], 0, d) * c.gamma[hi - 1]
            )
            bound = val + val + QReal(Fraction(3 * span, n), 0, d)
            return bound, val, span
    return None


def disagreement_density(
    c: Construction,
    sys_a: System,
    sys_b: System,
    n: int,
    start: tuple[CirclePoint, int] | None = None,
    bound: QReal | None = None,
    engine: str = "auto",
) -> Verdict:
    """Fraction of states 0 <= m < n where the two systems' orbits differ.

    For recognized approximant pairs the verdict compares the exact
    density against the derived level bound; unrecognized pairs need an
    explicit bound (else the run only reports)."""
    x0, h0 = start if start is not None else (_zero(c), 0)
    ta, tb = jump_table(c, sys_a), jump_table(c, sys_b)
    scan = mismatch_scan(ta, tb, x0.x, h0, n, engine=engine)
    density = Fraction(scan.mismatches, n)
    name = "density"
    resolved = _density_bound(c, sys_a, sys_b, n)
    paper_form = None
    span = None
    if bound is None and resolved is not None:
        bound, paper_form, span = resolved
    metrics = {
        "pair": f"{sys_a.label()} vs {sys_b.label()}",
        "steps": n,
        "mismatch_states": scan.mismatches,
        "density": float(density),
        "bound": to_float(bound) if bound is not None else None,
        "paper_form_bound": to_float(paper_form) if paper_form is not None else None,
        "window_span": span,
        "uncertain_steps": scan.uncertain,
    }
    if scan.uncertain:
        return Verdict(name, VerdictStatus.NO_CERTIFICATE, None, metrics, c.to_config())
    if bound is None:
        return Verdict(
            name,
            VerdictStatus.NO_CERTIFICATE,
            {"reason": "no bound known for this pair"},
            metrics,
            c.to_config(),
        )
    ok = QReal(density, 0, c.alpha.d) <= bound
    if not ok:
        return Verdict(
            name,
            VerdictStatus.VIOLATED,
            {"density": float(density), "bound": to_float(bound)},
            metrics,
            c.to_config(),
        )
    return Verdict(name, VerdictStatus.VERIFIED, None, metrics, c.to_config())


# ---------------------------------------------------------------------------
# occupancy (the two-ergodic-measures diagnostic)
# ---------------------------------------------------------------------------


def occupancy(
    c: Construction,
    system: System | None,
    n: int,
    probe_arc: Arc | None = None,
    probe_sheet: int = 0,
    checkpoints: Sequence[int] | None = None,
    delta_min: Fraction = Fraction(1, 100),
    engine: str = "auto",
) -> Verdict:
    """Empirical occupancies of (probe arc x sheet) from the two canonical
    starts (0,0) and (0,1).

    Verified iff, at every checkpoint N: the two occupancies sum to the
    probe length within 4/sqrt(N) (the base rotation equidistributes)
    while their gap stays >= delta_min (the starts occupy the probe at
    persistently different rates: the two-measure signal)."""
    if system is None:
        system = System(SystemKind.TK, c.depth)
    if not system.mod2:
        raise ValueError("occupancy compares the two sheets of a two-sheet system")
    if probe_arc is None:
        probe_arc = Arc(
            CirclePoint(QReal(Fraction(3, 10), 0, c.alpha.d)),
            QReal(Fraction(3, 10), 0, c.alpha.d),
        )
    cps = sorted(set(checkpoints or [n // 4, n // 2, n]))
    table = jump_table(c, system)
    pieces = tuple(probe_arc.pieces())
    scan = fiber_scan(
        table,
        QReal(0, 0, c.alpha.d),
        0,
        n,
        checkpoints=cps,
        probe=(pieces, probe_sheet),
        engine=engine,
    )
    lam = probe_arc.length
    per_cp = {}
    ok_margin = True
    ok_gap = True
    for cp in cps:
        if cp == 0:
            continue
        in_probe = scan.probe_in[cp]
        from_00 = scan.probe_in_sheet[cp]
        from_01 = in_probe - from_00  # the (0,1) start rides the complementary sheet
        nu0 = Fraction(from_00, cp)
        nu1 = Fraction(from_01, cp)
        margin_err = abs(nu0 + nu1 - lam.a) if lam.is_rational else None
        if margin_err is None:
            diff = QReal(nu0 + nu1, 0, c.alpha.d) - lam
            margin_ok = (diff * diff) * cp <= 16
        else:
            margin_ok = margin_err * margin_err * cp <= 16
        gap = abs(nu0 - nu1)
        gap_ok = gap >= delta_min
        ok_margin &= bool(margin_ok)
        ok_gap &= bool(gap_ok)
        per_cp[str(cp)] = {
            "nu_00": float(nu0),
            "nu_01": float(nu1),
            "gap": float(gap),
            "marginal_error": float(margin_err) if margin_err is not None else None,
            "marginal_tol": 4.0 / cp**0.5,
        }
    metrics = {
        "system": system.label(),
        "steps": n,
        "probe_length": to_float(lam),
        "probe_sheet": probe_sheet,
        "delta_min": float(delta_min),
        "checkpoints": per_cp,
        "uncertain_steps": scan.uncertain,
    }
    if scan.uncertain:
        return Verdict(
            "occupancy", VerdictStatus.NO_CERTIFICATE, None, metrics, c.to_config()
        )
    if not (ok_margin and ok_gap):
        return Verdict(
            "occupancy",
            VerdictStatus.VIOLATED,
            {"marginal_ok": ok_margin, "gap_persistent": ok_gap},
            metrics,
            c.to_config(),
        )
    return Verdict("occupancy", VerdictStatus.VERIFIED, None, metrics, c.to_config())


# ---------------------------------------------------------------------------
# minimality certificate
# ---------------------------------------------------------------------------


def dense_orbit_certificate(
    c: Construction,
    eps: QReal,
    r_samples: Sequence[int] = (0, 10**4),
    n_cap: int = 10**5,
    engine: str = "auto",
) -> Verdict:
    """Find N <= n_cap such that every window {T^r(0,0) .. T^(r+N)(0,0)}
    is eps-dense in circle x two sheets (covering radius per sheet)."""
    if eps.sign() <= 0:
        raise ValueError("eps must be positive")
    table = jump_table(c, System(SystemKind.T_TRUNC))
    alpha = c.alpha
    zero = QReal(0, 0, alpha.d)
    n_try = 1000
    found = None
    while n_try <= n_cap:
        ok_all = True
        for r in r_samples:
            unc = sum(
                rotation_hit_count(alpha, zero, lo, hi, r + n_try + 1)
                for lo, hi in table.bands
            )
            if unc:
                return Verdict(
                    "dense-orbit",
                    VerdictStatus.NO_CERTIFICATE,
                    {"reason": "uncertain membership in scanned range"},
                    {"n_tried": n_try},
                    c.to_config(),
                )
            if not _window_eps_dense(c, table, r, n_try, eps):
                ok_all = False
                break
        if ok_all:
            found = n_try
            break
        n_try *= 2
    metrics = {"eps": to_float(eps), "r_samples": list(r_samples), "n_cap": n_cap}
    if found is None:
        return Verdict(
            "dense-orbit", VerdictStatus.NO_CERTIFICATE, {"reason": "cap reached"},
            metrics, c.to_config(),
        )
    metrics["certified_n"] = found
    return Verdict("dense-orbit", VerdictStatus.VERIFIED, None, metrics, c.to_config())


def _window_eps_dense(c, table, r: int, n: int, eps: QReal) -> bool:
    """Exact covering check: per sheet, all sorted gaps <= 2*eps."""
    from math import isqrt

    from skewlab.qfield import integerize_common_den, sign_int_pair

    alpha = c.alpha
    d = alpha.d
    vals = [QReal(0, 0, d), alpha]
    for lo, hi, _ in table.segments:
        vals.extend((lo, hi))
    den, *pairs = integerize_common_den(*vals)
    (ax, bx), (aa, ba) = pairs[0], pairs[1]
    segs = []
    it = iter(pairs[2:])
    for (_, _, w) in table.segments:
        (al, bl), (ah, bh) = next(it), next(it)
        segs.append((al, bl, ah, bh, w))
    sgn = sign_int_pair
    S = 1 << 80
    keys = ([], [])
    h = 0
    for m in range(r + n + 1):
        if m >= r:
            # integer key ~ floor(x * 2^80); +-1 wobble is irrelevant at key scale
            u = isqrt(bx * bx * S * S * d) if bx >= 0 else -isqrt(bx * bx * S * S * d) - 1
            keys[h % 2].append((ax * S + u) // den)
        w = 0
        for al, bl, ah, bh, weight in segs:
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                w += weight
        h += w
        ax += aa
        bx += ba
        if sgn(ax, bx, d) < 0:
            ax += den
        elif sgn(ax - den, bx, d) >= 0:
            ax -= den
    two_eps_key = (eps * 2 * S).floor()
    for sheet_keys in keys:
        if not sheet_keys:
            return False
        sheet_keys.sort()
        worst = (sheet_keys[0] + S) - sheet_keys[-1]
        for i in range(len(sheet_keys) - 1):
            gap = sheet_keys[i + 1] - sheet_keys[i]
            if gap > worst:
                worst = gap
        # conservative by 2 key units; the certificate tolerates that slack
        if worst > two_eps_key - 2:
            return False
    return True


# ---------------------------------------------------------------------------
# half-strip / unbounded-above trend
# ---------------------------------------------------------------------------


def default_sample_points(
    c: Construction, count: int, filter_exceptional: bool = True
) -> tuple[list[CirclePoint], int]:
    """Deterministic in-field sample points frac(1/7 + (7j/3) alpha).

    These are irrational, equidistributed, and never hit a construction
    endpoint exactly (the endpoints lie in Z + Z alpha; a collision
    would force 1/7 into it). Optionally filters points inside the
    exceptional wakes at every available level; returns (points,
    number filtered out)."""
    pts: list[CirclePoint] = []
    skipped = 0
    j = 0
    seventh = Fraction(1, 7)
    while len(pts) < count:
        j += 1
        x = CirclePoint((c.alpha * Fraction(7 * j, 3) + seventh).frac())
        if filter_exceptional and _in_any_wake(c, x):
            skipped += 1
            continue
        pts.append(x)
    return pts, skipped


def _in_any_wake(c: Construction, p: CirclePoint) -> bool:
    for k in range(1, c.depth + 1):
        if c.in_anchor_wake(k, p):
            return True
    for k in range(1, c.depth):
        if c.in_strip_wake(k, p):
            return True
    return False


def halfstrip_scan(
    c: Construction,
    system: System | None,
    samples: Sequence[CirclePoint] | None,
    n: int,
    checkpoints: Sequence[int] = (10**3, 10**4, 10**5, 10**6),
    min_bound: int | None = None,
    growth_quorum: float = 0.9,
    sample_count: int = 100,
    engine: str = "auto",
) -> Verdict:
    """Fiber minima over |n| <= N stay above -min_bound for every
    (exceptional-set-filtered) sample, and forward maxima strictly grow
    from the first to the last checkpoint for >= 90% of samples.

    Finite N cannot certify a limit: the growth clause is a trend, and
    the verdict says only that the trend holds at this horizon."""
    if system is None:
        system = System(SystemKind.THAT_TRUNC)
    if system.mod2:
        raise ValueError("half-strip scan needs an integer-fiber system")
    if min_bound is None:
        min_bound = c.depth
    if samples is None:
        samples, skipped = default_sample_points(c, sample_count)
    else:
        skipped = 0
    cps = sorted(set(int(x) for x in checkpoints if 0 < x <= n)) or [n]
    if cps[-1] != n:
        cps.append(n)
    table = jump_table(c, system)
    minima: list[int] = []
    grow = 0
    grow_lit = 0
    unc_samples = 0
    per_sample = []
    lit_pair = (10**4, 10**6)
    for p in samples:
        fwd = fiber_scan(table, p.x, 0, n, checkpoints=cps, engine=engine)
        bwd = fiber_scan(table, p.x, 0, n, backward=True, engine=engine)
        if fwd.uncertain or bwd.uncertain:
            unc_samples += 1
            continue
        mn = min(fwd.min_h, bwd.min_h)
        minima.append(mn)
        first_max = fwd.checkpoint_max[cps[0]]
        last_max = fwd.checkpoint_max[cps[-1]]
        grow += int(last_max > first_max)
        if lit_pair[0] in fwd.checkpoint_max and lit_pair[1] in fwd.checkpoint_max:
            grow_lit += int(
                fwd.checkpoint_max[lit_pair[1]] > fwd.checkpoint_max[lit_pair[0]]
            )
        per_sample.append((mn, first_max, last_max))
    scanned = len(minima)
    metrics = {
        "system": system.label(),
        "steps": n,
        "samples_scanned": scanned,
        "samples_filtered_out": skipped,
        "samples_uncertain": unc_samples,
        "min_fiber": min(minima) if minima else None,
        "min_bound": -min_bound,
        "growth_pair": [cps[0], cps[-1]],
        "growth_fraction": grow / scanned if scanned else None,
        "growth_fraction_1e4_1e6": (grow_lit / scanned) if scanned else None,
        "label": "trend",
    }
    if unc_samples or not scanned:
        return Verdict(
            "halfstrip", VerdictStatus.NO_CERTIFICATE, None, metrics, c.to_config()
        )
    ok_min = min(minima) >= -min_bound
    ok_grow = grow >= growth_quorum * scanned
    if not (ok_min and ok_grow):
        return Verdict(
            "halfstrip",
            VerdictStatus.VIOLATED,
            {"minima_ok": ok_min, "growth_ok": ok_grow},
            metrics,
            c.to_config(),
        )
    return Verdict("halfstrip", VerdictStatus.VERIFIED, None, metrics, c.to_config())


# ---------------------------------------------------------------------------
# displacement / separation
# ---------------------------------------------------------------------------


def dio_check(c: Construction, n_max: int) -> Verdict:
    """min over n <= n_max of n * d_n is positive and agrees exactly with
    the convergent-formula values at convergent times (dual route)."""
    best, argmin, conv_vals = iet_displacement_bound(c, n_max)
    conv_min = None
    for q, v in conv_vals:
        if conv_min is None or v < conv_min:
            conv_min = v
    # the scan minimum is <= the convergent-time minimum by inclusion, and
    # n*d(n alpha, Z) is strictly minimized at convergent times, so the two
    # routes must agree exactly
    equal_route = conv_min is not None and best == conv_min
    metrics = {
        "n_max": n_max,
        "c_hat": to_float(best),
        "argmin": argmin,
        "convergent_route_min": to_float(conv_min) if conv_min is not None else None,
        "routes_agree_exactly": bool(equal_route),
        "convergent_values": {str(q): to_float(v) for q, v in conv_vals[:12]},
    }
    if best.sign() <= 0 or not equal_route:
        return Verdict(
            "dio",
            VerdictStatus.VIOLATED,
            {"c_hat": to_float(best), "argmin": argmin},
            metrics,
            c.to_config(),
        )
    return Verdict("dio", VerdictStatus.VERIFIED, None, metrics, c.to_config())


def max_partial_quotient(alpha: QReal, probe_terms: int = 64) -> int:
    """Largest continued-fraction term (one full period for quadratics)."""
    cf = continued_fraction(alpha, probe_terms)
    if cf.period_start is not None and cf.period_len is not None:
        upto = cf.period_start + cf.period_len
        return max(cf.quotients[1:upto])
    return max(cf.quotients[1:])


def separation_check(c: Construction, n_list: Sequence[int]) -> Verdict:
    """The orbit points {R^i 0 : i <= n} are at least 1/(2Cn) separated,
    C the largest partial quotient; measured by exact sorted-gap scan."""
    big_c = max_partial_quotient(c.alpha)
    results = {}
    worst_ratio = None
    ok = True
    for n in n_list:
        pts = [CirclePoint(frac_multiple(c.alpha, i)) for i in range(n + 1)]
        sep = separation(pts)
        bound = QReal(Fraction(1, 2 * big_c * n), 0, c.alpha.d)
        good = sep >= bound
        ok &= bool(good)
        ratio = to_float(sep) / to_float(bound)
        results[str(n)] = {
            "separation": to_float(sep),
            "bound": to_float(bound),
            "ok": bool(good),
        }
        if worst_ratio is None or ratio < worst_ratio:
            worst_ratio = ratio
    metrics = {
        "max_partial_quotient": big_c,
        "n_list": list(n_list),
        "per_n": results,
        "worst_ratio": worst_ratio,
    }
    if not ok:
        bad = next(k for k, v in results.items() if not v["ok"])
        return Verdict(
            "separation",
            VerdictStatus.VIOLATED,
            {"n": int(bad)},
            metrics,
            c.to_config(),
        )
    return Verdict("separation", VerdictStatus.VERIFIED, None, metrics, c.to_config())


# ---------------------------------------------------------------------------
# shrinking targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShrinkRule:
    """Radii a_i over i in [start, end]: s/i, s/i^p, or an explicit list."""

    kind: str  # "harmonic" | "power" | "custom"
    start: int = 1
    end: int = 1000
    scale: Fraction = Fraction(1, 10)
    power: int = 1
    custom: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "power", "custom"):
            raise ValueError("rule kind must be harmonic, power or custom")
        if not 1 <= self.start <= self.end:
            raise ValueError("need 1 <= start <= end")
        if self.kind == "custom":
            if self.custom is None or len(self.custom) != self.end - self.start + 1:
                raise ValueError("custom rule must list one radius per index")
            vals = list(self.custom)
            if any(v <= 0 for v in vals) or any(
                a < b for a, b in zip(vals, vals[1:])
            ):
                raise ValueError("radii must be positive and non-increasing")
        elif self.scale <= 0 or self.power < 1:
            raise ValueError("scale must be positive, power >= 1")

    def radius(self, i: int) -> Fraction:
        if not self.start <= i <= self.end:
            raise IndexError(i)
        if self.kind == "custom":
            return self.custom[i - self.start]  # type: ignore[index]
        if self.kind == "harmonic":
            return self.scale / i
        return self.scale / i**self.power

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "start": self.start,
            "end": self.end,
            "scale": str(self.scale),
            "power": self.power,
        }


def _ball_pieces(c: Construction, center: CirclePoint, radius: Fraction):
    """Non-wrapping pieces of the half-open ball [center - a, center + a)."""
    if radius * 2 >= 1:
        return Arc(CirclePoint(QReal(0, 0, c.alpha.d)), QReal(1, 0, c.alpha.d)).pieces()
    lo = (center.x - QReal(radius, 0, c.alpha.d)).frac()
    return Arc(CirclePoint(lo), QReal(2 * radius, 0, c.alpha.d)).pieces()


def _phi_value(c: Construction, x: QReal) -> int:
    thetaK, yK = c.theta[c.depth], c.y[c.depth]
    if x < thetaK:
        return 1
    if yK + c.tail_b <= x < yK + thetaK:
        return 1
    return 0


def shrink_exact_reference(
    c: Construction,
    target: tuple[CirclePoint, int],
    rule: ShrinkRule,
    budget: int = 500,
) -> QReal:
    """Reference implementation of the exact shrinking-target measure.

    Inside-out pullback on per-sheet canonical arc unions; O(pieces) of
    QReal work per step, so only suitable for small horizons. Kept as
    the independent oracle for the fast lazy-frame implementation.
    """
    if rule.end - rule.start > budget:
        raise IterationBudgetError(
            f"reference shrink budget {budget} exceeded ({rule.end - rule.start})"
        )
    y, sheet = target
    sheets = [ArcUnion(), ArcUnion()]
    for i in range(rule.end, rule.start - 1, -1):
        sheets = _pullback_once(c, sheets)
        u = sheets[sheet]
        for lo, hi in _ball_pieces(c, y, rule.radius(i)):
            u = u.insert_piece(lo, hi)
        sheets[sheet] = u
    for _ in range(rule.start - 1):
        sheets = _pullback_once(c, sheets)
    return sheets[0].measure() + sheets[1].measure()


# -- fast exact pullback: lazy frame, integer-triple endpoints ---------------
#
# A point with frame coordinate u after s pullbacks sits at u - s*alpha
# (mod 1), so pieces never move: only the skewing-region queries and the
# ball insertions shift by s*alpha. Endpoints are integer triples
# (A, B, Q) meaning (A + B*sqrt(d))/Q in [0, 1); every triple keeps its
# own denominator forever (splits copy cut endpoints), so there is no
# coefficient growth anywhere.


def _t_from_qreal(x: QReal) -> tuple[int, int, int]:
    q = x.a.denominator * x.b.denominator // _gcd_int(x.a.denominator, x.b.denominator)
    return (
        x.a.numerator * (q // x.a.denominator),
        x.b.numerator * (q // x.b.denominator),
        q,
    )


def _gcd_int(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _t_to_qreal(t: tuple[int, int, int], d: int) -> QReal:
    return QReal(Fraction(t[0], t[2]), Fraction(t[1], t[2]), d)


def _t_cmp(u: tuple[int, int, int], v: tuple[int, int, int], d: int) -> int:
    A = u[0] * v[2] - v[0] * u[2]
    B = u[1] * v[2] - v[1] * u[2]
    if B == 0:
        return (A > 0) - (A < 0)
    if A == 0:
        return 1 if B > 0 else -1
    sa = 1 if A > 0 else -1
    sb = 1 if B > 0 else -1
    if sa == sb:
        return sa
    return sa if A * A > B * B * d else sb


class _SheetPieces:
    """Sorted disjoint [lo, hi) pieces (triples) on one sheet, frame coords."""

    __slots__ = ("pieces", "d")

    def __init__(self, d: int):
        self.pieces: list[tuple] = []
        self.d = d

    def _bisect_hi_gt(self, value) -> int:
        """First index with piece.hi > value."""
        lo, hi = 0, len(self.pieces)
        while lo < hi:
            mid = (lo + hi) // 2
            if _t_cmp(self.pieces[mid][1], value, self.d) <= 0:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def extract(self, wl, wr) -> list[tuple]:
        """Remove and return the parts of pieces inside [wl, wr)."""
        d = self.d
        i0 = self._bisect_hi_gt(wl)
        out = []
        i = i0
        repl: list[tuple] = []
        while i < len(self.pieces) and _t_cmp(self.pieces[i][0], wr, d) < 0:
            plo, phi = self.pieces[i]
            mlo = plo if _t_cmp(plo, wl, d) >= 0 else wl
            mhi = phi if _t_cmp(phi, wr, d) <= 0 else wr
            out.append((mlo, mhi))
            if _t_cmp(plo, wl, d) < 0:
                repl.append((plo, wl))
            if _t_cmp(phi, wr, d) > 0:
                repl.append((wr, phi))
            i += 1
        self.pieces[i0:i] = repl
        return out

    def splice_gap(self, wl, wr, incoming: list[tuple]) -> None:
        """Insert pieces lying in [wl, wr), whose interior is known empty
        (just extracted); merge across the two boundary junctions."""
        if not incoming:
            return
        d = self.d
        idx = self._bisect_hi_gt(wl)
        self.pieces[idx:idx] = incoming
        start = max(idx - 1, 0)
        end = min(idx + len(incoming) + 1, len(self.pieces))
        merged: list[tuple] = []
        for p in self.pieces[start:end]:
            if merged and _t_cmp(p[0], merged[-1][1], d) <= 0:
                if _t_cmp(p[1], merged[-1][1], d) > 0:
                    merged[-1] = (merged[-1][0], p[1])
            else:
                merged.append(p)
        self.pieces[start:end] = merged

    def insert(self, lo, hi) -> None:
        d = self.d
        i0 = self._bisect_hi_gt(lo)
        i = i0
        while i < len(self.pieces) and _t_cmp(self.pieces[i][0], hi, d) <= 0:
            plo, phi = self.pieces[i]
            if _t_cmp(plo, lo, d) < 0:
                lo = plo
            if _t_cmp(phi, hi, d) > 0:
                hi = phi
            i += 1
        self.pieces[i0:i] = [(lo, hi)]

    def measure(self) -> QReal:
        num_a = Fraction(0)
        num_b = Fraction(0)
        for lo, hi in self.pieces:
            num_a += Fraction(hi[0], hi[2]) - Fraction(lo[0], lo[2])
            num_b += Fraction(hi[1], hi[2]) - Fraction(lo[1], lo[2])
        return QReal(num_a, num_b, self.d)


def shrink_exact(
    c: Construction,
    target: tuple[CirclePoint, int],
    rule: ShrinkRule,
    budget: int = 10**4,
) -> QReal:
    """Exact measure of union over i in [start, end] of T^-i Ball(target, a_i).

    Inside-out pullback V := Ball_i u T^-1(V) walking i down from the
    horizon, then ``start`` further pullbacks. Pieces live in a lazy
    frame (static coordinates; the skewing windows and ball insertions
    shift instead), so one stage costs O(log + pieces actually touched).
    """
    if rule.end - rule.start > budget:
        raise IterationBudgetError(
            f"exact shrink budget {budget} exceeded ({rule.end - rule.start})"
        )
    y, sheet = target
    d = c.alpha.d
    sheets = [_SheetPieces(d), _SheetPieces(d)]
    thetaK, yK = c.theta[c.depth], c.y[c.depth]
    phi_regions = ((QReal(0, 0, d), thetaK), (yK + c.tail_b, yK + thetaK))
    one_t = (1, 0, 1)
    zero_t = (0, 0, 1)

    def frame_windows(lo: QReal, hi: QReal, stage: int):
        """Non-wrapping frame windows of the actual interval [lo, hi)."""
        shift = frac_multiple(c.alpha, stage)
        flo = (lo + shift).frac()
        width = hi - lo
        fhi = flo + width
        if fhi <= 1:
            return [(_t_from_qreal(flo), _t_from_qreal(fhi))]
        return [
            (_t_from_qreal(flo), one_t),
            (zero_t, _t_from_qreal((fhi - 1).frac() if fhi != 1 else QReal(0, 0, d))),
        ]

    stage = 0

    def pullback():
        nonlocal stage
        stage += 1
        for lo, hi in phi_regions:
            for wl, wr in frame_windows(lo, hi, stage):
                if _t_cmp(wl, wr, d) >= 0:
                    continue
                took0 = sheets[0].extract(wl, wr)
                took1 = sheets[1].extract(wl, wr)
                sheets[0].splice(took1)
                sheets[1].splice(took0)

    for i in range(rule.end, rule.start - 1, -1):
        pullback()
        a_i = rule.radius(i)
        if 2 * a_i >= 1:
            sheets[sheet].insert(zero_t, one_t)
        else:
            ball_lo = (y.x - QReal(a_i, 0, d)).frac()
            wid = QReal(2 * a_i, 0, d)
            for wl, wr in frame_windows(ball_lo, ball_lo + wid, stage):
                if _t_cmp(wl, wr, d) < 0:
                    sheets[sheet].insert(wl, wr)
    for _ in range(rule.start - 1):
        pullback()
    return sheets[0].measure() + sheets[1].measure()


def _pullback_once(c: Construction, sheets: list[ArcUnion]) -> list[ArcUnion]:
    """One-step preimage of a per-sheet union under the truncated system."""
    thetaK, yK = c.theta[c.depth], c.y[c.depth]
    cuts = (thetaK, yK + c.tail_b, yK + thetaK)
    out = [ArcUnion(), ArcUnion()]
    alpha = c.alpha
    one = QReal(1, 0, c.alpha.d)
    for s in (0, 1):
        for lo, hi in sheets[s].pieces:
            # shift by -alpha, split at the wrap point
            parts = []
            nlo, nhi = lo - alpha, hi - alpha
            if nlo.sign() < 0 and nhi.sign() > 0:
                parts = [(nlo + 1, one), (QReal(0, 0, c.alpha.d), nhi)]
            elif nhi.sign() <= 0:
                parts = [(nlo + 1, nhi + 1)]
            else:
                parts = [(nlo, nhi)]
            for plo, phi in parts:
                marks = [plo]
                for cut in cuts:
                    if plo < cut < phi:
                        marks.append(cut)
                marks.append(phi)
                for i in range(1, len(marks)):  # exact insertion sort, tiny list
                    j = i
                    while j > 0 and marks[j] < marks[j - 1]:
                        marks[j - 1], marks[j] = marks[j], marks[j - 1]
                        j -= 1
                for a, b in zip(marks, marks[1:]):
                    v = _phi_value(c, a)
                    out[(s - v) % 2] = out[(s - v) % 2].insert_piece(a, b)
    return out


def shrink_estimate(
    c: Construction,
    target: tuple[CirclePoint, int],
    rule: ShrinkRule,
    samples: int,
    seed: int,
) -> dict:
    """Monte-Carlo estimate of the same union's measure, with stderr.

    Uniform (x, sheet) samples move forward i = start..end steps; a
    sample scores when some (x_i, h_i) lands in Ball(target, a_i).
    Float64 filters; samples whose orbit ever nears a decision boundary
    are re-run exactly, so boundary effects cannot bias the count.
    Estimate = 2 * hit fraction (total space measure is 2).
    """
    y, sheet = target
    rng = random.Random(seed)
    # dyadic samples: the float64 IS the sample value, exactly
    xs = np.array(
        [rng.getrandbits(53) / 9007199254740992.0 for _ in range(samples)],
        dtype=np.float64,
    )
    hs = np.array([rng.getrandbits(1) for _ in range(samples)], dtype=np.int64)
    af = to_float(c.alpha)
    thetaK, yK = c.theta[c.depth], c.y[c.depth]
    seg_bounds = [0.0, to_float(thetaK), to_float(yK + c.tail_b), to_float(yK + thetaK)]
    yf = to_float(y.x)
    hit = np.zeros(samples, dtype=bool)
    suspect = np.zeros(samples, dtype=bool)
    G = 1e-9
    h = hs.copy()
    for i in range(1, rule.end + 1):
        x_i = (xs + i * af) % 1.0
        x_prev = (xs + (i - 1) * af) % 1.0
        phi = (x_prev < seg_bounds[1]) | (
            (x_prev >= seg_bounds[2]) & (x_prev < seg_bounds[3])
        )
        for b in seg_bounds:
            diffp = np.abs(x_prev - b)
            suspect |= (diffp < G) | (diffp > 1.0 - G)
        h = h + phi
        if i >= rule.start:
            a_i = float(rule.radius(i))
            diff = np.abs(x_i - yf)
            dist = np.minimum(diff, 1.0 - diff)
            near = np.abs(dist - a_i) < G
            suspect |= near
            hit |= (dist < a_i) & (h % 2 == sheet)
    n_susp = int(np.count_nonzero(suspect))
    for idx in np.nonzero(suspect)[0]:
        x0 = QReal(Fraction(*float(xs[int(idx)]).as_integer_ratio()), 0, c.alpha.d)
        hit[idx] = _shrink_hit_exact(c, x0, int(hs[int(idx)]), y, sheet, rule)
    p = float(np.count_nonzero(hit)) / samples
    estimate = 2.0 * p
    stderr = 2.0 * (p * (1.0 - p) / samples) ** 0.5
    return {
        "estimate": estimate,
        "stderr": stderr,
        "samples": samples,
        "seed": seed,
        "suspects_rechecked_exactly": n_susp,
        "rule": rule.describe(),
    }


def _shrink_hit_exact(
    c: Construction,
    x0: QReal,
    h0: int,
    y: CirclePoint,
    sheet: int,
    rule: ShrinkRule,
) -> bool:
    x = x0.frac()
    h = h0
    for i in range(1, rule.end + 1):
        h = (h + _phi_value(c, x)) % 2
        x = (x + c.alpha).frac()
        if i >= rule.start and h == sheet:
            a = rule.radius(i)
            # ball [y-a, y+a): t = frac(x - y) lands in [0, a) u [1-a, 1)
            t = (x - y.x).frac()
            if t < a or t >= 1 - a:
                return True
    return False
