"""Orbit iteration engines: exact integer loops and a filtered-exact numpy path.

Every system over a fixed construction reduces to a ``JumpTable``: a
list of non-wrapping half-open segments with integer fiber weights,
plus the uncertainty bands of truncated limit windows. One orbit step
advances x by alpha (mod 1) and adds the weights of the segments
containing x.

The exact path advances integer pairs (A, B) with x = (A + B*sqrt(d))/D
and decides every membership by the integer sign rule; coefficients
grow only linearly with time because frac subtracts integers.

The numpy path evaluates x_n = frac(x0 + n*alpha) in float64 directly
from n (no error accumulation), treats the float comparisons as a
FILTER only, and re-decides every point within a guard band of any
segment endpoint exactly. The guard (1e-7) exceeds the provable
roundoff bound (< 1e-8 for n <= 2^31) by an order of magnitude, so the
resulting counts equal the exact path's bit for bit; the tests assert
exactly that. This matters: orbit points do land exactly on segment
endpoints (the endpoints are orbit lattice points), where float64 alone
gets the half-open answer wrong.

Conventions. h_n = h_0 + sum_{m<n} w(x_m) for n >= 0 and
h_{-n} = h_0 - sum_{j=1..n} w(x_{-j}); a "checkpoint at c" reports the
state after c steps in the scan direction, with running min/max and
probe counts over states 0..c-1 (probe) resp. 0..c (extremes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from skewlab.qfield import (
    QReal,
    frac_multiple,
    integerize_common_den,
    sign_int_pair,
    to_float,
)

__all__ = ["JumpTable", "FiberScan", "MismatchScan", "fiber_scan", "mismatch_scan"]

_GUARD = 1e-7
_NUMPY_THRESHOLD = 30_000
_BLOCK = 1 << 20
_MAX_FLOAT_N = 1 << 31  # beyond this the roundoff bound no longer covers the guard


@dataclass(frozen=True)
class JumpTable:
    """Integerized skewing data: segments [lo, hi) with weights, plus bands."""

    alpha: QReal
    segments: tuple[tuple[QReal, QReal, int], ...]
    bands: tuple[tuple[QReal, QReal], ...]
    mod2: bool

    def jump_at(self, x: QReal) -> tuple[int, bool]:
        """(fiber increment at x, uncertain?) by exact comparison."""
        w = 0
        for lo, hi, weight in self.segments:
            if lo <= x < hi:
                w += weight
        unc = any(lo <= x < hi for lo, hi in self.bands)
        return w, unc


@dataclass
class FiberScan:
    """Statistics of the fiber along one orbit direction."""

    steps: int
    final_h: int = 0
    min_h: int = 0
    max_h: int = 0
    argmin: int = 0
    argmax: int = 0
    uncertain: int = 0
    first_uncertain: int | None = None
    checkpoint_h: dict[int, int] = field(default_factory=dict)
    checkpoint_min: dict[int, int] = field(default_factory=dict)
    checkpoint_max: dict[int, int] = field(default_factory=dict)
    probe_in: dict[int, int] = field(default_factory=dict)
    probe_in_sheet: dict[int, int] = field(default_factory=dict)


@dataclass
class MismatchScan:
    """State-by-state fiber agreement of two systems along the same base orbit."""

    steps: int
    mismatches: int = 0
    first_mismatch: int | None = None
    uncertain: int = 0
    checkpoint_mismatches: dict[int, int] = field(default_factory=dict)


def _exact_x(x0: QReal, alpha: QReal, m: int) -> QReal:
    xm = x0 + frac_multiple(alpha, m) if m >= 0 else x0 - frac_multiple(alpha, -m)
    return xm.frac()


# ---------------------------------------------------------------------------
# exact path
# ---------------------------------------------------------------------------


def _fiber_scan_exact(
    table: JumpTable,
    x0: QReal,
    h0: int,
    n: int,
    backward: bool,
    checkpoints: Sequence[int],
    probe,
) -> FiberScan:
    d = table.alpha.d
    probe_pieces, probe_sheet = probe if probe is not None else ((), None)
    values: list[QReal] = [x0, table.alpha]
    for lo, hi, _ in table.segments:
        values.extend((lo, hi))
    for lo, hi in table.bands:
        values.extend((lo, hi))
    for lo, hi in probe_pieces:
        values.extend((lo, hi))
    den, *pairs = integerize_common_den(*values)
    (ax, bx), (aa, ba) = pairs[0], pairs[1]
    i = 2
    segs = []
    for _, _, w in table.segments:
        (al, bl), (ah, bh) = pairs[i], pairs[i + 1]
        segs.append((al, bl, ah, bh, w))
        i += 2
    bands = []
    for _ in table.bands:
        (al, bl), (ah, bh) = pairs[i], pairs[i + 1]
        bands.append((al, bl, ah, bh))
        i += 2
    probes = []
    for _ in probe_pieces:
        (al, bl), (ah, bh) = pairs[i], pairs[i + 1]
        probes.append((al, bl, ah, bh))
        i += 2
    if backward:
        aa, ba = -aa, -ba

    sgn = sign_int_pair
    mod2 = table.mod2
    cps = sorted(set(int(c) for c in checkpoints if 0 <= c <= n))
    cpset = set(cps)
    res = FiberScan(steps=n)
    h = min_h = max_h = h0
    argmin = argmax = 0
    unc = 0
    first_unc: int | None = None
    p_in = p_in_sheet = 0
    for m in range(n + 1):
        if m in cpset:
            res.checkpoint_h[m] = h
            res.checkpoint_min[m] = min_h
            res.checkpoint_max[m] = max_h
            res.probe_in[m] = p_in
            res.probe_in_sheet[m] = p_in_sheet
        if m == n:
            break
        if probes:
            inside = False
            for al, bl, ah, bh in probes:
                if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                    inside = True
                    break
            if inside:
                p_in += 1
                hv = h % 2 if mod2 else h
                if probe_sheet is None or hv == probe_sheet:
                    p_in_sheet += 1
        if backward:
            ax += aa
            bx += ba
            if sgn(ax, bx, d) < 0:
                ax += den
            elif sgn(ax - den, bx, d) >= 0:
                ax -= den
        w = 0
        for al, bl, ah, bh, weight in segs:
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                w += weight
        for al, bl, ah, bh in bands:
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                unc += 1
                if first_unc is None:
                    first_unc = m + 1 if backward else m
                break
        if backward:
            h -= w
        else:
            h += w
            ax += aa
            bx += ba
            if sgn(ax, bx, d) < 0:
                ax += den
            elif sgn(ax - den, bx, d) >= 0:
                ax -= den
        if mod2:
            h %= 2
        if h < min_h:
            min_h, argmin = h, m + 1
        elif h > max_h:
            max_h, argmax = h, m + 1
    res.final_h = h
    res.min_h, res.max_h = min_h, max_h
    res.argmin, res.argmax = argmin, argmax
    res.uncertain = unc
    res.first_uncertain = first_unc
    return res


# ---------------------------------------------------------------------------
# numpy filtered-exact path
# ---------------------------------------------------------------------------


def _exact_cond_fix(
    cond: np.ndarray,
    xf: np.ndarray,
    lo: QReal,
    hi: QReal,
    x0: QReal,
    alpha: QReal,
    index_of,
) -> None:
    """Re-decide every point within the guard of an endpoint, exactly."""
    lof, hif = to_float(lo), to_float(hi)
    suspect = np.zeros(len(xf), dtype=bool)
    for bf in (lof, hif):
        diff = np.abs(xf - bf)
        suspect |= (diff < _GUARD) | (diff > 1.0 - _GUARD)
    for idx in np.nonzero(suspect)[0]:
        x = _exact_x(x0, alpha, index_of(int(idx)))
        cond[idx] = bool(lo <= x < hi)


def _block_jumps(xf, x0, alpha, segments, index_of) -> np.ndarray:
    jumps = np.zeros(len(xf), dtype=np.int64)
    for lo, hi, w in segments:
        cond = (xf >= to_float(lo)) & (xf < to_float(hi))
        _exact_cond_fix(cond, xf, lo, hi, x0, alpha, index_of)
        jumps += w * cond.astype(np.int64) if w not in (1, -1) else (cond if w == 1 else -cond.astype(np.int64))
    return jumps


def _block_hits(xf, x0, alpha, pieces, index_of) -> np.ndarray:
    hits = np.zeros(len(xf), dtype=bool)
    for lo, hi in pieces:
        cond = (xf >= to_float(lo)) & (xf < to_float(hi))
        _exact_cond_fix(cond, xf, lo, hi, x0, alpha, index_of)
        hits |= cond
    return hits


def _fiber_scan_numpy(
    table: JumpTable,
    x0: QReal,
    h0: int,
    n: int,
    backward: bool,
    checkpoints: Sequence[int],
    probe,
) -> FiberScan:
    if n > _MAX_FLOAT_N:
        raise ValueError(f"numpy path supports n <= {_MAX_FLOAT_N}")
    alpha = table.alpha
    x0f, af = to_float(x0), to_float(alpha)
    probe_pieces, probe_sheet = probe if probe is not None else ((), None)
    cps = sorted(set(int(c) for c in checkpoints if 0 <= c <= n))
    res = FiberScan(steps=n)
    h = min_h = max_h = h0
    argmin = argmax = 0
    unc = 0
    first_unc: int | None = None
    p_in = p_in_sheet = 0
    if 0 in cps:
        res.checkpoint_h[0] = h0
        res.checkpoint_min[0] = h0
        res.checkpoint_max[0] = h0
        res.probe_in[0] = 0
        res.probe_in_sheet[0] = 0
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        idx = np.arange(start, stop, dtype=np.float64)
        if backward:
            xf = (x0f - (idx + 1.0) * af) % 1.0
            index_of = lambda i: -(start + i + 1)  # noqa: E731
        else:
            xf = (x0f + idx * af) % 1.0
            index_of = lambda i: start + i  # noqa: E731
        jumps = _block_jumps(xf, x0, alpha, table.segments, index_of)
        if table.bands:
            hits = _block_hits(xf, x0, alpha, table.bands, index_of)
            cnt = int(np.count_nonzero(hits))
            if cnt and first_unc is None:
                fb = int(np.argmax(hits))
                first_unc = (start + fb + 1) if backward else (start + fb)
            unc += cnt
        signed = -jumps if backward else jumps
        hblock = h + np.cumsum(signed)  # h after steps start+1 .. stop
        hview = np.mod(hblock, 2) if table.mod2 else hblock
        if probe_pieces:
            # states before each step of this block: (x_m, h_m), m = start..stop-1
            if backward:
                xs = (x0f - idx * af) % 1.0
                st_index_of = lambda i: -(start + i)  # noqa: E731
            else:
                xs = xf
                st_index_of = index_of
            inside = _block_hits(xs, x0, alpha, probe_pieces, st_index_of)
            hstates = np.concatenate(([h], hview[:-1])) if len(hview) else np.array([h])
            match = inside if probe_sheet is None else inside & (hstates == probe_sheet)
            inside_cum = np.cumsum(inside)
            match_cum = np.cumsum(match)
        else:
            inside_cum = match_cum = None
        bmin, bmax = int(hview.min()), int(hview.max())
        if bmin < min_h:
            min_h = bmin
            argmin = start + int(np.argmin(hview)) + 1
        if bmax > max_h:
            max_h = bmax
            argmax = start + int(np.argmax(hview)) + 1
        for c in cps:
            if start < c <= stop:
                pre = hview[: c - start]
                res.checkpoint_h[c] = int(pre[-1])
                res.checkpoint_min[c] = min(
                    int(pre.min()), res.checkpoint_min.get(start, min_h if start == 0 else min_h)
                )
                # running extrema up to c = extrema before block + extrema in prefix
                res.checkpoint_min[c] = min(_carry_min(res, start, h0), int(pre.min()))
                res.checkpoint_max[c] = max(_carry_max(res, start, h0), int(pre.max()))
                if inside_cum is not None:
                    res.probe_in[c] = p_in + int(inside_cum[c - start - 1])
                    res.probe_in_sheet[c] = p_in_sheet + int(match_cum[c - start - 1])
                else:
                    res.probe_in[c] = p_in
                    res.probe_in_sheet[c] = p_in_sheet
        # block carries
        res.checkpoint_min[stop] = res.checkpoint_min.get(stop, min_h)
        res.checkpoint_max[stop] = res.checkpoint_max.get(stop, max_h)
        if inside_cum is not None:
            p_in += int(inside_cum[-1])
            p_in_sheet += int(match_cum[-1])
        h = int(hview[-1]) if table.mod2 else int(hblock[-1])
    # drop internal block-boundary entries that were not requested
    for key in list(res.checkpoint_min):
        if key not in cps:
            del res.checkpoint_min[key]
            res.checkpoint_max.pop(key, None)
    res.final_h = h
    res.min_h, res.max_h = min_h, max_h
    res.argmin, res.argmax = argmin, argmax
    res.uncertain = unc
    res.first_uncertain = first_unc
    return res


def _carry_min(res: FiberScan, block_start: int, h0: int) -> int:
    return res.checkpoint_min.get(block_start, h0)


def _carry_max(res: FiberScan, block_start: int, h0: int) -> int:
    return res.checkpoint_max.get(block_start, h0)


# ---------------------------------------------------------------------------
# public scans
# ---------------------------------------------------------------------------


def fiber_scan(
    table: JumpTable,
    x0: QReal,
    h0: int,
    n: int,
    *,
    backward: bool = False,
    checkpoints: Sequence[int] = (),
    probe=None,
    engine: str = "auto",
) -> FiberScan:
    """Scan n steps of the skew product, collecting fiber statistics.

    ``probe`` is ``(pieces, sheet)`` where pieces are non-wrapping
    [lo, hi) QReal pairs; probe counts tally states (x_m, h_m), m < c,
    whose x lies in the pieces (and whose fiber equals ``sheet``).
    ``engine`` is "exact", "numpy" or "auto".
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    use_numpy = engine == "numpy" or (engine == "auto" and n >= _NUMPY_THRESHOLD)
    if use_numpy:
        return _fiber_scan_numpy(table, x0, h0, n, backward, checkpoints, probe)
    return _fiber_scan_exact(table, x0, h0, n, backward, checkpoints, probe)


def mismatch_scan(
    table_a: JumpTable,
    table_b: JumpTable,
    x0: QReal,
    h0: int,
    n: int,
    *,
    checkpoints: Sequence[int] = (),
    engine: str = "auto",
) -> MismatchScan:
    """Count n' in [0, n) with fiber_a(n') != fiber_b(n') from shared start.

    Both systems ride the same base orbit; the scan tracks both fibers
    and counts states where they differ (the x coordinates agree by
    construction). Uncertain steps of either system are totalled.
    """
    if table_a.alpha != table_b.alpha:
        raise ValueError("systems must share the rotation")
    if n < 0:
        raise ValueError("n must be >= 0")
    use_numpy = engine == "numpy" or (engine == "auto" and n >= _NUMPY_THRESHOLD)
    cps = sorted(set(int(c) for c in checkpoints if 0 <= c <= n))
    res = MismatchScan(steps=n)
    if use_numpy:
        if n > _MAX_FLOAT_N:
            raise ValueError(f"numpy path supports n <= {_MAX_FLOAT_N}")
        alpha = table_a.alpha
        x0f, af = to_float(x0), to_float(alpha)
        mism = 0
        first: int | None = None
        ha = hb = h0
        unc = 0
        for start in range(0, n, _BLOCK):
            stop = min(start + _BLOCK, n)
            idx = np.arange(start, stop, dtype=np.float64)
            xf = (x0f + idx * af) % 1.0
            index_of = lambda i: start + i  # noqa: E731
            ja = _block_jumps(xf, x0, alpha, table_a.segments, index_of)
            jb = _block_jumps(xf, x0, alpha, table_b.segments, index_of)
            for t in (table_a, table_b):
                if t.bands:
                    unc += int(np.count_nonzero(_block_hits(xf, x0, alpha, t.bands, index_of)))
            hva = ha + np.concatenate(([0], np.cumsum(ja)))[:-1]
            hvb = hb + np.concatenate(([0], np.cumsum(jb)))[:-1]
            if table_a.mod2:
                hva = np.mod(hva, 2)
            if table_b.mod2:
                hvb = np.mod(hvb, 2)
            diff = hva != hvb
            cnt = int(np.count_nonzero(diff))
            if cnt and first is None:
                first = start + int(np.argmax(diff))
            mism += cnt
            for c in cps:
                if start < c <= stop:
                    res.checkpoint_mismatches[c] = mism - cnt + int(
                        np.count_nonzero(diff[: c - start])
                    )
            ha += int(np.sum(ja))
            hb += int(np.sum(jb))
            if table_a.mod2:
                ha %= 2
            if table_b.mod2:
                hb %= 2
        res.mismatches = mism
        res.first_mismatch = first
        res.uncertain = unc
        return res
    # exact loop over both fiber tracks
    d = table_a.alpha.d
    values: list[QReal] = [x0, table_a.alpha]
    for t in (table_a, table_b):
        for lo, hi, _ in t.segments:
            values.extend((lo, hi))
        for lo, hi in t.bands:
            values.extend((lo, hi))
    den, *pairs = integerize_common_den(*values)
    (ax, bx), (aa, ba) = pairs[0], pairs[1]
    i = 2
    scaled: list[list] = []
    bands_scaled: list[list] = []
    for t in (table_a, table_b):
        segs = []
        for _, _, w in t.segments:
            (al, bl), (ah, bh) = pairs[i], pairs[i + 1]
            segs.append((al, bl, ah, bh, w))
            i += 2
        bnds = []
        for _ in t.bands:
            (al, bl), (ah, bh) = pairs[i], pairs[i + 1]
            bnds.append((al, bl, ah, bh))
            i += 2
        scaled.append(segs)
        bands_scaled.append(bnds)
    sgn = sign_int_pair
    ha = hb = h0
    mism = 0
    first = None
    unc = 0
    cpset = set(cps)
    for m in range(n):
        if m in cpset:
            res.checkpoint_mismatches[m] = mism
        if ha != hb:
            mism += 1
            if first is None:
                first = m
        wa = 0
        for al, bl, ah, bh, weight in scaled[0]:
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                wa += weight
        wb = 0
        for al, bl, ah, bh, weight in scaled[1]:
            if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                wb += weight
        for bnds in bands_scaled:
            for al, bl, ah, bh in bnds:
                if sgn(ax - al, bx - bl, d) >= 0 and sgn(ax - ah, bx - bh, d) < 0:
                    unc += 1
                    break
        ha += wa
        hb += wb
        if table_a.mod2:
            ha %= 2
        if table_b.mod2:
            hb %= 2
        ax += aa
        bx += ba
        if sgn(ax, bx, d) < 0:
            ax += den
        elif sgn(ax - den, bx, d) >= 0:
            ax -= den
    if n in cpset:
        res.checkpoint_mismatches[n] = mism
    res.mismatches = mism
    res.first_mismatch = first
    res.uncertain = unc
    return res
