"""Exact arithmetic in the real quadratic field Q(sqrt(d)).

Every scalar in the library is a ``QReal``: a value a + b*sqrt(d) with
rational a, b (arbitrary-precision) and a fixed square-free d >= 2.
Comparison, floor and fractional part are decided by integer sign
analysis -- there is no floating point and no epsilon anywhere.

The sign of a + b*sqrt(d) is THE comparison algorithm of the library:
if a and b have the same sign the answer is immediate; otherwise the
sign is decided by comparing a^2 against b^2*d (equality is impossible
for b != 0 because d is square-free, so sqrt(d) is irrational).

Besides field arithmetic this module provides continued fractions,
convergents (with exact recurrence invariants), frac(m*alpha) for
huge m, the convergent-based lower envelope of n*d(n*alpha, Z), and an
exact closed-form counter for orbit hits of a rotation in a half-open
interval (a floor-sum recursion), used as an independent oracle and for
fiber values at astronomically large times.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt

__all__ = [
    "QReal",
    "Convergent",
    "CFExpansion",
    "make_qreal",
    "compare",
    "floor_qreal",
    "frac",
    "frac_multiple",
    "continued_fraction",
    "convergents",
    "badly_approximable_constant",
    "floor_sum",
    "rotation_hit_count",
    "decimal_str",
    "to_float",
]


class FieldError(ValueError):
    """Invalid field parameter (non-square-free d, mixed fields, ...)."""


@lru_cache(maxsize=None)
def _check_square_free(d: int) -> None:
    if d < 2:
        raise FieldError(f"d must be >= 2, got {d}")
    n, p = d, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                raise FieldError(f"d must be square-free, got {d} (divisible by {p}^2)")
        p += 1 if p == 2 else 2


def _sign_pair(a: Fraction, b: Fraction, d: int) -> int:
    """Sign of a + b*sqrt(d), exactly, by rational sign / squared-magnitude tests."""
    if not b:
        return (a > 0) - (a < 0)
    if not a:
        return 1 if b > 0 else -1
    sa = 1 if a > 0 else -1
    sb = 1 if b > 0 else -1
    if sa == sb:
        return sa
    # opposite signs: |a| vs |b|*sqrt(d); equality impossible for square-free d
    return sa if a * a > b * b * d else sb


class QReal:
    """Immutable element a + b*sqrt(d) of Q(sqrt(d)).

    ``a`` and ``b`` are Fractions in lowest terms (Fraction guarantees
    canonical form), so equal values have equal representations. A QReal
    with b == 0 is purely rational and mixes freely with any d.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b=0, d: int = 5):
        _check_square_free(d)
        object.__setattr__(self, "a", Fraction(a))
        object.__setattr__(self, "b", Fraction(b))
        object.__setattr__(self, "d", d)

    def __setattr__(self, *_):
        raise AttributeError("QReal is immutable")

    # -- field bookkeeping -------------------------------------------------

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def _join_d(self, other: "QReal") -> int:
        if self.b and other.b and self.d != other.d:
            raise FieldError(f"mixed fields Q(sqrt({self.d})) and Q(sqrt({other.d}))")
        return self.d if self.b else (other.d if other.b else self.d)

    @staticmethod
    def _coerce(value, d: int) -> "QReal":
        if isinstance(value, QReal):
            return value
        if isinstance(value, (int, Fraction)):
            return QReal(value, 0, d)
        return NotImplemented  # type: ignore[return-value]

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented
        return QReal(self.a + other.a, self.b + other.b, self._join_d(other))

    __radd__ = __add__

    def __sub__(self, other):
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented
        return QReal(self.a - other.a, self.b - other.b, self._join_d(other))

    def __rsub__(self, other):
        return QReal._coerce(other, self.d) - self

    def __neg__(self):
        return QReal(-self.a, -self.b, self.d)

    def __mul__(self, other):
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented
        d = self._join_d(other)
        return QReal(
            self.a * other.a + self.b * other.b * d,
            self.a * other.b + self.b * other.a,
            d,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "QReal":
        norm = self.a * self.a - self.b * self.b * self.d
        if not norm:
            raise ZeroDivisionError("reciprocal of zero")
        return QReal(self.a / norm, -self.b / norm, self.d)

    def __truediv__(self, other):
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return QReal._coerce(other, self.d) * self.reciprocal()

    # -- order -------------------------------------------------------------

    def sign(self) -> int:
        return _sign_pair(self.a, self.b, self.d)

    def __eq__(self, other):
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented
        if self.b and other.b and self.d != other.d:
            return False
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        return hash((self.a, self.b, self.d if self.b else 0))

    def _cmp(self, other) -> int:
        other = QReal._coerce(other, self.d)
        if other is NotImplemented:
            return NotImplemented  # type: ignore[return-value]
        d = self._join_d(other)
        return _sign_pair(self.a - other.a, self.b - other.b, d)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    # -- integer part ------------------------------------------------------

    def floor(self) -> int:
        """Greatest integer <= value.

        Over the common denominator D the value is (A + B*sqrt(d))/D.
        isqrt pins floor(B*sqrt(d)) = u exactly, so the value lies in
        [(A+u)/D, (A+u+1)/D), an interval containing at most one integer;
        one integer test settles which side of it the value falls on.
        """
        if not self.b:
            return self.a.numerator // self.a.denominator
        ad, bd = self.a.denominator, self.b.denominator
        g = ad * bd // _gcd(ad, bd)
        A = self.a.numerator * (g // ad)
        B = self.b.numerator * (g // bd)
        sq = B * B * self.d
        u = isqrt(sq) if B >= 0 else -isqrt(sq) - 1
        n0 = (A + u) // g
        # value >= n0+1 iff B*sqrt(d) >= g*(n0+1) - A iff u >= that integer
        if u >= g * (n0 + 1) - A:
            n0 += 1
        return n0

    def frac(self) -> "QReal":
        """Fractional part, exactly in [0, 1)."""
        return self - self.floor()

    # -- display -----------------------------------------------------------

    def __repr__(self):
        if not self.b:
            return f"QReal({self.a})"
        return f"QReal({self.a} + {self.b}*sqrt({self.d}))"

    def __float__(self):
        return to_float(self)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


# ---------------------------------------------------------------------------
# spec-level operations
# ---------------------------------------------------------------------------


def make_qreal(a_num: int, a_den: int, b_num: int, b_den: int, d: int) -> QReal:
    if a_den == 0 or b_den == 0:
        raise ZeroDivisionError("zero denominator in QReal literal")
    return QReal(Fraction(a_num, a_den), Fraction(b_num, b_den), d)


def compare(x: QReal, y: QReal) -> int:
    """Exact order of real values: -1, 0 or +1."""
    return x._cmp(y)


def floor_qreal(x: QReal) -> int:
    return x.floor()


def frac(x: QReal) -> QReal:
    return x.frac()


def frac_multiple(alpha: QReal, m: int) -> QReal:
    """Exact frac(m*alpha); m may have thousands of digits."""
    return QReal(alpha.a * m, alpha.b * m, alpha.d).frac()


@dataclass(frozen=True)
class Convergent:
    """One convergent p/q of a continued fraction, with its index."""

    index: int
    p: int
    q: int


@dataclass(frozen=True)
class CFExpansion:
    """Partial quotients a_0..a_count plus periodicity information.

    For quadratic irrationals the sequence of complete quotients repeats;
    ``period_start``/``period_len`` report the detected cycle. Rational
    inputs terminate and are flagged with ``rational=True``.
    """

    quotients: tuple[int, ...]
    rational: bool
    period_start: int | None = None
    period_len: int | None = None


def continued_fraction(x: QReal, count: int) -> CFExpansion:
    """Exact partial quotients a_0..a_count by repeated floor/reciprocal.

    Once the cycle of complete quotients is detected the remaining
    quotients are filled in from the period without further arithmetic.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if x.is_rational:
        quotients = []
        num, den = x.a.numerator, x.a.denominator
        while den:
            q, r = divmod(num, den)
            quotients.append(q)
            num, den = den, r
            if len(quotients) > count:
                break
        return CFExpansion(tuple(quotients[: count + 1]), rational=True)

    quotients: list[int] = []
    seen: dict[tuple[Fraction, Fraction], int] = {}
    period_start = period_len = None
    xi = x
    while len(quotients) <= count:
        key = (xi.a, xi.b)
        if key in seen:
            period_start = seen[key]
            period_len = len(quotients) - period_start
            cycle = quotients[period_start:]
            while len(quotients) <= count:
                quotients.append(cycle[(len(quotients) - period_start) % period_len])
            break
        seen[key] = len(quotients)
        a = xi.floor()
        quotients.append(a)
        xi = (xi - a).reciprocal()
    return CFExpansion(tuple(quotients[: count + 1]), False, period_start, period_len)


def convergents(x: QReal, max_index: int) -> list[Convergent]:
    """Convergents (p_i, q_i), i = 0..max_index, via the standard recurrences."""
    if x.is_rational:
        raise FieldError("convergents of a rational are finite; supply an irrational")
    cf = continued_fraction(x, max_index)
    out: list[Convergent] = []
    p_prev, q_prev = 1, 0
    p, q = cf.quotients[0], 1
    out.append(Convergent(0, p, q))
    for i in range(1, max_index + 1):
        a = cf.quotients[i]
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append(Convergent(i, p, q))
    return out


def badly_approximable_constant(alpha: QReal, depth: int) -> QReal:
    """min over k <= depth of q_k * |q_k*alpha - p_k|.

    The convergent-based lower envelope of n*d(n*alpha, Z); for a
    periodic continued fraction it stabilizes to the liminf.
    """
    best: QReal | None = None
    for c in convergents(alpha, depth):
        err = abs(alpha * c.q - c.p)
        val = err * c.q
        if best is None or val < best:
            best = val
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# exact floor sums / rotation hit counting
# ---------------------------------------------------------------------------


def floor_sum(n: int, a: QReal, b: QReal) -> int:
    """Exact sum_{m=0}^{n-1} floor(m*a + b) for QReal a >= 0, any b.

    Euclidean-type recursion (the lattice-point count under a line),
    carried out entirely in exact arithmetic. The swap step uses
    ceil(z) = -floor(-z); integer crossings (z exactly an integer, which
    does happen for lattice-aligned b) are counted exactly: at most one
    j per level can cross because the slope is irrational at every level.
    Fully rational inputs take the classical integer recursion instead;
    a rational slope with irrational offset is not supported.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if a.sign() < 0:
        raise ValueError("floor_sum requires a >= 0")
    if a.is_rational:
        if not b.is_rational:
            raise FieldError("rational slope with irrational offset is unsupported")
        den = a.a.denominator * b.a.denominator // _gcd(a.a.denominator, b.a.denominator)
        return _floor_sum_int(
            n, den, a.a.numerator * (den // a.a.denominator), b.a.numerator * (den // b.a.denominator)
        )
    total = 0
    sign = 1
    while True:
        if n == 0:
            return total
        fa, fb = a.floor(), b.floor()
        if fa:
            total += sign * fa * (n * (n - 1) // 2)
            a = a - fa
        if fb:
            total += sign * fb * n
            b = b - fb
        ymax = a * (n - 1) + b  # largest term, at m = n-1
        m_top = ymax.floor()
        if m_top < 1:
            return total
        # sum_{m<n} floor(ma+b) = n*M - M + I - sum_{j<M} floor(j/a + (1-b)/a)
        total += sign * (n * m_top - m_top + _integer_crossings(a, b, m_top))
        inv = a.reciprocal()
        n, a, b = m_top, inv, (1 - b) * inv
        sign = -sign


def _floor_sum_int(n: int, m: int, a: int, b: int) -> int:
    """sum_{i=0}^{n-1} floor((a*i + b)/m) for integers, m > 0."""
    ans = 0
    if a < 0:
        a2 = a % m
        ans -= n * (n - 1) // 2 * ((a2 - a) // m)
        a = a2
    if b < 0:
        b2 = b % m
        ans -= n * ((b2 - b) // m)
        b = b2
    while True:
        if a >= m:
            ans += n * (n - 1) // 2 * (a // m)
            a %= m
        if b >= m:
            ans += n * (b // m)
            b %= m
        y_max = a * n + b
        if y_max < m:
            return ans
        n, b, m, a = y_max // m, y_max % m, a, m


def _integer_crossings(a: QReal, b: QReal, m_top: int) -> int:
    """#{1 <= j <= m_top : (j - b)/a is an integer}; 0 or 1 since a is irrational.

    j = k*a + b for integer k needs the irrational parts to cancel
    (k = -b_irr/a_irr) and the rational remainder to be a whole number.
    """
    if not a.b:  # a rational cannot happen here (guarded by caller), be safe
        return 0
    k = -b.b / a.b
    if k.denominator != 1:
        return 0
    j = k * a.a + b.a
    if j.denominator != 1:
        return 0
    return 1 if 1 <= j <= m_top else 0


def rotation_hit_count(alpha: QReal, x0: QReal, lo: QReal, hi: QReal, n: int) -> int:
    """Exact #{0 <= m < n : frac(x0 + m*alpha) in [lo, hi)} in O(log)-ish time.

    Uses the identity chi_[lo,hi)(frac(t)) = floor(t - lo) - floor(t - hi)
    for 0 <= hi - lo <= 1, so the count is a difference of two floor sums.
    Serves as the independent oracle for every scanned hit count, and
    supplies fiber values at times far beyond any iteration budget.
    """
    width = hi - lo
    if width.sign() < 0 or width > 1:
        raise ValueError("need 0 <= hi - lo <= 1")
    return floor_sum(n, alpha, x0 - lo) - floor_sum(n, alpha, x0 - hi)


# ---------------------------------------------------------------------------
# decimal rendering (display only; exactness lives in the representation)
# ---------------------------------------------------------------------------


def _scaled_floor(x: QReal, scale_pow10: int) -> int:
    """floor(x * 10**scale_pow10), exactly."""
    s = 10**scale_pow10
    return QReal(x.a * s, x.b * s, x.d).floor()


def decimal_str(x: QReal, sig: int = 18) -> str:
    """Round x to ``sig`` significant digits (half-up), as a decimal string."""
    if not x:
        return "0"
    neg = x.sign() < 0
    y = -x if neg else x
    # exponent e with 10^e <= y < 10^(e+1)
    t = 0
    f = _scaled_floor(y, 0)
    if f > 0:
        e = len(str(f)) - 1
    else:
        while f == 0:
            t += sig + 2
            f = _scaled_floor(y, t)
        e = len(str(f)) - 1 - t
    # half-up rounding of y * 10^(sig-1-e)
    scaled = _scaled_floor(y, sig - e)  # sig+1 leading digits
    m, r = divmod(scaled, 10)
    if r >= 5:
        m += 1
    digits = str(m)
    if len(digits) > sig:  # rounding carried over, e.g. 999.. -> 1000..
        e += 1
        digits = digits[:sig]
    body = _place_point(digits, e)
    return "-" + body if neg else body


def _place_point(digits: str, e: int) -> str:
    if 0 <= e < len(digits):
        ip, fp = digits[: e + 1], digits[e + 1 :].rstrip("0")
        return ip + ("." + fp if fp else "")
    if -5 < e < 0:
        return "0." + "0" * (-e - 1) + digits.rstrip("0")
    fp = digits[1:].rstrip("0")
    mant = digits[0] + ("." + fp if fp else "")
    return f"{mant}e{'+' if e >= 0 else '-'}{abs(e):02d}"


def to_float(x: QReal) -> float:
    """Nearest-ish double for display and filtering; never used for decisions."""
    scaled = _scaled_floor(x, 19)
    return float(Fraction(scaled, 10**19))


# ---------------------------------------------------------------------------
# integer-pair helpers for the hot loops
# ---------------------------------------------------------------------------


def sign_int_pair(A: int, B: int, d: int) -> int:
    """Sign of A + B*sqrt(d) for plain integers; same rule as QReal comparison."""
    if B == 0:
        return (A > 0) - (A < 0)
    if A == 0:
        return 1 if B > 0 else -1
    sa = 1 if A > 0 else -1
    sb = 1 if B > 0 else -1
    if sa == sb:
        return sa
    return sa if A * A > B * B * d else sb


def integerize_common_den(*values: QReal):
    """Common denominator D and integer pairs (A, B) with v = (A + B*sqrt(d))/D.

    Orbit loops advance these integer pairs instead of QReals; one
    subtraction of D implements frac, and memberships are sign tests.
    """
    den = 1
    for v in values:
        for q in (v.a.denominator, v.b.denominator):
            g = _gcd(den, q)
            den = den // g * q
    pairs = tuple(
        (v.a.numerator * (den // v.a.denominator), v.b.numerator * (den // v.b.denominator))
        for v in values
    )
    return (den, *pairs)
