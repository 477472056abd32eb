"""Precision bookkeeping and scalar kernels shared by the whole package.

Everything downstream computes with mpmath mpf/mpc values inside an explicit
working precision of prec_bits + guard_bits and rounds results to prec_bits
at the edges. PrecCtx carries the two knobs, HPComplex is the rounded,
serializable result type.

The one nontrivial kernel here is the Kummer confluent hypergeometric
series

    M(a, b, y) = sum_{j>=0} (a)_j / ((b)_j j!) y^j,

summed termwise with a cancellation guard: if the largest intermediate
term exceeds the final sum by more than 2^guard_bits the whole sum is
recomputed at doubled working precision, a few times, before giving up.
kronecker implements the fully extended Kronecker symbol (arbitrary sign
and zero arguments) and gamma_half evaluates Gamma at integer and
half-integer points by exact closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import mp
from mpmath.libmp import from_str, repr_dps, to_str


class NonConvergent(ArithmeticError):
    """Series failed its accuracy contract after the precision ladder."""


@dataclass(frozen=True)
class PrecCtx:
    """Target precision plus guard bits for intermediate arithmetic."""

    prec_bits: int = 128
    guard_bits: int = 64

    def __post_init__(self) -> None:
        if self.prec_bits < 53:
            raise ValueError("prec_bits must be at least 53")
        if self.guard_bits < 0:
            raise ValueError("guard_bits must be nonnegative")

    @property
    def work_bits(self) -> int:
        return self.prec_bits + self.guard_bits

    def workprec(self):
        """Context manager setting mpmath to the working precision."""
        return mp.workprec(self.work_bits)

    def finalprec(self):
        return mp.workprec(self.prec_bits)


def round_to(x, prec_bits: int):
    """Round an mpf/mpc to prec_bits (unary plus rounds to ambient prec)."""
    with mp.workprec(prec_bits):
        return +x


def to_mpf(x):
    """Convert int/float/str/Fraction/mpf to mpf at ambient precision."""
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def real_to_str(x, prec_bits: int) -> str:
    """Decimal string that round-trips exactly at prec_bits."""
    # normalize inside a matching workprec block: mpf(x) at a lower ambient
    # precision would crush x before printing
    with mp.workprec(prec_bits):
        return to_str(mpmath.mpf(x)._mpf_, repr_dps(prec_bits))


def real_from_str(s: str, prec_bits: int):
    # wrap the parsed tuple inside a matching workprec block: mpf(tuple)
    # re-rounds to the ambient precision, which may be lower
    with mp.workprec(prec_bits):
        return mpmath.mpf(from_str(s, prec_bits, "n"))


@dataclass(frozen=True)
class HPComplex:
    """A complex value rounded to a declared precision.

    re and im are mpf rounded to prec_bits; serialization goes through
    decimal strings with enough digits to round-trip losslessly, so cache
    hits reproduce values bit for bit.
    """

    re: object
    im: object
    prec_bits: int

    @classmethod
    def from_mpc(cls, val, ctx: PrecCtx) -> "HPComplex":
        # extract parts losslessly; mpmath.mpc(val) would round to the
        # ambient precision, which may be far below ctx.prec_bits when the
        # caller sits outside a workprec block
        if isinstance(val, mpmath.mpc):
            re, im = val.real, val.imag
        elif isinstance(val, mpmath.mpf):
            re, im = val, mpmath.mpf(0)
        else:
            with mp.workprec(ctx.prec_bits + 8):
                v = mpmath.mpc(val)
            re, im = v.real, v.imag
        return cls(
            re=round_to(re, ctx.prec_bits),
            im=round_to(im, ctx.prec_bits),
            prec_bits=ctx.prec_bits,
        )

    def to_mpc(self):
        # mpc(re, im) would round the parts to the ambient precision (and so
        # would mpf(part) on an already-mpf part), so assemble from the raw
        # components instead
        with mp.workprec(self.prec_bits):
            re = mpmath.mpf(self.re) if not isinstance(self.re, mpmath.mpf) else self.re
            im = mpmath.mpf(self.im) if not isinstance(self.im, mpmath.mpf) else self.im
        return mp.make_mpc((re._mpf_, im._mpf_))

    def abs(self):
        with mp.workprec(self.prec_bits + 8):
            return +abs(self.to_mpc())

    def as_strings(self) -> dict:
        return {
            "re": real_to_str(self.re, self.prec_bits),
            "im": real_to_str(self.im, self.prec_bits),
            "prec_bits": self.prec_bits,
        }

    @classmethod
    def from_strings(cls, d: dict) -> "HPComplex":
        bits = int(d["prec_bits"])
        return cls(
            re=real_from_str(d["re"], bits),
            im=real_from_str(d["im"], bits),
            prec_bits=bits,
        )


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), extended to all integers.

    (a/0) is 1 for a = +-1 and 0 otherwise; (a/-1) is -1 for a < 0;
    (a/2) is 0 for even a and (-1)^((a^2-1)/8) for odd a.
    """
    a = int(a)
    n = int(n)
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    if n % 2 == 0:
        if a % 2 == 0:
            return 0
        z = (n & -n).bit_length() - 1
        n >>= z
        if z % 2 == 1 and a % 8 in (3, 5):
            result = -result
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def divisors(n: int) -> list[int]:
    """Positive divisors of n != 0, ascending."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("divisors of 0 requested")
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def gamma_half(two_x: int, ctx: PrecCtx):
    """Gamma(two_x / 2) for a positive integer two_x, by exact closed form.

    Even two_x = 2m gives (m-1)!; odd two_x = 2m+1 gives
    (2m)! sqrt(pi) / (4^m m!).
    """
    two_x = int(two_x)
    if two_x < 1:
        raise ValueError("gamma_half needs a positive argument")
    if two_x % 2 == 0:
        val = math.factorial(two_x // 2 - 1)
        with ctx.workprec():
            v = mpmath.mpf(val)
    else:
        m = (two_x - 1) // 2
        ratio = Fraction(math.factorial(2 * m), 4**m * math.factorial(m))
        with ctx.workprec():
            v = mpmath.sqrt(mpmath.pi) * mpmath.mpf(ratio.numerator) / ratio.denominator
    return round_to(v, ctx.prec_bits)


def _kummer_attempt(a, b, y, work_bits: int):
    """One pass of the Kummer series at a given working precision.

    Returns (sum, max_term). Terms are generated by the ratio recurrence
    term_{j+1} = term_j * (a+j) y / ((b+j)(j+1)); summation stops once the
    index is past the term peak (j > |y|) and the current term is below
    max_term * 2^-(work_bits+16).
    """
    with mp.workprec(work_bits):
        yv = to_mpf(y)
        av = to_mpf(a)
        bv = to_mpf(b)
        term = mpmath.mpf(1)
        total = term
        max_term = abs(term)
        ylim = abs(yv) + 4
        j = 0
        while True:
            term = term * (av + j) * yv / ((bv + j) * (j + 1))
            total += term
            at = abs(term)
            if at > max_term:
                max_term = at
            j += 1
            if j > ylim and at <= mpmath.ldexp(max_term, -(work_bits + 16)):
                break
            if j > 4 * work_bits + int(8 * abs(yv)) + 64:
                raise NonConvergent(
                    "Kummer series failed to settle after %d terms" % j
                )
        return +total, +max_term


def kummer_m(a, b, y, ctx: PrecCtx, max_doublings: int = 6):
    """M(a, b, y) with a cancellation guard and a precision ladder.

    a, b real (b not a nonpositive integer), y real. When intermediate
    terms overshoot the result by more than the guard allows, the sum is
    repeated with doubled working precision up to max_doublings times;
    NonConvergent is raised if the guard is never satisfied.
    """
    bq = Fraction(b) if isinstance(b, (int, Fraction)) else None
    if bq is not None and bq <= 0 and bq.denominator == 1:
        raise ValueError("kummer_m: b is a nonpositive integer")
    if a > 0 and b > 0 and y > 0:
        # every term is positive, so cancellation is impossible and one
        # pass with modest headroom suffices; this is the hot path for
        # the coset sums
        total, _ = _kummer_attempt(a, b, y, ctx.prec_bits + 24)
        return round_to(total, ctx.prec_bits)
    work = ctx.work_bits
    for _ in range(max_doublings + 1):
        total, max_term = _kummer_attempt(a, b, y, work)
        if total != 0:
            with mp.workprec(53):
                lost = float(mpmath.log(max_term / abs(total), 2))
            # bits surviving after cancellation must cover the target
            if lost <= work - ctx.prec_bits - 8:
                return round_to(total, ctx.prec_bits)
        work *= 2
    raise NonConvergent(
        "kummer_m: cancellation exceeded available precision after "
        f"{max_doublings} doublings"
    )
