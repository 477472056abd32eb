"""Exact integer q-expansions used as oracles by the verification checks.

All series here are elements of Z((q)) truncated at a chosen order:
IntSeries stores integer coefficients together with the exponent of its
first stored term, so q^-1 - 4 + 83q + ... is coeffs (1, -4, 83, ...) at
offset -1. Every arithmetic step is exact; division that fails to stay in
Z raises instead of rounding.

eta_power_coeffs computes prod_{n>=1} (1 - q^n)^e via the logarithmic
derivative recurrence

    n c(n) = -e * sum_{j=1}^{n} sigma_1(j) c(n-j),    c(0) = 1,

mock_theta_coeffs expands f(q) = sum_{n>=0} q^(n^2) / prod_{j<=n} (1+q^j)^2,
e4_coeffs gives the weight-4 Eisenstein series 1 + 240 sum sigma_3(n) q^n,
and gamma0_6_F_coeffs builds the weight-0 hauptmodul-style function

    F = -(1/40) (E4(z) + 4 E4(2z) - 9 E4(3z) - 36 E4(6z)) / (eta(z) eta(2z) eta(3z) eta(6z))^2
      = q^-1 - 4 + 83 q + 296 q^2 + ...

whose coefficients must come out integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


class InexactDivision(ArithmeticError):
    """A recurrence step required a division that is not exact over Z."""


class NonIntegralCoefficient(ArithmeticError):
    """A series contracted to have integer coefficients produced a non-integer."""


@lru_cache(maxsize=None)
def _sigma(n: int, power: int) -> int:
    s = 0
    d = 1
    while d * d <= n:
        if n % d == 0:
            s += d**power
            e = n // d
            if e != d:
                s += e**power
        d += 1
    return s


def _mul(a: list[int], b: list[int], trunc: int) -> list[int]:
    out = [0] * (trunc + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > trunc:
            continue
        top = min(len(b) - 1, trunc - i)
        for j in range(top + 1):
            out[i + j] += ai * b[j]
    return out


def _inv(a: list[int], trunc: int) -> list[int]:
    # leading coefficient must be a unit of Z
    if a[0] not in (1, -1):
        raise InexactDivision("series inverse needs leading coefficient +-1")
    u = a[0]
    out = [u] + [0] * trunc
    for n in range(1, trunc + 1):
        s = 0
        for j in range(1, min(n, len(a) - 1) + 1):
            s += a[j] * out[n - j]
        out[n] = -u * s
    return out


def _stretch(a: list[int], m: int, trunc: int) -> list[int]:
    """Substitute q -> q^m."""
    out = [0] * (trunc + 1)
    for i, ai in enumerate(a):
        if i * m > trunc:
            break
        out[i * m] = ai
    return out


@dataclass(frozen=True)
class IntSeries:
    """Truncated integer Laurent series sum_i coeffs[i] q^(offset + i)."""

    coeffs: tuple[int, ...]
    offset: int = 0

    @property
    def order(self) -> int:
        """Largest exponent represented (inclusive)."""
        return self.offset + len(self.coeffs) - 1

    def coeff(self, n: int) -> int:
        """Coefficient of q^n; raises for exponents beyond the truncation."""
        i = n - self.offset
        if i < 0:
            return 0
        if i >= len(self.coeffs):
            raise IndexError(f"coefficient q^{n} beyond truncation order {self.order}")
        return self.coeffs[i]

    def __mul__(self, other: "IntSeries") -> "IntSeries":
        # reliable up to the shorter factor's length past the combined offset
        trunc = min(len(self.coeffs), len(other.coeffs)) - 1
        prod = _mul(list(self.coeffs), list(other.coeffs), trunc)
        return IntSeries(tuple(prod), self.offset + other.offset)

    def __add__(self, other: "IntSeries") -> "IntSeries":
        lo = min(self.offset, other.offset)
        hi = min(self.order, other.order)
        out = []
        for n in range(lo, hi + 1):
            a = self.coeff(n) if n <= self.order else 0
            b = other.coeff(n) if n <= other.order else 0
            out.append(a + b)
        return IntSeries(tuple(out), lo)

    def inverse(self) -> "IntSeries":
        inv = _inv(list(self.coeffs), len(self.coeffs) - 1)
        return IntSeries(tuple(inv), -self.offset)


def eta_power_coeffs(e: int, trunc: int) -> IntSeries:
    """Coefficients of prod_{n>=1} (1 - q^n)^e up to q^trunc.

    Works for any integer e via the sigma_1 recurrence; each step divides
    by n and raises InexactDivision if that division ever fails (it cannot
    for integer e, but the check keeps the arithmetic honest).
    """
    c = [1] + [0] * trunc
    for n in range(1, trunc + 1):
        s = 0
        for j in range(1, n + 1):
            s += _sigma(j, 1) * c[n - j]
        num = -e * s
        if num % n:
            raise InexactDivision(f"eta power recurrence not integral at n={n}")
        c[n] = num // n
    return IntSeries(tuple(c), 0)


def mock_theta_coeffs(trunc: int) -> IntSeries:
    """Third order mock theta f(q) = sum q^(n^2) / ((1+q)...(1+q^n))^2."""
    acc = [0] * (trunc + 1)
    acc[0] = 1  # n = 0 term
    prod = [1] + [0] * trunc  # running (1+q)...(1+q^n)
    n = 1
    while n * n <= trunc:
        # multiply one factor (1 + q^n) into the running product
        shifted = [0] * (trunc + 1)
        for i in range(trunc + 1 - n):
            shifted[i + n] = prod[i]
        prod = [p + s for p, s in zip(prod, shifted)]
        invsq = _inv(_mul(prod, prod, trunc), trunc)
        for i in range(trunc + 1 - n * n):
            acc[n * n + i] += invsq[i]
        n += 1
    return IntSeries(tuple(acc), 0)


def e4_coeffs(trunc: int) -> IntSeries:
    c = [1] + [240 * _sigma(n, 3) for n in range(1, trunc + 1)]
    return IntSeries(tuple(c), 0)


def gamma0_6_F_coeffs(trunc: int) -> IntSeries:
    """The weight-0 function on Gamma_0(6) with pole q^-1, as exact integers.

    Returns an IntSeries with offset -1 covering exponents -1 .. trunc.
    Raises NonIntegralCoefficient if the division by -40 ever leaves Z
    (a corruption canary; the true expansion is integral).
    """
    top = trunc + 1  # power-series order needed before the q^-1 shift
    e4 = list(e4_coeffs(top).coeffs)
    num = [0] * (top + 1)
    for scale, m in ((1, 1), (4, 2), (-9, 3), (-36, 6)):
        stretched = _stretch(e4, m, top)
        for i in range(top + 1):
            num[i] += scale * stretched[i]
    den = [1] + [0] * top
    sq = list(eta_power_coeffs(2, top).coeffs)
    for m in (1, 2, 3, 6):
        den = _mul(den, _stretch(sq, m, top), top)
    series = _mul(num, _inv(den, top), top)
    out = []
    for i in range(top + 1):
        v = -series[i]
        if v % 40:
            raise NonIntegralCoefficient(f"F coefficient at q^{i - 1} not integral")
        out.append(v // 40)
    return IntSeries(tuple(out), -1)
