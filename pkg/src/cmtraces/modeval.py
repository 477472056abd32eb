"""High-precision evaluation of eta, E4, j, and the level-6 function F.

Every evaluator reduces its argument toward the SL2(Z) fundamental domain
first, so the q-series that remain are evaluated at |q| <= e^{-pi*sqrt(3)}
and converge in O(precision) terms. eta tracks its multiplier step by step
through the T and S moves (T contributes e^{i pi/12} per unit translation,
S contributes the principal branch of sqrt(-iz)); E4 transports the
weight-4 automorphy factor of the tracked reduction matrix.

Atkin-Lehner involutions W_Q^N = (Qa, b; Nc, Qd)/sqrt(Q) are constructed
here as exact integer data; their Moebius action needs no square root.
gamma0_optimize pushes a point to a higher-imaginary-part representative
of its Gamma_0(N) orbit, which the Poincare engine uses to cut row counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import mpmath
from mpmath import mp

from .numkernel import HPComplex, PrecCtx
from .qseries import _sigma
from .quadforms import Mat, mat_mul

ID2: Mat = ((1, 0), (0, 1))


class NoSolution(RuntimeError):
    """No Atkin-Lehner integer solution found (impossible for valid Q | N)."""


def _to_mpc(z):
    if isinstance(z, HPComplex):
        return z.to_mpc()
    return mpmath.mpc(z)


def _nint(x) -> int:
    return int(mpmath.floor(x + mpmath.mpf(1) / 2))


def mobius(g: Mat, z):
    (a, b), (c, d) = g
    return (a * z + b) / (c * z + d)


def reduce_fundamental(z, ctx: PrecCtx) -> tuple[object, Mat]:
    """(z', gamma) with z' = gamma.z, |Re z'| <= 1/2, |z'| >= 1 up to 2^-prec."""
    with ctx.workprec():
        w = _to_mpc(z)
        if w.imag <= 0:
            raise ValueError("point not in the upper half-plane")
        g = ID2
        margin = mpmath.ldexp(1, -ctx.prec_bits)
        while True:
            n = _nint(w.real)
            if n != 0:
                w -= n
                g = mat_mul(((1, -n), (0, 1)), g)
            if mpmath.fabs(w) < 1 - margin:
                w = -1 / w
                g = mat_mul(((0, -1), (1, 0)), g)
            else:
                break
        return +w, g


def _eta_series(w):
    """Pentagonal-number series q^{1/24} prod(1-q^n) at a reduced point."""
    q = mpmath.exp(2j * mpmath.pi * w)
    aq = abs(q)
    eps = mpmath.ldexp(1, -(mp.prec + 8))
    total = mpmath.mpf(1)
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        g2 = k * (3 * k + 1) // 2
        term = q**g1 + q**g2
        if k % 2:
            total -= term
        else:
            total += term
        if aq**g1 < eps:
            break
        k += 1
    return mpmath.exp(2j * mpmath.pi * w / 24) * total


def _eta(z):
    """eta at ambient precision, reducing stepwise with tracked multiplier."""
    w = mpmath.mpc(z)
    if w.imag <= 0:
        raise ValueError("point not in the upper half-plane")
    mult = mpmath.mpc(1)
    margin = mpmath.ldexp(1, -(mp.prec - 8))
    while True:
        n = _nint(w.real)
        if n != 0:
            w -= n
            mult *= mpmath.exp(1j * mpmath.pi * n / 12)
        if mpmath.fabs(w) < 1 - margin:
            # eta(w) = eta(-1/w) / sqrt(-i w)
            mult /= mpmath.sqrt(-1j * w)
            w = -1 / w
        else:
            break
    return mult * _eta_series(w)


def eta(z, ctx: PrecCtx) -> HPComplex:
    with ctx.workprec():
        val = _eta(_to_mpc(z))
    return HPComplex.from_mpc(val, ctx)


def _e4_series(w):
    q = mpmath.exp(2j * mpmath.pi * w)
    aq = abs(q)
    eps = mpmath.ldexp(1, -(mp.prec + 8))
    total = mpmath.mpc(1)
    n = 1
    while True:
        term = 240 * _sigma(n, 3) * q**n
        total += term
        if aq**n * (n + 2) ** 3 * 240 < eps:
            break
        n += 1
    return total


def _e4(z, ctx: PrecCtx):
    w, g = reduce_fundamental(z, ctx)
    (_, _), (c, d) = g
    zz = _to_mpc(z)
    return _e4_series(w) / (c * zz + d) ** 4


def eisenstein_e4(z, ctx: PrecCtx) -> HPComplex:
    with ctx.workprec():
        val = _e4(_to_mpc(z), ctx)
    return HPComplex.from_mpc(val, ctx)


def j_invariant(z, ctx: PrecCtx) -> HPComplex:
    with ctx.workprec():
        zz = _to_mpc(z)
        val = _e4(zz, ctx) ** 3 / _eta(zz) ** 24
    return HPComplex.from_mpc(val, ctx)


def j_minus_744(z, ctx: PrecCtx) -> HPComplex:
    with ctx.workprec():
        zz = _to_mpc(z)
        val = _e4(zz, ctx) ** 3 / _eta(zz) ** 24 - 744
    return HPComplex.from_mpc(val, ctx)


def gamma0_6_F(z, ctx: PrecCtx) -> HPComplex:
    """F = -(1/40)(E4(z)+4E4(2z)-9E4(3z)-36E4(6z)) / (eta(z)eta(2z)eta(3z)eta(6z))^2."""
    with ctx.workprec():
        zz = _to_mpc(z)
        num = (
            _e4(zz, ctx)
            + 4 * _e4(2 * zz, ctx)
            - 9 * _e4(3 * zz, ctx)
            - 36 * _e4(6 * zz, ctx)
        )
        den = (_eta(zz) * _eta(2 * zz) * _eta(3 * zz) * _eta(6 * zz)) ** 2
        val = -num / (40 * den)
    return HPComplex.from_mpc(val, ctx)


@dataclass(frozen=True)
class ALMatrix:
    """W_Q^N = (Q a, b; N c, Q d) / sqrt(Q) with Q a d - (N/Q) b c = 1."""

    nlevel: int
    q: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if self.nlevel % self.q or gcd(self.q, self.nlevel // self.q) != 1:
            raise ValueError(f"{self.q} is not an exact divisor of {self.nlevel}")
        det = self.q * self.a * self.d - (self.nlevel // self.q) * self.b * self.c
        if det != 1:
            raise ValueError(f"normalized determinant {det} != 1")

    @property
    def entries(self) -> Mat:
        return (
            (self.q * self.a, self.b),
            (self.nlevel * self.c, self.q * self.d),
        )

    def apply(self, z):
        """Moebius action; the 1/sqrt(Q) scale cancels."""
        return mobius(self.entries, z)

    def jfactor(self, z):
        """(N c z + Q d)/sqrt(Q), the weight-1 automorphy factor at z."""
        return (self.nlevel * self.c * z + self.q * self.d) / mpmath.sqrt(self.q)


def _alternating(limit: int):
    yield 0
    for v in range(1, limit + 1):
        yield -v
        yield v


def atkin_lehner_matrix(nlevel: int, q: int) -> ALMatrix:
    """Integer solution of Q a d - (N/Q) b c = 1 with |b| then |c| minimal."""
    if nlevel % q or gcd(q, nlevel // q) != 1:
        raise ValueError(f"{q} is not an exact divisor of {nlevel}")
    m = nlevel // q
    for b in _alternating(q + 1):
        for c in _alternating(q + 1):
            x = 1 + m * b * c
            if x % q == 0:
                y = x // q
                if y == 0:
                    return ALMatrix(nlevel, q, 0, b, c, 0)
                return ALMatrix(nlevel, q, 1, b, c, y)
    raise NoSolution(f"no Atkin-Lehner solution for Q={q}, N={nlevel}")


def gamma0_optimize(z, nlevel: int, ctx: PrecCtx) -> tuple[object, Mat]:
    """(z', gamma) with gamma in Gamma_0(N), z' = gamma.z of maximal Im.

    Greedy: translate Re into [-1/2, 1/2], then look for rows (c, d) with
    N | c, gcd(c, d) = 1 and |cz+d| < 1 and apply the completion; repeat
    until no row improves. At N = 1 this is fundamental-domain reduction.
    """
    with ctx.workprec():
        w = _to_mpc(z)
        if w.imag <= 0:
            raise ValueError("point not in the upper half-plane")
        g = ID2
        margin = mpmath.ldexp(1, -min(48, ctx.prec_bits - 4))
        while True:
            n = _nint(w.real)
            if n != 0:
                w = w - n
                g = mat_mul(((1, -n), (0, 1)), g)
            improved = False
            cmax = int(mpmath.floor(1 / (nlevel * w.imag))) + 1
            for ck in range(1, cmax + 1):
                c = nlevel * ck
                base = -c * w.real
                for d in sorted({_nint(base) - 1, _nint(base), _nint(base) + 1}):
                    if gcd(c, d) != 1:
                        continue
                    if abs(c * w + d) < 1 - margin:
                        # complete (c, d) to (a, b; c, d) with det 1
                        a, b = complete_row(c, d)
                        gam: Mat = ((a, b), (c, d))
                        w = mobius(gam, w)
                        g = mat_mul(gam, g)
                        improved = True
                        break
                if improved:
                    break
            if not improved:
                break
        return +w, g


def complete_row(c: int, d: int) -> tuple[int, int]:
    """(a, b) with a d - b c = 1 for coprime (c, d), deterministic."""
    # extended euclid on (d, c)
    old_r, r = d, c
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        qq = old_r // r
        old_r, r = r, old_r - qq * r
        old_s, s = s, old_s - qq * s
        old_t, t = t, old_t - qq * t
    # old_s * d + old_t * c = old_r = +-1
    if old_r == 1:
        return old_s, -old_t
    return -old_s, old_t
