"""Maass Poincare series on Gamma_0(N) and lift constants.

The scalar Poincare series of weight k, spectral parameter s and index m is

    F_m(z, s, k) = (1 / (2 Gamma(2s))) sum_{gamma in Gamma_inf \ Gamma_0(N)}
                       [ cal_M_{s,k}(4 pi m y) e(-m x) ] |_k gamma

where cal_M_{s,k}(y) = e^{-y/2} y^{s - k/2} M(s + k/2, 2s, y) in terms of the
Kummer function M, and Gamma_inf is generated by the translation z -> z + 1
alone.  Cosets are indexed by bottom rows (c, d) with N | c and gcd(c, d) = 1,
with both rows (0, 1) and (0, -1) present, so the c = 0 contribution is
cal_M_{s,k}(4 pi m y) e(-m x) / Gamma(2s) for even k.  The sum converges for
Re(s) > 1 and each term decays like |cz + d|^{-2s}, which drives the adaptive
truncation radius below.

Applying the raising operator R_k = 2i d/dtau + k/y repeatedly sends weight
-2k to weight 0:

    R^k_{-2k} F_m(z, s, -2k) = (4 pi m)^k prod_{j=0}^{k-1} (s + j - k)
                                   F_m(z, s, 0),

so derivatives of negative-weight series are evaluated exactly through the
weight-zero series, never by finite differences.  lift_constants evaluates the
closed-form normalising constants of the theta lift, and lift_principal_part
expands the principal part of the lift of a Poincare combination into vector
components indexed by h mod 2N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import mp

from .modeval import atkin_lehner_matrix, complete_row, gamma0_optimize, mobius
from .numkernel import (
    HPComplex,
    NonConvergent,
    PrecCtx,
    divisors,
    gamma_half,
    kronecker,
    kummer_m,
    round_to,
    to_mpf,
)
from .quadforms import TwistParams


@dataclass(frozen=True)
class PoincareSpec:
    """One scalar Poincare series F_m(., s, k) | W_Q on Gamma_0(nlevel).

    k is the (even) weight of the series itself.  al is an exact divisor Q of
    the level; al = 1 means no Atkin-Lehner translate.  c_max, when set, caps
    the truncation radius regardless of the requested accuracy.
    """

    m: int
    s: Fraction | int | float
    k: int
    nlevel: int
    al: int = 1
    c_max: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("index m must be a positive integer")
        if self.k % 2 != 0:
            raise ValueError("series weight must be even")
        if self.nlevel < 1:
            raise ValueError("level must be positive")
        if self.al < 1 or self.nlevel % self.al != 0 or math.gcd(self.al, self.nlevel // self.al) != 1:
            raise ValueError("al must be an exact divisor of the level")


@dataclass(frozen=True)
class PoincareCombo:
    """A rational combination sum coeff * F_m(., s, -2k) | W_Q.

    All terms share the spectral parameter s, the raising order k >= 0 (the
    underlying series weight is -2k) and the level.  terms holds triples
    (coefficient, index m, Atkin-Lehner divisor Q) with exact rational
    coefficients.
    """

    s: Fraction | int | float
    k: int
    nlevel: int
    terms: tuple[tuple[Fraction, int, int], ...]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("raising order must be nonnegative")
        norm = tuple((Fraction(co), int(m), int(q)) for co, m, q in self.terms)
        object.__setattr__(self, "terms", norm)
        for _, m, q in norm:
            if m < 1:
                raise ValueError("index m must be a positive integer")
            if q < 1 or self.nlevel % q != 0 or math.gcd(q, self.nlevel // q) != 1:
                raise ValueError("Atkin-Lehner divisor must exactly divide the level")


@dataclass(frozen=True)
class FormSpec:
    """A weakly holomorphic or harmonic input form for the trace machinery.

    kind "closed" evaluates a named closed formula (name in {"gamma0_6_F",
    "J"}) and kind "poincare" evaluates combo through eval_dF.  lift_combo,
    when present, is the Poincare combination whose lift principal part
    matches the form; for kind "poincare" it defaults to combo itself.
    """

    kind: str
    nlevel: int
    weight: int
    name: str | None = None
    combo: PoincareCombo | None = None
    lift_combo: PoincareCombo | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("closed", "poincare"):
            raise ValueError("kind must be 'closed' or 'poincare'")
        if self.weight % 2 != 0 or self.weight > 0:
            raise ValueError("weight must be a nonpositive even integer")
        if self.kind == "closed":
            if self.name not in ("gamma0_6_F", "J"):
                raise ValueError("unknown closed form name")
        else:
            if self.combo is None:
                raise ValueError("kind 'poincare' requires a combo")
            if self.combo.k != self.raising_order:
                raise ValueError("combo raising order does not match the weight")
            if self.lift_combo is None:
                object.__setattr__(self, "lift_combo", self.combo)

    @property
    def raising_order(self) -> int:
        return (-self.weight) // 2


def _whittaker_raw(s, k: int, y, ctx: PrecCtx):
    # cal_M_{s,k}(y) = e^{-y/2} y^{s-k/2} M(s+k/2, 2s, y), all factors at
    # the ambient working precision.  The Kummer sum gets a context whose
    # target equals the ambient precision so no guard bits are shed here.
    del ctx
    a = mpmath.mpf(s) + mpmath.mpf(k) / 2
    b = 2 * mpmath.mpf(s)
    inner = PrecCtx(prec_bits=mp.prec, guard_bits=64)
    return mp.e ** (-y / 2) * y ** (mpmath.mpf(s) - mpmath.mpf(k) / 2) * kummer_m(a, b, y, inner)


def whittaker_M_cal(s, k: int, y, ctx: PrecCtx):
    """cal_M_{s,k}(y) for real y > 0, rounded to ctx.prec_bits."""
    with ctx.workprec():
        val = _whittaker_raw(to_mpf(s), k, to_mpf(y), ctx)
    return round_to(val, ctx.prec_bits)


def coset_rows(nlevel: int, c_max: int, window=None) -> list[tuple[int, int, int, int]]:
    """Bottom rows (c, d) of Gamma_inf \\ Gamma_0(nlevel) with completions.

    Returns tuples (c, d, a, b) with a d - b c = 1, in the fixed deterministic
    order: the two seed rows (0, 1) and (0, -1) first, then |c| ascending
    through positive multiples of the level (positive c before negative), and
    d ascending within each c.  window(c) -> (dlo, dhi) bounds the d range for
    each c; without it a symmetric window |d| <= c_max is used.
    """
    rows: list[tuple[int, int, int, int]] = [(0, 1, 1, 0), (0, -1, -1, 0)]
    cc = nlevel
    while cc <= c_max:
        for c in (cc, -cc):
            if window is None:
                dlo, dhi = -c_max, c_max
            else:
                dlo, dhi = window(c)
            for d in range(dlo, dhi + 1):
                if math.gcd(c, d) != 1:
                    continue
                a, b = complete_row(c, d)
                rows.append((c, d, a, b))
        cc += nlevel
    return rows


def row_term(s, k: int, m: int, row: tuple[int, int, int, int], w, ctx: PrecCtx):
    """One coset term cal_M_{s,k}(4 pi m Im gz) e(-m Re gz) (cw+d)^{-k}.

    Evaluated at the ambient precision, without the 1/(2 Gamma(2s)) front
    factor.  Exposed so invariance of single terms under a change of row
    completion can be checked directly.
    """
    c, d, a, b = row
    gz = mobius(((a, b), (c, d)), w)
    co, si = mpmath.cos_sin(-2 * mp.pi * m * gz.real)
    term = _whittaker_raw(s, k, 4 * mp.pi * m * gz.imag, ctx) * mpmath.mpc(co, si)
    if k != 0:
        term = term * (c * w + d) ** (-k)
    return term


def _truncation_radius(s, front, floor_abs):
    # each term with bottom row (c, d) has magnitude about
    # front * (4 pi m y)^{s - k/2} |cz + d|^{-2s}; solve for the radius where
    # that falls under floor_abs.
    if floor_abs <= 0:
        raise ValueError("term floor must be positive")
    ratio = front / floor_abs
    if ratio <= 1:
        return mpmath.mpf(1)
    return ratio ** (1 / (2 * mpmath.mpf(s)))


def eval_poincare(
    spec: PoincareSpec,
    z,
    ctx: PrecCtx,
    rel_floor=None,
    optimize: bool = True,
    max_rows: int = 400_000,
):
    """Evaluate F_m(z, s, k) | W_al by truncated coset summation.

    Returns (value, estimate, c_used): the value as HPComplex, a tail
    estimate for the truncation error on the same scale as the value, and
    the largest |c| actually summed.  rel_floor sets the size of the
    smallest retained term relative to the c = 0 seed term; the default
    2^-(prec_bits + 16) is conservative and callers with a known target
    tolerance should pass something near tolerance * 1e-4.  Slowly decaying
    sums (s close to 1) can demand absurd radii for small floors, so the
    radius is capped at about max_rows summed terms; the returned estimate
    reflects whatever radius was actually used, so accuracy is never
    silently overstated.

    Raises NonConvergent outside the convergent range Re(s) > 1.
    """
    s = to_mpf(spec.s)
    if s <= 1:
        raise NonConvergent("the coset sum only converges for Re(s) > 1")
    k = spec.k
    m = spec.m
    nlevel = spec.nlevel
    with ctx.workprec():
        w = mpmath.mpc(z.re, z.im) if isinstance(z, HPComplex) else mpmath.mpc(z)
        factor = mpmath.mpc(1)
        if spec.al != 1:
            wal = atkin_lehner_matrix(nlevel, spec.al)
            factor *= wal.jfactor(w) ** (-k)
            w = wal.apply(w)
        if optimize:
            wpre = w
            w, gopt = gamma0_optimize(w, nlevel, ctx)
            # invariance gives F(wpre) = (c wpre + d)^{-k} F(gopt.wpre)
            factor *= (gopt[1][0] * wpre + gopt[1][1]) ** (-k)
        x, y = w.real, w.imag
        gamma2s = mpmath.gamma(2 * s)
        front = (4 * mp.pi * m * y) ** (s - mpmath.mpf(k) / 2) / (2 * gamma2s)
        if rel_floor is None:
            floor = mpmath.ldexp(1, -(ctx.prec_bits + 16))
        else:
            floor = to_mpf(rel_floor)
        # scale the floor by the seed magnitude so "relative" means relative
        # to the leading c = 0 contribution.
        seed_mag = _whittaker_raw(s, k, 4 * mp.pi * m * y, ctx) / gamma2s
        floor_abs = seed_mag * floor
        radius = _truncation_radius(s, front, floor_abs)
        # rows inside radius R number about pi R^2 / (nlevel y)
        radius_cap = mpmath.sqrt(mpmath.mpf(max_rows) * nlevel * y / mp.pi) + 2
        radius = min(radius, radius_cap)
        if spec.c_max is not None:
            # shrink the whole ball, not just the c range, so the tail
            # integral below still covers every omitted row
            radius = min(radius, (spec.c_max + 1) * y)
        c_cap = int(mpmath.floor(radius / y)) + 1
        if spec.c_max is not None:
            c_cap = min(c_cap, spec.c_max)

        def dwindow(c):
            gap = radius ** 2 - (c * y) ** 2
            if gap <= 0:
                return (1, 0)
            half = mpmath.sqrt(gap)
            lo = int(mpmath.ceil(-c * x - half))
            hi = int(mpmath.floor(-c * x + half))
            return (lo, hi)

        total = mpmath.mpc(0)
        c_used = 0
        for row in coset_rows(nlevel, c_cap, dwindow):
            total += row_term(s, k, m, row, w, ctx)
            c_used = max(c_used, abs(row[0]))
        total = total / (2 * gamma2s) * factor
        # tail bound: rows with |cw + d| in [R, R + dR] number about
        # 2 pi R dR / (nlevel y), each at most front R^{-2s}; integrate.
        tail = front * (2 * mp.pi / (nlevel * y)) * radius ** (2 - 2 * s) / (2 * s - 2)
        tail = tail * abs(factor)
    return HPComplex.from_mpc(total, ctx), round_to(tail, ctx.prec_bits), c_used


def raising_prefactor(s, k: int):
    """prod_{j=0}^{k-1} (s + j - k) as an mpf at the ambient precision.

    The full prefactor for k-fold raising from weight -2k is (4 pi m)^k
    times this; the caller supplies the m-dependent power.
    """
    sv = to_mpf(s)
    prod = mpmath.mpf(1)
    for j in range(k):
        prod *= sv + j - k
    return prod


def eval_dF(
    combo: PoincareCombo,
    z,
    ctx: PrecCtx,
    rel_floor=None,
    optimize: bool = True,
    c_max: int | None = None,
):
    """Evaluate the raised combination sum coeff R^k_{-2k} F_m | W_Q at z.

    Each term is exactly (4 pi m)^k prod_{j=0}^{k-1}(s + j - k) times the
    weight-zero series at the translated point, so no numerical
    differentiation enters.  Returns (value, estimate) with the truncation
    estimates of the constituent evaluations aggregated with the same
    prefactors.
    """
    with ctx.workprec():
        prod = raising_prefactor(combo.s, combo.k)
        total = mpmath.mpc(0)
        est = mpmath.mpf(0)
        for coeff, m, alq in combo.terms:
            pref = (4 * mp.pi * m) ** combo.k * prod
            spec0 = PoincareSpec(
                m=m, s=combo.s, k=0, nlevel=combo.nlevel, al=alq, c_max=c_max
            )
            val, tail, _ = eval_poincare(spec0, z, ctx, rel_floor=rel_floor, optimize=optimize)
            cof = mpmath.mpf(coeff.numerator) / coeff.denominator
            total += cof * pref * val.to_mpc()
            est += abs(cof * pref) * to_mpf(tail)
    return HPComplex.from_mpc(total, ctx), round_to(est, ctx.prec_bits)


def lift_constants(k: int, s, nlevel: int, tw: TwistParams, ctx: PrecCtx, m: int = 1, method: str = "direct"):
    """The normalising constant of the lift of F_m(., s, -2k) | (level nlevel).

    Even k uses

        C = -(2^{2s+2k-1} m^{2k+1} pi^{(3k-1)/2} |Delta|^{(k+1)/2} ebar
              / nlevel^{k/2}) * (Gamma(s/2 + 1) / Gamma(2s))
            * prod_{j=0}^{k-1} (s + j - k) * prod_{j=0}^{k/2-1} (s/2 + 1 + j)

    and odd k uses

        C = -(2^{2k-s} |Delta|^{-k/2} ebar / Gamma(s/2 + 1/2))
            * nlevel^{(k+1)/2} pi^{k/2} * s * prod_{j=0}^{k-1} (s + j - k)
            * prod_{j=0}^{(k-1)/2} (s/2 - 1/2 + j)

    with ebar = 1 for Delta > 0 and -i for Delta < 0.  s must be a positive
    integer (the default spectral point s = k + 1 always is) so the Gamma
    factors reduce to exact half-integral values.  method "log" recomputes
    through logarithms as an independent path for cross-checking.
    """
    if method not in ("direct", "log"):
        raise ValueError("method must be 'direct' or 'log'")
    si = int(s)
    if si != s or si < 1:
        raise ValueError("s must be a positive integer here")
    with ctx.workprec():
        ebar = tw.epsilon_bar()
        sv = mpmath.mpf(si)
        adm = abs(tw.delta)
        if k % 2 == 0:
            pieces = [
                mpmath.mpf(2) ** (2 * si + 2 * k - 1),
                mpmath.mpf(m) ** (2 * k + 1),
                mp.pi ** (mpmath.mpf(3 * k - 1) / 2),
                mpmath.mpf(adm) ** (mpmath.mpf(k + 1) / 2),
                mpmath.mpf(nlevel) ** (-mpmath.mpf(k) / 2),
                gamma_half(si + 2, ctx),
                1 / gamma_half(4 * si, ctx),
            ]
            tailprods = [sv + j - k for j in range(k)] + [sv / 2 + 1 + j for j in range(k // 2)]
        else:
            pieces = [
                mpmath.mpf(2) ** (2 * k - si),
                mpmath.mpf(adm) ** (-mpmath.mpf(k) / 2),
                1 / gamma_half(si + 1, ctx),
                mpmath.mpf(nlevel) ** (mpmath.mpf(k + 1) / 2),
                mp.pi ** (mpmath.mpf(k) / 2),
                sv,
            ]
            tailprods = [sv + j - k for j in range(k)] + [sv / 2 - mpmath.mpf(1) / 2 + j for j in range((k + 1) // 2)]
        if method == "direct":
            val = mpmath.mpf(-1)
            for p in pieces + tailprods:
                val *= p
            out = val * ebar
        else:
            sign = -1
            logsum = mpmath.mpf(0)
            for p in pieces + tailprods:
                if p == 0:
                    return HPComplex.from_mpc(mpmath.mpc(0), ctx)
                if p < 0:
                    sign = -sign
                logsum += mpmath.log(abs(p))
            out = sign * mpmath.e ** logsum * ebar
    return HPComplex.from_mpc(out, ctx)


def _crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    # x = r1 mod m1, x = r2 mod m2 for coprime moduli
    inv = pow(m1, -1, m2)
    return (r1 + m1 * ((r2 - r1) * inv % m2)) % (m1 * m2)


def al_unit(nlevel: int, q: int) -> int:
    """The unit u mod 2 nlevel by which W_q permutes vector components.

    u is -1 modulo the blocks of 2 nlevel at primes dividing q and +1 at the
    others; components transform by h -> u h.  Requires squarefree nlevel and
    q an exact divisor of it.
    """
    if nlevel % q != 0 or math.gcd(q, nlevel // q) != 1:
        raise ValueError("q must exactly divide the level")
    mod = 2 * nlevel
    res, curmod = 0, 1
    left = mod
    p = 2
    while left > 1:
        if left % p == 0:
            pe = 1
            while left % p == 0:
                left //= p
                pe *= p
            want = pe - 1 if q % p == 0 else 1
            res = _crt_pair(res, curmod, want % pe, pe)
            curmod *= pe
        p += 1 if p == 2 else 2
    return res % mod


def lift_principal_part(combo: PoincareCombo, tw: TwistParams, ctx: PrecCtx):
    """Principal part of the twisted lift of a Poincare combination.

    Returns a sorted list of (exponent, h, coeff): the lift has a term
    coeff * q^exponent on the component h mod 2 nlevel, with exponent a
    negative Fraction.  For each term (co, m, Q) and each divisor n of m with
    kronecker(Delta, n) nonzero there is a contribution

        C * co * kronecker(Delta, n) * n^k          (k odd)
        C * co * kronecker(Delta, n) * n^-(k+1)     (k even)

    at exponent -m^2 |Delta| / (4 nlevel n^2) on component u_Q r m / n, plus
    the sign(Delta)-scaled mirror on component -u_Q r m / n.
    """
    k = combo.k
    nlevel = combo.nlevel
    mod = 2 * nlevel
    tw.validate_level(nlevel)
    with ctx.workprec():
        # the constant depends on m (as m^{2k+1}) for even k but not for odd
        # k, where the m dependence sits in the divisor weights; computing a
        # per-m constant keeps both parities on one code path.
        acc: dict[tuple[Fraction, int], mpmath.mpc] = {}
        for co, m, alq in combo.terms:
            cm = lift_constants(k, combo.s, nlevel, tw, ctx, m=m).to_mpc()
            u = al_unit(nlevel, alq)
            cof = mpmath.mpf(co.numerator) / co.denominator
            for n in divisors(m):
                chi = kronecker(tw.delta, n)
                if chi == 0:
                    continue
                if k % 2 == 1:
                    wgt = mpmath.mpf(n) ** k
                else:
                    wgt = mpmath.mpf(n) ** (-(k + 1))
                base = cm * cof * chi * wgt
                expo = Fraction(-m * m * abs(tw.delta), 4 * nlevel * n * n)
                hplus = (u * tw.r * (m // n)) % mod
                hminus = (-u * tw.r * (m // n)) % mod
                acc[(expo, hplus)] = acc.get((expo, hplus), mpmath.mpc(0)) + base
                acc[(expo, hminus)] = acc.get((expo, hminus), mpmath.mpc(0)) + tw.sgn * base
        out = []
        for (expo, h), val in sorted(acc.items(), key=lambda t: (t[0][0], t[0][1])):
            out.append((expo, h, HPComplex.from_mpc(val, ctx)))
    return out
