"""Definite binary quadratic forms with level structure.

Forms Q = [a, b, c] of discriminant b^2 - 4ac = -D < 0 enter the trace
formula through the level-N family: N | a and b ≡ rho (mod 2N). This module
enumerates the finitely many Gamma_0(N)-classes of that family, decides
Gamma_0(N)-equivalence exactly, computes projective stabilizer orders and
Heegner points, and evaluates the generalized genus character chi_Delta
both by its defining representation-value rule and by the
factorization (GKZ) formula.

Matrix convention: 2x2 integer matrices are ((p, q), (r, s)) acting on
forms by (Q o g)(x, y) = Q(px + qy, rx + sy), so (Q o g) o h = Q o (gh),
and on the upper half-plane by g.z = (pz + q)/(rz + s).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import gcd, isqrt

import mpmath

from .numkernel import HPComplex, PrecCtx, divisors, kronecker

Mat = tuple[tuple[int, int], tuple[int, int]]

IDENT: Mat = ((1, 0), (0, 1))


class DiscMismatch(ValueError):
    """Equivalence asked between forms of different discriminants."""


class BoundUnstable(RuntimeError):
    """Doubling the enumeration bound changed the class count."""


class NoRepresentativeFound(RuntimeError):
    """Grid search found no represented value coprime to Delta."""


def mat_mul(g: Mat, h: Mat) -> Mat:
    (a, b), (c, d) = g
    (e, f), (i, j) = h
    return ((a * e + b * i, a * f + b * j), (c * e + d * i, c * f + d * j))


def mat_inv(g: Mat) -> Mat:
    # determinant-1 integer inverse
    (a, b), (c, d) = g
    return ((d, -b), (-c, a))


@dataclass(frozen=True)
class QuadForm:
    a: int
    b: int
    c: int

    def __post_init__(self) -> None:
        if self.disc >= 0:
            raise ValueError("form must be definite (negative discriminant)")
        if self.a == 0:
            raise ValueError("degenerate form with a = 0")

    @property
    def disc(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @property
    def content(self) -> int:
        return gcd(gcd(abs(self.a), abs(self.b)), abs(self.c))

    def value(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y

    def apply(self, g: Mat) -> "QuadForm":
        (p, q), (r, s) = g
        a2 = self.value(p, r)
        c2 = self.value(q, s)
        b2 = 2 * (self.a * p * q + self.c * r * s) + self.b * (p * s + q * r)
        return QuadForm(a2, b2, c2)

    def neg(self) -> "QuadForm":
        return QuadForm(-self.a, -self.b, -self.c)


@dataclass(frozen=True)
class TwistParams:
    """Twist data: a fundamental discriminant (or 1) and a square root mod 4N."""

    delta: int
    r: int

    def __post_init__(self) -> None:
        if not _is_fundamental_or_one(self.delta):
            raise ValueError(f"{self.delta} is not 1 or a fundamental discriminant")

    @property
    def sgn(self) -> int:
        return 1 if self.delta > 0 else -1

    def epsilon_bar(self):
        """Conjugate of the unit epsilon (1 for Delta > 0, i for Delta < 0)."""
        return mpmath.mpc(1, 0) if self.delta > 0 else mpmath.mpc(0, -1)

    def validate_level(self, nlevel: int) -> None:
        if (self.r * self.r - self.delta) % (4 * nlevel):
            raise ValueError(
                f"r^2 = {self.r**2} is not congruent to {self.delta} mod {4 * nlevel}"
            )


def _squarefree(n: int) -> bool:
    n = abs(n)
    d = 2
    while d * d <= n:
        if n % (d * d) == 0:
            return False
        d += 1
    return True


def _is_fundamental_or_one(delta: int) -> bool:
    if delta == 1:
        return True
    if delta == 0:
        return False
    if delta % 4 == 1:
        return _squarefree(delta)
    if delta % 4 == 0:
        m = delta // 4
        return m % 4 in (2, 3) and _squarefree(m)
    return False


def heegner_point(q: QuadForm, ctx: PrecCtx) -> HPComplex:
    """CM point of Q in the upper half-plane; alpha_{-Q} = alpha_Q."""
    d = -q.disc
    with ctx.workprec():
        rt = mpmath.sqrt(d)
        if q.a > 0:
            val = mpmath.mpc(-q.b, rt) / (2 * q.a)
        else:
            val = mpmath.mpc(-q.b, -rt) / (2 * q.a)
    return HPComplex.from_mpc(val, ctx)


def sl2_reduce(q: QuadForm) -> tuple[QuadForm, Mat]:
    """Gauss reduction with the transformation tracked: Q o g = reduced."""
    if q.a < 0:
        raise ValueError("sl2_reduce expects a positive definite form")
    g = IDENT
    cur = q
    while True:
        # translate b into (-a, a]
        if cur.b > cur.a or cur.b <= -cur.a:
            m = (cur.a - cur.b) // (2 * cur.a)
            t: Mat = ((1, m), (0, 1))
            cur = cur.apply(t)
            g = mat_mul(g, t)
        if cur.a > cur.c:
            s: Mat = ((0, -1), (1, 0))
            cur = cur.apply(s)
            g = mat_mul(g, s)
            continue
        break
    # boundary normalization: b >= 0 when |b| = a or a = c
    if cur.b < 0 and (cur.b == -cur.a or cur.a == cur.c):
        s = ((0, -1), (1, 0))
        cur = cur.apply(s)
        g = mat_mul(g, s)
        if abs(cur.b) > cur.a:
            m = -((cur.b + cur.a) // (2 * cur.a))
            t = ((1, m), (0, 1))
            cur = cur.apply(t)
            g = mat_mul(g, t)
    return cur, g


def automorphs(q: QuadForm) -> list[Mat]:
    """All SL2(Z) matrices fixing Q, via t^2 + D0 u^2 = 4 on the primitive part."""
    sign = 1 if q.a > 0 else -1
    a0, b0, c0 = sign * q.a, sign * q.b, sign * q.c
    g = gcd(gcd(a0, abs(b0)), c0)
    a0, b0, c0 = a0 // g, b0 // g, c0 // g
    d0 = 4 * a0 * c0 - b0 * b0
    sols = []
    u = 0
    while d0 * u * u <= 4:
        rem = 4 - d0 * u * u
        t = isqrt(rem)
        if t * t == rem:
            for tt in (t, -t) if t else (0,):
                for uu in (u, -u) if u else (0,):
                    if (tt, uu) != (0, 0):
                        sols.append((tt, uu))
        u += 1
    out = []
    seen = set()
    for t, u in sorted(sols):
        m: Mat = (((t - b0 * u) // 2, -c0 * u), (a0 * u, (t + b0 * u) // 2))
        if m not in seen:
            seen.add(m)
            out.append(m)
    return out


def automorph_order(q: QuadForm) -> int:
    return len(automorphs(q))


def gamma0_equivalent(q1: QuadForm, q2: QuadForm, nlevel: int) -> Mat | None:
    """A matrix gamma in Gamma_0(N) with Q1 o gamma = Q2, or None.

    Reduce both (negating negative definite inputs; the witness is
    unchanged), then sweep the automorph group of the shared reduced form.
    """
    if q1.disc != q2.disc:
        raise DiscMismatch(f"discriminants {q1.disc} != {q2.disc}")
    if (q1.a > 0) != (q2.a > 0):
        return None
    if q1.a < 0:
        q1, q2 = q1.neg(), q2.neg()
    r1, g1 = sl2_reduce(q1)
    r2, g2 = sl2_reduce(q2)
    if (r1.a, r1.b, r1.c) != (r2.a, r2.b, r2.c):
        return None
    g2inv = mat_inv(g2)
    for alpha in automorphs(r1):
        cand = mat_mul(mat_mul(g1, alpha), g2inv)
        if cand[1][0] % nlevel == 0:
            return cand
    return None


def stabilizer_order(q: QuadForm, nlevel: int) -> int:
    """Order of the stabilizer of Q in the image of Gamma_0(N) in PSL2."""
    count = sum(1 for m in automorphs(q) if m[1][0] % nlevel == 0)
    return count // 2


@dataclass(frozen=True)
class ClassSet:
    disc_mag: int
    rho: int
    nlevel: int
    sign_mode: str
    a_max: int
    reps: tuple[tuple[QuadForm, int], ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "D": self.disc_mag,
                "rho": self.rho,
                "N": self.nlevel,
                "sign_mode": self.sign_mode,
                "a_max": self.a_max,
                "reps": [
                    {"a": q.a, "b": q.b, "c": q.c, "stab": st} for q, st in self.reps
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ClassSet":
        d = json.loads(text)
        return cls(
            disc_mag=d["D"],
            rho=d["rho"],
            nlevel=d["N"],
            sign_mode=d["sign_mode"],
            a_max=d["a_max"],
            reps=tuple(
                (QuadForm(r["a"], r["b"], r["c"]), r["stab"]) for r in d["reps"]
            ),
        )


def _positive_candidates(dmag: int, rho: int, nlevel: int, a_max: int) -> list[QuadForm]:
    """All positive definite [a, b, c], N | a <= a_max, b ≡ rho (2N), exact c.

    For fixed a the translation Q -> Q o T shifts b by 2a, a multiple of 2N,
    so every class is hit with |b| <= a; the window keeps a 2N margin.
    Deterministic order (a, b) ascending.
    """
    out = []
    step = 2 * nlevel
    for a in range(nlevel, a_max + 1, nlevel):
        lo = -(a + step)
        first = lo + (rho - lo) % step
        for b in range(first, a + step + 1, step):
            num = b * b + dmag
            if num % (4 * a) == 0:
                out.append(QuadForm(a, b, num // (4 * a)))
    return out


def _dedup(cands: list[QuadForm], nlevel: int) -> list[QuadForm]:
    # bucket by SL2-reduced form first; only same-bucket pairs can merge
    buckets: dict[tuple[int, int, int], list[QuadForm]] = {}
    order = []
    for q in cands:
        r, _ = sl2_reduce(q)
        key = (r.a, r.b, r.c)
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        kept = buckets[key]
        if all(gamma0_equivalent(prev, q, nlevel) is None for prev in kept):
            kept.append(q)
    return [q for key in order for q in buckets[key]]


def enumerate_classes(
    dmag: int,
    rho: int,
    nlevel: int,
    sign_mode: str = "both",
    a_max: int | None = None,
) -> ClassSet:
    """Gamma_0(N)-class representatives of discriminant -dmag, b ≡ rho (2N).

    sign_mode "positive_only" keeps positive definite classes; "both" also
    enumerates the negative definite ones (which have b ≡ rho as well; they
    are the negatives of the positive definite classes at residue -rho).
    The search bound doubles once as a stability check.
    """
    if dmag <= 0:
        raise ValueError("discriminant magnitude must be positive")
    if (rho * rho + dmag) % (4 * nlevel):
        raise ValueError(f"rho^2 = {rho**2} not congruent to -{dmag} mod {4 * nlevel}")
    if sign_mode not in ("both", "positive_only"):
        raise ValueError(f"unknown sign_mode {sign_mode!r}")
    if a_max is None:
        a_max = nlevel * (dmag + 4)

    def collect(bound: int) -> list[QuadForm]:
        reps = _dedup(_positive_candidates(dmag, rho, nlevel, bound), nlevel)
        if sign_mode == "both":
            neg = _dedup(_positive_candidates(dmag, -rho, nlevel, bound), nlevel)
            reps = reps + [q.neg() for q in neg]
        return reps

    reps = collect(a_max)
    again = collect(2 * a_max)
    if len(again) != len(reps):
        raise BoundUnstable(
            f"class count changed from {len(reps)} to {len(again)} when doubling "
            f"a_max={a_max} (D={dmag}, rho={rho}, N={nlevel})"
        )
    step = 2 * nlevel
    reps.sort(key=lambda q: (abs(q.a), 0 if q.a > 0 else 1, q.b % step, q.b, q.c))
    pairs = tuple((q, stabilizer_order(q, nlevel)) for q in reps)
    return ClassSet(dmag, rho % (2 * nlevel), nlevel, sign_mode, a_max, pairs)


def _is_square_mod(v: int, mod: int) -> bool:
    v %= mod
    return any((t * t) % mod == v for t in range(mod))


def _content_test(q: QuadForm, delta: int, nlevel: int) -> bool:
    # content of the form in its level presentation: gcd(c, b, a/N, Delta)
    a1 = q.a // nlevel
    g = gcd(gcd(abs(q.c), abs(q.b)), gcd(abs(a1), abs(delta)))
    return g == 1


def genus_char(
    q: QuadForm, tw: TwistParams, nlevel: int, search_bound: int = 50
) -> int:
    """chi_Delta(Q) by the representation rule: (Delta / n) for represented n.

    Zero when Delta does not divide the discriminant, when disc/Delta is
    not a square mod 4N, or when the form's level content meets Delta.
    Escalates the grid bound x4 a few times before giving up.
    """
    if tw.delta == 1:
        return 1
    if q.a % nlevel:
        raise ValueError("genus_char expects a form from the level-N family (N | a)")
    disc = q.disc
    if disc % tw.delta:
        return 0
    if not _content_test(q, tw.delta, nlevel):
        return 0
    if not _is_square_mod(disc // tw.delta, 4 * nlevel):
        return 0
    bound = search_bound
    for _ in range(4):
        best = None
        for x in range(-bound, bound + 1):
            for y in range(-bound, bound + 1):
                n = q.value(x, y)
                if n != 0 and gcd(n, tw.delta) == 1:
                    key = (abs(n), 0 if n > 0 else 1)
                    if best is None or key < best[0]:
                        best = (key, n)
        if best is not None:
            return kronecker(tw.delta, best[1])
        bound *= 4
    raise NoRepresentativeFound(
        f"no represented value coprime to {tw.delta} with |x|,|y| <= {bound // 4}"
    )


def _discriminant_factorizations(delta: int):
    """Pairs (d1, d2), d1*d2 = delta, both ≡ 0 or 1 mod 4, signs included."""
    for t in divisors(delta):
        for d1 in (t, -t):
            if delta % d1:
                continue
            d2 = delta // d1
            if d1 % 4 in (0, 1) and d2 % 4 in (0, 1):
                yield d1, d2


def genus_char_gkz(
    q: QuadForm, tw: TwistParams, nlevel: int
) -> int:
    """chi_Delta(Q) by the factorization formula.

    Searches Delta = Delta1 * Delta2 into discriminants and N = N1 * N2 with
    gcd(Delta1, N1 * (a/N)) = gcd(Delta2, N2 * c) = 1 and evaluates
    (Delta1 / N1*(a/N)) * (Delta2 / N2*c); 0 when no factorization fits.
    """
    if tw.delta == 1:
        return 1
    if q.a % nlevel:
        raise ValueError("genus_char_gkz expects a form from the level-N family")
    disc = q.disc
    if disc % tw.delta:
        return 0
    if not _is_square_mod(disc // tw.delta, 4 * nlevel):
        return 0
    a1 = q.a // nlevel
    for d1, d2 in _discriminant_factorizations(tw.delta):
        for n1 in divisors(nlevel):
            n2 = nlevel // n1
            if gcd(d1, n1 * a1) == 1 and gcd(d2, n2 * q.c) == 1:
                return kronecker(d1, n1 * a1) * kronecker(d2, n2 * q.c)
    return 0
