"""Twisted traces of CM values over Gamma_0(N) and coefficient duality.

For an input form f of weight -2k on Gamma_0(N), twist data (Delta, r)
with r^2 = Delta (4N), and a pair (d, h) with (rh)^2 = -d|Delta| (4N),
the twisted trace is

    Tr_{Delta,r}(f; d, h) =
        sum_Q  chi_Delta(Q) (del f)(alpha_Q) / |stab Q|

with Q running over Gamma_0(N)-classes of forms [a, b, c], N | a,
b = rh (2N), of discriminant -d|Delta|, alpha_Q the CM point of Q, chi
the genus character and del = R_{-2k}^k the iterated raising operator
(the identity in weight 0).  When the congruence on (d, h) fails there
are no such forms and the trace is an empty sum: a valid zero, flagged
on the report rather than raised.

The traces are one side of a duality.  A weight 1/2 + k vector-valued
form F with principal-part coefficients c_F(e, h) at exponents e < 0
pairs against the lift of f so that

    sum_{e,h} c_F(e, h) a_lift(-e, h) = 0,

where the lift coefficient at a positive exponent e is a universal
prefactor times Tr(f; 4N e, h) and at a negative exponent is read off
the lift principal part.  duality_residual computes the left-hand side
together with the size of its largest term.

Trace reports carry the per-class breakdown and can go through a JSON
cache keyed by a hash of the request (precision and truncation
parameters included); a cache hit reproduces the cold run bit for bit.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from hashlib import sha256

import mpmath
from mpmath import mp

from .modeval import gamma0_6_F, j_minus_744
from .numkernel import (
    HPComplex,
    PrecCtx,
    real_from_str,
    real_to_str,
    round_to,
    to_mpf,
)
from .poincare import (
    FormSpec,
    PoincareCombo,
    eval_dF,
    lift_constants,
    lift_principal_part,
)
from .quadforms import (
    ClassSet,
    QuadForm,
    TwistParams,
    enumerate_classes,
    genus_char,
    heegner_point,
)

__all__ = [
    "TraceRequest",
    "ClassRow",
    "TraceReport",
    "trace",
    "trace_combination",
    "thm_coeff_prefactor",
    "lift_coefficient",
    "duality_residual",
    "principal_part_match",
]


@dataclass(frozen=True)
class TraceRequest:
    """One trace Tr_{Delta,r}(f; d, h), d > 0 the discriminant over |Delta|.

    The class discriminant is -d |Delta|; requests whose (d, h) fail the
    congruence (rh)^2 = -d|Delta| (4N) are admissible inputs that resolve
    to an empty class set (trace zero), not errors.  sign_mode "both"
    sums positive and negative definite classes, "positive_only" is the
    classical untwisted convention.
    """

    tw: TwistParams
    d: int
    h: int
    f: FormSpec
    sign_mode: str = "both"

    def __post_init__(self) -> None:
        if self.d <= 0:
            raise ValueError("d must be a positive integer")
        if self.sign_mode not in ("both", "positive_only"):
            raise ValueError(f"unknown sign_mode {self.sign_mode!r}")
        self.tw.validate_level(self.f.nlevel)

    @property
    def disc_mag(self) -> int:
        return self.d * abs(self.tw.delta)

    @property
    def rho(self) -> int:
        return (self.tw.r * self.h) % (2 * self.f.nlevel)

    def admissible(self) -> bool:
        n4 = 4 * self.f.nlevel
        return (self.rho * self.rho + self.disc_mag) % n4 == 0


@dataclass(frozen=True)
class ClassRow:
    """Per-class diagnostics: chi * value / stab is the row's contribution."""

    form: QuadForm
    chi: int
    stab: int
    cm: HPComplex
    val: HPComplex
    trunc_est: str


@dataclass(frozen=True)
class TraceReport:
    value: HPComplex
    rows: tuple[ClassRow, ...]
    trunc_est: str
    prec_bits: int
    empty: bool
    cache_key: str
    cache_hit: bool = False

    def to_payload(self) -> dict:
        return {
            "value": self.value.as_strings(),
            "rows": [
                {
                    "form": [r.form.a, r.form.b, r.form.c],
                    "chi": r.chi,
                    "stab": r.stab,
                    "cm": r.cm.as_strings(),
                    "val": r.val.as_strings(),
                    "est": r.trunc_est,
                }
                for r in self.rows
            ],
            "est": self.trunc_est,
            "prec_bits": self.prec_bits,
            "empty": self.empty,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_payload(cls, d: dict, cache_key: str, cache_hit: bool) -> "TraceReport":
        rows = tuple(
            ClassRow(
                form=QuadForm(*r["form"]),
                chi=r["chi"],
                stab=r["stab"],
                cm=HPComplex.from_strings(r["cm"]),
                val=HPComplex.from_strings(r["val"]),
                trunc_est=r["est"],
            )
            for r in d["rows"]
        )
        return cls(
            value=HPComplex.from_strings(d["value"]),
            rows=rows,
            trunc_est=d["est"],
            prec_bits=int(d["prec_bits"]),
            empty=bool(d["empty"]),
            cache_key=cache_key,
            cache_hit=cache_hit,
        )


def _hp_zero(ctx: PrecCtx) -> HPComplex:
    zero = mpmath.mpf(0)
    return HPComplex(re=zero, im=zero, prec_bits=ctx.prec_bits)


def _coeff_to_mpc(v):
    """int/Fraction/float/str/mpf/mpc/HPComplex to mpc at ambient precision."""
    if isinstance(v, HPComplex):
        return v.to_mpc()
    if isinstance(v, mpmath.mpc):
        return +v
    if isinstance(v, Fraction):
        return mpmath.mpc(mpmath.mpf(v.numerator) / v.denominator)
    return mpmath.mpc(to_mpf(v))


def _combo_json(combo: PoincareCombo | None):
    if combo is None:
        return None
    return {
        "s": str(combo.s),
        "k": combo.k,
        "N": combo.nlevel,
        "terms": [
            [f"{c.numerator}/{c.denominator}", m, alq] for c, m, alq in combo.terms
        ],
    }


def _form_json(f: FormSpec) -> dict:
    return {
        "kind": f.kind,
        "N": f.nlevel,
        "weight": f.weight,
        "name": f.name,
        "combo": _combo_json(f.combo),
        "lift_combo": _combo_json(f.lift_combo),
    }


def _floor_str(rel_floor, ctx: PrecCtx) -> str | None:
    """Canonical decimal form of the truncation floor, None for the default.

    The serial and parallel paths both parse the floor back from this
    string, so the two runs see bit-identical inputs.
    """
    if rel_floor is None:
        return None
    if isinstance(rel_floor, str):
        return rel_floor
    with ctx.workprec():
        return real_to_str(round_to(to_mpf(rel_floor), ctx.prec_bits), ctx.prec_bits)


def request_key(
    req: TraceRequest, ctx: PrecCtx, floor_str: str | None, c_max: int | None
) -> str:
    doc = {
        "op": "trace",
        "delta": req.tw.delta,
        "r": req.tw.r,
        "d": req.d,
        "h": req.h,
        "sign_mode": req.sign_mode,
        "form": _form_json(req.f),
        "prec_bits": ctx.prec_bits,
        "rel_floor": "default" if floor_str is None else floor_str,
        "c_max": c_max,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return sha256(blob.encode("utf-8")).hexdigest()


def _cache_path(cache) -> str | None:
    if cache is not None:
        return str(cache)
    return os.environ.get("CMTRACES_CACHE") or None


def _cache_load(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        return {}
    return data if isinstance(data, dict) else {}


def _cache_store(path: str, key: str, payload: dict) -> None:
    data = _cache_load(path)
    data[key] = payload
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, separators=(",", ":"))
    os.replace(tmp, path)


_CLASS_MEMO: dict[tuple, ClassSet] = {}


def _classes(dmag: int, rho: int, nlevel: int, sign_mode: str) -> ClassSet:
    key = (dmag, rho % (2 * nlevel), nlevel, sign_mode)
    if key not in _CLASS_MEMO:
        _CLASS_MEMO[key] = enumerate_classes(dmag, rho, nlevel, sign_mode)
    return _CLASS_MEMO[key]


def _row_job(args):
    """Evaluate (del f)(alpha_Q) for one class; module level so it pickles.

    Takes and returns decimal strings, so the serial path and process-pool
    workers run through identical parse/evaluate/format steps and produce
    identical bits.
    """
    f, z_re, z_im, prec_bits, guard_bits, floor_str, c_max = args
    ctx = PrecCtx(prec_bits=prec_bits, guard_bits=guard_bits)
    z = HPComplex(
        re=real_from_str(z_re, prec_bits),
        im=real_from_str(z_im, prec_bits),
        prec_bits=prec_bits,
    )
    if f.kind == "closed":
        fn = j_minus_744 if f.name == "J" else gamma0_6_F
        val = fn(z, ctx)
        est = "0"
    else:
        floor = None if floor_str is None else real_from_str(floor_str, prec_bits)
        v, e = eval_dF(f.combo, z, ctx, rel_floor=floor, c_max=c_max)
        val = v
        est = real_to_str(e, prec_bits)
    out = val.as_strings()
    return out["re"], out["im"], est


def trace(
    req: TraceRequest,
    ctx: PrecCtx,
    rel_floor=None,
    c_max: int | None = None,
    parallelism: int = 1,
    cache=None,
) -> TraceReport:
    """Compute Tr_{Delta,r}(f; d, h) with a per-class report.

    Class points are independent, so parallelism > 1 maps the CM value
    evaluations over a process pool; the reduction stays sequential in
    enumeration order either way.  cache (or the CMTRACES_CACHE
    environment variable) names a JSON file reused across runs.
    """
    floor_str = _floor_str(rel_floor, ctx)
    key = request_key(req, ctx, floor_str, c_max)
    path = _cache_path(cache)
    if path is not None:
        hit = _cache_load(path).get(key)
        if hit is not None:
            return TraceReport.from_payload(hit, key, cache_hit=True)

    if not req.admissible():
        report = TraceReport(
            value=_hp_zero(ctx),
            rows=(),
            trunc_est="0",
            prec_bits=ctx.prec_bits,
            empty=True,
            cache_key=key,
        )
    else:
        cs = _classes(req.disc_mag, req.rho, req.f.nlevel, req.sign_mode)
        meta = []
        jobs = []
        for q, stab in cs.reps:
            chi = genus_char(q, req.tw, req.f.nlevel)
            cm = heegner_point(q, ctx)
            zs = cm.as_strings()
            meta.append((q, chi, stab, cm))
            jobs.append(
                (req.f, zs["re"], zs["im"], ctx.prec_bits, ctx.guard_bits, floor_str, c_max)
            )
        if parallelism > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                outs = list(pool.map(_row_job, jobs))
        else:
            outs = [_row_job(j) for j in jobs]
        rows = []
        with ctx.workprec():
            total = mpmath.mpc(0)
            est_total = mpmath.mpf(0)
            for (q, chi, stab, cm), (re_s, im_s, est_s) in zip(meta, outs):
                val = HPComplex(
                    re=real_from_str(re_s, ctx.prec_bits),
                    im=real_from_str(im_s, ctx.prec_bits),
                    prec_bits=ctx.prec_bits,
                )
                rows.append(ClassRow(q, chi, stab, cm, val, est_s))
                if chi:
                    total += mpmath.mpc(val.re, val.im) * chi / stab
                    est_total += real_from_str(est_s, ctx.prec_bits) / stab
            value = HPComplex.from_mpc(+total, ctx)
            est_str = real_to_str(round_to(est_total, ctx.prec_bits), ctx.prec_bits)
        report = TraceReport(
            value=value,
            rows=tuple(rows),
            trunc_est=est_str,
            prec_bits=ctx.prec_bits,
            empty=len(rows) == 0,
            cache_key=key,
        )

    if path is not None:
        _cache_store(path, key, report.to_payload())
    return report


def trace_combination(
    terms,
    ctx: PrecCtx,
    rel_floor=None,
    c_max: int | None = None,
    parallelism: int = 1,
    cache=None,
):
    """Sum coeff * trace(req) over a list of (coeff, TraceRequest) pairs.

    Returns (value, reports) with one report per term in order; an empty
    term list gives exactly zero.
    """
    reports = []
    with ctx.workprec():
        total = mpmath.mpc(0)
        for coeff, req in terms:
            rep = trace(
                req,
                ctx,
                rel_floor=rel_floor,
                c_max=c_max,
                parallelism=parallelism,
                cache=cache,
            )
            reports.append(rep)
            total += _coeff_to_mpc(coeff) * mpmath.mpc(rep.value.re, rep.value.im)
        value = HPComplex.from_mpc(+total, ctx)
    return value, tuple(reports)


def thm_coeff_prefactor(k: int, m, ctx: PrecCtx):
    """Factor linking the lift's coefficient at index m to the trace.

    The holomorphic coefficient of the lift at exponent m on component h
    equals this factor times Tr(f; 4N m, h).  Even k gives (-4 pi m)^{k/2};
    odd k gives (4 pi m)^{-(k+1)/2} prod_{j=0}^{(k-1)/2} (k/2 + j)(j - (k+1)/2).
    Returns a real mpf rounded to ctx.prec_bits.
    """
    if k < 0:
        raise ValueError("k must be a nonnegative integer")
    with ctx.workprec():
        mm = to_mpf(m)
        if k % 2 == 0:
            out = (-4 * mp.pi * mm) ** (k // 2)
        else:
            rat = Fraction(1)
            for j in range((k - 1) // 2 + 1):
                rat *= (Fraction(k, 2) + j) * (j - Fraction(k + 1, 2))
            out = (4 * mp.pi * mm) ** (-Fraction(k + 1, 2)) * to_mpf(rat)
        return round_to(out, ctx.prec_bits)


_PP_MEMO: dict[tuple, tuple] = {}


def _lift_pp(combo: PoincareCombo, tw: TwistParams, ctx: PrecCtx):
    key = (combo, tw, ctx.prec_bits)
    if key not in _PP_MEMO:
        _PP_MEMO[key] = tuple(lift_principal_part(combo, tw, ctx))
    return _PP_MEMO[key]


def lift_coefficient(
    f: FormSpec,
    tw: TwistParams,
    k: int,
    exponent,
    h: int,
    ctx: PrecCtx,
    rel_floor=None,
    c_max: int | None = None,
    parallelism: int = 1,
    cache=None,
) -> HPComplex:
    """Coefficient of the lift of f at a rational exponent on component h.

    Positive exponents e with 4N e a positive integer d come from traces:
    thm_coeff_prefactor(k, e) * Tr(f; d, h), and zero when (d, h) fails
    the class congruence (checked before any request is built) or when
    4N e is not an integer.  Negative exponents are looked up in the lift
    principal part of f.lift_combo, zero when absent.
    """
    if k != f.raising_order:
        raise ValueError("k does not match the raising order of f")
    e = Fraction(exponent)
    n2 = 2 * f.nlevel
    if e < 0:
        if f.lift_combo is None:
            raise ValueError("f carries no lift combination")
        for expo, hh, val in _lift_pp(f.lift_combo, tw, ctx):
            if expo == e and hh == h % n2:
                return val
        return _hp_zero(ctx)
    if e == 0:
        return _hp_zero(ctx)
    de = e * 4 * f.nlevel
    if de.denominator != 1:
        return _hp_zero(ctx)
    d = int(de)
    if ((tw.r * h) ** 2 + d * abs(tw.delta)) % (4 * f.nlevel):
        return _hp_zero(ctx)
    req = TraceRequest(tw=tw, d=d, h=h % n2, f=f, sign_mode="both")
    rep = trace(
        req,
        ctx,
        rel_floor=rel_floor,
        c_max=c_max,
        parallelism=parallelism,
        cache=cache,
    )
    pref = thm_coeff_prefactor(k, e, ctx)
    with ctx.workprec():
        out = pref * mpmath.mpc(rep.value.re, rep.value.im)
        return HPComplex.from_mpc(+out, ctx)


def duality_residual(
    f_coeffs,
    f: FormSpec,
    tw: TwistParams,
    k: int,
    ctx: PrecCtx,
    rel_floor=None,
    c_max: int | None = None,
    parallelism: int = 1,
    cache=None,
):
    """Pair known coefficients of a dual form against the lift of f.

    f_coeffs lists (exponent, h, exact value) for the finitely many
    coefficients of the dual form that meet the lift: each contributes
    value * lift_coefficient(-exponent, h).  The full sum vanishes
    identically, so the returned (residual, scale) pair measures how far
    the computed lift is from that identity, with scale the magnitude of
    the largest single pairing term (zero when every term is zero, which
    marks the pairing as degenerate).
    """
    with ctx.workprec():
        total = mpmath.mpc(0)
        scale = mpmath.mpf(0)
        for e, h, v in f_coeffs:
            a = lift_coefficient(
                f,
                tw,
                k,
                -Fraction(e),
                h,
                ctx,
                rel_floor=rel_floor,
                c_max=c_max,
                parallelism=parallelism,
                cache=cache,
            )
            term = _coeff_to_mpc(v) * mpmath.mpc(a.re, a.im)
            total += term
            scale = max(scale, abs(term))
        return HPComplex.from_mpc(+total, ctx), round_to(scale, ctx.prec_bits)


def principal_part_match(
    combo: PoincareCombo, tw: TwistParams, expected, ctx: PrecCtx
):
    """Worst slot deviation of the lift principal part from a known pattern.

    expected lists (exponent, h, exact coefficient) for a target principal
    part; the lift of combo should equal 2 C times it, with C the lift
    constant for (k, s, N, Delta).  Returns (worst, scale): the largest
    absolute slot difference over the union of populated slots, and the
    largest expected slot magnitude.
    """
    pp = _lift_pp(combo, tw, ctx)
    n2 = 2 * combo.nlevel
    with ctx.workprec():
        cc = lift_constants(combo.k, combo.s, combo.nlevel, tw, ctx)
        two_c = 2 * mpmath.mpc(cc.re, cc.im)
        want = {}
        for e, h, v in expected:
            want[(Fraction(e), h % n2)] = _coeff_to_mpc(v) * two_c
        got = {(e, h): mpmath.mpc(v.re, v.im) for e, h, v in pp}
        worst = mpmath.mpf(0)
        scale = mpmath.mpf(0)
        for slot in sorted(set(want) | set(got)):
            w = want.get(slot, mpmath.mpc(0))
            g = got.get(slot, mpmath.mpc(0))
            worst = max(worst, abs(g - w))
            scale = max(scale, abs(w))
        return round_to(worst, ctx.prec_bits), round_to(scale, ctx.prec_bits)
