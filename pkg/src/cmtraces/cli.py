"""Verification commands: exact q-series coefficients vs trace computations.

    verify mock-theta --delta -23   coefficient of the order-3 mock theta
                                    function against a four-term twisted
                                    trace combination of the Gamma_0(6)
                                    weight-0 form F
    verify eta25 --n 1              coefficient of eta^-25 against traces
                                    of the raised s=14 Poincare series
    verify zagier --d 3             classical untwisted trace of J = j-744
    verify duality --instance ...   principal-part pairing residual
    verify all                      the full battery

Each check compares an exact integer left-hand side (or exact zero, for
duality residuals) against a computed right-hand side and reports decimal
strings, absolute and relative residuals, and a pass flag.  rhs strings
show the real part; residuals are taken in the full complex value.  A
check passes when the relative residual is at most the tolerance, where
"relative" means against |lhs| when lhs is nonzero, against the largest
pairing term for duality checks, and the absolute residual when lhs is
zero.  At a fixed configuration the rendered report is byte-identical
across runs and parallelism degrees, except for the wall_ms field.

Exit codes: 0 all requested checks pass, 1 any check fails, 2 on a
configuration error (bad flag values, inadmissible discriminants).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .numkernel import HPComplex, PrecCtx, real_from_str, real_to_str, round_to, to_mpf
from .poincare import FormSpec, PoincareCombo, lift_constants
from .qseries import eta_power_coeffs, mock_theta_coeffs
from .quadforms import TwistParams
from .traces import (
    TraceRequest,
    duality_residual,
    principal_part_match,
    thm_coeff_prefactor,
    trace,
    trace_combination,
)

__all__ = [
    "RunConfig",
    "CheckReport",
    "ConfigError",
    "InvalidDiscriminant",
    "cmd_mock_theta",
    "cmd_eta25",
    "cmd_zagier",
    "cmd_duality",
    "cmd_integrality",
    "cmd_all",
    "render",
    "main",
]


class ConfigError(ValueError):
    """Bad run configuration; maps to exit code 2."""


class InvalidDiscriminant(ConfigError):
    """Discriminant outside the admissible family for the check."""


@dataclass(frozen=True)
class RunConfig:
    prec_bits: int = 128
    tolerance: str = "1e-10"
    c_max: int | None = None
    cache_path: str | None = None
    fmt: str = "json"
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.prec_bits < 64:
            raise ConfigError("prec_bits must be at least 64")
        try:
            tol = float(self.tolerance)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance {self.tolerance!r}") from exc
        if not tol > 0:
            raise ConfigError("tolerance must be positive")
        if self.fmt not in ("json", "csv", "text"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.c_max is not None and self.c_max < 0:
            raise ConfigError("c_max override must be nonnegative")

    def ctx(self) -> PrecCtx:
        return PrecCtx(prec_bits=self.prec_bits, guard_bits=64)


@dataclass(frozen=True)
class CheckReport:
    check: str
    inputs: dict
    lhs: str
    rhs: str
    abs_residual: str
    rel_residual: str
    passed: bool
    prec_bits: int
    c_max: int | None
    wall_ms: int

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "inputs": self.inputs,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "pass": self.passed,
            "prec_bits": self.prec_bits,
            "c_max": self.c_max,
            "wall_ms": self.wall_ms,
        }


# canned instances: the two s=14, k=13 combinations for eta^-25 (the second
# carries the factor 25 + 5^13), the s=1 preimage combination whose lift
# matches the mock theta vector H, and the closed weight-0 forms
ETA25_TILDE_FACTOR = 25 + 5**13

ETA25_F_COMBO = PoincareCombo(
    s=14,
    k=13,
    nlevel=6,
    terms=((-1, 5, 1), (1, 5, 2), (1, 5, 3), (-1, 5, 6)),
)
ETA25_FT_COMBO = PoincareCombo(
    s=14,
    k=13,
    nlevel=6,
    terms=(
        (ETA25_TILDE_FACTOR, 1, 1),
        (-ETA25_TILDE_FACTOR, 1, 2),
        (-ETA25_TILDE_FACTOR, 1, 3),
        (ETA25_TILDE_FACTOR, 1, 6),
    ),
)
ETA25_F_SPEC = FormSpec(kind="poincare", nlevel=6, weight=-26, combo=ETA25_F_COMBO)
ETA25_FT_SPEC = FormSpec(kind="poincare", nlevel=6, weight=-26, combo=ETA25_FT_COMBO)

MOCK_LIFT_COMBO = PoincareCombo(
    s=1,
    k=0,
    nlevel=6,
    terms=((1, 1, 1), (1, 1, 2), (-1, 1, 3), (-1, 1, 6)),
)
GAMMA06_F_SPEC = FormSpec(
    kind="closed", nlevel=6, weight=0, name="gamma0_6_F", lift_combo=MOCK_LIFT_COMBO
)
J_SPEC = FormSpec(kind="closed", nlevel=1, weight=0, name="J")

# h components and signs in the four-term trace combination and in the
# principal part of the mock theta vector H
MOCK_H_WEIGHTS = ((1, 1), (5, -1), (7, 1), (11, -1))
# h components and signs of e_1 - e_5 - e_7 + e_11
ETA25_H_WEIGHTS = ((1, 1), (5, -1), (7, -1), (11, 1))


def _wall(t0: float) -> int:
    return int(round((time.time() - t0) * 1000))


def _floor_for(cfg: RunConfig) -> str:
    """Truncation floor from the tolerance, four orders below it."""
    with cfg.ctx().workprec():
        val = to_mpf(cfg.tolerance) * mpmath.mpf("1e-4")
        return real_to_str(round_to(val, cfg.prec_bits), cfg.prec_bits)


def _finish(
    check: str,
    inputs: dict,
    lhs: int,
    rhs,
    cfg: RunConfig,
    ctx: PrecCtx,
    t0: float,
    rel_scale=None,
) -> CheckReport:
    """Assemble a report comparing an exact integer lhs with a computed rhs.

    rel_scale overrides the denominator of the relative residual (used by
    duality checks, which normalize by the largest pairing term); when the
    effective denominator is zero the absolute residual is used as the
    relative one.
    """
    tol = to_mpf(cfg.tolerance)
    with ctx.workprec():
        rr = rhs.to_mpc() if isinstance(rhs, HPComplex) else mpmath.mpc(rhs)
        absres = abs(rr - lhs)
        denom = abs(to_mpf(rel_scale)) if rel_scale is not None else mpmath.mpf(abs(lhs))
        relres = absres / denom if denom > 0 else absres
        passed = bool(relres <= tol)
        return CheckReport(
            check=check,
            inputs=inputs,
            lhs=str(lhs),
            rhs=real_to_str(round_to(rr.real, cfg.prec_bits), cfg.prec_bits),
            abs_residual=real_to_str(round_to(absres, cfg.prec_bits), cfg.prec_bits),
            rel_residual=real_to_str(round_to(relres, cfg.prec_bits), cfg.prec_bits),
            passed=passed,
            prec_bits=cfg.prec_bits,
            c_max=cfg.c_max,
            wall_ms=_wall(t0),
        )


def cmd_mock_theta(delta: int, cfg: RunConfig) -> CheckReport:
    """Coefficient (|delta|+1)/24 of the mock theta series vs four traces.

    The identity reads a_f((|delta|+1)/24) = -(1/(8 i sqrt|delta|)) times
    Tr(F;1,1) - Tr(F;1,5) + Tr(F;1,7) - Tr(F;1,11) for the weight-0 form F
    on Gamma_0(6), twisted by (delta, 1).
    """
    t0 = time.time()
    if delta >= 0 or (delta - 1) % 24:
        raise InvalidDiscriminant(f"delta must be negative and 1 mod 24, got {delta}")
    try:
        tw = TwistParams(delta, 1)
    except ValueError as exc:
        raise InvalidDiscriminant(str(exc)) from exc
    idx = (abs(delta) + 1) // 24
    lhs = mock_theta_coeffs(idx).coeff(idx)
    ctx = cfg.ctx()
    terms = [
        (w, TraceRequest(tw=tw, d=1, h=h, f=GAMMA06_F_SPEC, sign_mode="both"))
        for h, w in MOCK_H_WEIGHTS
    ]
    combo, _reports = trace_combination(
        terms, ctx, c_max=cfg.c_max, parallelism=cfg.parallelism, cache=cfg.cache_path
    )
    with ctx.workprec():
        rhs = HPComplex.from_mpc(
            -combo.to_mpc() / (8j * mpmath.sqrt(abs(delta))), ctx
        )
    inputs = {
        "delta": delta,
        "series_index": idx,
        "trace_d": 1,
        "h_weights": [list(p) for p in MOCK_H_WEIGHTS],
        "level": 6,
        "form": "gamma0_6_F",
    }
    return _finish("mock-theta", inputs, lhs, rhs, cfg, ctx, t0)


def cmd_eta25(n: int, cfg: RunConfig) -> CheckReport:
    """Coefficient n+1 of eta^-25 vs traces of the two raised Poincare sums.

    With d = 24n - 1 the identity reads

        c(n+1) = prefactor(d/24) (t_F + t_Ftilde) / (2 C)

    where t_* = Tr_{1,1}(*; d, 1) over Gamma_0(6), prefactor is the
    theorem-level coefficient factor at k=13, and C the lift constant.  The
    inputs carry a scaled ratio diagnostic lhs/(t_F + t_Ftilde) * d^7: the
    identity predicts it is the same constant for every n, and the report
    compares it against the two closed-form candidates 2^-27 pi^-13 and
    185725/4429185024 pi^-13 (these differ by -185725/33; the measured
    value picks out which one is typographically sound).
    """
    t0 = time.time()
    if n < 1:
        raise ConfigError("n must be a positive integer")
    d = 24 * n - 1
    lhs = eta_power_coeffs(-25, n + 1).coeff(n + 1)
    ctx = cfg.ctx()
    tw = TwistParams(1, 1)
    floor = _floor_for(cfg)
    kwargs = dict(
        rel_floor=floor, c_max=cfg.c_max, parallelism=cfg.parallelism, cache=cfg.cache_path
    )
    rep_f = trace(TraceRequest(tw=tw, d=d, h=1, f=ETA25_F_SPEC), ctx, **kwargs)
    rep_ft = trace(TraceRequest(tw=tw, d=d, h=1, f=ETA25_FT_SPEC), ctx, **kwargs)
    with ctx.workprec():
        tsum = rep_f.value.to_mpc() + rep_ft.value.to_mpc()
        cc = lift_constants(13, 14, 6, tw, ctx).to_mpc()
        pref = thm_coeff_prefactor(13, Fraction(d, 24), ctx)
        rhs = HPComplex.from_mpc(pref * tsum / (2 * cc), ctx)
        ratio = (lhs / tsum * mpmath.mpf(d) ** 7).real
        cand_pow2 = mpmath.ldexp(1, -27) * mpmath.pi**-13
        cand_printed = mpmath.mpf(185725) / 4429185024 * mpmath.pi**-13
        bits = cfg.prec_bits
        inputs = {
            "n": n,
            "trace_d": d,
            "h": 1,
            "level": 6,
            "rel_floor": floor,
            "ratio_scaled": real_to_str(round_to(ratio, bits), bits),
            "ratio_candidate_2^-27_pi^-13": real_to_str(round_to(cand_pow2, bits), bits),
            "ratio_candidate_185725/4429185024_pi^-13": real_to_str(
                round_to(cand_printed, bits), bits
            ),
            "ratio_over_candidate_2^-27": real_to_str(
                round_to(ratio / cand_pow2, bits), bits
            ),
            "ratio_over_candidate_185725": real_to_str(
                round_to(ratio / cand_printed, bits), bits
            ),
            "trace_est_F": rep_f.trunc_est,
            "trace_est_Ftilde": rep_ft.trunc_est,
        }
    return _finish("eta25", inputs, lhs, rhs, cfg, ctx, t0)


def cmd_zagier(d: int, cfg: RunConfig) -> CheckReport:
    """Untwisted trace of J = j - 744 on Gamma_0(1); reports the integer.

    The trace runs over positive definite classes of discriminant -d with
    h = d mod 2 and is a rational integer; the report compares the
    computed value against the nearest integer.  Near-integrality is the
    testable shadow of the exact algebraicity statements, and is labeled
    as such in the inputs.
    """
    t0 = time.time()
    if d <= 0 or d % 4 not in (0, 3):
        raise ConfigError(f"-d must be a discriminant, got d={d}")
    ctx = cfg.ctx()
    req = TraceRequest(
        tw=TwistParams(1, 1), d=d, h=d % 2, f=J_SPEC, sign_mode="positive_only"
    )
    rep = trace(
        req, ctx, c_max=cfg.c_max, parallelism=cfg.parallelism, cache=cfg.cache_path
    )
    with ctx.workprec():
        lhs = int(mpmath.nint(rep.value.to_mpc().real))
    inputs = {
        "d": d,
        "h": d % 2,
        "level": 1,
        "form": "J",
        "classes": len(rep.rows),
        "shadow": "near-integrality stands in for the exact algebraicity claim",
    }
    return _finish("zagier", inputs, lhs, rep.value, cfg, ctx, t0)


def cmd_integrality(d: int, cfg: RunConfig) -> CheckReport:
    """Untwisted Gamma_0(6) trace of F at (d, 1): near-integrality check.

    These near-integrality checks are the testable shadow of the exact
    algebraicity and nonvanishing statements, which are not decidable
    numerically; the inputs label them accordingly.
    """
    t0 = time.time()
    ctx = cfg.ctx()
    req = TraceRequest(
        tw=TwistParams(1, 1), d=d, h=1, f=GAMMA06_F_SPEC, sign_mode="both"
    )
    rep = trace(
        req, ctx, c_max=cfg.c_max, parallelism=cfg.parallelism, cache=cfg.cache_path
    )
    with ctx.workprec():
        lhs = int(mpmath.nint(rep.value.to_mpc().real))
    inputs = {
        "d": d,
        "h": 1,
        "delta": 1,
        "level": 6,
        "form": "gamma0_6_F",
        "classes": len(rep.rows),
        "shadow": "near-integrality stands in for the exact algebraicity claim",
    }
    return _finish("integrality", inputs, lhs, rep.value, cfg, ctx, t0)


def cmd_duality(instance: str, cfg: RunConfig) -> CheckReport:
    """Principal-part pairing residual for a canned instance.

    mock_theta: the coefficients of the vector H (principal part at
    exponent -1/24, holomorphic entries a_f(1) at 23/24, signs following
    the component pattern) pair against the lift of the closed form F;
    the pairing must vanish, and the residual is reported relative to the
    largest single term.

    eta25: the trace side of the honest pairing is degenerate (every term
    vanishes on inadmissible class sets), which the report records; the
    substantive check matches the computed lift principal part of the
    combined F + Ftilde combination against 2 C times the target pattern
    (q^-25/24 + 25 q^-1/24 on e_1 - e_5 - e_7 + e_11), reporting the worst
    slot deviation relative to the largest expected slot.
    """
    t0 = time.time()
    ctx = cfg.ctx()
    if instance == "mock_theta":
        tw = TwistParams(-23, 1)
        af1 = mock_theta_coeffs(1).coeff(1)
        coeffs = [(Fraction(-1, 24), h, w) for h, w in MOCK_H_WEIGHTS]
        coeffs += [(Fraction(23, 24), h, w * af1) for h, w in MOCK_H_WEIGHTS]
        res, scale = duality_residual(
            coeffs,
            GAMMA06_F_SPEC,
            tw,
            0,
            ctx,
            c_max=cfg.c_max,
            parallelism=cfg.parallelism,
            cache=cfg.cache_path,
        )
        inputs = {
            "instance": instance,
            "delta": -23,
            "pairing_terms": len(coeffs),
            "scale": real_to_str(scale, cfg.prec_bits),
        }
        rhs = res
        rel_scale = scale
    elif instance == "eta25":
        tw = TwistParams(1, 1)
        combined = PoincareCombo(
            s=14, k=13, nlevel=6, terms=ETA25_F_COMBO.terms + ETA25_FT_COMBO.terms
        )
        pattern = []
        for h, w in ETA25_H_WEIGHTS:
            pattern.append((Fraction(-25, 24), h, w))
            pattern.append((Fraction(-1, 24), h, 25 * w))
        worst, scale = principal_part_match(combined, tw, pattern, ctx)
        # the honest pairing is degenerate here: the lift principal part
        # meets no admissible trace and no populated holomorphic slot
        gcoeffs = [
            (Fraction(-25, 24), 1, 1),
            (Fraction(-1, 24), 1, 25),
            (Fraction(23, 24), 1, eta_power_coeffs(-25, 2).coeff(2)),
        ]
        res0, scale0 = duality_residual(
            gcoeffs, ETA25_F_SPEC, tw, 13, ctx, rel_floor=_floor_for(cfg)
        )
        inputs = {
            "instance": instance,
            "pattern_slots": len(pattern),
            "scale": real_to_str(scale, cfg.prec_bits),
            "trace_side": "degenerate: every pairing term vanishes",
            "trace_side_residual": real_to_str(res0.abs(), cfg.prec_bits),
            "trace_side_scale": real_to_str(scale0, cfg.prec_bits),
        }
        with ctx.workprec():
            rhs = HPComplex.from_mpc(mpmath.mpc(worst), ctx)
        rel_scale = scale
    else:
        raise ConfigError(f"unknown duality instance {instance!r}")
    return _finish("duality", inputs, 0, rhs, cfg, ctx, t0, rel_scale=rel_scale)


# per-command defaults: (tolerance, prec_bits)
_DEFAULTS = {
    "mock-theta": ("1e-10", 128),
    "eta25": ("1e-6", 256),
    "zagier": ("1e-10", 128),
    "duality": ("1e-8", 128),
    "integrality": ("1e-10", 128),
}


def _config_for(check: str, args) -> RunConfig:
    tol_default, prec_default = _DEFAULTS[check]
    return RunConfig(
        prec_bits=args.prec if args.prec is not None else prec_default,
        tolerance=args.tolerance if args.tolerance is not None else tol_default,
        c_max=args.c_max,
        cache_path=args.cache,
        fmt=args.format,
        parallelism=args.parallelism,
    )


def cmd_all(args) -> list[CheckReport]:
    """The acceptance battery: every canned check at its own defaults."""
    reports = []
    for delta in (-23, -47, -71, -95):
        reports.append(cmd_mock_theta(delta, _config_for("mock-theta", args)))
    for n in (1, 2):
        reports.append(cmd_eta25(n, _config_for("eta25", args)))
    for d in (3, 4, 7, 8, 11, 12, 15):
        reports.append(cmd_zagier(d, _config_for("zagier", args)))
    for instance in ("mock_theta", "eta25"):
        reports.append(cmd_duality(instance, _config_for("duality", args)))
    for d in (23, 47):
        reports.append(cmd_integrality(d, _config_for("integrality", args)))
    return reports


def _short(decimal: str, digits: int) -> str:
    """Requote a report decimal string to a few digits, exponent intact."""
    return mpmath.nstr(real_from_str(decimal, 64), digits)


def render(reports: list[CheckReport], fmt: str) -> str:
    if fmt == "json":
        doc = {
            "all_pass": all(r.passed for r in reports),
            "reports": [r.to_dict() for r in reports],
        }
        return json.dumps(doc, sort_keys=True, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        fields = [
            "check",
            "inputs",
            "lhs",
            "rhs",
            "abs_residual",
            "rel_residual",
            "pass",
            "prec_bits",
            "c_max",
            "wall_ms",
        ]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            row = r.to_dict()
            row["inputs"] = json.dumps(row["inputs"], sort_keys=True, separators=(",", ":"))
            writer.writerow(row)
        return buf.getvalue()
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        pieces = [
            f"{status} {r.check}",
            json.dumps(r.inputs, sort_keys=True, separators=(",", ":")),
            f"lhs={r.lhs}",
            f"rhs={_short(r.rhs, 20)}",
            f"rel={_short(r.rel_residual, 6)}",
            f"({r.prec_bits} bits, {r.wall_ms} ms)",
        ]
        lines.append("  ".join(pieces))
    lines.append(
        "all checks passed" if all(r.passed for r in reports) else "SOME CHECKS FAILED"
    )
    return "\n".join(lines) + "\n"


def _add_common(sp) -> None:
    sp.add_argument("--prec", type=int, default=None, help="working precision in bits")
    sp.add_argument("--tolerance", default=None, help="relative tolerance")
    sp.add_argument("--cache", default=None, help="JSON trace cache path")
    sp.add_argument(
        "--format", choices=("json", "csv", "text"), default="json", help="output format"
    )
    sp.add_argument(
        "--c-max", type=int, default=None, dest="c_max", help="coset sum radius override"
    )
    sp.add_argument("--parallelism", type=int, default=1, help="process pool size")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="verify",
        description="numerical verification of trace identities for modular forms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mock = sub.add_parser("mock-theta", help="mock theta coefficient identity")
    p_mock.add_argument("--delta", type=int, required=True)
    _add_common(p_mock)

    p_eta = sub.add_parser("eta25", help="eta^-25 coefficient identity")
    p_eta.add_argument("--n", type=int, required=True)
    _add_common(p_eta)

    p_zag = sub.add_parser("zagier", help="classical singular moduli trace")
    p_zag.add_argument("--d", type=int, required=True)
    _add_common(p_zag)

    p_dual = sub.add_parser("duality", help="principal-part pairing residual")
    p_dual.add_argument("--instance", choices=("mock_theta", "eta25"), required=True)
    _add_common(p_dual)

    p_all = sub.add_parser("all", help="run the full battery")
    _add_common(p_all)

    args = parser.parse_args(argv)
    try:
        if args.command == "mock-theta":
            reports = [cmd_mock_theta(args.delta, _config_for("mock-theta", args))]
        elif args.command == "eta25":
            reports = [cmd_eta25(args.n, _config_for("eta25", args))]
        elif args.command == "zagier":
            reports = [cmd_zagier(args.d, _config_for("zagier", args))]
        elif args.command == "duality":
            reports = [cmd_duality(args.instance, _config_for("duality", args))]
        else:
            reports = cmd_all(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    print(render(reports, args.format), end="")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
