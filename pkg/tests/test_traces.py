"""Tests for twisted traces of CM values and the coefficient duality."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import mpmath
import pytest

from cmtraces.cli import (
    ETA25_F_SPEC,
    GAMMA06_F_SPEC,
    J_SPEC,
    MOCK_H_WEIGHTS,
    MOCK_LIFT_COMBO,
)
from cmtraces.numkernel import HPComplex
from cmtraces.quadforms import TwistParams
from cmtraces.traces import (
    TraceReport,
    TraceRequest,
    duality_residual,
    lift_coefficient,
    principal_part_match,
    request_key,
    thm_coeff_prefactor,
    trace,
    trace_combination,
)

from conftest import ctx128


# frozen classical traces of J = j - 744 over discriminants -d, together
# with the class counts where they matter for the enumeration
ZAGIER_TRACES = {
    3: -248,
    4: 492,
    7: -4119,
    8: 7256,
    11: -33512,
    12: 53008,
    15: -192513,
}
ZAGIER_CLASSES = {3: 1, 4: 1, 7: 1, 8: 1, 11: 1, 12: 2, 15: 2}


def _untwisted_req(d: int, sign_mode: str = "positive_only") -> TraceRequest:
    return TraceRequest(
        tw=TwistParams(1, 1), d=d, h=d % 2, f=J_SPEC, sign_mode=sign_mode
    )


def _mock_req(d: int, h: int) -> TraceRequest:
    return TraceRequest(
        tw=TwistParams(-23, 1), d=d, h=h, f=GAMMA06_F_SPEC, sign_mode="both"
    )


def test_zagier_traces_match_integer_table():
    ctx = ctx128()
    for d, expected in ZAGIER_TRACES.items():
        rep = trace(_untwisted_req(d), ctx)
        assert len(rep.rows) == ZAGIER_CLASSES[d]
        assert not rep.empty
        with ctx.workprec():
            err = abs(rep.value.to_mpc() - expected)
            assert err < mpmath.ldexp(1, -64), (d, expected, err)


def test_zagier_d3_both_modes_doubles():
    # for the untwisted trace the negative definite classes contribute the
    # same values, so "both" doubles the positive-only sum
    ctx = ctx128()
    rep = trace(_untwisted_req(3, sign_mode="both"), ctx)
    assert len(rep.rows) == 2
    with ctx.workprec():
        assert abs(rep.value.to_mpc() - (-496)) < mpmath.ldexp(1, -64)


def test_trace_rows_recombine_to_value():
    ctx = ctx128()
    rep = trace(_mock_req(1, 1), ctx)
    assert len(rep.rows) == 6
    with ctx.workprec():
        total = mpmath.mpc(0)
        for row in rep.rows:
            assert row.chi in (-1, 0, 1)
            assert row.stab in (1, 2, 3)
            total += mpmath.mpc(row.chi) * row.val.to_mpc() / row.stab
        assert abs(total - rep.value.to_mpc()) < mpmath.ldexp(1, -100)


def test_twisted_trace_purely_imaginary_and_frozen():
    # Tr_{-23,1}(F; 1, 1) is purely imaginary and equals -2i sqrt(23) to
    # the digits frozen here
    ctx = ctx128()
    rep = trace(_mock_req(1, 1), ctx)
    with ctx.workprec():
        val = rep.value.to_mpc()
        assert abs(val.real) < mpmath.mpf("1e-25")
        assert abs(val.imag + 2 * mpmath.sqrt(23)) < mpmath.mpf("1e-9")


def test_h_negation_flips_sign():
    ctx = ctx128()
    plus = trace(_mock_req(1, 1), ctx)
    minus = trace(_mock_req(1, -1), ctx)
    assert minus.rows
    with ctx.workprec():
        assert abs(plus.value.to_mpc() + minus.value.to_mpc()) < mpmath.ldexp(1, -100)


def test_inadmissible_pair_is_flagged_zero():
    # (rh)^2 + d|Delta| = 1 + 46 is not 0 mod 24, so the class set is empty
    req = _mock_req(2, 1)
    assert not req.admissible()
    ctx = ctx128()
    rep = trace(req, ctx)
    assert rep.empty
    assert rep.rows == ()
    assert rep.trunc_est == "0"
    with ctx.workprec():
        assert rep.value.to_mpc() == 0


def test_untwisted_integrality_shadow():
    # Tr_{1,1}(F; d, 1) over Gamma_0(6) is an integer; at these d the
    # integer is 0 and the computed value sits within 2^-prec/2 of it
    ctx = ctx128()
    for d, nrows in ((23, 6), (47, 10)):
        req = TraceRequest(
            tw=TwistParams(1, 1), d=d, h=1, f=GAMMA06_F_SPEC, sign_mode="both"
        )
        rep = trace(req, ctx)
        assert len(rep.rows) == nrows
        with ctx.workprec():
            val = rep.value.to_mpc()
            assert abs(val - mpmath.nint(val.real)) < mpmath.ldexp(1, -64)
            assert int(mpmath.nint(val.real)) == 0


def test_trace_cache_cold_and_hit(tmp_path):
    path = tmp_path / "cache.json"
    ctx = ctx128()
    req = _untwisted_req(7)
    cold = trace(req, ctx, cache=str(path))
    assert not cold.cache_hit
    assert path.exists()
    hit = trace(req, ctx, cache=str(path))
    assert hit.cache_hit
    assert hit.cache_key == cold.cache_key
    assert hit.to_json() == cold.to_json()
    data = json.loads(path.read_text())
    assert cold.cache_key in data


def test_trace_cache_env_var(tmp_path, monkeypatch):
    path = tmp_path / "envcache.json"
    monkeypatch.setenv("CMTRACES_CACHE", str(path))
    ctx = ctx128()
    req = _untwisted_req(4)
    cold = trace(req, ctx)
    hit = trace(req, ctx)
    assert not cold.cache_hit
    assert hit.cache_hit
    assert hit.to_json() == cold.to_json()


def test_parallel_matches_serial_bit_for_bit():
    ctx = ctx128()
    req = _mock_req(1, 5)
    serial = trace(req, ctx, parallelism=1)
    parallel = trace(req, ctx, parallelism=4)
    assert serial.to_json() == parallel.to_json()


def test_trace_combination_linearity():
    ctx = ctx128()
    req = _mock_req(1, 7)
    single = trace(req, ctx)
    value, reports = trace_combination(
        [(Fraction(3, 2), req), (Fraction(-1, 2), req)], ctx
    )
    assert len(reports) == 2
    with ctx.workprec():
        assert abs(value.to_mpc() - single.value.to_mpc()) < mpmath.ldexp(1, -100)


def test_trace_combination_empty_is_zero():
    ctx = ctx128()
    value, reports = trace_combination([], ctx)
    assert reports == ()
    with ctx.workprec():
        assert value.to_mpc() == 0


def test_trace_combination_coeff_types_agree():
    ctx = ctx128()
    req = _mock_req(1, 11)
    vals = []
    for coeff in (1, Fraction(1), "1", HPComplex.from_mpc(mpmath.mpc(1), ctx)):
        v, _ = trace_combination([(coeff, req)], ctx)
        vals.append(v.as_strings())
    assert all(v == vals[0] for v in vals)


def test_thm_coeff_prefactor_values():
    ctx = ctx128()
    with ctx.workprec():
        assert thm_coeff_prefactor(0, Fraction(23, 24), ctx) == 1
        got = thm_coeff_prefactor(2, 3, ctx)
        assert abs(got - (-12 * mpmath.pi)) < mpmath.ldexp(1, -100)
        # independent form of the odd case: (4 pi m)^(-(k+1)/2) times the
        # rational product prod_j (k/2 + j)(j - (k+1)/2)
        m = Fraction(23, 24)
        k = 13
        rat = Fraction(1)
        for j in range((k - 1) // 2 + 1):
            rat *= (Fraction(k, 2) + j) * (j - Fraction(k + 1, 2))
        direct = (4 * mpmath.pi * mpmath.mpf(23) / 24) ** mpmath.mpf(-7)
        direct *= mpmath.mpf(rat.numerator) / rat.denominator
        got13 = thm_coeff_prefactor(13, m, ctx)
        assert abs(got13 - direct) < mpmath.ldexp(1, -90) * abs(direct)
    with pytest.raises(ValueError):
        thm_coeff_prefactor(-1, 1, ctx)


def test_request_key_sensitivity():
    ctx = ctx128()
    base = _mock_req(1, 1)
    key = request_key(base, ctx, None, None)
    assert key == request_key(_mock_req(1, 1), ctx, None, None)
    others = [
        request_key(_mock_req(25, 1), ctx, None, None),
        request_key(_mock_req(1, 5), ctx, None, None),
        request_key(base, ctx128().__class__(prec_bits=192, guard_bits=64), None, None),
        request_key(base, ctx, "1e-14", None),
        request_key(base, ctx, None, 40),
        request_key(
            TraceRequest(
                tw=TwistParams(-23, 1),
                d=1,
                h=1,
                f=GAMMA06_F_SPEC,
                sign_mode="positive_only",
            ),
            ctx,
            None,
            None,
        ),
        request_key(
            TraceRequest(tw=TwistParams(1, 1), d=3, h=1, f=J_SPEC), ctx, None, None
        ),
    ]
    assert len(set(others + [key])) == len(others) + 1


def test_lift_coefficient_positive_exponent():
    # at exponent 1/24 the lift coefficient is prefactor(0) = 1 times
    # Tr(F; 1, 1), which matches the direct trace
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    a = lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(1, 24), 1, ctx)
    rep = trace(_mock_req(1, 1), ctx)
    with ctx.workprec():
        assert abs(a.to_mpc() - rep.value.to_mpc()) < mpmath.ldexp(1, -100)
        assert abs(a.to_mpc() + 2j * mpmath.sqrt(23)) < mpmath.mpf("1e-9")


def test_lift_coefficient_principal_part():
    # negative exponents read the lift principal part: 2i sqrt(23) at
    # -23/24 with signs +, -, +, - on components 1, 5, 7, 11
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    with ctx.workprec():
        want = 2j * mpmath.sqrt(23)
        for h, w in MOCK_H_WEIGHTS:
            a = lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(-23, 24), h, ctx)
            assert abs(a.to_mpc() - w * want) < mpmath.ldexp(1, -90) * abs(want)
        missing = lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(-1, 24), 1, ctx)
        assert missing.to_mpc() == 0


def test_lift_coefficient_zero_paths():
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    with ctx.workprec():
        # exponent zero
        assert lift_coefficient(GAMMA06_F_SPEC, tw, 0, 0, 1, ctx).to_mpc() == 0
        # 4N e not an integer
        assert (
            lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(1, 7), 1, ctx).to_mpc()
            == 0
        )
        # congruence failure: d = 2 with h = 1
        assert (
            lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(2, 24), 1, ctx).to_mpc()
            == 0
        )
        # congruence failure at d = 23: 1 + 529 is not 0 mod 24
        assert (
            lift_coefficient(GAMMA06_F_SPEC, tw, 0, Fraction(23, 24), 1, ctx).to_mpc()
            == 0
        )
    with pytest.raises(ValueError):
        lift_coefficient(GAMMA06_F_SPEC, tw, 1, Fraction(23, 24), 1, ctx)
    with pytest.raises(ValueError):
        lift_coefficient(J_SPEC, TwistParams(1, 1), 0, Fraction(-1, 4), 1, ctx)


def test_duality_residual_mock_theta():
    # the principal part of the mock theta vector pairs against the lift
    # of F to zero; scale is the largest single pairing term
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    coeffs = [(Fraction(-1, 24), h, w) for h, w in MOCK_H_WEIGHTS]
    coeffs += [(Fraction(23, 24), h, w) for h, w in MOCK_H_WEIGHTS]
    res, scale = duality_residual(coeffs, GAMMA06_F_SPEC, tw, 0, ctx)
    with ctx.workprec():
        assert scale > 9
        assert res.abs() < mpmath.mpf("1e-25") * scale


def test_duality_residual_degenerate_scale():
    # when every pairing term vanishes the scale comes back zero
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    res, scale = duality_residual(
        [(Fraction(-2, 24), 1, 1)], GAMMA06_F_SPEC, tw, 0, ctx
    )
    with ctx.workprec():
        assert scale == 0
        assert res.to_mpc() == 0


def test_principal_part_match_mock():
    # the lift principal part of the s=1 combination is 2C times the unit
    # pattern on components 1, 5, 7, 11 with C = i sqrt(23)
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    expected = [(Fraction(-23, 24), h, w) for h, w in MOCK_H_WEIGHTS]
    worst, scale = principal_part_match(MOCK_LIFT_COMBO, tw, expected, ctx)
    with ctx.workprec():
        assert abs(scale - 2 * mpmath.sqrt(23)) < mpmath.mpf("1e-20")
        assert worst < mpmath.ldexp(1, -90) * scale


def test_principal_part_match_detects_wrong_pattern():
    ctx = ctx128()
    tw = TwistParams(-23, 1)
    wrong = [(Fraction(-23, 24), h, -w) for h, w in MOCK_H_WEIGHTS]
    worst, scale = principal_part_match(MOCK_LIFT_COMBO, tw, wrong, ctx)
    with ctx.workprec():
        assert worst > scale


def test_trace_report_payload_roundtrip():
    ctx = ctx128()
    rep = trace(_untwisted_req(12), ctx)
    payload = rep.to_payload()
    back = TraceReport.from_payload(payload, rep.cache_key, cache_hit=True)
    assert back.cache_hit
    assert back.cache_key == rep.cache_key
    assert back.to_json() == rep.to_json()
    assert back.value.as_strings() == rep.value.as_strings()
    assert [r.form for r in back.rows] == [r.form for r in rep.rows]


def test_trace_request_validation():
    with pytest.raises(ValueError):
        TraceRequest(tw=TwistParams(1, 1), d=0, h=1, f=J_SPEC)
    with pytest.raises(ValueError):
        TraceRequest(tw=TwistParams(1, 1), d=-3, h=1, f=J_SPEC)
    with pytest.raises(ValueError):
        TraceRequest(tw=TwistParams(1, 1), d=3, h=1, f=J_SPEC, sign_mode="negative")
    # r = 2 is not a square root of -23 mod 24, so the request refuses the
    # twist at level 6
    with pytest.raises(ValueError):
        TraceRequest(tw=TwistParams(-23, 2), d=1, h=1, f=GAMMA06_F_SPEC)


def test_trace_request_derived_quantities():
    req = _mock_req(1, 11)
    assert req.disc_mag == 23
    assert req.rho == 11
    assert req.admissible()
    assert math.gcd(req.rho, 12) == 1


def test_eta25_spec_carries_lift():
    # poincare specs default the lift combination to the evaluation combo
    assert ETA25_F_SPEC.lift_combo is ETA25_F_SPEC.combo
    assert ETA25_F_SPEC.raising_order == 13
    assert GAMMA06_F_SPEC.raising_order == 0
