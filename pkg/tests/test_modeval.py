"""Closed-form evaluators: eta, E4, j, the level 6 function F, AL involutions."""

from __future__ import annotations

import mpmath
import pytest
from mpmath import mp

from cmtraces.modeval import (
    atkin_lehner_matrix,
    eisenstein_e4,
    eta,
    gamma0_6_F,
    gamma0_optimize,
    j_invariant,
    j_minus_744,
    mobius,
    reduce_fundamental,
)
from cmtraces.qseries import gamma0_6_F_coeffs
from conftest import ctx128, ctx192, rng

# dyadic test points so every literal is exact at any precision
POINTS = ("0.25", "1.125"), ("-0.375", "0.8125"), ("0.0", "1.0"), ("0.46875", "2.5")


def _pts(ctx):
    with ctx.workprec():
        return [mpmath.mpc(mpmath.mpf(x), mpmath.mpf(y)) for x, y in POINTS]


def check_eta_functional_equations() -> str:
    ctx = ctx192()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        for z in _pts(ctx):
            ez = eta(z, ctx).to_mpc()
            shift = eta(z + 1, ctx).to_mpc()
            want = mpmath.e ** (mpmath.mpc(0, mp.pi) / 12) * ez
            assert abs(shift - want) / abs(want) < tol
            inv = eta(-1 / z, ctx).to_mpc()
            want = mpmath.sqrt(mpmath.mpc(0, -1) * z) * ez
            assert abs(inv - want) / abs(want) < tol
    return "eta shift and inversion equations hold at 192 bits"


def test_eta_functional_equations():
    check_eta_functional_equations()


def test_eta_closed_values():
    # eta(i) = Gamma(1/4) / (2 pi^(3/4)); eta(2i) = eta(i) / 2^(3/8)
    ctx = ctx192()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        g = mpmath.gamma(mpmath.mpf(1) / 4)
        want_i = g / (2 * mp.pi ** mpmath.mpf("0.75"))
        got_i = eta(mpmath.mpc(0, 1), ctx).to_mpc()
        assert abs(got_i - want_i) / want_i < tol
        got_2i = eta(mpmath.mpc(0, 2), ctx).to_mpc()
        want_2i = want_i / mpmath.mpf(2) ** mpmath.mpf("0.375")
        assert abs(got_2i - want_2i) / want_2i < tol


def check_e4_functional_equations() -> str:
    ctx = ctx192()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        for z in _pts(ctx):
            ez = eisenstein_e4(z, ctx).to_mpc()
            shift = eisenstein_e4(z + 1, ctx).to_mpc()
            assert abs(shift - ez) / abs(ez) < tol
            inv = eisenstein_e4(-1 / z, ctx).to_mpc()
            want = z**4 * ez
            assert abs(inv - want) / abs(want) < tol
        # E4(i) = 3 Gamma(1/4)^8 / (2 pi)^6
        want = 3 * mpmath.gamma(mpmath.mpf(1) / 4) ** 8 / (2 * mp.pi) ** 6
        got = eisenstein_e4(mpmath.mpc(0, 1), ctx).to_mpc()
        assert abs(got - want) / want < tol
    return "E4 weight-4 equations and the E4(i) closed value hold at 192 bits"


def test_e4_functional_equations():
    check_e4_functional_equations()


def check_j_anchor_values() -> str:
    ctx = ctx192()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        ji = j_invariant(mpmath.mpc(0, 1), ctx).to_mpc()
        assert abs(ji - 1728) < tol * 1728
        rho = mpmath.mpc(mpmath.mpf(-1) / 2, mpmath.sqrt(mpmath.mpf(3)) / 2)
        jrho = j_invariant(rho, ctx).to_mpc()
        assert abs(jrho) < tol * 1728
        j2i = j_invariant(mpmath.mpc(0, 2), ctx).to_mpc()
        assert abs(j2i - 66**3) < tol * 66**3
        assert abs(j_minus_744(mpmath.mpc(0, 1), ctx).to_mpc() - 984) < tol * 1728
    return "j(i) = 1728, j(rho) = 0, j(2i) = 66^3 at 192 bits"


def test_j_anchor_values():
    check_j_anchor_values()


def test_j_invariance():
    ctx = ctx128()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        z = mpmath.mpc(mpmath.mpf("0.3125"), mpmath.mpf("1.25"))
        jz = j_minus_744(z, ctx).to_mpc()
        for g in (((1, 1), (0, 1)), ((0, -1), (1, 0)), ((2, 1), (1, 1))):
            jg = j_minus_744(mobius(g, z), ctx).to_mpc()
            assert abs(jg - jz) / abs(jz) < tol, g


def test_gamma0_6_F_matches_integer_series():
    # closed evaluation against the exact q-expansion, where the tail is
    # far below the working precision
    ctx = ctx192()
    coeffs = gamma0_6_F_coeffs(40)
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        for zx, zy in (("0.0", "2.0"), ("0.25", "1.75")):
            z = mpmath.mpc(mpmath.mpf(zx), mpmath.mpf(zy))
            q = mpmath.e ** (2j * mp.pi * z)
            series = sum(coeffs.coeff(n) * q**n for n in range(-1, 41))
            closed = gamma0_6_F(z, ctx).to_mpc()
            assert abs(closed - series) / abs(series) < tol, (zx, zy)


def test_gamma0_6_F_level_invariance():
    ctx = ctx128()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        z = mpmath.mpc(mpmath.mpf("0.125"), mpmath.mpf("1.125"))
        fz = gamma0_6_F(z, ctx).to_mpc()
        gens = (((1, 1), (0, 1)), ((1, 0), (6, 1)), ((7, -1), (36, -5)))
        for g in gens:
            assert g[0][0] * g[1][1] - g[0][1] * g[1][0] == 1
            fg = gamma0_6_F(mobius(g, z), ctx).to_mpc()
            assert abs(fg - fz) / abs(fz) < tol, g


def test_gamma0_6_F_atkin_lehner_eigenvalues():
    ctx = ctx128()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    signs = {2: 1, 3: -1, 6: -1}
    with ctx.workprec():
        z = mpmath.mpc(mpmath.mpf("0.125"), mpmath.mpf("1.125"))
        fz = gamma0_6_F(z, ctx).to_mpc()
        for q, sign in signs.items():
            wz = atkin_lehner_matrix(6, q).apply(z)
            fw = gamma0_6_F(wz, ctx).to_mpc()
            assert abs(fw - sign * fz) / abs(fz) < tol, q


def test_atkin_lehner_matrix_structure():
    for q in (1, 2, 3, 6):
        wal = atkin_lehner_matrix(6, q)
        (a, b), (c, d) = wal.entries
        assert a * d - b * c == q
        assert a % q == 0 and d % q == 0 and c % 6 == 0
    with pytest.raises(ValueError):
        atkin_lehner_matrix(6, 4)


def test_atkin_lehner_squares_to_identity():
    # W_q^2 lies in Gamma_0(6), so F returns to itself
    ctx = ctx128()
    tol = mpmath.ldexp(1, -(ctx.prec_bits - 16))
    with ctx.workprec():
        z = mpmath.mpc(mpmath.mpf("-0.25"), mpmath.mpf("0.875"))
        fz = gamma0_6_F(z, ctx).to_mpc()
        for q in (2, 3, 6):
            wal = atkin_lehner_matrix(6, q)
            zz = wal.apply(wal.apply(z))
            assert abs(gamma0_6_F(zz, ctx).to_mpc() - fz) / abs(fz) < tol, q


def test_reduce_fundamental():
    ctx = ctx128()
    r = rng("fundamental")
    with ctx.workprec():
        eps = mpmath.ldexp(1, -100)
        for _ in range(40):
            z = mpmath.mpc(
                mpmath.mpf(r.randrange(-64, 65)) / 16,
                mpmath.mpf(r.randrange(2, 64)) / 16,
            )
            w, g = reduce_fundamental(z, ctx)
            assert abs(w.real) <= mpmath.mpf("0.5") + eps
            assert abs(w) >= 1 - eps
            assert g[0][0] * g[1][1] - g[0][1] * g[1][0] == 1
            assert abs(mobius(g, z) - w) < eps


def test_gamma0_optimize():
    ctx = ctx128()
    r = rng("optimize")
    with ctx.workprec():
        eps = mpmath.ldexp(1, -100)
        for _ in range(40):
            z = mpmath.mpc(
                mpmath.mpf(r.randrange(-64, 65)) / 16,
                mpmath.mpf(r.randrange(2, 40)) / 32,
            )
            w, g = gamma0_optimize(z, 6, ctx)
            assert g[1][0] % 6 == 0
            assert g[0][0] * g[1][1] - g[0][1] * g[1][0] == 1
            assert abs(mobius(g, z) - w) < eps
            assert w.imag > z.imag - eps
