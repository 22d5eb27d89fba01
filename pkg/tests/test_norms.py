import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from varsob import Box, GridFunction
from varsob.exponents import ExponentField, SpaceParams
from varsob.norms import (NormError, gagliardo_seminorm, luxemburg_norm, modular_lebesgue,
                          norm_from_modular, pairing, seminorm_double_integral, sobolev_norm)
from varsob.quadrature import ModularSum, QuadratureSpec

UNIT = Box([0.0], [1.0])

# [DERIVED] frozen oracle values (mpmath, 30 digits; recomputed below)
INT_X_POW_2PX = 0.278117612199708338335231667138        # int_0^1 x^(2+x) dx
LUX_1PX_2PX = 1.57203066758950416512921258717           # ||1+x|| in L^(2+x)(0,1)
MOD_VARP = 0.686848141438852347184489169572             # see test_variable_p_seminorm
SEMI_VARP = 0.83678826624691
SQRT_8_15 = math.sqrt(8 / 15)


def f(src):
    return GridFunction.from_expr(src, UNIT)


def q_(src):
    return ExponentField.from_expr(src, UNIT)


def const(c, arity=1):
    return ExponentField.constant(c, 1, arity=arity, domain=UNIT)


def params(s, p, q=2.0):
    pf = const(p, 2) if isinstance(p, float) else ExponentField.from_expr(p, UNIT, arity=2)
    return SpaceParams(s, 1, pf, const(q))


# --- oracles ---------------------------------------------------------------

def test_oracles_recomputed():
    mp.mp.dps = 30
    assert float(mp.quad(lambda x: x ** (2 + x), [0, 1])) == pytest.approx(INT_X_POW_2PX,
                                                                           rel=1e-15)
    lam = mp.findroot(lambda l: mp.quad(lambda x: ((1 + x) / l) ** (2 + x), [0, 1]) - 1, 1.5)
    assert float(lam) == pytest.approx(LUX_1PX_2PX, rel=1e-15)
    two = mp.quad(lambda x: mp.quad(lambda y: abs(x - y) ** 0.5, [0, x, 1]), [0, 1])
    assert float(two) == pytest.approx(8 / 15, rel=1e-8)


# --- modular and Luxemburg -------------------------------------------------

def test_modular_examples():
    assert modular_lebesgue(f("1"), q_("2 + sin(x)"), UNIT) == 1.0
    assert modular_lebesgue(f("2"), const(3.0), UNIT) == pytest.approx(8.0, rel=1e-15)
    assert modular_lebesgue(f("x"), q_("2 + x"), UNIT) == pytest.approx(INT_X_POW_2PX,
                                                                        rel=1e-5)


def test_luxemburg_examples():
    assert luxemburg_norm(GridFunction.zero(UNIT), const(2.0), UNIT).value == 0.0
    assert luxemburg_norm(f("2"), const(2.0), UNIT).value == 2.0
    assert luxemburg_norm(f("1"), q_("2.5 + x"), UNIT).value == 1.0
    r = luxemburg_norm(f("1 + x"), q_("2 + x"), UNIT)
    assert r.value == pytest.approx(LUX_1PX_2PX, rel=1e-5)
    assert r.bracket[0] <= r.value <= r.bracket[1]
    assert abs(r.modular_at_value - 1) <= 1e-6


def test_classical_reduction():
    # |c| V^(1/p) on a box of volume 2
    box = Box([0.0], [2.0])
    r = luxemburg_norm(GridFunction.constant(-3.0, box), ExponentField.constant(3.0), box)
    assert r.value == pytest.approx(3 * 2 ** (1 / 3), rel=1e-9)


def test_refinement_estimate_reported():
    r = luxemburg_norm(f("1 + x"), q_("2 + x"), UNIT, QuadratureSpec(cells_per_axis=32),
                       refine=True)
    assert 0 < r.refinement_estimate < 1e-3
    assert abs(r.value - LUX_1PX_2PX) / LUX_1PX_2PX <= 2 * r.refinement_estimate


def test_tiny_input_is_bracketed():
    r = luxemburg_norm(f("1e-120"), const(2.0), UNIT)
    assert r.value == pytest.approx(1e-120, rel=1e-9)


def test_bracketing_failure():
    rho = ModularSum(np.array([0.0]), np.array([0.0]), np.array([2.0]))   # rho(lam) = 2
    with pytest.raises(NormError):
        norm_from_modular(rho)


# --- seminorm ----------------------------------------------------------------

def test_seminorm_constant_is_zero():
    assert seminorm_double_integral(f("3"), params(0.4, 2.0), UNIT, 0.7) == 0.0
    assert gagliardo_seminorm(f("3"), params(0.4, 2.0), UNIT).value == 0.0


def test_seminorm_collapse():
    assert seminorm_double_integral(f("x"), params(0.5, 2.0), UNIT) == pytest.approx(
        1.0, abs=1e-12)
    assert gagliardo_seminorm(f("x"), params(0.5, 2.0), UNIT).value == pytest.approx(
        1.0, abs=1e-6)


def test_seminorm_quarter():
    assert seminorm_double_integral(f("x"), params(0.25, 2.0), UNIT) == pytest.approx(
        8 / 15, rel=1e-4)
    assert gagliardo_seminorm(f("x"), params(0.25, 2.0), UNIT).value == pytest.approx(
        SQRT_8_15, abs=1e-3)


def test_variable_p_seminorm_converges():
    # [DERIVED] u = x, p = 2 + 0.5xy, s = 0.4; mpmath double integral and root
    pr = params(0.4, "2 + 0.5*x*y")
    errs = []
    for cells in (64, 256):
        q = QuadratureSpec(cells_per_axis=cells)
        errs.append(abs(seminorm_double_integral(f("x"), pr, UNIT, 1.0, q) - MOD_VARP))
    assert errs[1] < errs[0] / 3
    assert errs[1] / MOD_VARP < 1e-4
    val = gagliardo_seminorm(f("x"), pr, UNIT).value
    assert val == pytest.approx(SEMI_VARP, rel=1e-4)


def test_sobolev_norm_examples():
    pr = params(0.5, 2.0, 2.0)
    assert sobolev_norm(GridFunction.zero(UNIT), pr, UNIT) == 0.0
    assert sobolev_norm(f("1"), pr, UNIT) == 1.0
    assert sobolev_norm(f("x"), pr, UNIT) == pytest.approx(1 / math.sqrt(3) + 1, abs=1e-5)


def test_pairing_examples():
    assert pairing(f("1"), f("1"), UNIT) == 1.0
    assert pairing(f("x"), f("1 - x"), UNIT) == pytest.approx(1 / 6, rel=1e-4)
    assert pairing(f("sin(2*pi*x)"), f("cos(2*pi*x)"), UNIT) < 1e-12


# --- properties ----------------------------------------------------------------

COARSE = QuadratureSpec(cells_per_axis=64)
# away from the rho < 1e-300 cutoff, below which a norm is reported as 0
coef = st.just(0.0) | st.floats(1e-3, 2) | st.floats(-2, -1e-3)


def trig(a, b, c):
    return f(f"{a!r}*sin(pi*x) + {b!r}*cos(2*pi*x) + {c!r}")


@given(coef, coef, coef, st.floats(0.05, 20) | st.floats(-20, -0.05))
def test_homogeneity(a, b, c, k):
    u = trig(a, b, c)
    q = q_("2.2 + 0.5*x")
    base = luxemburg_norm(u, q, UNIT, COARSE).value
    scaled = luxemburg_norm(GridFunction(lambda x: k * u(x), UNIT), q, UNIT, COARSE).value
    assert scaled == pytest.approx(abs(k) * base, rel=1e-8, abs=1e-300)


@given(coef, coef, coef)
def test_unit_ball(a, b, c):
    u = trig(a, b, c)
    r = luxemburg_norm(u, q_("1.5 + x^2"), UNIT, COARSE)
    if r.value > 0:
        assert abs(r.modular_at_value - 1) <= 1e-6


@given(coef, coef, coef, coef, coef, coef)
def test_triangle(a, b, c, d, e, g):
    u, v = trig(a, b, c), trig(d, e, g)
    q = q_("3 - x")
    nu = luxemburg_norm(u, q, UNIT, COARSE).value
    nv = luxemburg_norm(v, q, UNIT, COARSE).value
    nw = luxemburg_norm(u + v, q, UNIT, COARSE).value
    assert nw <= nu + nv + 1e-8 * (nu + nv)


@given(coef, coef, st.floats(0.1, 5))
def test_seminorm_homogeneity(a, b, k):
    pr = params(0.3, "2 + 0.3*sin(x + y)")
    u = trig(a, b, 0.0)
    q = QuadratureSpec(cells_per_axis=32)
    base = gagliardo_seminorm(u, pr, UNIT, q).value
    scaled = gagliardo_seminorm(GridFunction(lambda x: k * u(x), UNIT), pr, UNIT, q).value
    assert scaled == pytest.approx(k * base, rel=1e-8, abs=1e-300)
