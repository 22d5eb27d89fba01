import math

import numpy as np
import pytest

from varsob import Box, GridFunction
from varsob.domains import Ball, HalfBox, SymmetricPair
from varsob.exponents import ExponentField
from varsob.geometry import boundary_points, bump, chart_atlas, partition_of_unity
from varsob.norms import luxemburg_norm, modular_lebesgue
from varsob.operators import (NotCompactlySupported, OperatorError, chart_transfer,
                              enclosing_box, extend, kernel_decompose, reflect_extend, trace,
                              truncate, zero_extend)
from varsob.quadrature import CellGrid, QuadratureSpec, default_quadrature

UNIT = Box([0.0], [1.0])
DISC = Ball([0.0, 0.0], 1.0)


def geometry(omega, k=8):
    atlas = chart_atlas(omega, k)
    return atlas, partition_of_unity([c.ball for c in atlas], boundary_points(omega))


@pytest.fixture(scope="module")
def disc_geo():
    return geometry(DISC)


@pytest.fixture(scope="module")
def unit_geo():
    return geometry(UNIT)


def test_enclosing_box_is_aligned():
    h = CellGrid(UNIT, default_quadrature(1)).h
    hull = enclosing_box(UNIT, 2.0)
    k = (UNIT.lo - hull.lo) / h
    assert np.allclose(k, np.rint(k)) and hull.lo[0] <= -2.0


def test_trace():
    hull = enclosing_box(UNIT)
    u = GridFunction.from_expr("x^2", hull, extended=True)
    tu = trace(u, UNIT)
    x = UNIT.grid_nodes(64)
    assert np.array_equal(tu(x), u(x))
    z = trace(GridFunction.zero(hull, extended=True), UNIT)
    assert np.all(z(x) == 0)
    with pytest.raises(OperatorError):
        trace(GridFunction.from_expr("x", Box([0.0], [0.5])), UNIT)


def test_trace_linearity():
    hull = enclosing_box(UNIT)
    u = GridFunction.from_expr("sin(x)", hull, extended=True)
    v = GridFunction.from_expr("x^3", hull, extended=True)
    x = UNIT.grid_nodes(128)
    assert np.array_equal(trace(2 * u + v, UNIT)(x), 2 * trace(u, UNIT)(x) + trace(v, UNIT)(x))


# --- zero extension -------------------------------------------------------------

BUMP = "max(0, (x - 0.25)*(0.75 - x))^2 * 100"


def test_zero_extend_values_and_norm():
    u = GridFunction.from_expr(BUMP, UNIT)
    ext = zero_extend(u, UNIT, Box([0.25], [0.75]))
    assert ext(np.array([[-1.0], [1.5]])).tolist() == [0.0, 0.0]
    x = UNIT.grid_nodes(100)
    assert np.array_equal(ext(x), u(x))
    q = ExponentField.from_expr("2 + x", UNIT)
    a = luxemburg_norm(u, q, UNIT).value
    b = luxemburg_norm(ext.function, q, ext.hull, ext.quad()).value
    assert abs(a - b) <= 1e-8
    assert set(ext.region(np.array([[0.5], [3.0]]))) == {"inside", "zeroed"}


def test_zero_extend_preconditions():
    u = GridFunction.from_expr(BUMP, UNIT)
    with pytest.raises(NotCompactlySupported, match="outside the declared support"):
        zero_extend(u, UNIT, Box([0.3], [0.7]))
    with pytest.raises(NotCompactlySupported, match="grid cell"):
        zero_extend(u, UNIT, Box([0.001], [0.75]))
    with pytest.raises(NotCompactlySupported):
        zero_extend(u, UNIT, Box([-0.5], [0.75]))


# --- reflection -----------------------------------------------------------------

def test_reflect_extend_1d():
    omega = SymmetricPair(Box([-1.0], [1.0]))
    u = GridFunction.from_expr("x", omega.upper)
    ut = reflect_extend(u, omega)
    t = np.linspace(0.01, 1, 50)[:, None]
    assert np.array_equal(ut(-t), ut(t))
    two = ExponentField.constant(2.0)
    # [DERIVED] || |x| ||_{L^2(-1,1)} = sqrt(2/3)
    assert luxemburg_norm(ut, two, omega).value == pytest.approx(math.sqrt(2 / 3), rel=1e-5)


def test_reflect_modular_doubling_disc():
    omega = SymmetricPair(DISC)
    quad = default_quadrature(2, cells_per_axis=64)
    h = CellGrid(omega, quad).h
    u = GridFunction.from_expr("1 + x1*x2 + sin(3*x2)", omega.upper)
    q = ExponentField.from_expr("2.2 + 0.3*x1 + 0.2*x2^2", DISC)
    full = modular_lebesgue(reflect_extend(u, omega), q, omega, quad)
    half = modular_lebesgue(u, q, omega.upper, quad.with_cell_size(h))
    assert abs(full - 2 * half) <= 1e-10 * full


def test_reflect_rejects_asymmetric():
    with pytest.raises(Exception):
        reflect_extend(GridFunction.from_expr("x", UNIT), UNIT)


# --- truncation -----------------------------------------------------------------

def test_truncate():
    u = GridFunction.from_expr(BUMP, UNIT)
    psi = bump([0.5], 0.3, 0.45)
    x = UNIT.grid_nodes(200)
    assert np.array_equal(truncate(psi, u)(x), u(x))          # psi = 1 on supp u
    v = GridFunction.from_expr("1 + x", UNIT)
    small = bump([0.5], 0.1, 0.3)
    q = ExponentField.from_expr("2 + x", UNIT)
    assert (luxemburg_norm(truncate(small, v), q, UNIT).value
            <= luxemburg_norm(v, q, UNIT).value)


# --- charts ---------------------------------------------------------------------

def test_chart_transfer(disc_geo):
    (ident,) = chart_atlas(HalfBox(2))
    u = GridFunction.from_expr("x1 + 2*x2", HalfBox(2))
    y = HalfBox(2).grid_nodes(10)
    assert np.array_equal(chart_transfer(u, ident, "pullback")(y), u(y))
    atlas, _ = disc_geo
    ch = atlas[3]
    f = GridFunction.from_expr("sin(x1) * x2", DISC)
    back = chart_transfer(chart_transfer(f, ch, "pullback", domain=Box([-1, -1], [1, 1])),
                          ch, "pushforward")
    x = ch.forward(np.random.default_rng(0).uniform(-1, 1, (300, 2)) * [1, 0.5] + [0, 0.5])
    assert np.max(np.abs(back(x) - f(x))) <= 1e-10
    c = chart_transfer(GridFunction.constant(3.0, DISC), ch, "pullback")
    assert np.all(c(HalfBox(2).grid_nodes(8)) == 3.0)
    with pytest.raises(OperatorError):
        chart_transfer(f, ch, "sideways")


# --- extension ------------------------------------------------------------------

@pytest.mark.parametrize("omega, src", [(UNIT, "sin(3*x) + x^2"), (HalfBox(1), "exp(x)"),
                                        (DISC, "x1 - x2^2 + cos(x1*x2)")])
def test_extension_restricts_exactly(omega, src):
    atlas, pou = geometry(omega)
    u = GridFunction.from_expr(src, omega)
    ext = extend(u, omega, atlas, pou)
    x = omega.grid_nodes(256 if omega.dim == 1 else 64)
    assert np.array_equal(trace(ext.function, omega)(x), u(x))
    far = ext.hull.lo[None] + 1e-9
    assert ext(far)[0] == 0.0


def test_extension_is_continuous_across_boundary(unit_geo):
    atlas, pou = unit_geo
    u = GridFunction.from_expr("1 + x", UNIT)
    ext = extend(u, UNIT, atlas, pou)
    for b in (0.0, 1.0):
        eps = 1e-7
        assert abs(ext(np.array([[b - eps]]))[0] - u(np.array([[b]]))[0]) < 1e-6


def test_extension_reflects_in_chart_coordinates(disc_geo):
    atlas, pou = disc_geo
    u = GridFunction.from_expr("x1^2 + x2^2", DISC)     # radial: reflection across the arc
    ext = extend(u, DISC, atlas, pou)
    ch = atlas[0]
    y = np.array([[0.1, 0.3]])
    inside, outside = ch.forward(y), ch.forward(y * [1, -1])
    th = pou(outside)[1:]
    assert ext(outside)[0] == pytest.approx(th.sum() * u(inside)[0], rel=1e-12)


def test_extension_linearity(unit_geo):
    atlas, pou = unit_geo
    u = GridFunction.from_expr("sin(5*x)", UNIT)
    v = GridFunction.from_expr("x^3 - x", UNIT)
    a, b = 1.7, -0.4
    e_sum = extend(a * u + b * v, UNIT, atlas, pou)
    eu, ev = extend(u, UNIT, atlas, pou), extend(v, UNIT, atlas, pou)
    x = e_sum.hull.grid_nodes(2000)
    assert np.max(np.abs(e_sum(x) - (a * eu(x) + b * ev(x)))) <= 1e-12


def test_atlas_mismatch(disc_geo, unit_geo):
    atlas, pou = disc_geo
    with pytest.raises(OperatorError):
        extend(GridFunction.from_expr("x1", DISC), DISC, atlas[:-1], pou)


def test_provenance_record(unit_geo):
    atlas, pou = unit_geo
    ext = extend(GridFunction.from_expr("x", UNIT), UNIT, atlas, pou)
    rec = ext.provenance_record()
    assert rec["operator"] == "extend" and len(rec["atlas"]) == 2
    regions = set(ext.region(ext.hull.grid_nodes(400)))
    assert regions == {"inside", "reflected", "zeroed"}


# --- decomposition --------------------------------------------------------------

def test_decomposition_identities(disc_geo):
    atlas, pou = disc_geo
    hull = enclosing_box(DISC)
    u = GridFunction.from_expr("sin(x1) + x2^3 + 0.1*x1*x2", hull, extended=True)
    dec = kernel_decompose(u, DISC, atlas, pou)
    x = DISC.grid_nodes(64)
    assert np.array_equal(dec.recombine()(x), u(x))
    assert np.all(trace(dec.kernel_part, DISC)(x) == 0)
    y = hull.grid_nodes(100)
    scale = np.maximum(np.abs(u(y)), np.abs(dec.kernel_part(y)))
    assert np.all(np.abs(dec.recombine()(y) - u(y)) <= np.spacing(scale))


def test_decomposition_of_image_part(unit_geo):
    atlas, pou = unit_geo
    hull = enclosing_box(UNIT)
    u = GridFunction.from_expr("cos(2*x)", hull, extended=True)
    image = kernel_decompose(u, UNIT, atlas, pou).image_part
    again = kernel_decompose(image, UNIT, atlas, pou)
    y = hull.grid_nodes(500)
    assert np.all(again.kernel_part(y) == 0)
    assert np.array_equal(again.image_part(y), image(y))


def test_decomposition_outside_support(unit_geo):
    atlas, pou = unit_geo
    hull = enclosing_box(UNIT)
    u = GridFunction.from_expr("max(0, -1 - x)", hull, extended=True)
    dec = kernel_decompose(u, UNIT, atlas, pou)
    y = hull.grid_nodes(500)
    assert np.all(dec.image_part(y) == 0)
    assert np.array_equal(dec.kernel_part(y), u(y))


def test_kernel_image_intersection(unit_geo):
    # E(v) with zero trace forces v = 0 at the nodes, hence E(v) = 0
    atlas, pou = unit_geo
    x = UNIT.grid_nodes(256)
    for src in ("0", "x*(1 - x)"):
        v = GridFunction.from_expr(src, UNIT)
        w = extend(v, UNIT, atlas, pou)
        zero_trace = np.all(trace(w.function, UNIT)(x) == 0)
        assert zero_trace == bool(np.all(v(x) == 0))
        if zero_trace:
            assert np.all(w(w.hull.grid_nodes(300)) == 0)
