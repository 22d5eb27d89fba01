import json
import math

import numpy as np
import pytest

from varsob.domains import Ball, Box, HalfBox
from varsob.geometry import (CoverBall, GeometryError, atlas_to_json, boundary_points, bump,
                             chart_atlas, cover_boundary, partition_of_unity,
                             partition_to_json, standard_cells)

DISC = Ball([0.0, 0.0], 1.0)


def test_standard_cells():
    Q, Qp, Q0 = standard_cells(1)
    assert np.array_equal(Q.lo, [-1.0]) and np.array_equal(Qp.lo, [0.0])
    assert Q0.contains([[0.0]])[0]
    Q, Qp, Q0 = standard_cells(2)
    assert Q.contains([[0.5, -0.5]])[0] and not Qp.contains([[0.5, -0.5]])[0]
    assert Q0.contains([[0.3, 0.0]])[0] and not Q0.contains([[1.0, 0.0]])[0]
    with pytest.raises(GeometryError):
        standard_cells(3)


def test_disc_cover():
    balls = cover_boundary(DISC, 8)
    assert len(balls) == 8
    for j, b in enumerate(balls):
        a = 2 * math.pi * j / 8
        assert np.allclose(b.center, [math.cos(a), math.sin(a)])
        assert b.radius <= 2 * (2 * math.pi) / 8
    assert np.linalg.norm(np.subtract(balls[0].center, balls[1].center)) < 2 * balls[0].radius
    pts = boundary_points(DISC, 4096)
    assert np.all(np.any([b.contains(pts) for b in balls], axis=0))


def test_interval_cover():
    balls = cover_boundary(Box([0.0], [1.0]), 2)
    assert [b.center for b in balls] == [(0.0,), (1.0,)]


def test_cover_failure():
    with pytest.raises(GeometryError, match="cover failure"):
        cover_boundary(DISC, 1)


def test_bump_values():
    b = bump([0.0, 0.0], 0.5, 1.0)
    assert b([[0.0, 0.0]])[0] == 1.0
    assert b([[1.2, 0.0]])[0] == 0.0
    r = np.linspace(0.5, 1.0, 2001)
    vals = b(np.stack([r, np.zeros_like(r)], axis=-1))
    assert 0 < vals[1000] < 1
    assert np.all(np.diff(vals) <= 0)        # [DERIVED] fine-grid monotonicity
    with pytest.raises(GeometryError):
        bump([0.0], 1.0, 0.5)


def test_bump_lipschitz_is_an_upper_bound():
    b = bump([0.3], 0.1, 0.25)
    x = np.linspace(0, 0.6, 100001)[:, None]
    slope = np.max(np.abs(np.diff(b(x)))) / (x[1, 0] - x[0, 0])
    assert slope <= 1.05 * b.lipschitz_k


def test_single_ball_partition_1d():
    pou = partition_of_unity([CoverBall((0.0,), 0.5)], [[0.0]])
    th = pou(np.array([[0.0], [3.0]]))
    assert np.allclose(th[:, 0], [0.0, 1.0])     # theta_1 = 1 near gamma
    assert np.allclose(th[:, 1], [1.0, 0.0])     # theta_0 = 1 far away


def test_disc_partition_sums_to_one():
    atlas = chart_atlas(DISC, 8)
    pou = partition_of_unity([c.ball for c in atlas], boundary_points(DISC))
    rng = np.random.default_rng(5)
    pts = rng.uniform(-2, 2, (10000, 2))
    th = pou(pts)
    assert np.all(np.abs(th.sum(axis=0) - 1) <= 1e-10)
    assert np.all((th >= 0) & (th <= 1))
    for b, m in zip(pou.cover, pou.members[1:]):
        outside = np.linalg.norm(pts - b.center, axis=1) >= b.radius
        assert np.all(m(pts[outside]) == 0)
    assert np.all(pou.members[0](boundary_points(DISC)) == 0)
    assert pou(np.array([[5.0, 5.0]]))[0, 0] == 1.0


def test_partition_incomplete_cover():
    with pytest.raises(GeometryError, match="incomplete cover"):
        partition_of_unity([CoverBall((0.0,), 0.5)], [[0.0], [1.0]])


@pytest.mark.parametrize("domain", [DISC, Ball([1.0, -2.0], 2.5), Box([0.0], [1.0]),
                                    HalfBox(1), HalfBox(2)])
def test_chart_invariants(domain):
    atlas = chart_atlas(domain, 8)
    n = domain.dim
    Q, Qp, Q0 = standard_cells(n)
    rng = np.random.default_rng(1)
    y = rng.uniform(-1, 1, (2000, n))
    for ch in atlas:
        x = ch.forward(y)
        assert np.max(np.abs(ch.inverse(x) - y)) <= 1e-10
        yp = y.copy()
        yp[:, -1] = np.abs(yp[:, -1])
        assert np.all(domain.contains_closed(ch.forward(yp)))
        face = ch.forward(Q0.samples(256))
        assert np.max(domain.distance_to_boundary(face)) <= 1e-10
        # measured bi-Lipschitz ratio below the declared bound
        i, j = rng.integers(0, len(y), (2, 500))
        dy = np.linalg.norm(y[i] - y[j], axis=1)
        dx = np.linalg.norm(x[i] - x[j], axis=1)
        ok = dy > 1e-9
        ratio = np.maximum(dx[ok] / dy[ok], dy[ok] / dx[ok])
        assert np.max(ratio) <= ch.lipschitz_bound * (1 + 1e-9)


def test_halfbox_identity_chart():
    (ch,) = chart_atlas(HalfBox(2), 8)
    y = np.array([[0.2, 0.7], [-0.4, -0.1]])
    assert np.array_equal(ch.forward(y), y)


def test_square_unsupported():
    with pytest.raises(GeometryError):
        chart_atlas(Box([0.0, 0.0], [1.0, 1.0]))


def test_serialisation():
    atlas = chart_atlas(DISC, 6)
    pou = partition_of_unity([c.ball for c in atlas], boundary_points(DISC))
    assert len(json.loads(atlas_to_json(atlas))) == 6
    assert len(json.loads(partition_to_json(pou))["members"]) == 7
