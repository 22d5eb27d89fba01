"""Standard cells, boundary covers, local charts, smooth cutoffs and partitions of unity."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .domains import Ball, Box, Domain, DomainError, HalfBox, _as_points

__all__ = [
    "GeometryError", "FlatFace", "standard_cells", "CoverBall", "cover_boundary",
    "boundary_points", "Cutoff", "bump", "PartitionOfUnity", "partition_of_unity",
    "Chart", "AffineChart", "PolarChart", "ChartImage", "chart_atlas",
    "atlas_to_json", "partition_to_json", "smooth_step",
]


class GeometryError(DomainError):
    """Cover failures, unsupported charts, incomplete partitions."""


# ---------------------------------------------------------------------------
# standard cells

class FlatFace:
    """Q0 = {(x', 0) : |x'| < 1}, the flat face of the half cell."""

    def __init__(self, n: int):
        self.dim = n

    def contains(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = _as_points(pts, self.dim)
        flat = np.abs(pts[..., -1]) <= tol
        if self.dim == 1:
            return flat
        return flat & np.all(np.abs(pts[..., :-1]) < 1, axis=-1)

    def samples(self, m: int) -> np.ndarray:
        if self.dim == 1:
            return np.zeros((1, 1))
        t = -1 + (np.arange(m) + 0.5) * 2 / m
        return np.stack([t, np.zeros(m)], axis=-1)

    def to_dict(self):
        return {"kind": "flatface", "n": self.dim}


def standard_cells(n: int):
    """(Q, Q+, Q0) for n = 1, 2."""
    if n not in (1, 2):
        raise GeometryError(f"unsupported dimension {n}")
    return Box(-np.ones(n), np.ones(n)), HalfBox(n), FlatFace(n)


# ---------------------------------------------------------------------------
# boundary covers

@dataclass(frozen=True)
class CoverBall:
    center: tuple
    radius: float

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) < self.radius

    def to_dict(self):
        return {"center": list(self.center), "radius": self.radius}


def boundary_points(domain: Domain, m: int = 4096) -> np.ndarray:
    """Samples of the part of the boundary the atlas must flatten."""
    if isinstance(domain, HalfBox):
        if domain.dim == 1:
            return np.array([[0.0], [1.0]])
        # the identity chart flattens the central half of Q0; the corners are not C1
        return FlatFace(2).samples(m) * 0.5
    if isinstance(domain, (Ball, Box)) and domain.dim == 1:
        return np.array([domain.lo, domain.hi])
    if isinstance(domain, Ball):
        return domain.boundary_samples(m)
    raise GeometryError(f"no boundary parameterisation for {domain.kind} in {domain.dim}-D")


def _check_cover(balls, gamma):
    pts = np.asarray(gamma)
    covered = np.zeros(len(pts), dtype=bool)
    for b in balls:
        covered |= b.contains(pts)
    if not np.all(covered):
        bad = pts[~covered][0]
        raise GeometryError(f"cover failure: boundary point {bad.tolist()} lies in no ball")


def cover_boundary(domain: Domain, k: int = 8, samples: int = 4096) -> list:
    """k balls covering the boundary (verified on ``samples`` boundary points).

    Circles get balls at angles 2 pi j / k with radius 1.5 R sin(pi/k), which
    makes neighbours overlap.  A 1-D boundary is two points; they get balls of
    radius a quarter of the interval.
    """
    if domain.dim == 1:
        lo, hi = float(domain.lo[0]), float(domain.hi[0])
        if isinstance(domain, HalfBox):
            lo, hi = 0.0, 1.0
        r = (hi - lo) / 4
        ends = [lo, hi][:max(k, 0)]
        balls = [CoverBall((e,), r) for e in ends]
    elif isinstance(domain, Ball):
        R = domain.radius
        r = min(1.5 * R * math.sin(math.pi / k), 2 * (2 * math.pi * R) / k) if k > 0 else 0.0
        ang = 2 * math.pi * np.arange(k) / k
        balls = [CoverBall(tuple((domain.center + R * np.array([math.cos(a), math.sin(a)]))
                                 .tolist()), r) for a in ang]
    elif isinstance(domain, HalfBox):
        balls = [CoverBall((0.0, 0.0), 1.0)]
    else:
        raise GeometryError(f"no boundary parameterisation for {domain.kind}")
    _check_cover(balls, boundary_points(domain, samples))
    return balls


# ---------------------------------------------------------------------------
# cutoffs

def _glue(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, exp(-1/t) glue in between."""
    t = np.asarray(t, dtype=float)
    a, b = _glue(t), _glue(1 - t)
    return a / (a + b)


@dataclass
class Cutoff:
    """A smooth function with values in [0, 1] and a declared support region."""

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    support: Optional[CoverBall]          # None: support is the complement of a set
    lipschitz_k: float
    label: str = ""

    def __call__(self, pts) -> np.ndarray:
        pts = _as_points(pts, self.dim)
        return np.asarray(self.fn(pts), dtype=float)

    def to_dict(self):
        return {"label": self.label, "lipschitz_k": self.lipschitz_k,
                "support": None if self.support is None else self.support.to_dict()}


def bump(center, r_inner: float, r_outer: float) -> Cutoff:
    """Radial bump: 1 on |x - c| <= r_inner, 0 on |x - c| >= r_outer."""
    if not 0 < r_inner < r_outer:
        raise GeometryError("bump needs 0 < r_inner < r_outer")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    width = r_outer - r_inner

    def fn(pts):
        r = np.linalg.norm(pts - c, axis=-1)
        return smooth_step((r_outer - r) / width)

    # radial profile slope on a fine grid; equals the gradient bound in any dimension
    r = np.linspace(r_inner, r_outer, 20001)
    prof = smooth_step((r_outer - r) / width)
    k = float(np.max(np.abs(np.diff(prof))) / (r[1] - r[0]))
    return Cutoff(fn, c.size, CoverBall(tuple(c.tolist()), r_outer), k,
                  label=f"bump({c.tolist()}, {r_inner}, {r_outer})")


# ---------------------------------------------------------------------------
# partition of unity

INNER, MID, OUTER = 0.85, 0.9, 0.98


@dataclass
class PartitionOfUnity:
    """theta_0 (vanishes near gamma) and theta_i supported in ball i; they sum to 1."""

    members: list
    cover: list
    gamma: np.ndarray

    def __call__(self, pts) -> np.ndarray:
        """All members evaluated at ``pts``: shape (k + 1, ...)."""
        return np.stack([m(pts) for m in self.members])

    def to_dict(self):
        return {"cover": [b.to_dict() for b in self.cover],
                "members": [m.to_dict() for m in self.members]}


def partition_of_unity(cover: Sequence[CoverBall], gamma) -> PartitionOfUnity:
    """theta_i = b_i / (b_0 + sum_j b_j) with b_i bumps inside the balls.

    b_0 = prod_i (1 - beta_i) where beta_i = 1 on 0.85 B_i, so theta_0 = 0 on a
    neighbourhood of every gamma point that lies in some 0.85 B_i.  Wherever
    b_0 < 1 some b_i = 1, hence the denominator is at least 1 where it matters.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    if not cover:
        raise GeometryError("empty cover")
    dim = len(cover[0].center)
    bumps = [bump(b.center, MID * b.radius, OUTER * b.radius) for b in cover]
    cores = [bump(b.center, INNER * b.radius, MID * b.radius) for b in cover]

    def b0(pts):
        out = np.ones(pts.shape[:-1])
        for c in cores:
            out = out * (1.0 - c(pts))
        return out

    def denom(pts):
        return b0(pts) + sum(b(pts) for b in bumps)

    d = denom(gamma)
    if np.any(d < 1e-12):
        raise GeometryError("incomplete cover: partition denominator vanishes")
    near = b0(gamma)
    if np.any(near > 0):
        bad = gamma[near > 0][0]
        raise GeometryError(f"incomplete cover: boundary point {bad.tolist()} is not interior "
                            "to the cover")

    def member(i):
        if i == 0:
            return lambda pts: b0(pts) / denom(pts)
        b = bumps[i - 1]
        return lambda pts: b(pts) / denom(pts)

    # a Lipschitz bound for each quotient from bounds on numerator and denominator
    kb = [b.lipschitz_k for b in bumps]
    kc = [c.lipschitz_k for c in cores]
    k_den = sum(kc) + sum(kb)
    members = [Cutoff(member(0), dim, None, sum(kc) + k_den, label="theta_0")]
    for i, b in enumerate(cover, start=1):
        members.append(Cutoff(member(i), dim, CoverBall(b.center, OUTER * b.radius),
                              kb[i - 1] + k_den, label=f"theta_{i}"))
    return PartitionOfUnity(members, list(cover), gamma)


# ---------------------------------------------------------------------------
# charts

class Chart:
    """A bi-Lipschitz map H from Q = (-1, 1)^n onto a neighbourhood U of a boundary patch.

    H(Q+) lies in Omega and H(Q0) on the boundary.  ``ball`` is the cover ball
    the chart is responsible for; it must lie inside U.
    """

    kind = "chart"
    dim: int
    ball: CoverBall
    lipschitz_bound: float
    jacobian_bound: float

    def forward(self, y) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, x) -> np.ndarray:
        raise NotImplementedError

    def in_range(self, x, tol: float = 1e-12) -> np.ndarray:
        """x in U = H(Q) (closure within ``tol``)."""
        y = self.inverse(_as_points(x, self.dim))
        return np.all(np.abs(y) < 1 + tol, axis=-1)

    def to_dict(self) -> dict:
        raise NotImplementedError


class AffineChart(Chart):
    """H(y) = origin + A y with A invertible; covers flat boundaries and 1-D endpoints."""

    kind = "affine"

    def __init__(self, origin, matrix, ball: CoverBall):
        self.origin = np.atleast_1d(np.asarray(origin, dtype=float))
        self.A = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.Ainv = np.linalg.inv(self.A)
        self.dim = self.origin.size
        self.ball = ball
        sv = np.linalg.svd(self.A, compute_uv=False)
        self.lipschitz_bound = float(max(sv.max(), 1 / sv.min()))
        self.jacobian_bound = float(abs(np.linalg.det(self.A)))

    def forward(self, y):
        y = _as_points(y, self.dim)
        return self.origin + y @ self.A.T

    def inverse(self, x):
        x = _as_points(x, self.dim)
        return (x - self.origin) @ self.Ainv.T

    def to_dict(self):
        return {"kind": self.kind, "origin": self.origin.tolist(), "matrix": self.A.tolist(),
                "ball": self.ball.to_dict(), "lipschitz_bound": self.lipschitz_bound,
                "jacobian_bound": self.jacobian_bound}


class PolarChart(Chart):
    """Annular sector chart of a disc:

        H(y', y_n) = c + (R - delta y_n) (cos(theta + omega y'), sin(theta + omega y')).

    y_n > 0 goes inwards, so H(Q+) lies in the disc and H(Q0) on the circle.
    """

    kind = "polar"

    def __init__(self, center, R: float, theta: float, omega: float, delta: float,
                 ball: CoverBall):
        if not (0 < delta < R and 0 < omega < math.pi):
            raise GeometryError("polar chart needs 0 < delta < R and 0 < omega < pi")
        self.c = np.asarray(center, dtype=float)
        self.R, self.theta, self.omega, self.delta = float(R), float(theta), float(omega), \
            float(delta)
        self.dim = 2
        self.ball = ball
        fwd = max(omega * (R + delta), delta)
        inv = 1.0 / min(delta, 2 * omega * (R - delta) / math.pi)
        self.lipschitz_bound = float(max(fwd, inv))
        self.jacobian_bound = float(omega * (R + delta) * delta)

    def forward(self, y):
        y = _as_points(y, 2)
        rho = self.R - self.delta * y[..., 1]
        phi = self.theta + self.omega * y[..., 0]
        return self.c + np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)

    def inverse(self, x):
        d = _as_points(x, 2) - self.c
        rho = np.hypot(d[..., 0], d[..., 1])
        phi = np.arctan2(d[..., 1], d[..., 0]) - self.theta
        phi = (phi + math.pi) % (2 * math.pi) - math.pi
        return np.stack([phi / self.omega, (self.R - rho) / self.delta], axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "center": self.c.tolist(), "R": self.R,
                "theta": self.theta, "omega": self.omega, "delta": self.delta,
                "ball": self.ball.to_dict(), "lipschitz_bound": self.lipschitz_bound,
                "jacobian_bound": self.jacobian_bound}


class ChartImage(Domain):
    """U = H(Q) as a domain (membership through H^-1)."""

    kind = "chart_image"

    def __init__(self, chart: Chart, res: int = 64):
        self.chart = chart
        self.dim = chart.dim
        axes = [np.linspace(-1, 1, res + 1)] * self.dim
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        img = chart.forward(grid)
        pad = 0.05 * (img.max(axis=0) - img.min(axis=0))
        self.lo, self.hi = img.min(axis=0) - pad, img.max(axis=0) + pad

    def contains(self, pts, tol=0.0):
        y = self.chart.inverse(_as_points(pts, self.dim))
        return np.all(np.abs(y) < 1 + tol, axis=-1)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def project(self, pts):
        y = np.clip(self.chart.inverse(pts), -1, 1)
        return self.chart.forward(y)

    def to_dict(self):
        return {"kind": self.kind, "chart": self.chart.to_dict()}


def chart_atlas(domain: Domain, k: int = 8) -> list:
    """Closed-form charts, one per cover ball of :func:`cover_boundary`.

    Supported: intervals and 1-D balls (affine charts at both ends), the
    half cell (identity chart at the flat face, plus an endpoint chart in 1-D)
    and 2-D discs (polar charts).  2-D boxes have corners and are rejected.
    """
    n = domain.dim
    if isinstance(domain, HalfBox):
        charts = [AffineChart(np.zeros(n), np.eye(n), CoverBall(tuple([0.0] * n), 1.0))]
        if n == 1:
            left, right = cover_boundary(domain, 2)
            charts = [AffineChart([0.0], [[1.0]], left), AffineChart([1.0], [[-0.5]], right)]
        return charts
    if n == 1 and isinstance(domain, (Box, Ball)):
        balls = cover_boundary(domain, 2)
        half = float(domain.hi[0] - domain.lo[0]) / 2
        return [AffineChart(balls[0].center, [[half]], balls[0]),
                AffineChart(balls[1].center, [[-half]], balls[1])]
    if isinstance(domain, Ball) and n == 2:
        balls = cover_boundary(domain, k)
        R = domain.radius
        r = balls[0].radius
        if r >= R:
            raise GeometryError(f"k={k} gives cover balls larger than the disc radius")
        delta = r + (R - r) / 2
        a = math.asin(r / R)
        omega = a + (math.pi / 2 - a) / 2
        charts = []
        for j, b in enumerate(balls):
            charts.append(PolarChart(domain.center, R, 2 * math.pi * j / k, omega, delta, b))
        return charts
    raise GeometryError(f"unsupported domain for charts: {domain.kind} in {n}-D "
                        "(needs a C1 boundary with closed-form charts)")


def atlas_to_json(atlas: Sequence[Chart]) -> str:
    return json.dumps([c.to_dict() for c in atlas], indent=2, sort_keys=True)


def partition_to_json(pou: PartitionOfUnity) -> str:
    return json.dumps(pou.to_dict(), indent=2, sort_keys=True)
