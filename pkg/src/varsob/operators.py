"""Trace, zero extension, reflection, truncation, chart transfer, the extension operator E
and the splitting u = (u - E(Tu)) + E(Tu).

Extended functions are lazy closures; nothing is resampled.  On the closure of
Omega the extension returns u(x) itself: there the composed formula equals u
identically (H(H^-1 x) = x and the partition sums to 1), so returning u keeps
the identity T(E u) = u exact in floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domains import Box, Domain, DomainError, SymmetricPair, _as_points
from .functions import GridFunction
from .geometry import (Chart, ChartImage, Cutoff, GeometryError, PartitionOfUnity,
                       standard_cells)
from .quadrature import CellGrid, QuadratureSpec, default_quadrature

__all__ = [
    "OperatorError", "NotCompactlySupported", "ExtensionResult", "Decomposition",
    "enclosing_box", "trace", "zero_extend", "reflect_extend", "truncate",
    "chart_transfer", "extend", "kernel_decompose", "default_cell",
]

INSIDE, REFLECTED, ZEROED = "inside", "reflected", "zeroed"


class OperatorError(ValueError):
    """An operator precondition failed."""


class NotCompactlySupported(OperatorError):
    """zero_extend input does not vanish outside the declared compact set."""


def default_cell(omega: Domain, quad: Optional[QuadratureSpec] = None) -> np.ndarray:
    """Cell size of the grid the norms use on ``omega``."""
    quad = quad or default_quadrature(omega.dim)
    return CellGrid(omega, quad).h.copy()


def enclosing_box(omega: Domain, margin_factor: float = 2.0, cell=None) -> Box:
    """Bounding box of omega dilated by about margin_factor * diam, in whole cells.

    Whole cells keep the hull grid aligned with the grid on omega, so an
    integrand that vanishes outside omega is sampled at the same points.
    """
    h = np.broadcast_to(default_cell(omega) if cell is None else np.asarray(cell, float),
                        (omega.dim,))
    m = np.ceil(margin_factor * omega.diameter / h) * h
    return Box(omega.lo - m, omega.hi + m)


@dataclass
class ExtensionResult:
    """An extended function on R^n, modelled by the box ``hull``."""

    function: GridFunction
    hull: Box
    cell: np.ndarray
    omega: Domain
    provenance: dict
    atlas: Optional[list] = None
    pou: Optional[PartitionOfUnity] = None
    _region: Optional[object] = field(default=None, repr=False)

    def __call__(self, pts):
        return self.function(pts)

    def region(self, pts) -> np.ndarray:
        """Which branch produced the value at each point."""
        return self._region(_as_points(pts, self.omega.dim))

    def quad(self, base: Optional[QuadratureSpec] = None) -> QuadratureSpec:
        """A quadrature spec on the hull aligned with the grid on omega."""
        base = base or default_quadrature(self.omega.dim)
        return base.with_cell_size(self.cell)

    def provenance_record(self) -> dict:
        out = dict(self.provenance)
        out["hull"] = self.hull.to_dict()
        out["omega"] = self.omega.to_dict()
        if self.atlas is not None:
            out["atlas"] = [c.to_dict() for c in self.atlas]
        if self.pou is not None:
            out["partition"] = self.pou.to_dict()
        return out


@dataclass
class Decomposition:
    kernel_part: GridFunction
    image_part: GridFunction
    extension: ExtensionResult

    def recombine(self) -> GridFunction:
        return self.kernel_part + self.image_part


def _hull_and_cell(omega, margin_factor, cell):
    h = default_cell(omega) if cell is None else np.broadcast_to(
        np.asarray(cell, float), (omega.dim,)).copy()
    return enclosing_box(omega, margin_factor, h), h


# ---------------------------------------------------------------------------

def trace(u: GridFunction, omega: Domain, res: Optional[int] = None) -> GridFunction:
    """Tu = u restricted to omega."""
    if omega.dim != u.dim:
        raise OperatorError("dimension mismatch")
    if not u.extended:
        nodes = omega.grid_nodes(res or (64 if omega.dim == 1 else 32))
        tol = 1e-9 * max(1.0, u.domain.diameter)
        if not np.all(u.domain.contains(nodes, tol=tol)):
            raise OperatorError("omega is not contained in the domain of u")
    return GridFunction(u.raw, omega, support=u.support, label=f"T[{u.label}]")


def zero_extend(u: GridFunction, omega: Domain, support_K: Box, *,
                margin_factor: float = 2.0, cell=None,
                check_res: Optional[int] = None) -> ExtensionResult:
    """u on omega, 0 elsewhere.  u must vanish on omega minus K and K must stay
    at least one grid cell away from the boundary."""
    hull, h = _hull_and_cell(omega, margin_factor, cell)
    corners = np.array(list(itertools.product(*zip(support_K.lo, support_K.hi))))
    if not np.all(omega.contains(corners)):
        raise NotCompactlySupported("K is not contained in omega")
    dist = float(np.min(omega.distance_to_boundary(corners)))
    if dist < float(np.max(h)):
        raise NotCompactlySupported(
            f"dist(K, boundary) = {dist:.6g} is below one grid cell ({np.max(h):.6g})")
    nodes = omega.grid_nodes(check_res or (1024 if omega.dim == 1 else 128))
    vals = u(nodes)
    bad = (~support_K.contains_closed(nodes)) & (np.abs(vals) > 1e-12)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotCompactlySupported(
            f"u = {vals[i]:.6g} at {nodes[i].tolist()}, outside the declared support")

    def fn(pts):
        out = np.zeros(pts.shape[:-1])
        inside = omega.contains_closed(pts)
        if np.any(inside):
            out[inside] = u(pts[inside])
        return out

    def region(pts):
        return np.where(omega.contains_closed(pts), INSIDE, ZEROED)

    f = GridFunction(fn, hull, extended=True, support=support_K, label=f"zero_ext[{u.label}]")
    prov = {"operator": "zero_extend", "regions": {INSIDE: "u", ZEROED: "0"},
            "support_K": support_K.to_dict()}
    return ExtensionResult(f, hull, h, omega, prov, _region=region)


def reflect_extend(u: GridFunction, omega: Domain) -> GridFunction:
    """Even reflection across x_n = 0 of u given on the upper half of omega."""
    if not isinstance(omega, SymmetricPair):
        omega = SymmetricPair(omega)

    def fn(pts):
        lower = pts[..., -1] < 0
        src = np.where(lower[..., None], SymmetricPair.reflect(pts), pts)
        return u(src)

    return GridFunction(fn, omega, label=f"reflect[{u.label}]")


def truncate(psi: Cutoff, u: GridFunction) -> GridFunction:
    """psi * u."""
    if psi.dim != u.dim:
        raise OperatorError("cutoff and function live in different dimensions")
    support = u.support
    if psi.support is not None:
        c, r = np.asarray(psi.support.center), psi.support.radius
        ball_box = Box(c - r, c + r)
        if support is None:
            support = ball_box
        else:
            lo = np.maximum(support.lo, ball_box.lo)
            hi = np.minimum(support.hi, ball_box.hi)
            support = Box(lo, hi) if np.all(hi > lo) else ball_box
    f = u.raw if u.extended else u
    return GridFunction(lambda pts: psi(pts) * f(pts), u.domain, extended=u.extended,
                        support=support, label=f"({psi.label} * {u.label})")


def chart_transfer(u: GridFunction, chart: Chart, direction: str,
                   domain: Optional[Domain] = None) -> GridFunction:
    """pullback: y -> u(H(y)) on Q+ (default); pushforward: x -> u(H^-1(x)) on H(Q)."""
    if direction == "pullback":
        dom = domain or standard_cells(chart.dim)[1]
        return GridFunction(lambda y: u(chart.forward(y)), dom, label=f"pull[{u.label}]")
    if direction == "pushforward":
        dom = domain or ChartImage(chart)

        def fn(x):
            y = chart.inverse(x)
            if not np.all(np.abs(y) <= 1 + 1e-9):
                raise OperatorError("evaluation outside the chart range")
            return u(y)
        return GridFunction(fn, dom, label=f"push[{u.label}]")
    raise OperatorError(f"direction must be pullback or pushforward, not {direction!r}")


def _check_atlas(omega, atlas, pou, samples: int = 512):
    if len(pou.members) != len(atlas) + 1:
        raise OperatorError("partition of unity does not match the atlas")
    rng = np.random.default_rng(12345)
    n = omega.dim
    for chart, ball in zip(atlas, pou.cover):
        if chart.ball != ball:
            raise OperatorError("partition cover balls differ from the chart balls")
        y = rng.uniform(-1, 1, size=(samples, n))
        y[:, -1] = np.abs(y[:, -1])
        if not np.all(omega.contains_closed(chart.forward(y))):
            raise GeometryError("chart maps Q+ outside omega")
        d = rng.normal(size=(samples, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = np.asarray(ball.center) + d * ball.radius * rng.uniform(0, 1, (samples, 1))
        if not np.all(chart.in_range(pts)):
            raise GeometryError("cover ball is not inside its chart range")


def extend(u: GridFunction, omega: Domain, atlas: Sequence[Chart], pou: PartitionOfUnity,
           *, margin_factor: float = 2.0, cell=None) -> ExtensionResult:
    """E u = theta_0 u~ + sum_i theta_i w_i~ with w_i the chart-wise even reflection.

    Per chart: pull u back to Q+, reflect across Q0, push forward to B_i,
    multiply by theta_i, extend by zero.
    """
    atlas = list(atlas)
    _check_atlas(omega, atlas, pou)
    hull, h = _hull_and_cell(omega, margin_factor, cell)
    thetas = pou.members[1:]

    def outside_value(pts):
        out = np.zeros(pts.shape[:-1])
        for chart, theta in zip(atlas, thetas):
            t = theta(pts)
            live = t > 0
            if not np.any(live):
                continue
            y = chart.inverse(pts[live])
            y[..., -1] = np.abs(y[..., -1])           # reflection across Q0
            out[live] += t[live] * u(chart.forward(y))
        return out

    def fn(pts):
        inside = omega.contains_closed(pts)
        out = np.zeros(pts.shape[:-1])
        if np.any(inside):
            out[inside] = u(pts[inside])
        if not np.all(inside):
            out[~inside] = outside_value(pts[~inside])
        return out

    def region(pts):
        inside = omega.contains_closed(pts)
        near = np.zeros(pts.shape[:-1], dtype=bool)
        for theta in thetas:
            near |= theta(pts) > 0
        return np.where(inside, INSIDE, np.where(near, REFLECTED, ZEROED))

    lo, hi = omega.lo.copy(), omega.hi.copy()
    for b in pou.cover:
        c = np.asarray(b.center)
        lo, hi = np.minimum(lo, c - b.radius), np.maximum(hi, c + b.radius)
    f = GridFunction(fn, hull, extended=True, support=Box(lo, hi), label=f"E[{u.label}]")
    prov = {"operator": "extend",
            "regions": {INSIDE: "u", REFLECTED: "sum_i theta_i * (u o H_i o reflect o H_i^-1)",
                        ZEROED: "0"}}
    return ExtensionResult(f, hull, h, omega, prov, atlas, pou, _region=region)


def kernel_decompose(u: GridFunction, omega: Domain, atlas: Sequence[Chart],
                     pou: PartitionOfUnity, **kw) -> Decomposition:
    """u = (u - E(Tu)) + E(Tu); the first part has zero trace on omega."""
    ext = extend(trace(u, omega), omega, atlas, pou, **kw)
    image = ext.function
    kernel = GridFunction(lambda pts: u.raw(pts) - image.raw(pts), u.domain,
                          extended=u.extended, label=f"ker[{u.label}]")
    if u.support is not None and image.support is not None:
        kernel.support = Box(np.minimum(u.support.lo, image.support.lo),
                             np.maximum(u.support.hi, image.support.hi))
    return Decomposition(kernel, image, ext)
