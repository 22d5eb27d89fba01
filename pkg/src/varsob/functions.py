"""Real-valued functions on a domain: closed-form, grid-sampled or lazily composed."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domains import Box, Domain, DomainError
from .expr import Expression, parse

__all__ = ["GridFunction"]

_EVAL_TOL = 1e-9


def _points(pts, dim: int) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != dim:
        raise DomainError(f"expected points with {dim} coordinates, got shape {pts.shape}")
    return pts


class GridFunction:
    """A function u: domain -> R evaluable at arrays of points of shape (..., n).

    Evaluation outside the closure of ``domain`` raises :class:`DomainError`
    unless ``extended`` is set; extension results are defined on all of R^n
    and their ``domain`` is only the box used to integrate them.  ``support``
    is an optional box known to contain the support.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], domain: Domain, *,
                 extended: bool = False, support: Box | None = None, label: str = ""):
        self._fn = fn
        self.domain = domain
        self.extended = extended
        self.support = support
        self.label = label

    @property
    def dim(self) -> int:
        return self.domain.dim

    # constructors ------------------------------------------------------

    @classmethod
    def from_expr(cls, src, domain: Domain, **kw) -> "GridFunction":
        e = src if isinstance(src, Expression) else parse(src, domain.dim)
        if e.dim != domain.dim:
            raise DomainError(f"{e.dim}-D expression on a {domain.dim}-D domain")
        if e.uses_y:
            raise DomainError("a function of one point may not reference y")
        kw.setdefault("label", str(e.source))
        return cls(lambda pts: e(pts), domain, **kw)

    @classmethod
    def constant(cls, c: float, domain: Domain, **kw) -> "GridFunction":
        c = float(c)
        kw.setdefault("label", repr(c))
        return cls(lambda pts: np.full(pts.shape[:-1], c), domain, **kw)

    @classmethod
    def zero(cls, domain: Domain, **kw) -> "GridFunction":
        return cls.constant(0.0, domain, **kw)

    @classmethod
    def from_samples(cls, values, domain: Domain, **kw) -> "GridFunction":
        """Multilinear interpolant of values given on the tensor grid over the bounding box.

        ``values`` has shape (res+1,) * n, matching ``np.linspace(lo, hi, res+1)`` per axis.
        """
        values = np.asarray(values, dtype=float)
        axes = [np.linspace(domain.lo[k], domain.hi[k], values.shape[k])
                for k in range(domain.dim)]
        interp = RegularGridInterpolator(axes, values, method="linear",
                                         bounds_error=False, fill_value=None)
        kw.setdefault("label", f"samples{values.shape}")
        return cls(lambda pts: interp(pts.reshape(-1, domain.dim)).reshape(pts.shape[:-1]),
                   domain, **kw)

    # evaluation --------------------------------------------------------

    def __call__(self, pts) -> np.ndarray:
        pts = _points(pts, self.dim)
        if not self.extended:
            inside = self.domain.contains(pts, tol=_EVAL_TOL * max(1.0, self.domain.diameter))
            if not np.all(inside):
                bad = pts[~inside].reshape(-1, self.dim)[0]
                raise DomainError(f"evaluation outside the domain at {bad.tolist()}")
        out = np.asarray(self._fn(pts), dtype=float)
        return np.broadcast_to(out, pts.shape[:-1])

    def raw(self, pts) -> np.ndarray:
        """Evaluate without the domain check (internal use)."""
        pts = _points(pts, self.dim)
        return np.broadcast_to(np.asarray(self._fn(pts), dtype=float), pts.shape[:-1])

    def sample(self, res: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes of the closure grid with ``res`` intervals per axis and the values there."""
        nodes = self.domain.grid_nodes(res)
        return nodes, self(nodes)

    # linear structure ---------------------------------------------------

    def _combine(self, other, op, name):
        if isinstance(other, GridFunction):
            if other.dim != self.dim:
                raise DomainError("dimension mismatch")
            f, g = self.raw, other.raw
            support = None
            if self.support is not None and other.support is not None:
                support = Box(np.minimum(self.support.lo, other.support.lo),
                              np.maximum(self.support.hi, other.support.hi))
            return GridFunction(lambda pts: op(f(pts), g(pts)), self.domain,
                                extended=self.extended and other.extended,
                                support=support,
                                label=f"({self.label} {name} {other.label})")
        c = float(other)
        f = self.raw
        # adding a nonzero constant spreads the support everywhere
        support = self.support if (name == "*" or c == 0) else None
        return GridFunction(lambda pts: op(f(pts), c), self.domain, extended=self.extended,
                            support=support, label=f"({self.label} {name} {c!r})")

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def restrict(self, domain: Domain) -> "GridFunction":
        return GridFunction(self.raw, domain, support=self.support, label=self.label)

    def __repr__(self):
        return f"GridFunction({self.label!r} on {self.domain!r})"
