"""Variable exponents q(x), p(x, y): bounds, conjugates, critical exponent, admissibility."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domains import Domain
from .expr import BinOp, Expression, Num, parse

__all__ = [
    "ExponentError", "ExponentField", "ExponentBounds", "SpaceParams",
    "ConstraintCheck", "ValidationReport",
    "exponent_bounds", "conjugate_exponent", "critical_exponent", "validate_admissibility",
    "default_grid",
]


class ExponentError(ValueError):
    """Inadmissible exponent data (values <= 1, non-finite, criticality violated...)."""


def default_grid(dim: int) -> int:
    return 256 if dim == 1 else 64


class ExponentField:
    """A bounded exponent of one point (``arity=1``) or of two points (``arity=2``).

    Outside its declared domain the field is evaluated at the image of the
    point under ``domain.project``, a continuous retraction onto the closure,
    so that it stays defined (with the same bounds) on all of R^n.
    """

    def __init__(self, fn: Callable, arity: int, dim: int, domain: Optional[Domain] = None,
                 *, label: str = "", const: Optional[float] = None,
                 expr: Optional[Expression] = None):
        if arity not in (1, 2):
            raise ExponentError("arity must be 1 or 2")
        if domain is not None and domain.dim != dim:
            raise ExponentError("domain dimension mismatch")
        self._fn = fn
        self.arity = arity
        self.dim = dim
        self.domain = domain
        self.label = label
        self.const = const
        self.expr = expr

    @classmethod
    def from_expr(cls, src, domain: Optional[Domain] = None, *, arity: Optional[int] = None,
                  dim: Optional[int] = None) -> "ExponentField":
        dim = dim or (domain.dim if domain is not None else None)
        e = src if isinstance(src, Expression) else parse(src, dim)
        if arity is None:
            arity = 2 if e.uses_y else 1
        if arity == 1 and e.uses_y:
            raise ExponentError(f"one-point exponent {e.source!r} references y")
        if arity == 1:
            fn = lambda x, y=None: e(x)  # noqa: E731
        else:
            fn = lambda x, y: e(x, y)  # noqa: E731
        return cls(fn, arity, e.dim, domain, label=e.source, expr=e)

    @classmethod
    def constant(cls, value: float, dim: int = 1, *, arity: int = 1,
                 domain: Optional[Domain] = None) -> "ExponentField":
        c = float(value)

        def fn(x, y=None):
            shape = np.shape(x)[:-1] if y is None else np.broadcast_shapes(
                np.shape(x)[:-1], np.shape(y)[:-1])
            return np.full(shape, c)
        return cls(fn, arity, dim, domain, label=repr(c), const=c)

    @classmethod
    def from_samples(cls, values, domain: Domain, *, arity: int = 1) -> "ExponentField":
        """Multilinear interpolant of values on the closure grid of the bounding box.

        For ``arity=2`` the grid is over domain x domain, axes ordered (x..., y...).
        """
        values = np.asarray(values, dtype=float)
        n = domain.dim
        axes = [np.linspace(domain.lo[k % n], domain.hi[k % n], values.shape[k])
                for k in range(arity * n)]
        interp = RegularGridInterpolator(axes, values, bounds_error=False, fill_value=None)

        def fn(x, y=None):
            pts = x if y is None else np.concatenate(np.broadcast_arrays(x, y), axis=-1)
            pts = np.asarray(pts, dtype=float)
            return interp(pts.reshape(-1, pts.shape[-1])).reshape(pts.shape[:-1])
        return cls(fn, arity, n, domain, label=f"samples{values.shape}")

    def _retract(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        if self.domain is None:
            return pts
        inside = self.domain.contains_closed(pts)
        if np.all(inside):
            return pts
        return np.where(inside[..., None], pts, self.domain.project(pts))

    def __call__(self, x, y=None) -> np.ndarray:
        x = self._retract(x)
        if self.arity == 1:
            return np.asarray(self._fn(x), dtype=float)
        if y is None:
            raise ExponentError("two-point exponent needs both x and y")
        return np.asarray(self._fn(x, self._retract(y)), dtype=float)

    def diagonal(self) -> "ExponentField":
        """The one-point field x -> p(x, x)."""
        if self.arity == 1:
            return self
        if self.const is not None:
            return ExponentField.constant(self.const, self.dim, domain=self.domain)
        return ExponentField(lambda x, y=None: self(x, x), 1, self.dim, self.domain,
                             label=f"diag({self.label})")

    def as_two_point(self) -> "ExponentField":
        if self.arity == 2:
            return self
        if self.const is not None:
            return ExponentField.constant(self.const, self.dim, arity=2, domain=self.domain)
        return ExponentField(lambda x, y: self(x), 2, self.dim, self.domain, label=self.label,
                             expr=self.expr)

    def __repr__(self):
        return f"ExponentField({self.label!r}, arity={self.arity}, dim={self.dim})"


@dataclass(frozen=True)
class ExponentBounds:
    p_minus: float
    p_plus: float
    alpha: float
    beta: float
    grid_used: int


@dataclass(frozen=True)
class SpaceParams:
    """Parameters of W^{s,p(.,.)}: smoothness s, dimension n, exponents p (two-point) and q."""

    s: float
    n: int
    p: ExponentField
    q: ExponentField

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ExponentError(f"s must lie in (0, 1), got {self.s}")
        if self.n not in (1, 2):
            raise ExponentError(f"n must be 1 or 2, got {self.n}")
        if self.p.arity != 2:
            object.__setattr__(self, "p", self.p.as_two_point())
        if self.q.arity != 1:
            raise ExponentError("q must be a one-point exponent")
        if self.p.dim != self.n or self.q.dim != self.n:
            raise ExponentError("exponent dimension does not match n")


def _require_domain(f: ExponentField, domain: Optional[Domain]) -> Domain:
    d = domain or f.domain
    if d is None:
        raise ExponentError(f"{f!r} has no declared domain to sample")
    return d


def _extrema(f: ExponentField, domain: Domain, grid_res: int, chunk: int = 1 << 21):
    """(min, argmin point, max, argmax point) of ``f`` over the validation grid."""
    nodes = domain.grid_nodes(grid_res)
    if f.arity == 1:
        vals = f(nodes)
        if not np.all(np.isfinite(vals)):
            raise ExponentError(f"{f!r} is not finite on the validation grid")
        i, j = int(np.argmin(vals)), int(np.argmax(vals))
        return float(vals[i]), nodes[i], float(vals[j]), nodes[j]
    lo, hi = np.inf, -np.inf
    lo_pt = hi_pt = None
    rows = max(1, chunk // len(nodes))
    for start in range(0, len(nodes), rows):
        xs = nodes[start:start + rows, None, :]
        vals = f(xs, nodes[None, :, :])
        if not np.all(np.isfinite(vals)):
            raise ExponentError(f"{f!r} is not finite on the validation grid")
        i, j = np.unravel_index(np.argmin(vals), vals.shape), \
            np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i] < lo:
            lo, lo_pt = float(vals[i]), np.concatenate([xs[i[0], 0], nodes[i[1]]])
        if vals[j] > hi:
            hi, hi_pt = float(vals[j]), np.concatenate([xs[j[0], 0], nodes[j[1]]])
    return lo, lo_pt, hi, hi_pt


def exponent_bounds(f: ExponentField, grid_res: Optional[int] = None,
                    domain: Optional[Domain] = None) -> ExponentBounds:
    """p-, p+ as min/max over the tensor grid (``grid_res`` intervals per axis), plus alpha, beta."""
    grid_res = grid_res or default_grid(f.dim)
    if grid_res < 2:
        raise ExponentError("grid_res must be at least 2")
    if f.const is not None:
        lo = hi = f.const
    else:
        lo, _, hi, _ = _extrema(f, _require_domain(f, domain), grid_res)
    if not lo > 1:
        raise ExponentError(f"inadmissible exponent {f!r}: value {lo} <= 1")
    alpha = min(1.0, min(hi, lo))
    beta = max(1.0, max(hi, lo))
    return ExponentBounds(lo, hi, alpha, beta, grid_res)


def conjugate_exponent(f: ExponentField, grid_res: Optional[int] = None) -> ExponentField:
    """Pointwise p' = p / (p - 1)."""
    if f.const is not None:
        if not f.const > 1:
            raise ExponentError(f"conjugate undefined for constant exponent {f.const}")
        c = f.const / (f.const - 1.0)
        return ExponentField.constant(c, f.dim, arity=f.arity, domain=f.domain)
    if f.domain is not None:
        try:
            exponent_bounds(f, grid_res)
        except ExponentError as exc:
            raise ExponentError(f"conjugate undefined: {exc}") from None
    if f.expr is not None:
        root = f.expr.root
        e = Expression(BinOp("/", root, BinOp("-", root, Num(1.0))), f.expr.dim, "")
        e = Expression(e.root, e.dim, str(e))
        return ExponentField.from_expr(e, f.domain, arity=f.arity)

    def fn(x, y=None):
        p = f(x) if y is None else f(x, y)
        return p / (p - 1.0)
    return ExponentField(fn, f.arity, f.dim, f.domain, label=f"conj({f.label})")


def critical_exponent(params: SpaceParams, grid_res: Optional[int] = None) -> ExponentField:
    """p*(x) = n p(x,x) / (n - s p(x,x))."""
    n, s = params.n, params.s
    diag = params.p.diagonal()
    if diag.const is not None:
        if not s * diag.const < n:
            raise ExponentError(f"criticality violated: s*p = {s * diag.const} >= n = {n}")
        return ExponentField.constant(n * diag.const / (n - s * diag.const), n,
                                      domain=params.p.domain)
    domain = _require_domain(diag, None)
    _, _, hi, pt = _extrema(diag, domain, grid_res or default_grid(n))
    if not s * hi < n:
        raise ExponentError(f"criticality violated at {pt.tolist()}: s*p = {s * hi} >= n = {n}")

    def fn(x, y=None):
        d = diag(x)
        return n * d / (n - s * d)
    return ExponentField(fn, 1, n, domain, label=f"crit({params.p.label})")


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    satisfied: bool
    margin: float
    point: tuple


@dataclass(frozen=True)
class ValidationReport:
    constraints: tuple = field(default_factory=tuple)
    grid_used: int = 0

    @property
    def verdict(self) -> bool:
        return all(c.satisfied for c in self.constraints)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "grid": self.grid_used,
                "constraints": [{"name": c.name, "satisfied": c.satisfied, "margin": c.margin,
                                 "point": list(c.point)} for c in self.constraints]}


def _sampled(f: ExponentField, nodes):
    if f.const is not None:
        return np.full(len(nodes), f.const)
    return f(nodes)


def validate_admissibility(params: SpaceParams, r: Optional[ExponentField] = None,
                           grid_res: Optional[int] = None,
                           domain: Optional[Domain] = None) -> ValidationReport:
    """Check the standing hypotheses on the validation grid; failures are reported, not raised.

    Constraints: s p(x,y) < n; q(x) > p(x,x); p*(x) > p+ q(x); and, with ``r``,
    p*(x) > r(x) and r- > 1.  Each entry carries its worst margin and where it occurs.
    """
    n, s = params.n, params.s
    grid_res = grid_res or default_grid(n)
    domain = domain or params.q.domain or params.p.domain
    checks = []

    p = params.p
    if p.const is not None:
        p_lo = p_hi = p.const
        lo_pt = hi_pt = ()
    else:
        p_lo, lo_pt, p_hi, hi_pt = _extrema(p, _require_domain(p, domain), grid_res)
        lo_pt, hi_pt = tuple(map(float, lo_pt)), tuple(map(float, hi_pt))
    checks.append(ConstraintCheck("s*p(x,y) < n", bool(n - s * p_hi > 0), float(n - s * p_hi),
                                  hi_pt))

    if domain is None:
        nodes = np.zeros((1, n))  # all fields constant
    else:
        nodes = domain.grid_nodes(grid_res)
    diag = _sampled(p.diagonal(), nodes)
    qv = _sampled(params.q, nodes)

    def worst(name, margins):
        i = int(np.argmin(margins))
        m = float(margins[i])
        pt = tuple(map(float, nodes[i])) if domain is not None else ()
        checks.append(ConstraintCheck(name, bool(m > 0), m, pt))

    worst("q(x) > p(x,x)", qv - diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = n - s * diag
        pstar = np.where(denom > 0, n * diag / np.where(denom > 0, denom, 1.0), np.nan)
    crit_margin = np.where(np.isnan(pstar), -np.inf, pstar - p_hi * qv)
    worst("p*(x) > p+ q(x)", crit_margin)
    if r is not None:
        rv = _sampled(r, nodes)
        worst("p*(x) > r(x)", np.where(np.isnan(pstar), -np.inf, pstar - rv))
        i = int(np.argmin(rv))
        pt = tuple(map(float, nodes[i])) if domain is not None else ()
        checks.append(ConstraintCheck("r- > 1", bool(rv[i] - 1 > 0), float(rv[i] - 1), pt))
    return ValidationReport(tuple(checks), grid_res)
