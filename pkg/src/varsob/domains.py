"""Bounded domains of R^n (n = 1, 2) used throughout the package."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Domain", "Box", "HalfBox", "Ball", "SymmetricPair", "Half", "DomainError",
           "domain_from_config"]


class DomainError(ValueError):
    """Invalid or unsupported domain."""


class Domain:
    """Base class.  Subclasses provide ``dim``, ``lo``, ``hi`` and ``contains``."""

    kind = "domain"
    dim: int
    lo: np.ndarray
    hi: np.ndarray

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def contains_closed(self, pts) -> np.ndarray:
        return self.contains(pts, tol=1e-12 * max(1.0, self.diameter))

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def project(self, pts) -> np.ndarray:
        """A continuous retraction of R^n onto the closure (nearest point where cheap)."""
        raise NotImplementedError

    def boundary_samples(self, m: int) -> np.ndarray:
        raise DomainError(f"{self.kind} has no boundary parameterisation")

    def distance_to_boundary(self, pts) -> np.ndarray:
        raise NotImplementedError

    def grid_nodes(self, res: int) -> np.ndarray:
        """Nodes of the tensor grid with ``res`` intervals per axis that lie in the closure."""
        axes = [np.linspace(self.lo[k], self.hi[k], res + 1) for k in range(self.dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return mesh[self.contains_closed(mesh)]

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


def _as_points(pts, dim):
    pts = np.asarray(pts, dtype=float)
    if dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != dim:
        raise DomainError(f"expected points with {dim} coordinates, got shape {pts.shape}")
    return pts


class Box(Domain):
    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DomainError("lo and hi must be vectors of equal length")
        self.dim = self.lo.size
        if self.dim not in (1, 2):
            raise DomainError(f"unsupported dimension {self.dim}")
        if np.any(self.hi <= self.lo):
            raise DomainError("box must have positive side lengths")

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, self.dim)
        return np.all((pts > self.lo - tol) & (pts < self.hi + tol), axis=-1)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def project(self, pts):
        return np.clip(_as_points(pts, self.dim), self.lo, self.hi)

    def distance_to_boundary(self, pts):
        pts = _as_points(pts, self.dim)
        return np.min(np.minimum(pts - self.lo, self.hi - pts), axis=-1)

    def boundary_samples(self, m):
        if self.dim == 1:
            return np.array([[self.lo[0]], [self.hi[0]]])
        # perimeter walk; corners included
        per = 2 * np.sum(self.hi - self.lo)
        t = np.arange(m) * per / m
        w, h = self.hi - self.lo
        out = np.empty((m, 2))
        for i, s in enumerate(t):
            if s < w:
                out[i] = (self.lo[0] + s, self.lo[1])
            elif s < w + h:
                out[i] = (self.hi[0], self.lo[1] + s - w)
            elif s < 2 * w + h:
                out[i] = (self.hi[0] - (s - w - h), self.hi[1])
            else:
                out[i] = (self.lo[0], self.hi[1] - (s - 2 * w - h))
        return out

    def dilate(self, margin: float) -> "Box":
        return Box(self.lo - margin, self.hi + margin)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class HalfBox(Box):
    """The model half cell Q+ = {|x'| < 1, 0 < x_n < 1}."""

    kind = "halfbox"

    def __init__(self, n: int = 1):
        if n not in (1, 2):
            raise DomainError(f"unsupported dimension {n}")
        lo = -np.ones(n)
        lo[-1] = 0.0
        super().__init__(lo, np.ones(n))

    def to_dict(self):
        return {"kind": self.kind, "n": self.dim}


class Ball(Domain):
    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        self.dim = self.center.size
        if self.dim not in (1, 2):
            raise DomainError(f"unsupported dimension {self.dim}")
        if not self.radius > 0:
            raise DomainError("radius must be positive")
        self.lo = self.center - self.radius
        self.hi = self.center + self.radius

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, self.dim)
        return np.linalg.norm(pts - self.center, axis=-1) < self.radius + tol

    @property
    def diameter(self):
        return 2 * self.radius

    @property
    def volume(self):
        return 2 * self.radius if self.dim == 1 else math.pi * self.radius ** 2

    def project(self, pts):
        pts = _as_points(pts, self.dim)
        d = pts - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + d * scale

    def distance_to_boundary(self, pts):
        pts = _as_points(pts, self.dim)
        return self.radius - np.linalg.norm(pts - self.center, axis=-1)

    @property
    def boundary_length(self) -> float:
        return 2 * math.pi * self.radius if self.dim == 2 else 0.0

    def boundary_samples(self, m):
        if self.dim == 1:
            return np.array([self.lo, self.hi])
        t = 2 * math.pi * np.arange(m) / m
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class Half(Domain):
    """The part {x_n > 0} of a domain."""

    kind = "half"

    def __init__(self, base: Domain):
        self.base = base
        self.dim = base.dim
        self.lo = base.lo.copy()
        self.lo[-1] = max(0.0, self.lo[-1])
        self.hi = base.hi.copy()
        if self.hi[-1] <= self.lo[-1]:
            raise DomainError("domain has no part with x_n > 0")

    def contains(self, pts, tol=0.0):
        pts = _as_points(pts, self.dim)
        return self.base.contains(pts, tol) & (pts[..., -1] > -tol)

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def volume(self):
        return self.base.volume / 2

    def project(self, pts):
        out = self.base.project(pts).copy()
        out[..., -1] = np.maximum(out[..., -1], 0.0)
        return out

    def distance_to_boundary(self, pts):
        pts = _as_points(pts, self.dim)
        return np.minimum(self.base.distance_to_boundary(pts), pts[..., -1])

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict()}


class SymmetricPair(Domain):
    """A domain symmetric in x_n, split into Omega+ (x_n > 0) and Omega- (x_n <= 0)."""

    kind = "symmetric"

    def __init__(self, base: Domain, check_samples: int = 4096, seed: int = 0):
        self.base = base
        self.dim = base.dim
        self.lo, self.hi = base.lo, base.hi
        rng = np.random.default_rng(seed)
        pts = rng.uniform(self.lo, self.hi, size=(check_samples, self.dim))
        if not np.array_equal(base.contains(pts), base.contains(self.reflect(pts))):
            raise DomainError("domain is not symmetric under x_n -> -x_n")

    @staticmethod
    def reflect(pts) -> np.ndarray:
        out = np.array(pts, dtype=float, copy=True)
        out[..., -1] = -out[..., -1]
        return out

    @property
    def upper(self) -> Half:
        return Half(self.base)

    def contains(self, pts, tol=0.0):
        return self.base.contains(pts, tol)

    @property
    def diameter(self):
        return self.base.diameter

    @property
    def volume(self):
        return self.base.volume

    def project(self, pts):
        return self.base.project(pts)

    def distance_to_boundary(self, pts):
        return self.base.distance_to_boundary(pts)

    def boundary_samples(self, m):
        return self.base.boundary_samples(m)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict()}


def domain_from_config(kind: str, params: dict) -> Domain:
    """Build a domain from its ``domain.kind`` / ``domain.params`` config entries."""
    kind = kind.lower()
    if kind == "box":
        return Box(params["lo"], params["hi"])
    if kind == "interval":
        return Box([params["lo"]], [params["hi"]])
    if kind == "halfbox":
        return HalfBox(int(params.get("n", 1)))
    if kind in ("ball", "disc", "disk"):
        return Ball(params["center"], params["radius"])
    if kind == "symmetric":
        base = params["base"]
        return SymmetricPair(domain_from_config(base["kind"], base.get("params", base)))
    raise DomainError(f"unknown domain kind {kind!r}")
