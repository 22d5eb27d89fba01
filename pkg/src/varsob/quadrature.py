"""Composite quadrature on cell grids, including the weakly singular pair integrals.

Every modular the package needs has the form

    rho(lam) = sum_k w_k exp(c_k - P_k * log(lam))

where each term is one quadrature point (or point pair) with weight w_k and
exponent P_k.  :class:`ModularSum` stores the (c, P, w) arrays so that root-finding in lam only
re-evaluates exponentials.  Terms whose integrand vanishes are never stored.

Pair integrals over Omega x Omega split cell pairs into separated pairs (tensor
rule) and pairs whose closures touch the diagonal x = y.  Touching pairs are
subdivided ``diagonal_refine_depth`` times; at the last level coincident
sub-cells use a per-axis Duffy map, which never samples the diagonal itself.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .domains import Domain

__all__ = ["QuadratureSpec", "CellGrid", "ModularSum", "QuadratureError",
           "single_terms", "pair_terms", "default_quadrature"]


class QuadratureError(ValueError):
    """Bad quadrature parameters or a non-finite integrand sample."""


def _gauss(m: int):
    t, w = np.polynomial.legendre.leggauss(m)
    return (t + 1) / 2, w / 2


RULES = {
    "midpoint": (np.array([0.5]), np.array([1.0])),
    "gauss3": _gauss(3),
}


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy contract of an integral.

    ``cell_size`` (per axis) overrides ``cells_per_axis``; it is how grids on
    enclosing boxes are aligned with the grid of the original domain.
    ``threads`` only sets the worker count, results do not depend on it.
    """

    cells_per_axis: int = 256
    diagonal_refine_depth: int = 4
    rule: str = "midpoint"
    target_rel_tol: float = 1e-6
    cell_size: Optional[tuple] = None
    threads: int = 1

    def __post_init__(self):
        if self.cells_per_axis < 8:
            raise QuadratureError("cells_per_axis must be >= 8")
        if self.diagonal_refine_depth < 1:
            raise QuadratureError("diagonal_refine_depth must be >= 1")
        if self.rule not in RULES:
            raise QuadratureError(f"unknown rule {self.rule!r}; choose from {sorted(RULES)}")
        if self.threads < 1:
            raise QuadratureError("threads must be >= 1")
        if self.cell_size is not None:
            object.__setattr__(self, "cell_size", tuple(float(h) for h in self.cell_size))

    def refined(self) -> "QuadratureSpec":
        """The same spec at half the cell size."""
        cs = None if self.cell_size is None else tuple(h / 2 for h in self.cell_size)
        return replace(self, cells_per_axis=2 * self.cells_per_axis, cell_size=cs)

    def with_cell_size(self, h) -> "QuadratureSpec":
        return replace(self, cell_size=tuple(np.atleast_1d(h).tolist()))

    def to_dict(self) -> dict:
        return {"cells": self.cells_per_axis, "diag_depth": self.diagonal_refine_depth,
                "rule": self.rule, "cell_size": None if self.cell_size is None
                else list(self.cell_size)}


def default_quadrature(dim: int, **kw) -> QuadratureSpec:
    """256 cells in 1-D; 48 cells per axis and refinement depth 2 in 2-D."""
    if dim == 1:
        return QuadratureSpec(**kw)
    kw.setdefault("cells_per_axis", 48)
    kw.setdefault("diagonal_refine_depth", 2)
    return QuadratureSpec(**kw)


class CellGrid:
    """Uniform cells over the bounding box of ``domain``; points outside get weight 0."""

    def __init__(self, domain: Domain, quad: QuadratureSpec):
        self.domain = domain
        self.quad = quad
        n = self.dim = domain.dim
        side = domain.hi - domain.lo
        if quad.cell_size is not None:
            h = np.broadcast_to(np.asarray(quad.cell_size, dtype=float), (n,)).copy()
            counts = np.rint(side / h).astype(int)
            if np.any(counts < 1) or np.any(np.abs(counts * h - side) > 1e-9 * side):
                raise QuadratureError(f"cell size {h.tolist()} does not tile the box {side}")
        else:
            target = side.max() / quad.cells_per_axis
            counts = np.maximum(1, np.rint(side / target).astype(int))
            h = side / counts
        self.lo = domain.lo.astype(float)
        self.h = h
        self.counts = counts
        t, w = RULES[quad.rule]
        self.t1, self.w1 = t, w
        self.tnodes = np.array(list(itertools.product(t, repeat=n)))          # (m, n)
        self.tweights = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
        cells = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"),
                         axis=-1).reshape(-1, n)
        pts, wts = self.cell_points(cells, 0)
        keep = np.any(wts > 0, axis=1)
        self.cells = cells[keep]
        self.points = pts[keep]
        self.weights = wts[keep]
        ids = -np.ones(tuple(counts), dtype=np.int64)
        ids[tuple(self.cells.T)] = np.arange(len(self.cells))
        self._ids = ids

    def cell_points(self, idx: np.ndarray, level: int):
        """Rule points and weights of sub-cells ``idx`` (integer corners at ``level``)."""
        hl = self.h / 2 ** level
        pts = self.lo + (idx[:, None, :] + self.tnodes[None]) * hl
        w = np.broadcast_to(self.tweights * np.prod(hl), pts.shape[:-1]).copy()
        w[~self.domain.contains(pts)] = 0.0
        return pts, w

    def neighbor_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All ordered cell pairs (i, j) whose closures intersect, including i == j."""
        rows, cols = [], []
        for off in itertools.product((-1, 0, 1), repeat=self.dim):
            nb = self.cells + np.array(off)
            ok = np.all((nb >= 0) & (nb < self.counts), axis=1)
            j = -np.ones(len(nb), dtype=np.int64)
            j[ok] = self._ids[tuple(nb[ok].T)]
            good = j >= 0
            rows.append(np.nonzero(good)[0])
            cols.append(j[good])
        i = np.concatenate(rows)
        j = np.concatenate(cols)
        order = np.lexsort((j, i))
        return i[order], j[order]


class ModularSum:
    """rho(lam) = sum w exp(c - P log lam), with a fast path when P is constant.

    Keeping the weight out of the exponential makes rho exact for integrands
    equal to 1 (c = 0), so e.g. rho(1) = |Omega| holds to the last bit.
    """

    def __init__(self, c, P, w):
        self.c = np.ascontiguousarray(c, dtype=float)
        self.P = np.ascontiguousarray(P, dtype=float)
        self.w = np.ascontiguousarray(w, dtype=float)
        self._const_p = None
        if self.P.size and np.all(self.P == self.P[0]):
            m = float(self.c.max())
            self._const_p = (float(self.P[0]), m, float(np.sum(self.w * np.exp(self.c - m))))

    @property
    def empty(self) -> bool:
        return self.c.size == 0

    def __len__(self):
        return self.c.size

    def __call__(self, lam: float) -> float:
        if self.empty:
            return 0.0
        t = np.log(lam)
        with np.errstate(over="ignore"):
            if self._const_p is not None:
                p, m, s = self._const_p
                return float(np.exp(m - p * t) * s)
            return float(np.sum(self.w * np.exp(self.c - self.P * t)))


def _run(tasks: Sequence[Callable], threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda f: f(), tasks))


_EMPTY = (np.empty(0), np.empty(0), np.empty(0))


def _concat(parts) -> ModularSum:
    parts = [t for t in parts if t[0].size]
    if not parts:
        return ModularSum(*_EMPTY)
    return ModularSum(*(np.concatenate([t[k] for t in parts]) for k in range(3)))


def _eval_masked(fn, pts: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros(pts.shape[:-1])
    mask = w > 0
    if np.any(mask):
        out[mask] = fn(pts[mask])
    return out


def single_terms(grid: CellGrid, u: Callable, q: Callable) -> ModularSum:
    """Terms of int_Omega |u(x)|^q(x) dx (the Lebesgue modular)."""
    pts = grid.points.reshape(-1, grid.dim)
    w = grid.weights.reshape(-1)
    keep = w > 0
    pts, w = pts[keep], w[keep]
    U = np.abs(u(pts))
    if not np.all(np.isfinite(U)):
        raise QuadratureError("non-finite integrand sample")
    nz = U > 0
    pts, w, U = pts[nz], w[nz], U[nz]
    Q = np.asarray(q(pts), dtype=float) if len(pts) else np.empty(0)
    c = Q * np.log(U)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(Q))):
        raise QuadratureError("non-finite integrand sample")
    return ModularSum(c, Q, w)


def weighted_sum(grid: CellGrid, f: Callable) -> float:
    """Plain composite rule for int_Omega f dx."""
    pts = grid.points.reshape(-1, grid.dim)
    w = grid.weights.reshape(-1)
    keep = w > 0
    vals = f(pts[keep])
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand sample")
    return float(np.sum(w[keep] * vals))


class _PairKernel:
    """Turns point pairs into (c, P) terms of the Gagliardo modular."""

    def __init__(self, p: Callable, s: float, n: int):
        self.p, self.s, self.n = p, s, n

    def __call__(self, X, Y, UX, UY, W):
        X = X.reshape(-1, X.shape[-1])
        Y = Y.reshape(-1, Y.shape[-1])
        A = np.abs(UX - UY).reshape(-1)
        W = W.reshape(-1)
        r = np.linalg.norm(X - Y, axis=-1)
        keep = (A > 0) & (W > 0) & (r > 0)  # r == 0: the diagonal itself is skipped
        if not np.any(keep):
            return _EMPTY
        X, Y, A, W, r = X[keep], Y[keep], A[keep], W[keep], r[keep]
        if not np.all(np.isfinite(A)):
            raise QuadratureError("non-finite integrand sample")
        P = np.asarray(self.p(X, Y), dtype=float)
        c = P * np.log(A) - (self.n + self.s * P) * np.log(r)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(P))):
            raise QuadratureError("non-finite integrand sample off the diagonal")
        return c, P, W


def _duffy_1d(t, w):
    """Nodes (sx, sy) and weights on [0,1]^2 avoiding sx == sy, exact for constants."""
    xi, eta = np.meshgrid(t, t, indexing="ij")
    wx, we = np.meshgrid(w, w, indexing="ij")
    xi, eta, wt = xi.ravel(), eta.ravel(), (wx * we * xi).ravel()
    # triangle y < x: x = xi, y = xi (1 - eta); then its mirror image
    sx = np.concatenate([xi, xi * (1 - eta)])
    sy = np.concatenate([xi * (1 - eta), xi])
    return sx, sy, np.concatenate([wt, wt])


def pair_terms(grid: CellGrid, u: Callable, p: Callable, s: float,
               support_box=None, chunk: int = 1 << 20) -> ModularSum:
    """Terms of the Gagliardo modular over Omega x Omega.

    ``support_box`` (lo, hi) bounds the support of ``u``; cell pairs that both
    miss it are skipped, which is exact because the integrand vanishes there.
    """
    n = grid.dim
    depth = grid.quad.diagonal_refine_depth
    kernel = _PairKernel(p, s, n)
    Nc = len(grid.cells)
    m = grid.points.shape[1]
    U = _eval_masked(u, grid.points, grid.weights)               # (Nc, m)
    if not np.all(np.isfinite(U)):
        raise QuadratureError("non-finite integrand sample")
    zero_cell = np.all(U == 0, axis=1)
    if support_box is not None:
        lo, hi = support_box
        c_lo = grid.lo + grid.cells * grid.h
        c_hi = c_lo + grid.h
        dead = np.any((c_hi < lo) | (c_lo > hi), axis=1)
    else:
        dead = np.zeros(Nc, dtype=bool)

    tasks = []

    # separated cell pairs -------------------------------------------
    def regular_block(rows, cols):
        def task():
            ci, cj = grid.cells[rows], grid.cells[cols]
            far = np.max(np.abs(ci[:, None, :] - cj[None, :, :]), axis=-1) > 1
            ii, jj = np.nonzero(far)
            if ii.size == 0:
                return _EMPTY
            I, J = rows[ii], cols[jj]
            X = np.broadcast_to(grid.points[I][:, :, None, :], (len(I), m, m, n))
            Y = np.broadcast_to(grid.points[J][:, None, :, :], (len(I), m, m, n))
            UX = np.broadcast_to(U[I][:, :, None], (len(I), m, m))
            UY = np.broadcast_to(U[J][:, None, :], (len(I), m, m))
            W = grid.weights[I][:, :, None] * grid.weights[J][:, None, :]
            return kernel(X, Y, UX, UY, W)
        return task

    nonzero_ids = np.nonzero(~zero_cell)[0]
    zero_ids = np.nonzero(zero_cell)[0]
    all_ids = np.arange(Nc)
    for rows_all, cols in ((nonzero_ids, all_ids), (zero_ids, nonzero_ids)):
        if rows_all.size == 0 or cols.size == 0:
            continue
        step = max(1, chunk // (len(cols) * m * m))
        for start in range(0, len(rows_all), step):
            tasks.append(regular_block(rows_all[start:start + step], cols))

    # touching cell pairs, refined towards the diagonal ----------------
    ti, tj = grid.neighbor_pairs()
    live = ~(dead[ti] & dead[tj])
    a0, b0 = grid.cells[ti[live]], grid.cells[tj[live]]

    offsets = np.array(list(itertools.product((0, 1), repeat=n)))
    combos = np.array(list(itertools.product(range(len(offsets)), repeat=2)))
    sx1, sy1, sw1 = _duffy_1d(grid.t1, grid.w1)
    sel = np.array(list(itertools.product(range(len(sx1)), repeat=n)))  # (k, n)
    duffy_x = sx1[sel]                                                    # (k, n)
    duffy_y = sy1[sel]
    duffy_w = np.prod(sw1[sel], axis=1)

    def eval_u(pts, w):
        return _eval_masked(u, pts, w)

    def regular_subcells(a, b, level):
        X, WX = grid.cell_points(a, level)
        Y, WY = grid.cell_points(b, level)
        UX, UY = eval_u(X, WX), eval_u(Y, WY)
        K = len(a)
        Xb = np.broadcast_to(X[:, :, None, :], (K, m, m, n))
        Yb = np.broadcast_to(Y[:, None, :, :], (K, m, m, n))
        UXb = np.broadcast_to(UX[:, :, None], (K, m, m))
        UYb = np.broadcast_to(UY[:, None, :], (K, m, m))
        W = WX[:, :, None] * WY[:, None, :]
        return kernel(Xb, Yb, UXb, UYb, W)

    def self_subcells(a, level):
        hl = grid.h / 2 ** level
        X = grid.lo + (a[:, None, :] + duffy_x[None]) * hl
        Y = grid.lo + (a[:, None, :] + duffy_y[None]) * hl
        W = np.broadcast_to(duffy_w * np.prod(hl) ** 2, X.shape[:-1]).copy()
        inside = grid.domain.contains(X) & grid.domain.contains(Y)
        W[~inside] = 0.0
        UX, UY = eval_u(X, np.where(inside, 1.0, 0.0)), eval_u(Y, np.where(inside, 1.0, 0.0))
        return kernel(X, Y, UX, UY, W)

    def touching_block(a_start, b_start):
        def task():
            a, b = a_start, b_start
            out = []
            for level in range(1, depth + 1):
                ka = (2 * a[:, None, :] + offsets[combos[:, 0]][None]).reshape(-1, n)
                kb = (2 * b[:, None, :] + offsets[combos[:, 1]][None]).reshape(-1, n)
                touch = np.max(np.abs(ka - kb), axis=1) <= 1
                if np.any(~touch):
                    out.append(regular_subcells(ka[~touch], kb[~touch], level))
                a, b = ka[touch], kb[touch]
            same = np.all(a == b, axis=1)
            if np.any(~same):
                out.append(regular_subcells(a[~same], b[~same], depth))
            if np.any(same):
                out.append(self_subcells(a[same], depth))
            merged = _concat(out)
            return merged.c, merged.P, merged.w
        return task

    growth = (4 ** n) ** depth
    step = max(1, chunk // (growth * m))
    for start in range(0, len(a0), step):
        tasks.append(touching_block(a0[start:start + step], b0[start:start + step]))

    return _concat(_run(tasks, grid.quad.threads))
