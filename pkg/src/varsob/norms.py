"""Modulars, Luxemburg norms, the two-point Gagliardo seminorm and the full space norm.

Every norm here is ``inf{lam > 0 : rho(u / lam) <= 1}`` for a modular rho that
is continuous and strictly decreasing in lam wherever it is positive, so it is
computed by bracketing plus bisection on a precomputed :class:`ModularSum`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domains import Domain
from .exponents import ExponentError, ExponentField, SpaceParams
from .functions import GridFunction
from .quadrature import (CellGrid, ModularSum, QuadratureError, QuadratureSpec,
                         default_quadrature, pair_terms, single_terms, weighted_sum)

__all__ = ["NormResult", "NormError", "modular_lebesgue", "luxemburg_norm",
           "seminorm_double_integral", "gagliardo_seminorm", "sobolev_norm", "pairing",
           "lebesgue_terms", "seminorm_terms", "norm_from_modular"]

REL_WIDTH = 1e-10
MAX_DOUBLINGS = 200
# rho(1) >= 1e-300 and exponents > 1 put the norm above ~1e-300 ~ 2^-997
MAX_HALVINGS = 1000
ZERO_MODULAR = 1e-300


class NormError(ArithmeticError):
    """The modular could not be bracketed around 1."""


@dataclass(frozen=True)
class NormResult:
    value: float
    modular_at_value: float
    bracket: tuple
    refinement_estimate: Optional[float] = None

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "bracket": list(self.bracket),
                "modular_at_value": self.modular_at_value,
                "refinement_estimate": self.refinement_estimate}


def _quad(quad: Optional[QuadratureSpec], omega: Domain) -> QuadratureSpec:
    return quad if quad is not None else default_quadrature(omega.dim)


def _support_box(u: GridFunction):
    return None if u.support is None else (u.support.lo, u.support.hi)


def norm_from_modular(rho: ModularSum) -> NormResult:
    """Bisection for rho(lam) = 1 with the bracket grown from lam = 1."""
    if rho.empty or rho(1.0) < ZERO_MODULAR:
        return NormResult(0.0, 0.0, (0.0, 0.0))
    lo, hi = 1.0, 1.0
    if rho(1.0) > 1.0:
        for _ in range(MAX_DOUBLINGS):
            hi *= 2.0
            if rho(hi) <= 1.0:
                break
            lo = hi
        else:
            raise NormError("no bracket after 200 doublings (modular not finite?)")
    else:
        for _ in range(MAX_HALVINGS):
            lo /= 2.0
            if rho(lo) > 1.0:
                break
            hi = lo
        else:
            raise NormError(f"no bracket after {MAX_HALVINGS} halvings")
    # invariant: rho(lo) > 1 >= rho(hi)
    while hi - lo > REL_WIDTH * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    # hi is the smallest bracketed lam known to satisfy rho(u / lam) <= 1
    return NormResult(hi, rho(hi), (lo, hi))


def _with_refinement(compute, quad: QuadratureSpec, refine: bool) -> NormResult:
    res = compute(quad)
    if not refine:
        return res
    fine = compute(quad.refined())
    est = abs(res.value - fine.value) / res.value if res.value > 0 else 0.0
    return NormResult(res.value, res.modular_at_value, res.bracket, est)


def _check_q(q: ExponentField):
    if q.arity != 1:
        raise ExponentError("a Lebesgue exponent must be a one-point field")


def lebesgue_terms(u: GridFunction, q: ExponentField, omega: Domain,
                   quad: Optional[QuadratureSpec] = None) -> ModularSum:
    _check_q(q)
    return single_terms(CellGrid(omega, _quad(quad, omega)), u, q)


def modular_lebesgue(u: GridFunction, q: ExponentField, omega: Domain,
                     quad: Optional[QuadratureSpec] = None) -> float:
    """Composite-rule value of int_omega |u|^q dx."""
    return lebesgue_terms(u, q, omega, quad)(1.0)


def luxemburg_norm(u: GridFunction, q: ExponentField, omega: Domain,
                   quad: Optional[QuadratureSpec] = None, *, refine: bool = False) -> NormResult:
    """||u||_{L^q(omega)}; with ``refine`` the result carries the h vs h/2 change."""
    return _with_refinement(lambda qs: norm_from_modular(lebesgue_terms(u, q, omega, qs)),
                            _quad(quad, omega), refine)


def seminorm_terms(u: GridFunction, params: SpaceParams, omega: Domain,
                   quad: Optional[QuadratureSpec] = None) -> ModularSum:
    if params.n != omega.dim:
        raise ExponentError("space dimension does not match the domain")
    return pair_terms(CellGrid(omega, _quad(quad, omega)), u, params.p, params.s,
                      support_box=_support_box(u))


def seminorm_double_integral(u: GridFunction, params: SpaceParams, omega: Domain,
                             lam: float = 1.0, quad: Optional[QuadratureSpec] = None) -> float:
    """The double integral of |u(x)-u(y)|^p / (lam^p |x-y|^(n+s p)) over omega^2."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return seminorm_terms(u, params, omega, quad)(lam)


def gagliardo_seminorm(u: GridFunction, params: SpaceParams, omega: Domain,
                       quad: Optional[QuadratureSpec] = None, *,
                       refine: bool = False) -> NormResult:
    return _with_refinement(
        lambda qs: norm_from_modular(seminorm_terms(u, params, omega, qs)),
        _quad(quad, omega), refine)


def sobolev_norm(u: GridFunction, params: SpaceParams, omega: Domain,
                 quad: Optional[QuadratureSpec] = None) -> float:
    """||u||_{L^q} + [u]_{s,p}."""
    return (luxemburg_norm(u, params.q, omega, quad).value
            + gagliardo_seminorm(u, params, omega, quad).value)


def pairing(u: GridFunction, v: GridFunction, omega: Domain,
            quad: Optional[QuadratureSpec] = None) -> float:
    """|int_omega u v dx|."""
    grid = CellGrid(omega, _quad(quad, omega))
    return abs(weighted_sum(grid, lambda pts: u(pts) * v(pts)))


__all__ += ["QuadratureError"]
