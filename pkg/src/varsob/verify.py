"""Numerical checks of the inequalities and identities of the theory.

Each check returns an :class:`InequalityCase`; sweeps over seeded function
families return a :class:`ConstantEstimate`, whose ``sup_ratio`` is the
empirical stand-in for an unspecified constant C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .domains import Box, Domain
from .exponents import (ExponentError, ExponentField, SpaceParams, conjugate_exponent,
                        exponent_bounds, validate_admissibility)
from .functions import GridFunction
from .geometry import (Cutoff, PartitionOfUnity, boundary_points, bump, chart_atlas,
                       partition_of_unity)
from .norms import (gagliardo_seminorm, luxemburg_norm, pairing, seminorm_double_integral,
                    sobolev_norm)
from .operators import extend, kernel_decompose, trace, truncate, zero_extend
from .quadrature import QuadratureSpec, default_quadrature

__all__ = [
    "InequalityCase", "ConstantEstimate", "HypothesisNotMet", "Problem", "FamilySpec",
    "check_holder", "check_integral_estimate", "check_alpha_beta_bound", "check_embedding",
    "check_decomposition", "estimate_constant", "default_problem", "summarize",
    "HOLDER_TOL", "DRIFT_TOL", "truncation_cutoff", "run_check", "CHECKS",
]

HOLDER_TOL = 1e-6
DRIFT_TOL = 0.1


class HypothesisNotMet(ExponentError):
    """The hypotheses of the inequality do not hold, so the check is refused."""


@dataclass
class InequalityCase:
    check: str
    case_id: str
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    h: float
    ratio_half_h: Optional[float] = None
    seed: Optional[int] = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.check, "case_id": self.case_id, "lhs": self.lhs,
                "rhs": self.rhs, "ratio": self.ratio, "pass": self.passed, "h": self.h,
                "ratio_half_h": self.ratio_half_h, "seed": self.seed, "inputs": self.inputs}


@dataclass
class ConstantEstimate:
    family: str
    sup_ratio: float
    ratios: list
    refinement_stable: bool
    unstable_cases: list
    cases: list

    @property
    def violations(self) -> int:
        return sum(not c.passed for c in self.cases)

    def to_dict(self) -> dict:
        return {"family": self.family, "sup_ratio": self.sup_ratio, "ratios": self.ratios,
                "refinement_stable": self.refinement_stable,
                "unstable_cases": self.unstable_cases, "violations": self.violations}


@dataclass
class Problem:
    """Everything a check needs besides the function(s) under test."""

    omega: Domain
    params: SpaceParams
    quad: QuadratureSpec
    r: Optional[ExponentField] = None
    atlas: Optional[list] = None
    pou: Optional[PartitionOfUnity] = None
    margin_factor: float = 2.0

    def with_geometry(self, k: int = 8) -> "Problem":
        if self.atlas is not None:
            return self
        atlas = chart_atlas(self.omega, k)
        pou = partition_of_unity([c.ball for c in atlas], boundary_points(self.omega))
        return replace(self, atlas=atlas, pou=pou)


def default_problem(dim: int = 1, cells: Optional[int] = None, **kw) -> Problem:
    """Omega = (0,1) or the unit disc; s = 0.4, p = 2 + 0.25 sin(x+y), q = 2.5 + 0.2 x."""
    from .domains import Ball
    omega = Box([0.0], [1.0]) if dim == 1 else Ball([0.0, 0.0], 1.0)
    if dim == 1:
        p = ExponentField.from_expr("2 + 0.25*sin(x + y)", omega, arity=2)
        q = ExponentField.from_expr("2.5 + 0.2*x", omega)
    else:
        p = ExponentField.from_expr("2 + 0.25*sin(x1 + y2)", omega, arity=2)
        q = ExponentField.from_expr("2.5 + 0.2*x1", omega)
    quad = default_quadrature(dim) if cells is None else default_quadrature(
        dim, cells_per_axis=cells)
    return Problem(omega, SpaceParams(0.4, dim, p, q), quad, **kw)


def _h(problem_or_quad, omega) -> float:
    from .quadrature import CellGrid
    return float(np.max(CellGrid(omega, problem_or_quad).h))


def _drift(a: float, b: float) -> float:
    if a == 0 and b == 0:
        return 0.0
    if a == 0:
        return math.inf
    return abs(a - b) / abs(a)


def _stable_pass(ratio, ratio_half):
    return bool(math.isfinite(ratio) and math.isfinite(ratio_half)
                and _drift(ratio, ratio_half) < DRIFT_TOL)


# ---------------------------------------------------------------------------
# single checks

def check_holder(u: GridFunction, v: GridFunction, p: ExponentField, omega: Domain,
                 quad: Optional[QuadratureSpec] = None, *, case_id: str = "",
                 seed: Optional[int] = None, inputs: Optional[dict] = None) -> InequalityCase:
    """|int u v| <= 2 ||u||_p ||v||_p'."""
    quad = quad or default_quadrature(omega.dim)
    lhs = pairing(u, v, omega, quad)
    pc = conjugate_exponent(p)
    nu = luxemburg_norm(u, p, omega, quad).value
    nv = luxemburg_norm(v, pc, omega, quad).value
    rhs = 2.0 * nu * nv
    ratio = lhs / (nu * nv) if nu * nv > 0 else 0.0
    passed = bool(lhs <= rhs * (1 + HOLDER_TOL))
    return InequalityCase("holder", case_id, lhs, rhs, ratio, passed, _h(quad, omega),
                          None, seed, inputs or {"u": u.label, "v": v.label, "p": p.label})


def _integral_estimate_at(u, params, omega, quad):
    lhs = seminorm_double_integral(u, params, omega, 1.0, quad)
    norm = sobolev_norm(u, params, omega, quad)
    b = exponent_bounds(params.p, domain=omega)
    rhs = norm ** b.p_plus + norm ** b.p_minus
    return lhs, rhs, (lhs / rhs if rhs > 0 else 0.0)


def check_integral_estimate(u: GridFunction, params: SpaceParams, omega: Domain,
                            quad: Optional[QuadratureSpec] = None, *, case_id: str = "",
                            seed: Optional[int] = None, inputs: Optional[dict] = None
                            ) -> InequalityCase:
    """ratio = double integral / (||u||_W^p+ + ||u||_W^p-), checked at h and h/2."""
    quad = quad or default_quadrature(omega.dim)
    lhs, rhs, ratio = _integral_estimate_at(u, params, omega, quad)
    _, _, ratio2 = _integral_estimate_at(u, params, omega, quad.refined())
    return InequalityCase("integral_estimate", case_id, lhs, rhs, ratio,
                          _stable_pass(ratio, ratio2), _h(quad, omega), ratio2, seed,
                          inputs or {"u": u.label})


def _apply(kind: str, u: GridFunction, problem: Problem, extra: dict):
    """(f(u) as a function, domain of its norm, quadrature for that domain)."""
    omega, quad = problem.omega, problem.quad
    if kind == "truncate":
        psi = extra["psi"]
        return truncate(psi, u), omega, quad
    if kind == "zero_extend":
        ext = zero_extend(u, omega, extra["support_K"], margin_factor=problem.margin_factor,
                          cell=_cell(omega, quad))
    elif kind == "extend":
        pr = problem.with_geometry()
        ext = extend(u, omega, pr.atlas, pr.pou, margin_factor=problem.margin_factor,
                     cell=_cell(omega, quad))
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    return ext.function, ext.hull, ext.quad(quad)


def _cell(omega, quad):
    from .quadrature import CellGrid
    return CellGrid(omega, quad).h


def _alpha_beta_at(kind, u, problem, extra):
    omega = problem.omega
    params = problem.params
    nu = sobolev_norm(u, params, omega, problem.quad)
    fu, dom, q2 = _apply(kind, u, problem, extra)
    nf = sobolev_norm(fu, params, dom, q2)
    b = exponent_bounds(params.p, domain=omega)
    expo = b.beta if nu >= 1 else b.alpha
    ratio = nf / nu ** expo if nu > 0 else 0.0
    return nf, nu, expo, ratio


def check_alpha_beta_bound(kind: str, u: GridFunction, problem: Problem, *,
                           case_id: str = "", seed: Optional[int] = None,
                           inputs: Optional[dict] = None, **extra) -> InequalityCase:
    """||f(u)|| against ||u||^beta (||u|| >= 1) or ||u||^alpha (||u|| <= 1).

    ``kind`` is zero_extend (needs ``support_K``), truncate (needs ``psi``) or
    extend (uses the problem's atlas, built on demand).
    """
    nf, nu, expo, ratio = _alpha_beta_at(kind, u, problem, extra)
    fine = replace(problem, quad=problem.quad.refined())
    _, _, _, ratio2 = _alpha_beta_at(kind, u, fine, extra)
    info = {"u": u.label, "norm_u": nu, "branch_exponent": expo}
    info.update(inputs or {})
    return InequalityCase(f"alpha_beta_{kind}", case_id, nf, nu ** expo if nu > 0 else 0.0,
                          ratio, _stable_pass(ratio, ratio2), _h(problem.quad, problem.omega),
                          ratio2, seed, info)


def check_embedding(u: GridFunction, params: SpaceParams, r: ExponentField, omega: Domain,
                    quad: Optional[QuadratureSpec] = None, *, case_id: str = "",
                    seed: Optional[int] = None, inputs: Optional[dict] = None
                    ) -> InequalityCase:
    """ratio = ||u||_{L^r} / ||u||_W; refused unless the embedding hypotheses hold."""
    report = validate_admissibility(params, r, domain=omega)
    if not report.verdict:
        failed = [c.name for c in report.constraints if not c.satisfied]
        raise HypothesisNotMet(f"embedding hypotheses fail: {', '.join(failed)}")
    quad = quad or default_quadrature(omega.dim)

    def at(qs):
        lhs = luxemburg_norm(u, r, omega, qs).value
        rhs = sobolev_norm(u, params, omega, qs)
        return lhs, rhs, (lhs / rhs if rhs > 0 else 0.0)

    lhs, rhs, ratio = at(quad)
    _, _, ratio2 = at(quad.refined())
    return InequalityCase("embedding", case_id, lhs, rhs, ratio, _stable_pass(ratio, ratio2),
                          _h(quad, omega), ratio2, seed, inputs or {"u": u.label, "r": r.label})


def check_decomposition(u: GridFunction, omega: Domain, atlas, pou, *,
                        v: Optional[GridFunction] = None, res: Optional[int] = None,
                        case_id: str = "", seed: Optional[int] = None, tag: str = ""
                        ) -> InequalityCase:
    """Identities on the omega grid nodes, tolerance 0.

    (a) kernel_part + image_part = u, (b) kernel_part = 0, (c) T(E v) = v for a
    target v on omega (u restricted to omega when v is not given).  lhs counts
    failing nodes; rhs is 0.  Off omega the sum is also compared with u, where
    rounding u - E(Tu) and then adding E(Tu) back allows a difference of at
    most one ulp of max(|u|, |u - E(Tu)|).
    """
    res = res or (256 if omega.dim == 1 else 64)
    nodes = omega.grid_nodes(res)
    dec = kernel_decompose(u, omega, atlas, pou)
    uv = u(nodes)
    fail_sum = int(np.sum(dec.recombine()(nodes) != uv))
    fail_ker = int(np.sum(trace(dec.kernel_part, omega)(nodes) != 0))
    target = v if v is not None else trace(u, omega)
    ext = extend(target, omega, atlas, pou)
    fail_surj = int(np.sum(trace(ext.function, omega)(nodes) != target(nodes)))
    hull_nodes = dec.extension.hull.grid_nodes(res * 2)
    hull_nodes = hull_nodes[u.domain.contains_closed(hull_nodes)] if not u.extended \
        else hull_nodes
    uh = u(hull_nodes)
    off = np.abs(dec.recombine()(hull_nodes) - uh)
    # two roundings: d = u - e, then d + e; each is within half an ulp of its result
    scale = np.maximum(np.abs(uh), np.abs(dec.kernel_part(hull_nodes)))
    ulp_ok = bool(np.all(off <= np.spacing(scale)))
    bad = fail_sum + fail_ker + fail_surj + (0 if ulp_ok else 1)
    inputs = {"u": u.label, "sum_failures": fail_sum, "kernel_failures": fail_ker,
              "surjectivity_failures": fail_surj, "nodes": int(len(nodes)),
              "hull_max_deviation": float(off.max()) if off.size else 0.0,
              "hull_within_one_ulp": ulp_ok}
    if tag:
        inputs["tag"] = tag
    return InequalityCase("decomposition", case_id, float(bad), 0.0, float(bad), bad == 0,
                          float(1.0 / res), None, seed, inputs)


# ---------------------------------------------------------------------------
# seeded families

def _fmt(c: float) -> str:
    return repr(float(c))


def trig_source(rng: np.random.Generator, dim: int, terms: int = 5) -> str:
    """sum_j a_j sin(j pi x) + b_j cos(j pi x), coefficients uniform in [-1, 1]."""
    a = rng.uniform(-1, 1, terms)
    b = rng.uniform(-1, 1, terms)
    xs, xc = ("x", "x") if dim == 1 else ("x1", "x2")
    parts = []
    for j in range(1, terms + 1):
        parts.append(f"{_fmt(a[j - 1])}*sin({j}*pi*{xs})")
        parts.append(f"{_fmt(b[j - 1])}*cos({j}*pi*{xc})")
    return " + ".join(parts)


def bump_source(rng: np.random.Generator, dim: int, omega: Domain):
    """A Lipschitz function vanishing outside a box K well inside omega, and K."""
    if dim == 1:
        lo, hi = float(omega.lo[0]), float(omega.hi[0])
        L = hi - lo
        a = lo + L * rng.uniform(0.1, 0.4)
        b = lo + L * rng.uniform(0.6, 0.9)
        k = rng.integers(1, 6)
        norm = ((b - a) / 2) ** 4
        src = (f"max(0, (x - {_fmt(a)})*({_fmt(b)} - x))^2 * (1 + 0.5*sin({k}*x))"
               f" / {_fmt(norm)}")
        return src, Box([a], [b])
    c = omega.lo + (omega.hi - omega.lo) * 0.5 + rng.uniform(-0.1, 0.1, 2)
    r0 = rng.uniform(0.3, 0.5) * float(np.min(omega.hi - omega.lo)) / 2
    src = (f"max(0, {_fmt(r0 * r0)} - (x1 - {_fmt(c[0])})^2 - (x2 - {_fmt(c[1])})^2)^2"
           f" / {_fmt(r0 ** 4)}")
    return src, Box(c - r0, c + r0)


def holder_exponent_source(rng: np.random.Generator, dim: int) -> str:
    c0 = rng.uniform(1.3, 4.0)
    c1 = rng.uniform(0.0, min(0.3, c0 - 1.15))
    k = rng.integers(1, 5)
    x = "x" if dim == 1 else "x1"
    return f"{_fmt(c0)} + {_fmt(c1)}*sin({k}*{x})"


@dataclass(frozen=True)
class FamilySpec:
    """A deterministic generator of test inputs.

    kind: trig (scaled so the norms straddle 1), bump (compactly supported),
    holder ((u, v, p) triples), zero (the singleton {0}), monomial (u = x).
    """

    kind: str
    cases: int
    seed: int = 0
    dim: int = 1
    scale_range: tuple = (0.01, 1.0)

    def describe(self) -> str:
        return f"{self.kind}(cases={self.cases}, seed={self.seed}, dim={self.dim})"

    def members(self, omega: Domain) -> list:
        rng = np.random.default_rng(self.seed)
        out = []
        lo, hi = np.log(self.scale_range[0]), np.log(self.scale_range[1])
        for i in range(self.cases):
            if self.kind == "zero":
                out.append({"u": "0"})
            elif self.kind == "monomial":
                out.append({"u": "x" if self.dim == 1 else "x1"})
            elif self.kind == "trig":
                src = trig_source(rng, self.dim)
                scale = math.exp(rng.uniform(lo, hi))
                out.append({"u": f"{_fmt(scale)}*({src})"})
            elif self.kind == "bump":
                src, K = bump_source(rng, self.dim, omega)
                scale = math.exp(rng.uniform(lo, hi))
                out.append({"u": f"{_fmt(scale)}*({src})", "support_K": K})
            elif self.kind == "holder":
                out.append({"u": trig_source(rng, self.dim), "v": trig_source(rng, self.dim),
                            "p": holder_exponent_source(rng, self.dim)})
            else:
                raise ValueError(f"unknown family kind {self.kind!r}")
        return out


def _member_inputs(m: dict) -> dict:
    return {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in m.items()}


def run_check(check: str, member: dict, problem: Problem, case_id: str,
              seed: Optional[int] = None, **extra) -> InequalityCase:
    omega = problem.omega
    if check == "decomposition":
        from .operators import enclosing_box
        pr = problem.with_geometry()
        hull = enclosing_box(omega, problem.margin_factor, _cell(omega, problem.quad))
        u = GridFunction.from_expr(member["u"], hull, extended=True)
        return check_decomposition(u, omega, pr.atlas, pr.pou, case_id=case_id, seed=seed)
    u = GridFunction.from_expr(member["u"], omega)
    inputs = _member_inputs(member)
    if check == "holder":
        v = GridFunction.from_expr(member["v"], omega)
        p = ExponentField.from_expr(member["p"], omega)
        return check_holder(u, v, p, omega, problem.quad, case_id=case_id, seed=seed,
                            inputs=inputs)
    if check == "integral_estimate":
        return check_integral_estimate(u, problem.params, omega, problem.quad,
                                       case_id=case_id, seed=seed, inputs=inputs)
    if check == "embedding":
        return check_embedding(u, problem.params, problem.r, omega, problem.quad,
                               case_id=case_id, seed=seed, inputs=inputs)
    if check.startswith("alpha_beta_"):
        kind = check[len("alpha_beta_"):]
        if kind == "zero_extend":
            extra.setdefault("support_K", member["support_K"])
        if kind == "truncate" and "psi" in extra:
            inputs["psi"] = extra["psi"].to_dict()
        return check_alpha_beta_bound(kind, u, problem, case_id=case_id, seed=seed,
                                      inputs=inputs, **extra)
    raise ValueError(f"unknown check {check!r}")


def summarize(family: str, cases: Sequence[InequalityCase]) -> ConstantEstimate:
    ratios = [c.ratio for c in cases]
    unstable = [c.case_id for c in cases
                if c.ratio_half_h is not None and _drift(c.ratio, c.ratio_half_h) >= DRIFT_TOL]
    sup = max(ratios) if ratios else 0.0
    return ConstantEstimate(family, sup, ratios, not unstable, unstable, list(cases))


def estimate_constant(family: FamilySpec, check: str, problem: Problem,
                      **extra) -> ConstantEstimate:
    """Run ``check`` over every member of ``family``; sup of the ratios is the estimate."""
    if check in ("alpha_beta_extend", "decomposition"):
        problem = problem.with_geometry()
    cases = [run_check(check, m, problem, f"{check}-{i:04d}", family.seed, **extra)
             for i, m in enumerate(family.members(problem.omega))]
    return summarize(f"{check}:{family.describe()}", cases)


CHECKS = ("holder", "integral_estimate", "embedding", "alpha_beta_zero_extend",
          "alpha_beta_truncate", "alpha_beta_extend", "decomposition")


def truncation_cutoff(omega: Domain, width: float) -> Cutoff:
    """Bump centred in omega with plateau radius 1/4 of the smallest side and the given band."""
    c = (omega.lo + omega.hi) / 2
    r_in = float(np.min(omega.hi - omega.lo)) / 4
    return bump(c, r_in, r_in + width)
