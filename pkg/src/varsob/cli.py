"""Command line front end.

    varsob norm     CONFIG -o OUT     Luxemburg norm of functions.u in L^q
    varsob seminorm CONFIG -o OUT     Gagliardo seminorm and full norm of functions.u
    varsob extend   CONFIG -o OUT     extension of functions.u; grid.csv + provenance.json
    varsob trace    CONFIG -o OUT     restriction to the domain of functions.u (given on a hull)
    varsob verify   [CONFIG] -o OUT   one check over a seeded family
    varsob sweep    [CONFIG] -o OUT   every check over small seeded families

Exit status: 0 success, 1 a check failed, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ProblemConfig, load_config, parse_config, support_box
from .domains import DomainError
from .exponents import ExponentError
from .expr import ExprError
from .functions import GridFunction
from .geometry import GeometryError, boundary_points, chart_atlas, partition_of_unity
from .norms import NormError, gagliardo_seminorm, luxemburg_norm
from .operators import (OperatorError, enclosing_box, extend, reflect_extend, trace,
                        zero_extend)
from .quadrature import QuadratureError
from .report import emit_grid, write_csv, write_json
from .verify import (CHECKS, FamilySpec, HypothesisNotMet, Problem, estimate_constant,
                     truncation_cutoff)

__all__ = ["main", "run"]

COMMANDS = ("norm", "seminorm", "extend", "trace", "verify", "sweep")

DEFAULT_FAMILY = {
    "holder": "holder", "integral_estimate": "trig", "embedding": "trig",
    "alpha_beta_zero_extend": "bump", "alpha_beta_truncate": "trig",
    "alpha_beta_extend": "trig", "decomposition": "trig",
}
DEFAULT_CASES = {"holder": 200}

DEFAULT_CONFIG = """
seed = 0
[domain]
kind = "interval"
params = { lo = 0.0, hi = 1.0 }
[space]
s = 0.4
p = "2 + 0.25*sin(x + y)"
q = "2.5 + 0.2*x"
"""


class UsageError(Exception):
    pass


def _function(cfg: ProblemConfig, key: str = "u", domain=None, **kw) -> GridFunction:
    if key not in cfg.functions:
        raise ConfigError(f"functions.{key}", "required field missing")
    try:
        return GridFunction.from_expr(cfg.functions[key], domain or cfg.domain, **kw)
    except (ExprError, DomainError) as exc:
        raise ConfigError(f"functions.{key}", str(exc)) from None


def _atlas(cfg: ProblemConfig):
    atlas = chart_atlas(cfg.domain, cfg.atlas_k)
    pou = partition_of_unity([c.ball for c in atlas], boundary_points(cfg.domain))
    return atlas, pou


def _config_record(cfg: ProblemConfig) -> dict:
    return {"domain": cfg.domain.to_dict(), "s": cfg.params.s, "n": cfg.params.n,
            "p": cfg.params.p.label, "q": cfg.params.q.label,
            "r": None if cfg.r is None else cfg.r.label,
            "functions": dict(sorted(cfg.functions.items())), "quad": cfg.quad.to_dict(),
            "seed": cfg.seed}


def cmd_norm(cfg, out, args) -> int:
    u = _function(cfg)
    res = luxemburg_norm(u, cfg.params.q, cfg.domain, cfg.quad, refine=args.refine)
    write_json(out / "report.json", {"command": "norm", **res.to_dict(),
                                     "config": _config_record(cfg)})
    write_csv(out / "summary.csv", ["quantity", "value"], [["luxemburg_norm", res.value]])
    return 0


def cmd_seminorm(cfg, out, args) -> int:
    u = _function(cfg)
    semi = gagliardo_seminorm(u, cfg.params, cfg.domain, cfg.quad, refine=args.refine)
    lq = luxemburg_norm(u, cfg.params.q, cfg.domain, cfg.quad)
    write_json(out / "report.json", {"command": "seminorm", **semi.to_dict(),
                                     "lebesgue_norm": lq.value,
                                     "sobolev_norm": lq.value + semi.value,
                                     "config": _config_record(cfg)})
    write_csv(out / "summary.csv", ["quantity", "value"],
              [["gagliardo_seminorm", semi.value], ["lebesgue_norm", lq.value],
               ["sobolev_norm", lq.value + semi.value]])
    return 0


def cmd_extend(cfg, out, args) -> int:
    sec = cfg.section("extend")
    op = sec.get("operator", "extend")
    margin = float(sec.get("margin", 2.0))
    res = args.resolution or int(cfg.section("grid").get("resolution", 64))
    u = _function(cfg)
    if op == "reflect":
        f = reflect_extend(u.restrict(cfg.domain.upper) if hasattr(cfg.domain, "upper")
                           else u, cfg.domain)
        emit_grid(f, res, out / "grid.csv")
        write_json(out / "provenance.json", {"operator": "reflect",
                                             "omega": cfg.domain.to_dict()})
        write_json(out / "report.json", {"command": "extend", "operator": op,
                                         "config": _config_record(cfg)})
        return 0
    if op == "zero_extend":
        if "support" not in sec:
            raise ConfigError("extend.support", "required field missing")
        ext = zero_extend(u, cfg.domain, support_box(sec["support"], "extend.support"),
                          margin_factor=margin)
    elif op == "extend":
        atlas, pou = _atlas(cfg)
        ext = extend(u, cfg.domain, atlas, pou, margin_factor=margin)
    else:
        raise ConfigError("extend.operator", f"unknown operator {op!r}")
    emit_grid(ext.function, res, out / "grid.csv", box=ext.hull)
    axes = [np.linspace(ext.hull.lo[k], ext.hull.hi[k], res + 1) for k in range(ext.hull.dim)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, ext.hull.dim)
    regions = ext.region(nodes)
    counts = {k: int(np.sum(regions == k)) for k in ("inside", "reflected", "zeroed")}
    prov = ext.provenance_record()
    prov["grid_region_counts"] = counts
    write_json(out / "provenance.json", prov)
    write_json(out / "report.json", {"command": "extend", "operator": op,
                                     "hull": ext.hull.to_dict(), "resolution": res,
                                     "region_counts": counts, "config": _config_record(cfg)})
    return 0


def cmd_trace(cfg, out, args) -> int:
    margin = float(cfg.section("extend").get("margin", 2.0))
    hull = enclosing_box(cfg.domain, margin)
    u = _function(cfg, domain=hull, extended=True)
    tu = trace(u, cfg.domain)
    res = args.resolution or int(cfg.section("grid").get("resolution", 64))
    emit_grid(tu, res, out / "grid.csv")
    write_json(out / "report.json", {"command": "trace", "omega": cfg.domain.to_dict(),
                                     "hull": hull.to_dict(), "resolution": res,
                                     "config": _config_record(cfg)})
    return 0


def _problem(cfg: ProblemConfig, cells: Optional[int]) -> Problem:
    quad = cfg.quad if cells is None else replace(cfg.quad, cells_per_axis=cells)
    return Problem(cfg.domain, cfg.params, quad, r=cfg.r)


def _run_family(cfg, check, cases, seed, cells, psi_width):
    if check not in CHECKS:
        raise UsageError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    fam = FamilySpec(DEFAULT_FAMILY[check], cases, seed, cfg.domain.dim)
    operator_check = check.startswith("alpha_beta") or check == "decomposition"
    problem = _problem(cfg, cells if operator_check or check == "integral_estimate" else None)
    extra = {}
    if check == "alpha_beta_truncate":
        extra["psi"] = truncation_cutoff(cfg.domain, psi_width)
    if check == "embedding" and cfg.r is None:
        raise ConfigError("space.r", "required field missing for the embedding check")
    return estimate_constant(fam, check, problem, **extra)


def _write_verify(out, cfg, command, estimates) -> int:
    cases = [c.to_dict() for e in estimates for c in e.cases]
    write_json(out / "report.json", {"command": command, "config": _config_record(cfg),
                                     "families": [e.to_dict() for e in estimates],
                                     "cases": cases})
    write_csv(out / "summary.csv",
              ["family", "cases", "violations", "sup_ratio", "refinement_stable"],
              [[e.family, len(e.cases), e.violations, e.sup_ratio, e.refinement_stable]
               for e in estimates])
    return 1 if any(e.violations for e in estimates) else 0


def cmd_verify(cfg, out, args) -> int:
    sec = cfg.section("verify")
    check = args.check or sec.get("check", "holder")
    cases = args.cases or int(sec.get("cases", DEFAULT_CASES.get(check, 50)))
    seed = cfg.seed if args.seed is None else args.seed
    cells = int(sec.get("cells", 64))
    est = _run_family(cfg, check, cases, seed, cells, float(sec.get("psi_width", 0.1)))
    return _write_verify(out, cfg, "verify", [est])


def cmd_sweep(cfg, out, args) -> int:
    sec = cfg.section("verify")
    seed = cfg.seed if args.seed is None else args.seed
    cells = int(sec.get("cells", 64))
    checks = [c for c in CHECKS if c != "embedding" or cfg.r is not None]
    estimates = []
    for check in checks:
        cases = args.cases or int(sec.get("cases", 5))
        estimates.append(_run_family(cfg, check, cases, seed, cells,
                                     float(sec.get("psi_width", 0.1))))
    return _write_verify(out, cfg, "sweep", estimates)


HANDLERS = {"norm": cmd_norm, "seminorm": cmd_seminorm, "extend": cmd_extend,
            "trace": cmd_trace, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varsob", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", nargs="?", help="TOML problem file")
    ap.add_argument("-o", "--output-dir", default=".", help="directory for the artifacts")
    ap.add_argument("--check", help=f"verify: one of {', '.join(CHECKS)}")
    ap.add_argument("--cases", type=int, help="family size")
    ap.add_argument("--seed", type=int, help="family seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker cap; results do not depend on it")
    ap.add_argument("--resolution", type=int, help="grid intervals per axis for grid.csv")
    ap.add_argument("--refine", action="store_true",
                    help="also compute at h/2 and report the relative change")
    return ap


def run(command: str, config_path: Optional[str], output_dir, argv_extra=None) -> int:
    args = build_parser().parse_args([command] + ([config_path] if config_path else [])
                                     + ["-o", str(output_dir)] + list(argv_extra or []))
    return _dispatch(args)


def _dispatch(args) -> int:
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command in ("verify", "sweep"):
            from .config import tomllib
            cfg = parse_config(tomllib.loads(DEFAULT_CONFIG))
        else:
            raise ConfigError("config", f"a config file is required for {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            cfg.quad = replace(cfg.quad, threads=args.threads)
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out, args)
    except (ConfigError, UsageError, HypothesisNotMet, GeometryError, DomainError,
            ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OperatorError, NormError, QuadratureError, ExponentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return _dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
