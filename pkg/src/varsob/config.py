"""Problem configuration files (TOML) and their validation.

Canonical schema::

    seed = 7

    [domain]
    kind = "interval"            # interval | box | halfbox | ball | disc | symmetric
    params = { lo = 0.0, hi = 1.0 }

    [space]
    s = 0.4
    n = 1                        # optional, defaults to the domain dimension
    p = "2 + 0.25*sin(x + y)"    # may reference x and y
    q = "2.5"
    r = "2.2"                    # optional, for the embedding check

    [functions]
    u = "sin(3*x)"
    v = "x^2"                    # optional

    [quad]
    cells = 256
    diag_depth = 4
    rule = "midpoint"            # midpoint | gauss3
    threads = 1

    [atlas]
    k = 8

    [extend]
    operator = "extend"          # extend | zero_extend | reflect
    margin = 2.0
    support = { lo = [0.25], hi = [0.75] }   # zero_extend only

    [grid]
    resolution = 64

    [verify]
    check = "holder"
    cases = 200
    cells = 64                   # grid for the operator families
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .domains import Box, Domain, DomainError, domain_from_config
from .exponents import ExponentError, ExponentField, SpaceParams
from .expr import ExprError
from .quadrature import QuadratureError, QuadratureSpec, default_quadrature

__all__ = ["ConfigError", "ProblemConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ProblemConfig:
    seed: int
    domain: Domain
    params: SpaceParams
    r: Optional[ExponentField]
    functions: dict
    quad: QuadratureSpec
    atlas_k: int = 8
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))


def _get(tbl: dict, path: str, key: str, typ, required=True, default=None):
    if key not in tbl:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "required field missing")
        return default
    val = tbl[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, typ) or isinstance(val, bool) and typ is not bool:
        name = typ.__name__ if isinstance(typ, type) else "/".join(t.__name__ for t in typ)
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {name}, got {type(val).__name__}")
    return val


def _table(raw: dict, name: str, required=True) -> dict:
    if name not in raw:
        if required:
            raise ConfigError(name, "required section missing")
        return {}
    if not isinstance(raw[name], dict):
        raise ConfigError(name, "expected a table")
    return raw[name]


def parse_config(raw: dict) -> ProblemConfig:
    seed = _get(raw, "", "seed", int, required=False, default=0)

    dom = _table(raw, "domain")
    kind = _get(dom, "domain", "kind", str)
    params = _get(dom, "domain", "params", dict, required=False, default={})
    try:
        domain = domain_from_config(kind, params)
    except KeyError as exc:
        raise ConfigError(f"domain.params.{exc.args[0]}", "required field missing") from None
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError("domain", str(exc)) from None

    sp = _table(raw, "space")
    s = _get(sp, "space", "s", float)
    n = _get(sp, "space", "n", int, required=False, default=domain.dim)
    if n != domain.dim:
        raise ConfigError("space.n", f"{n} does not match the {domain.dim}-D domain")

    def exponent(key, arity, required=True):
        src = _get(sp, "space", key, (str, int, float), required=required)
        if src is None:
            return None
        try:
            if isinstance(src, (int, float)):
                return ExponentField.constant(float(src), n, arity=arity, domain=domain)
            f = ExponentField.from_expr(src, domain, arity=arity if arity == 1 else None,
                                        dim=n)
            return f if arity == 1 else f.as_two_point()
        except (ExprError, ExponentError) as exc:
            raise ConfigError(f"space.{key}", str(exc)) from None

    p = exponent("p", 2)
    q = exponent("q", 1)
    r = exponent("r", 1, required=False)
    try:
        space = SpaceParams(s, n, p, q)
    except ExponentError as exc:
        raise ConfigError("space", str(exc)) from None

    funcs = _table(raw, "functions", required=False)
    functions = {}
    for key, src in funcs.items():
        if isinstance(src, (int, float)) and not isinstance(src, bool):
            src = repr(float(src))
        if not isinstance(src, str):
            raise ConfigError(f"functions.{key}", "expected an expression string")
        functions[key] = src

    qt = _table(raw, "quad", required=False)
    kw = {}
    if "cells" in qt:
        kw["cells_per_axis"] = _get(qt, "quad", "cells", int)
    if "diag_depth" in qt:
        kw["diagonal_refine_depth"] = _get(qt, "quad", "diag_depth", int)
    if "rule" in qt:
        kw["rule"] = _get(qt, "quad", "rule", str)
    if "threads" in qt:
        kw["threads"] = _get(qt, "quad", "threads", int)
    if "target_rel_tol" in qt:
        kw["target_rel_tol"] = _get(qt, "quad", "target_rel_tol", float)
    try:
        quad = default_quadrature(domain.dim, **kw)
    except QuadratureError as exc:
        raise ConfigError("quad", str(exc)) from None

    atlas_k = _get(_table(raw, "atlas", required=False), "atlas", "k", int, required=False,
                   default=_get(_table(raw, "cover", required=False), "cover", "k", int,
                                required=False, default=8))
    sections = {k: v for k, v in raw.items() if isinstance(v, dict)}
    return ProblemConfig(seed, domain, space, r, functions, quad, atlas_k, sections)


def load_config(path) -> ProblemConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(str(path), f"not valid TOML: {exc}") from None
    return parse_config(raw)


def support_box(tbl: dict, path: str) -> Box:
    try:
        return Box(tbl["lo"], tbl["hi"])
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}", "required field missing") from None
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None
