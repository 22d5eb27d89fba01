"""Deterministic JSON/CSV output; every float is written with 17 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["fmt_float", "dumps", "write_json", "write_csv", "emit_grid"]


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _enc(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _enc(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_enc(str(k), indent, level + 1)}: {_enc(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _enc(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with keys in insertion order and floats as %.17g."""
    return _enc(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v).strip('"')
    return "" if v is None else str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def emit_grid(f, resolution: int, path, box=None) -> Path:
    """Values of ``f`` on the (resolution+1)^n nodes of ``box`` (default: f's domain box).

    Rows are in lexicographic order of the coordinates.  For a function that is
    not an extension result, nodes outside the closure of its domain are left out.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    dom = box if box is not None else f.domain
    n = dom.dim
    axes = [np.linspace(dom.lo[k], dom.hi[k], resolution + 1) for k in range(n)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if not getattr(f, "extended", True):
        nodes = nodes[f.domain.contains_closed(nodes)]
    vals = f(nodes)
    header = ["x"] if n == 1 else [f"x{k + 1}" for k in range(n)]
    return write_csv(path, header + ["value"],
                     ([*map(float, p), float(v)] for p, v in zip(nodes, vals)))
