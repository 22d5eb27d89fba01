"""A small arithmetic expression language for exponents, test functions and cutoffs.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-(2^2)`` while ``2^-1`` is ``0.5``.  Evaluation is vectorised over numpy
arrays and raises :class:`ExprEvalError` instead of producing inf or NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "ExprError", "ExprSyntaxError", "ExprEvalError",
    "Num", "Var", "Const", "Neg", "BinOp", "Call",
    "Expression", "parse", "evaluate", "to_source",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Raised on malformed source; ``offset`` is a 1-based byte offset."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.message = message
        self.offset = offset
        self.expected = expected
        text = f"{message} at byte {offset}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class ExprEvalError(ExprError):
    """Raised on missing bindings and on domain errors during evaluation."""


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Const, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
# name -> (min arity, max arity); None means unbounded
FUNCTIONS = {
    "sin": (1, 1), "cos": (1, 1), "exp": (1, 1), "log": (1, 1),
    "abs": (1, 1), "sqrt": (1, 1), "min": (2, None), "max": (2, None),
}
_VARIABLES = {"x": ("x", 1, True), "y": ("y", 1, True),
              "x1": ("x", 1, False), "x2": ("x", 2, False),
              "y1": ("y", 1, False), "y2": ("y", 2, False)}


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int  # 1-based byte offset


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8")) + 1


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}",
                                  _byte_offset(src, pos),
                                  "number, name, operator or parenthesis")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(src, len(src))))
    return tokens


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind != "op":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}",
                                  self.tok.offset, repr(text))
        return self.advance()

    @staticmethod
    def _describe(t: _Token) -> str:
        return "end of input" if t.kind == "end" else f"token {t.text!r}"

    def parse(self) -> Node:
        if self.tok.kind == "end":
            raise ExprSyntaxError("empty expression", self.tok.offset, "an expression")
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"trailing {self._describe(self.tok)}",
                                  self.tok.offset, "operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("numeric literal out of range", t.offset,
                                      "a finite number")
            return Num(value)
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                return self.call(t)
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in _VARIABLES:
                return Var(t.text)
            raise ExprSyntaxError(f"unknown identifier {t.text!r}", t.offset,
                                  "a variable, constant or function name")
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {self._describe(t)}", t.offset,
                              "number, name or '('")

    def call(self, name_tok: _Token) -> Node:
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise ExprSyntaxError(
                f"{name_tok.text}() takes {want} argument(s), got {len(args)}",
                name_tok.offset, f"{want} argument(s)")
        return Call(name_tok.text, tuple(args))


def _collect_vars(node: Node, out: list) -> None:
    if isinstance(node, Var):
        out.append(node)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_vars(a, out)


# --- evaluation ------------------------------------------------------------

def _check(value, what: str):
    if np.all(np.isfinite(value)):
        return value
    raise ExprEvalError(f"domain error in {what}: non-finite result")


def _eval(node: Node, env: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprEvalError(f"missing binding for variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                return _check(np.add(a, b), "'+'")
            if node.op == "-":
                return _check(np.subtract(a, b), "'-'")
            if node.op == "*":
                return _check(np.multiply(a, b), "'*'")
            if node.op == "/":
                if np.any(np.asarray(b) == 0):
                    raise ExprEvalError("domain error: division by zero")
                return _check(np.divide(a, b), "'/'")
            return _check(np.power(np.asarray(a, dtype=float), b), "'^'")
    # Call
    args = [_eval(a, env) for a in node.args]
    name = node.name
    with np.errstate(all="ignore"):
        if name == "log":
            if np.any(np.asarray(args[0]) <= 0):
                raise ExprEvalError("domain error: log of non-positive value")
            return np.log(args[0])
        if name == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise ExprEvalError("domain error: sqrt of negative value")
            return np.sqrt(args[0])
        if name == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        if name == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
        fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name]
        return _check(fn(args[0]), f"{name}()")


# --- printing --------------------------------------------------------------

def to_source(node: Node) -> str:
    """Canonical, fully parenthesised source text that parses back to ``node``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}({', '.join(to_source(a) for a in node.args)})"


# --- public API ------------------------------------------------------------

@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its spatial dimension.

    ``uses_y`` tells whether the expression references the second point, which
    is what distinguishes a two-point exponent p(x, y) from a one-point field.
    """

    root: Node
    dim: int
    source: str

    @property
    def variables(self) -> frozenset:
        found: list = []
        _collect_vars(self.root, found)
        return frozenset(v.name for v in found)

    @property
    def uses_y(self) -> bool:
        return any(name.startswith("y") for name in self.variables)

    def bind(self, x, y=None) -> dict:
        """Environment for points ``x`` (and ``y``) given as arrays of shape (..., dim)."""
        env = {}
        for label, pts in (("x", x), ("y", y)):
            if pts is None:
                continue
            pts = np.asarray(pts, dtype=float)
            if pts.shape[-1] != self.dim:
                raise ExprEvalError(
                    f"point has {pts.shape[-1]} coordinates, expression is {self.dim}-D")
            for k in range(self.dim):
                env[f"{label}{k + 1}"] = pts[..., k]
            if self.dim == 1:
                env[label] = pts[..., 0]
        return env

    def __call__(self, x, y=None):
        """Vectorised evaluation at points ``x`` (and ``y``) of shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        env = self.bind(x, y)
        out = _eval(self.root, env)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else x.shape[:-1]
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def evaluate(self, point) -> float:
        return evaluate(self, point)

    def __str__(self) -> str:
        return to_source(self.root)


def parse(src: str, dim: int | None = None) -> Expression:
    """Parse ``src``; ``dim`` fixes the spatial dimension (inferred when None).

    In 1-D the variables are ``x``/``y`` (``x1``/``y1`` are accepted aliases);
    in 2-D they are ``x1, x2, y1, y2`` and bare ``x``/``y`` are rejected.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 1, "an expression")
    if dim not in (None, 1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    root = _Parser(src).parse()
    found: list = []
    _collect_vars(root, found)
    # variable occurrences are located again in the token stream for offsets
    offsets = {}
    for t in _tokenize(src):
        if t.kind == "name" and t.text in _VARIABLES:
            offsets.setdefault(t.text, t.offset)
    names = {v.name for v in found}
    bare = sorted(n for n in names if _VARIABLES[n][2])
    indexed_hi = max((_VARIABLES[n][1] for n in names), default=1)
    if dim is None:
        if bare and indexed_hi > 1:
            raise ExprSyntaxError(
                f"variable {bare[0]!r} is only valid in 1-D but the expression is 2-D",
                offsets[bare[0]], "x1, x2, y1, y2")
        dim = indexed_hi
    if dim == 1 and indexed_hi > 1:
        bad = sorted(n for n in names if _VARIABLES[n][1] > 1)[0]
        raise ExprSyntaxError(f"variable {bad!r} needs dimension 2, expression is 1-D",
                              offsets[bad], "x, y, x1 or y1")
    if dim == 2 and bare:
        raise ExprSyntaxError(f"variable {bare[0]!r} is ambiguous in 2-D", offsets[bare[0]],
                              "x1, x2, y1, y2")
    return Expression(root, dim, src)


def evaluate(e: Expression, point: Union[Mapping[str, float], Sequence[float]]) -> float:
    """Evaluate at a single point.

    ``point`` is either a mapping of variable names or a coordinate vector:
    ``dim`` values bind x, ``2*dim`` values bind x then y.
    """
    if isinstance(point, Mapping):
        env = dict(point)
        if e.dim == 1:
            for a, b in (("x", "x1"), ("y", "y1")):
                if a in env and b not in env:
                    env[b] = env[a]
                elif b in env and a not in env:
                    env[a] = env[b]
    else:
        coords = [float(c) for c in point]
        if len(coords) == e.dim:
            env = e.bind(np.array(coords))
        elif len(coords) == 2 * e.dim:
            env = e.bind(np.array(coords[:e.dim]), np.array(coords[e.dim:]))
        else:
            raise ExprEvalError(
                f"expected {e.dim} or {2 * e.dim} coordinates, got {len(coords)}")
        env = {k: float(v) for k, v in env.items()}
    return float(_eval(e.root, env))
