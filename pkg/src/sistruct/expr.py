"""Scalar-expression DSL for metrics, potentials and Killing tensor entries.

Grammar (usual precedence, tightest first)::

    power:   atom '^' INT          # integer literal exponents only
    unary:   '-' unary | power
    term:    unary (('*' | '/') unary)*
    sum:     term (('+' | '-') term)*
    atom:    NUMBER | IDENT | IDENT '(' sum ')' | '(' sum ')'

Identifiers are ``[a-zA-Z_][a-zA-Z0-9_]*``; numbers are decimal or scientific
literals.  The callable primitives are ``sqrt``, ``exp``, ``log``, ``sin``
and ``cos``.  Every node carries its source span (byte offsets) so that
validation and evaluation errors can point back into the input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .jets import Jet3, JetDomainError

__all__ = [
    "Expr",
    "Num",
    "Sym",
    "Coord",
    "Param",
    "Neg",
    "Bin",
    "Pow",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "ExprValidationError",
    "ExprLinearityError",
    "ExprDomainError",
    "parse",
    "validate",
    "extract_basis",
    "eval_jet",
    "eval_value",
    "to_str",
]

PRIMITIVES = ("sqrt", "exp", "log", "sin", "cos")

Span = tuple            # (start, end) byte offsets into the source text


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, text: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.line, self.col = _line_col(text, offset)
        self.expected = expected
        hint = f" (expected {expected})" if expected else ""
        super().__init__(
            f"syntax error at line {self.line}, column {self.col} "
            f"(offset {offset}): {message}{hint}"
        )


class ExprValidationError(ExprError):
    def __init__(self, message: str, names: list[str] | None = None):
        self.names = names or []
        super().__init__(message)


class ExprLinearityError(ExprError):
    """The expression is not parameter-linear with zero constant term."""

    def __init__(self, message: str, span: Span):
        self.span = span
        super().__init__(f"{message} (at offsets {span[0]}..{span[1]})")


class ExprDomainError(ExprError):
    """A primitive hit a domain violation during evaluation."""

    def __init__(self, primitive: str, value: float, span: Span, point):
        self.primitive = primitive
        self.value = value
        self.span = span
        self.point = tuple(float(c) for c in point)
        super().__init__(
            f"{primitive} undefined at value {value!r} while evaluating "
            f"subexpression at offsets {span[0]}..{span[1]} at point {self.point}"
        )


def _line_col(text: str, offset: int) -> tuple[int, int]:
    prefix = text[:offset]
    line = prefix.count("\n") + 1
    col = offset - (prefix.rfind("\n") + 1) + 1
    return line, col


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Sym:
    """Unresolved identifier; classified by :func:`validate`."""

    name: str
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Coord:
    name: str
    index: int
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Param:
    name: str
    index: int
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Bin:
    op: str                 # one of + - * /
    left: "Expr"
    right: "Expr"
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    span: Span = field(compare=False, default=(0, 0))


Expr = Num | Sym | Coord | Param | Neg | Bin | Pow | Call


# --- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise ExprSyntaxError(
                f"unexpected character {text[bad_at]!r}", text, bad_at
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind), m.end(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text), len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        self.i += 1

    def error(self, message: str, expected: str | None = None):
        raise ExprSyntaxError(message, self.text, self.tok[2], expected)

    def expect_op(self, op: str):
        kind, text, _, _ = self.tok
        if kind != "op" or text != op:
            self.error(f"found {text!r}" if text else "unexpected end of input",
                       expected=repr(op))
        self.advance()

    def parse(self) -> Expr:
        e = self.sum()
        if self.tok[0] != "end":
            self.error(f"trailing input {self.tok[1]!r}",
                       expected="end of expression")
        return e

    def sum(self) -> Expr:
        left = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.advance()
            right = self.term()
            left = Bin(op, left, right, (left.span[0], right.span[1]))
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.advance()
            right = self.unary()
            left = Bin(op, left, right, (left.span[0], right.span[1]))
        return left

    def unary(self) -> Expr:
        if self.tok[0] == "op" and self.tok[1] == "-":
            start = self.tok[2]
            self.advance()
            arg = self.unary()
            return Neg(arg, (start, arg.span[1]))
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            kind, text, start, end = self.tok
            if kind != "num" or not re.fullmatch(r"\d+", text):
                self.error(
                    f"found {text!r}" if text else "unexpected end of input",
                    expected="integer literal exponent",
                )
            self.advance()
            base = Pow(base, int(text), (base.span[0], end))
        return base

    def atom(self) -> Expr:
        kind, text, start, end = self.tok
        if kind == "num":
            self.advance()
            return Num(float(text), (start, end))
        if kind == "ident":
            self.advance()
            if self.tok[0] == "op" and self.tok[1] == "(":
                if text not in PRIMITIVES:
                    raise ExprSyntaxError(
                        f"unknown function {text!r}", self.text, start,
                        expected="one of " + ", ".join(PRIMITIVES),
                    )
                self.advance()
                arg = self.sum()
                close_end = self.tok[3]
                self.expect_op(")")
                return Call(text, arg, (start, close_end))
            return Sym(text, (start, end))
        if kind == "op" and text == "(":
            self.advance()
            e = self.sum()
            self.expect_op(")")
            return e
        self.error(
            f"found {text!r}" if text else "unexpected end of input",
            expected="a number, identifier or '('",
        )


def parse(text: str) -> Expr:
    """Parse an expression string into an AST with source spans."""
    return _Parser(text).parse()


# --- validation ------------------------------------------------------------


def validate(e: Expr, coords, params=()) -> Expr:
    """Resolve every identifier as a coordinate or a parameter.

    Returns an annotated copy of the AST.  Unknown identifiers are collected
    and reported all at once.
    """
    coords = list(coords)
    params = list(params)
    overlap = sorted(set(coords) & set(params))
    if overlap:
        raise ExprValidationError(
            f"identifiers in both coordinate and parameter sets: {', '.join(overlap)}",
            overlap,
        )
    coord_index = {name: i for i, name in enumerate(coords)}
    param_index = {name: i for i, name in enumerate(params)}
    unknown: list[str] = []

    def walk(node: Expr) -> Expr:
        if isinstance(node, Num):
            return node
        if isinstance(node, (Coord, Param)):
            return node
        if isinstance(node, Sym):
            if node.name in coord_index:
                return Coord(node.name, coord_index[node.name], node.span)
            if node.name in param_index:
                return Param(node.name, param_index[node.name], node.span)
            if node.name not in unknown:
                unknown.append(node.name)
            return node
        if isinstance(node, Neg):
            return Neg(walk(node.arg), node.span)
        if isinstance(node, Bin):
            return Bin(node.op, walk(node.left), walk(node.right), node.span)
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent, node.span)
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg), node.span)
        raise TypeError(f"unexpected node {node!r}")

    resolved = walk(e)
    if unknown:
        raise ExprValidationError(
            "unknown identifiers: " + ", ".join(sorted(unknown)), sorted(unknown)
        )
    return resolved


def _has_param(node: Expr) -> bool:
    if isinstance(node, Param):
        return True
    if isinstance(node, Neg):
        return _has_param(node.arg)
    if isinstance(node, Bin):
        return _has_param(node.left) or _has_param(node.right)
    if isinstance(node, Pow):
        return _has_param(node.base)
    if isinstance(node, Call):
        return _has_param(node.arg)
    return False


def extract_basis(e: Expr, params) -> list[Expr]:
    """Split a parameter-linear potential into its coefficient functions.

    ``e`` must be affine-linear in the parameters with zero constant term,
    i.e. exactly of the shape ``sum_k a_k * f_k(x)``.  Returns the list
    ``[f_0, ..., f_m]`` in parameter order, as parameter-free expressions.
    """
    params = list(params)

    def combine(parts: dict[int, Expr], other: dict[int, Expr], op: str, span):
        out = dict(parts)
        for k, expr2 in other.items():
            if k in out:
                out[k] = Bin(op, out[k], expr2, span)
            elif op == "+":
                out[k] = expr2
            else:
                out[k] = Neg(expr2, span)
        return out

    def decompose(node: Expr):
        # returns (constant_part | None, {param_index: coefficient Expr})
        if isinstance(node, Param):
            return None, {node.index: Num(1.0, node.span)}
        if not _has_param(node):
            return node, {}
        if isinstance(node, Neg):
            const, coeffs = decompose(node.arg)
            const = Neg(const, node.span) if const is not None else None
            return const, {k: Neg(v, node.span) for k, v in coeffs.items()}
        if isinstance(node, Bin):
            if node.op in "+-":
                cl, coeffs_l = decompose(node.left)
                cr, coeffs_r = decompose(node.right)
                if node.op == "-" and cr is not None:
                    cr = Neg(cr, node.span)
                if cl is None:
                    const = cr
                elif cr is None:
                    const = cl
                else:
                    const = Bin("+", cl, cr, node.span)
                return const, combine(coeffs_l, coeffs_r, node.op, node.span)
            if node.op == "*":
                lp, rp = _has_param(node.left), _has_param(node.right)
                if lp and rp:
                    raise ExprLinearityError(
                        "product of two parameter-dependent factors", node.span
                    )
                lin, free = (node.left, node.right) if lp else (node.right, node.left)
                const, coeffs = decompose(lin)
                scale = lambda v: Bin("*", v, free, node.span)
                const = scale(const) if const is not None else None
                return const, {k: scale(v) for k, v in coeffs.items()}
            if node.op == "/":
                if _has_param(node.right):
                    raise ExprLinearityError(
                        "parameter inside a denominator", node.span
                    )
                const, coeffs = decompose(node.left)
                scale = lambda v: Bin("/", v, node.right, node.span)
                const = scale(const) if const is not None else None
                return const, {k: scale(v) for k, v in coeffs.items()}
        if isinstance(node, Pow):
            if node.exponent == 1:
                return decompose(node.base)
            raise ExprLinearityError(
                f"parameter under power ^{node.exponent}", node.span
            )
        if isinstance(node, Call):
            raise ExprLinearityError(
                f"parameter inside call to {node.func}", node.span
            )
        raise TypeError(f"unexpected node {node!r}")

    const, coeffs = decompose(e)
    if const is not None and not (isinstance(const, Num) and const.value == 0.0):
        raise ExprLinearityError(
            "potential has a parameter-free additive term", const.span
        )
    return [coeffs.get(i, Num(0.0, e.span)) for i in range(len(params))]


# --- evaluation ------------------------------------------------------------


def eval_jet(e: Expr, point, params: dict[str, float] | None = None) -> Jet3:
    """Evaluate a validated expression to a third-order jet at ``point``.

    Coordinates are seeded as independent directions.  Parameter symbols are
    looked up in ``params`` (constant jets) and are an error when unbound.
    """
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    seeds = [jets.seed_coordinate(i, point[i], n) for i in range(n)]

    def ev(node: Expr) -> Jet3:
        if isinstance(node, Num):
            return jets.constant(node.value, n)
        if isinstance(node, Coord):
            if node.index >= n:
                raise ExprValidationError(
                    f"coordinate {node.name} (index {node.index}) outside point "
                    f"of dimension {n}"
                )
            return seeds[node.index]
        if isinstance(node, Param):
            if params is None or node.name not in params:
                raise ExprValidationError(f"unbound parameter {node.name!r}")
            return jets.constant(params[node.name], n)
        if isinstance(node, Sym):
            raise ExprValidationError(
                f"unresolved identifier {node.name!r}; validate the expression first"
            )
        if isinstance(node, Neg):
            return -ev(node.arg)
        try:
            if isinstance(node, Bin):
                left, right = ev(node.left), ev(node.right)
                if node.op == "+":
                    return left + right
                if node.op == "-":
                    return left - right
                if node.op == "*":
                    return left * right
                return left / right
            if isinstance(node, Pow):
                return jets.pow_int(ev(node.base), node.exponent)
            if isinstance(node, Call):
                return getattr(jets, node.func)(ev(node.arg))
        except JetDomainError as err:
            raise ExprDomainError(err.primitive, err.value, node.span, point) from err
        raise TypeError(f"unexpected node {node!r}")

    return ev(e)


def eval_value(e: Expr, point, params: dict[str, float] | None = None) -> float:
    """Plain float evaluation; shares the domain rules of :func:`eval_jet`.

    Kept free of jet arithmetic so it can serve as an independent oracle.
    """
    point = np.asarray(point, dtype=float)

    def ev(node: Expr) -> float:
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Coord):
            return float(point[node.index])
        if isinstance(node, Param):
            if params is None or node.name not in params:
                raise ExprValidationError(f"unbound parameter {node.name!r}")
            return params[node.name]
        if isinstance(node, Sym):
            raise ExprValidationError(
                f"unresolved identifier {node.name!r}; validate the expression first"
            )
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Bin):
            left, right = ev(node.left), ev(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if right == 0.0:
                raise ExprDomainError("recip", right, node.span, point)
            return left / right
        if isinstance(node, Pow):
            base = ev(node.base)
            if node.exponent < 0 and base == 0.0:
                raise ExprDomainError(
                    f"pow_int({node.exponent})", base, node.span, point
                )
            return base ** node.exponent
        if isinstance(node, Call):
            arg = ev(node.arg)
            if node.func == "sqrt":
                if arg <= 0.0:
                    raise ExprDomainError("sqrt", arg, node.span, point)
                return math.sqrt(arg)
            if node.func == "log":
                if arg <= 0.0:
                    raise ExprDomainError("log", arg, node.span, point)
                return math.log(arg)
            return getattr(math, node.func)(arg)
        raise TypeError(f"unexpected node {node!r}")

    return ev(e)


# --- printing --------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_str(e: Expr) -> str:
    """Render an AST back to source form; reparsing yields an equal AST."""

    def fmt(node: Expr) -> tuple[str, int]:
        if isinstance(node, Num):
            return repr(node.value), _PREC["atom"]
        if isinstance(node, (Sym, Coord, Param)):
            return node.name, _PREC["atom"]
        if isinstance(node, Neg):
            inner, prec = fmt(node.arg)
            if prec < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}", _PREC["neg"]
        if isinstance(node, Bin):
            my = _PREC[node.op]
            ls, lp = fmt(node.left)
            rs, rp = fmt(node.right)
            if lp < my:
                ls = f"({ls})"
            # - and / are left-associative: parenthesize equal-precedence rhs
            if rp < my or (rp == my and node.op in ("-", "/")):
                rs = f"({rs})"
            return f"{ls} {node.op} {rs}", my
        if isinstance(node, Pow):
            bs, bp = fmt(node.base)
            if bp < _PREC["atom"]:
                bs = f"({bs})"
            return f"{bs}^{node.exponent}", _PREC["^"]
        if isinstance(node, Call):
            inner, _ = fmt(node.arg)
            return f"{node.func}({inner})", _PREC["atom"]
        raise TypeError(f"unexpected node {node!r}")

    return fmt(e)[0]
