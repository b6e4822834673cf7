"""Small expression language for user-supplied denominators ``g(x)``.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' ['-'|'+'] number)?
    base   := number | 'x' | ident | '(' expr ')' | ('exp' | 'log') '(' expr ')'

Identifiers other than ``x``, ``e`` and ``pi`` are free parameters, bound at
evaluation time.  Trees are immutable and evaluation is pure, so an
:class:`ExprAst` can be shared freely between workers.

Evaluation accepts floats or numpy arrays.  Overflow yields ``+inf`` (the
quadrature code treats ``1/g`` as zero there); ``log`` of a nonpositive number
and division by zero raise :class:`DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "DomainError",
    "UnboundParameterError",
    "Num",
    "Var",
    "Param",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "ExprAst",
    "parse",
    "evaluate",
    "differentiate",
    "to_text",
]

FUNCTIONS = ("exp", "log")
CONSTANTS = {"e": math.e, "pi": math.pi}


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(ExprError, ArithmeticError):
    pass


class UnboundParameterError(ExprError, KeyError):
    def __str__(self):
        return f"unbound parameter {self.args[0]!r}"


# --------------------------------------------------------------------------- nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
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
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Param, Neg, BinOp, Pow, Call]

X = Var()
ZERO = Num(0.0)
ONE = Num(1.0)


@dataclass(frozen=True)
class ExprAst:
    """A parsed expression plus (optionally) bound parameter values."""

    root: Node
    params: tuple[tuple[str, float], ...] = field(default=())

    @property
    def param_map(self) -> dict[str, float]:
        return dict(self.params)

    def free_params(self) -> frozenset[str]:
        return frozenset(_param_names(self.root)) - set(self.param_map)

    def bind(self, params: Mapping[str, float] | None = None, **kw: float) -> "ExprAst":
        merged = self.param_map
        merged.update(params or {})
        merged.update(kw)
        return ExprAst(self.root, tuple(sorted((k, float(v)) for k, v in merged.items())))

    def __call__(self, x, params: Mapping[str, float] | None = None):
        return evaluate(self, x, params)

    def __str__(self) -> str:
        return to_text(self.root)


def _param_names(node: Node) -> Iterable[str]:
    if isinstance(node, Param):
        yield node.name
    elif isinstance(node, (Neg,)):
        yield from _param_names(node.operand)
    elif isinstance(node, BinOp):
        yield from _param_names(node.left)
        yield from _param_names(node.right)
    elif isinstance(node, Pow):
        yield from _param_names(node.base)
    elif isinstance(node, Call):
        yield from _param_names(node.arg)


# --------------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, known: frozenset[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.known = known

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            operand = self.factor()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        base = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1.0
            if self.peek()[1] in ("-", "+"):
                sign = -1.0 if self.take()[1] == "-" else 1.0
            kind, text, pos = self.take()
            if kind != "num":
                what = "end of input" if kind == "end" else repr(text)
                raise ExprSyntaxError(f"exponent must be a number, found {what}", pos)
            return Pow(base, sign * float(text))
        return base

    def base(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if self.peek()[1] == "(":
                raise UnknownIdentifierError(text, pos)
            if text == "x":
                return X
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if self.known is not None and text not in self.known:
                raise UnknownIdentifierError(text, pos)
            return Param(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str, params: Mapping[str, float] | Iterable[str] | None = None) -> ExprAst:
    """Parse ``text`` into an :class:`ExprAst`.

    If ``params`` is given, identifiers outside it are rejected with
    :class:`UnknownIdentifierError`; a mapping also binds the values.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if not text.isascii():
        bad = next(i for i, ch in enumerate(text) if not ch.isascii())
        raise ExprSyntaxError("non-ASCII character", bad)
    known = None if params is None else frozenset(params)
    root = _Parser(text, known).parse()
    ast = ExprAst(root)
    if isinstance(params, Mapping):
        ast = ast.bind(params)
    return ast


# --------------------------------------------------------------------------- evaluation


def evaluate(ast: ExprAst | Node, x, params: Mapping[str, float] | None = None):
    """Evaluate at ``x`` (float or array).  Returns a float for scalar input."""
    if isinstance(ast, ExprAst):
        env = ast.param_map
        root = ast.root
    else:
        env = {}
        root = ast
    if params:
        env.update(params)
    scalar = np.ndim(x) == 0
    xv = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        out = _eval(root, xv, env)
    out = np.broadcast_to(out, xv.shape) if np.ndim(out) == 0 and not scalar else out
    if np.any(np.isnan(out)):
        raise DomainError("expression is not a number (e.g. inf - inf or a fractional power of a negative)")
    return float(out) if scalar else np.asarray(out, dtype=float)


def _eval(node: Node, x: np.ndarray, env: Mapping[str, float]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Param):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundParameterError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, x, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, env)
        b = _eval(node.right, x, env)
        if node.op == "+":
            return np.add(a, b)
        if node.op == "-":
            return np.subtract(a, b)
        if node.op == "*":
            return np.multiply(a, b)
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return np.divide(a, b)
    if isinstance(node, Pow):
        b = _eval(node.base, x, env)
        if node.exponent < 0 and np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return np.power(np.asarray(b, dtype=float), node.exponent)
    if isinstance(node, Call):
        a = _eval(node.arg, x, env)
        if node.func == "exp":
            return np.exp(a)
        if np.any(np.asarray(a) <= 0):
            raise DomainError("log of a nonpositive number")
        return np.log(a)
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------- calculus


def _add(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _mul(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def _pow(a: Node, n: float) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Num) and a.value > 0:
        return Num(a.value**n)
    return Pow(a, n)


def _d(node: Node) -> Node:
    if isinstance(node, (Num, Param)):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return _neg(_d(node.operand))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _d(u), _d(v)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        # quotient rule; keep u'/v when v is constant in x
        if dv == ZERO:
            return _div(du, v)
        return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, 2.0))
    if isinstance(node, Pow):
        n = node.exponent
        return _mul(_mul(Num(n), _pow(node.base, n - 1.0)), _d(node.base))
    if isinstance(node, Call):
        da = _d(node.arg)
        if node.func == "exp":
            return _mul(node, da)
        return _div(da, node.arg)
    raise TypeError(f"not an expression node: {node!r}")


def differentiate(ast: ExprAst) -> ExprAst:
    """Formal derivative in ``x``, with constant folding only."""
    return ExprAst(_d(ast.root), ast.params)


# --------------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(v: float) -> str:
    if math.isfinite(v) and v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and (node.value < 0 or math.copysign(1, node.value) < 0)):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def to_text(node: Node | ExprAst) -> str:
    """Render a tree so that ``parse(to_text(t))`` rebuilds ``t`` exactly."""
    if isinstance(node, ExprAst):
        node = node.root
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        # a bare '-' followed by a literal would fold into a negative number
        if _prec(node.operand) < 4 or isinstance(node.operand, Num):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if _prec(node.base) < 5:
            base = f"({base})"
        return f"{base}^{_fmt_num(node.exponent)}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = to_text(node.left)
        right = to_text(node.right)
        lp, rp = _prec(node.left), _prec(node.right)
        if lp < p:
            left = f"({left})"
        if rp <= p or rp == 3:
            right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")
