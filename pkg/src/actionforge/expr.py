"""A small expression language for user potentials F(t, x1, ..., xN).

Grammar (EBNF)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" ["-"] INTEGER)?
    atom    := NUMBER | "t" | "x" INDEX | "pi"
             | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "exp" | "log" | "abs_sq"

Exponents are integer literals so derivatives stay closed-form.  Parsing is
Pratt-style precedence climbing; derivatives are built without any
simplification.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Binary",
    "Call",
    "Const",
    "ExprDomainError",
    "ExprError",
    "ExprSyntaxError",
    "Neg",
    "Node",
    "Pow",
    "SpaceVar",
    "TimeVar",
    "differentiate",
    "evaluate",
    "gradient",
    "parse",
    "to_source",
]

MAX_DEPTH = 256
FUNCTIONS = ("sin", "cos", "exp", "log", "abs_sq")


class ExprError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"{message}{where}")


class ExprSyntaxError(ExprError):
    pass


class ExprDomainError(ExprError):
    """Evaluation left the domain of an operation (log of x <= 0, division by 0).

    ``index`` is the index of the first offending element when the expression
    was evaluated on arrays, otherwise ``None``.
    """

    def __init__(self, message: str, position: int | None = None, index=None):
        super().__init__(message, position)
        self.index = index


# AST -----------------------------------------------------------------------


class Node:
    pos: int
    precedence = 100


@dataclass(frozen=True)
class Const(Node):
    value: float
    text: str
    pos: int = -1


@dataclass(frozen=True)
class TimeVar(Node):
    pos: int = -1


@dataclass(frozen=True)
class SpaceVar(Node):
    index: int  # 1-based
    pos: int = -1


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node
    pos: int = -1

    @property
    def precedence(self):
        return 10 if self.op in "+-" else 20


@dataclass(frozen=True)
class Neg(Node):
    operand: Node
    pos: int = -1
    precedence = 30


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    pos: int = -1
    precedence = 40


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node
    pos: int = -1


# lexer ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


# parser --------------------------------------------------------------------

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}


class _Parser:
    def __init__(self, source: str, dim_N: int):
        self.tokens = _tokenize(source)
        self.i = 0
        self.dim_N = dim_N
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)
        return self.advance()

    def expression(self, rbp: int = 0) -> Node:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.peek()[2])
        left = self.prefix()
        while True:
            kind, text, pos = self.peek()
            if kind != "op" or text not in _INFIX or _INFIX[text] <= rbp:
                break
            self.advance()
            if text == "^":
                left = Pow(left, self.exponent(), pos)
            else:
                left = Binary(text, left, self.expression(_INFIX[text]), pos)
        self.depth -= 1
        return left

    def exponent(self) -> int:
        kind, text, pos = self.peek()
        sign = 1
        if kind == "op" and text == "-":
            self.advance()
            sign = -1
            kind, text, pos = self.peek()
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        self.advance()
        nxt = self.peek()
        if nxt[0] == "op" and nxt[1] == "^":
            raise ExprSyntaxError("exponent must be an integer literal", nxt[2])
        return sign * int(text)

    def prefix(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text), text, pos)
        if kind == "op" and text == "-":
            return Neg(self.expression(30), pos)
        if kind == "op" and text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if kind == "name":
            return self.name(text, pos)
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {text!r}", pos)

    def name(self, text: str, pos: int) -> Node:
        if text == "t":
            return TimeVar(pos)
        if text == "pi":
            return Const(math.pi, "pi", pos)
        if text in FUNCTIONS:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return Call(text, arg, pos)
        m = re.fullmatch(r"x([1-9][0-9]*)", text)
        if m:
            index = int(m.group(1))
            if index > self.dim_N:
                raise ExprSyntaxError(f"variable {text} out of range for N={self.dim_N}", pos)
            return SpaceVar(index, pos)
        raise ExprSyntaxError(f"unknown identifier {text!r}", pos)


def parse(source: str, dim_N: int = 1) -> Node:
    """Parse ``source`` into an AST over t and x1..x{dim_N}."""
    if dim_N < 1:
        raise ValueError("dim_N must be >= 1")
    p = _Parser(source, dim_N)
    node = p.expression(0)
    kind, text, pos = p.peek()
    if kind != "eof":
        raise ExprSyntaxError(f"unexpected {text!r}", pos)
    return node


# printing ------------------------------------------------------------------


def to_source(node: Node) -> str:
    """Canonical source text; parse(to_source(n)) reproduces n's structure."""
    if isinstance(node, Const):
        return node.text
    if isinstance(node, TimeVar):
        return "t"
    if isinstance(node, SpaceVar):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if node.operand.precedence < Neg.precedence:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if node.base.precedence <= Pow.precedence:
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Binary):
        prec = node.precedence
        left = to_source(node.left)
        right = to_source(node.right)
        if node.left.precedence < prec:
            left = f"({left})"
        if node.right.precedence <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# evaluation ----------------------------------------------------------------


def _first_index(mask):
    if np.ndim(mask) == 0:
        return None
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(mask)), np.shape(mask)))


def evaluate(node: Node, t, x):
    """Evaluate at time ``t`` and position ``x`` (last axis of length N).

    Works elementwise on broadcastable arrays.  Raises ExprDomainError on
    log of a non-positive value or division by zero.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        return _eval(node, t, x)


def _eval(node, t, x):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, TimeVar):
        return t
    if isinstance(node, SpaceVar):
        return x[..., node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, t, x)
    if isinstance(node, Binary):
        a = _eval(node.left, t, x)
        b = _eval(node.right, t, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        bad = np.asarray(b) == 0
        if np.any(bad):
            raise ExprDomainError("division by zero", node.pos, _first_index(np.broadcast_to(bad, np.broadcast(a, b).shape)))
        return a / b
    if isinstance(node, Pow):
        base = _eval(node.base, t, x)
        if node.exponent < 0:
            bad = np.asarray(base) == 0
            if np.any(bad):
                raise ExprDomainError("division by zero", node.pos, _first_index(bad))
        return base**node.exponent
    if isinstance(node, Call):
        a = _eval(node.arg, t, x)
        if node.func == "sin":
            return np.sin(a)
        if node.func == "cos":
            return np.cos(a)
        if node.func == "exp":
            return np.exp(a)
        if node.func == "abs_sq":
            return a * a
        bad = np.asarray(a) <= 0
        if np.any(bad):
            raise ExprDomainError("log of non-positive value", node.pos, _first_index(bad))
        return np.log(a)
    raise TypeError(f"not an expression node: {node!r}")


# differentiation -----------------------------------------------------------


def _c(value: int) -> Const:
    return Const(float(value), str(value))


def differentiate(node: Node, i: int) -> Node:
    """Exact symbolic partial derivative with respect to x_i (1-based)."""
    if i < 1:
        raise ValueError("coordinate index is 1-based")
    return _d(node, i)


def _d(node, i):
    p = node.pos
    if isinstance(node, (Const, TimeVar)):
        return Const(0.0, "0", p)
    if isinstance(node, SpaceVar):
        return Const(1.0, "1", p) if node.index == i else Const(0.0, "0", p)
    if isinstance(node, Neg):
        return Neg(_d(node.operand, i), p)
    if isinstance(node, Binary):
        u, v = node.left, node.right
        du, dv = _d(u, i), _d(v, i)
        if node.op in "+-":
            return Binary(node.op, du, dv, p)
        if node.op == "*":
            return Binary("+", Binary("*", du, v, p), Binary("*", u, dv, p), p)
        num = Binary("-", Binary("*", du, v, p), Binary("*", u, dv, p), p)
        return Binary("/", num, Pow(v, 2, p), p)
    if isinstance(node, Pow):
        n = node.exponent
        if n == 0:
            return Const(0.0, "0", p)
        inner = Binary("*", _c(n), Pow(node.base, n - 1, p), p)
        return Binary("*", inner, _d(node.base, i), p)
    if isinstance(node, Call):
        u = node.arg
        du = _d(u, i)
        if node.func == "sin":
            outer = Call("cos", u, p)
        elif node.func == "cos":
            outer = Neg(Call("sin", u, p), p)
        elif node.func == "exp":
            outer = Call("exp", u, p)
        elif node.func == "log":
            return Binary("/", du, u, p)
        else:
            outer = Binary("*", _c(2), u, p)
        return Binary("*", outer, du, p)
    raise TypeError(f"not an expression node: {node!r}")


def gradient(node: Node, dim_N: int) -> list:
    """List of partial-derivative ASTs, one per coordinate."""
    return [differentiate(node, i) for i in range(1, dim_N + 1)]
