"""Tiny expression language for user nonlinearities f(t, x).

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := number | 't' | 'x' | func '(' expr ')' | '(' expr ')'

There is no implicit multiplication, so ``2x`` is rejected.
Evaluation is vectorised over numpy arrays and refuses to hand back
non-finite values.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = ("t", "x")
FUNCTIONS = ("exp", "log", "sqrt", "abs", "sin", "cos", "atan", "sinh", "cosh")
BINARY_OPS = ("+", "-", "*", "/", "^")


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error; ``column`` is 1-based."""

    def __init__(self, column: int, message: str):
        self.column = column
        self.message = message
        super().__init__(f"parse error at column {column}: {message}")


class DomainError(ExprError):
    """A node produced a non-finite or complex value."""

    def __init__(self, node: "Expr", message: str):
        self.node = node
        super().__init__(f"domain error in '{to_string(node)}': {message}")


class NonDifferentiableError(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(
            f"'{name}' is not differentiable everywhere; "
            "use the finite-difference derivative mode"
        )


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(col, f"unexpected character {text[col - 1]!r}")
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        where = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(tok[2], f"{message} (found {where})")

    def accept(self, value):
        if self.tok[0] == "op" and self.tok[1] == value:
            self.i += 1
            return True
        return False

    def parse(self):
        node = self.expr()
        if self.tok[0] != "end":
            if self.tok[1] == ")":
                raise ParseError(self.tok[2], "unbalanced parentheses: unexpected ')'")
            self.error("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, col = self.tok
        if kind == "num":
            self.i += 1
            return Const(float(value))
        if kind == "ident":
            self.i += 1
            if value in VARIABLES:
                return Var(value)
            if value in FUNCTIONS:
                if not self.accept("("):
                    self.error(f"expected '(' after function '{value}'")
                arg = self.expr()
                if not self.accept(")"):
                    if self.tok[0] == "end":
                        raise ParseError(self.tok[2], "unbalanced parentheses: missing ')'")
                    self.error("expected ')'")
                return Call(value, arg)
            raise ParseError(col, f"unknown identifier '{value}'")
        if kind == "op" and value == "(":
            self.i += 1
            node = self.expr()
            if not self.accept(")"):
                if self.tok[0] == "end":
                    raise ParseError(self.tok[2], "unbalanced parentheses: missing ')'")
                self.error("expected ')'")
            return node
        self.error("expected a number, variable, function or '('")


def parse(text: str) -> Expr:
    if not text or not text.strip():
        raise ParseError(1, "empty expression")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# formatting

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt_const(v):
    if v < 0 or not math.isfinite(v):
        # only reachable for trees built by hand or by diff_x
        return f"({v!r})"
    if v.is_integer() and v < 1e16:
        return str(int(v))
    return repr(v)


def to_string(node: Expr) -> str:
    """Canonical text with the fewest parentheses that re-parse identically."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
    p = _PREC[node.op]
    left, right = to_string(node.left), to_string(node.right)
    if node.op == "^":
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# evaluation

_UFUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "atan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
}


def _check(node, value):
    if not np.all(np.isfinite(value)):
        raise DomainError(node, "non-finite result")
    return value


def _eval(node, t, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return t if node.name == "t" else x
    if isinstance(node, Neg):
        return -_eval(node.arg, t, x)
    if isinstance(node, Call):
        arg = _eval(node.arg, t, x)
        if node.func == "log" and np.any(np.asarray(arg) <= 0):
            raise DomainError(node, "log of a non-positive value")
        if node.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise DomainError(node, "sqrt of a negative value")
        return _check(node, _UFUNCS[node.func](arg))
    a = _eval(node.left, t, x)
    b = _eval(node.right, t, x)
    if node.op == "+":
        out = a + b
    elif node.op == "-":
        out = a - b
    elif node.op == "*":
        out = a * b
    elif node.op == "/":
        if np.any(np.asarray(b) == 0):
            raise DomainError(node, "division by zero")
        out = a / b
    else:
        base, expo = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        if np.any((base < 0) & (expo != np.round(expo))):
            raise DomainError(node, "negative base with non-integer exponent")
        if np.any((base == 0) & (expo < 0)):
            raise DomainError(node, "zero raised to a negative power")
        out = np.power(base, expo)
    return _check(node, out)


def evaluate(node: Expr, t, x):
    """Evaluate at scalar or broadcastable array arguments.

    Returns a float for scalar inputs and an ndarray otherwise.
    """
    scalar = np.ndim(t) == 0 and np.ndim(x) == 0
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(node, t, x)
    out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(t, x).shape)
    return float(out) if scalar else np.array(out)


# ---------------------------------------------------------------------------
# differentiation

ZERO = Const(0.0)
ONE = Const(1.0)


def depends_on_x(node: Expr) -> bool:
    if isinstance(node, Const):
        return False
    if isinstance(node, Var):
        return node.name == "x"
    if isinstance(node, (Neg, Call)):
        return depends_on_x(node.arg)
    return depends_on_x(node.left) or depends_on_x(node.right)


def contains_function(node: Expr, name: str) -> bool:
    if isinstance(node, (Const, Var)):
        return False
    if isinstance(node, Call):
        return node.func == name or contains_function(node.arg, name)
    if isinstance(node, Neg):
        return contains_function(node.arg, name)
    return contains_function(node.left, name) or contains_function(node.right, name)


# minimal folding so derivatives stay readable; not a simplifier
def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def _neg(a):
    if a == ZERO:
        return ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _chain(u, du_outer):
    return _mul(du_outer, diff_x(u))


def diff_x(node: Expr) -> Expr:
    """Symbolic partial derivative with respect to x."""
    # t-only subtrees (abs included) have zero x-derivative
    if not depends_on_x(node):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return _neg(diff_x(node.arg))
    if isinstance(node, Call):
        u = node.arg
        f = node.func
        if f == "abs":
            raise NonDifferentiableError("abs")
        if f == "exp":
            return _chain(u, node)
        if f == "log":
            return _div(diff_x(u), u)
        if f == "sqrt":
            return _div(diff_x(u), BinOp("*", Const(2.0), node))
        if f == "sin":
            return _chain(u, Call("cos", u))
        if f == "cos":
            return _chain(u, Neg(Call("sin", u)))
        if f == "atan":
            return _div(diff_x(u), BinOp("+", ONE, BinOp("^", u, Const(2.0))))
        if f == "sinh":
            return _chain(u, Call("cosh", u))
        if f == "cosh":
            return _chain(u, Call("sinh", u))
        raise AssertionError(f)
    u, v = node.left, node.right
    if node.op == "+":
        return _add(diff_x(u), diff_x(v))
    if node.op == "-":
        return _sub(diff_x(u), diff_x(v))
    if node.op == "*":
        return _add(_mul(diff_x(u), v), _mul(u, diff_x(v)))
    if node.op == "/":
        num = _sub(_mul(diff_x(u), v), _mul(u, diff_x(v)))
        return _div(num, BinOp("^", v, Const(2.0)))
    # power
    if not depends_on_x(v):
        if isinstance(v, Const):
            lowered = Const(v.value - 1.0)
        else:
            lowered = BinOp("-", v, ONE)
        return _mul(_mul(v, BinOp("^", u, lowered)), diff_x(u))
    if not depends_on_x(u):
        return _mul(_mul(node, Call("log", u)), diff_x(v))
    # u^v = exp(v log u)
    inner = _add(_mul(diff_x(v), Call("log", u)), _div(_mul(v, diff_x(u)), u))
    return _mul(node, inner)


def central_difference(node: Expr, t, x, h=None):
    """Finite-difference df/dx with step 1e-6 * (1 + |x|) unless ``h`` is given."""
    x = np.asarray(x, dtype=float)
    step = 1e-6 * (1.0 + np.abs(x)) if h is None else h
    return (evaluate(node, t, x + step) - evaluate(node, t, x - step)) / (2.0 * step)
