"""Scalar expressions over named phase-space variables.

Grammar (EBNF, also documented in the README):

    expr     = term , { ("+" | "-") , term } ;
    term     = factor , { ("*" | "/") , factor } ;
    factor   = "-" , factor | power ;
    power    = atom , { "^" , exponent } ;
    exponent = "-" , exponent | atom ;
    atom     = NUMBER | NAME | NAME , "(" , expr , ")" | "(" , expr , ")" ;

Binary operators of equal precedence associate to the left.  ``^`` binds
tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Values and first
derivatives are computed in one forward pass with dual numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownNameError

__all__ = [
    "Const",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "Call",
    "Expr",
    "FunctionDef",
    "Dual",
    "parse_expression",
    "evaluate",
    "grad",
    "to_source",
    "substitute",
    "fold_constants",
    "ScalarField",
]


# --------------------------------------------------------------------------
# AST nodes (immutable)

@dataclass(frozen=True, slots=True)
class Const:
    value: float


@dataclass(frozen=True, slots=True)
class Var:
    name: str


@dataclass(frozen=True, slots=True)
class Param:
    name: str


@dataclass(frozen=True, slots=True)
class Unary:
    op: str  # neg, sin, cos, exp, sqrt, abs
    arg: "Expr"


@dataclass(frozen=True, slots=True)
class Binary:
    op: str  # + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    arg: "Expr"


Expr = Union[Const, Var, Param, Unary, Binary, Call]


@dataclass(frozen=True)
class FunctionDef:
    """User-registered smooth 1-argument function (e.g. a potential V)."""

    name: str
    arg: str
    body: Expr


# --------------------------------------------------------------------------
# Dual numbers

class Dual:
    """Value plus a vector of first derivatives (one slot per seed variable)."""

    __slots__ = ("v", "d")

    def __init__(self, v: float, d: np.ndarray):
        self.v = v
        self.d = d

    @staticmethod
    def constant(v: float, nslots: int) -> "Dual":
        return Dual(float(v), np.zeros(nslots))

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v + other.v, self.d + other.d)
        return Dual(self.v + other, self.d)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v - other.v, self.d - other.d)
        return Dual(self.v - other, self.d)

    def __rsub__(self, other):
        return Dual(other - self.v, -self.d)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v * other.v, self.v * other.d + other.v * self.d)
        return Dual(self.v * other, self.d * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.v == 0.0:
                raise DomainError("division by zero")
            inv = 1.0 / other.v
            return Dual(self.v * inv, (self.d - (self.v * inv) * other.d) * inv)
        if other == 0.0:
            raise DomainError("division by zero")
        return Dual(self.v / other, self.d / other)

    def __rtruediv__(self, other):
        if self.v == 0.0:
            raise DomainError("division by zero")
        inv = 1.0 / self.v
        return Dual(other * inv, (-other * inv * inv) * self.d)

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __repr__(self):  # pragma: no cover
        return f"Dual({self.v}, {self.d})"


def _pow(base, expo):
    """x^y with integer exponents valid for any base, real exponents for base > 0."""
    bv = base.v if isinstance(base, Dual) else base
    ev = expo.v if isinstance(expo, Dual) else expo
    exponent_varies = isinstance(expo, Dual) and np.any(expo.d != 0.0)
    if not exponent_varies and float(ev).is_integer():
        n = int(ev)
        if bv == 0.0 and n < 0:
            raise DomainError("zero raised to a negative power")
        if isinstance(base, Dual):
            if bv == 0.0 and n == 0:
                return Dual.constant(1.0, base.d.shape[0])
            val = bv**n
            dcoef = 0.0 if n == 0 else n * bv ** (n - 1)
            return Dual(val, dcoef * base.d)
        return bv**n
    if bv <= 0.0:
        raise DomainError("non-integer exponent requires a positive base")
    if isinstance(base, Dual) or isinstance(expo, Dual):
        # x^y = exp(y log x)
        logb = math.log(bv)
        val = math.exp(ev * logb)
        n = base.d.shape[0] if isinstance(base, Dual) else expo.d.shape[0]
        d = np.zeros(n)
        if isinstance(base, Dual):
            d = d + (ev * val / bv) * base.d
        if isinstance(expo, Dual):
            d = d + (val * logb) * expo.d
        return Dual(val, d)
    return bv**ev


def _sqrt(x):
    if isinstance(x, Dual):
        if x.v < 0.0:
            raise DomainError("sqrt of a negative number")
        if x.v == 0.0 and np.any(x.d != 0.0):
            raise DomainError("sqrt derivative singular at zero")
        r = math.sqrt(x.v)
        return Dual(r, x.d / (2.0 * r) if r != 0.0 else x.d * 0.0)
    if x < 0.0:
        raise DomainError("sqrt of a negative number")
    return math.sqrt(x)


def _abs(x):
    if isinstance(x, Dual):
        s = math.copysign(1.0, x.v) if x.v != 0.0 else 0.0
        return Dual(abs(x.v), s * x.d)
    return abs(x)


_UNARY_FNS = {
    "neg": lambda x: -x,
    "sin": lambda x: Dual(math.sin(x.v), math.cos(x.v) * x.d) if isinstance(x, Dual) else math.sin(x),
    "cos": lambda x: Dual(math.cos(x.v), -math.sin(x.v) * x.d) if isinstance(x, Dual) else math.cos(x),
    "exp": lambda x: Dual(math.exp(x.v), math.exp(x.v) * x.d) if isinstance(x, Dual) else math.exp(x),
    "sqrt": _sqrt,
    "abs": _abs,
}

_BUILTIN_NAMES = ("sin", "cos", "exp", "sqrt", "abs")


# --------------------------------------------------------------------------
# Tokenizer / parser

_OPS = set("+-*/^(),")


def _tokenize(source: str):
    tokens = []  # (kind, text, pos)
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal {text!r}", i) from None
            tokens.append(("num", text, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, variables, parameters, functions):
        self.tokens = tokens
        self.pos = 0
        self.variables = frozenset(variables)
        self.parameters = frozenset(parameters)
        self.functions = frozenset(functions)

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, t, pos = self.next()
        if kind != "op" or t != text:
            raise ExprSyntaxError(f"expected {text!r}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.next()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.next()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.next()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while self.peek()[:2] == ("op", "^"):
            self.next()
            node = Binary("^", node, self.exponent())
        return node

    def exponent(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.next()
            return Unary("neg", self.exponent())
        return self.atom()

    def atom(self) -> Expr:
        kind, text, pos = self.next()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                self.next()
                arg = self.expr()
                self.expect(")")
                if text in _BUILTIN_NAMES:
                    return Unary(text, arg)
                if text in self.functions:
                    return Call(text, arg)
                raise UnknownNameError(text, pos)
            if text in self.variables:
                return Var(text)
            if text in self.parameters:
                return Param(text)
            raise UnknownNameError(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)


def parse_expression(
    source: str,
    variables: Iterable[str],
    parameters: Iterable[str] = (),
    functions: Iterable[str] = (),
) -> Expr:
    """Parse infix source into an immutable AST.

    Every identifier must be a declared variable, parameter, registered
    function name, or one of the builtins sin/cos/exp/sqrt/abs.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(_tokenize(source), variables, parameters, functions).parse()


# --------------------------------------------------------------------------
# Evaluation

def _eval(node: Expr, env: Mapping[str, object], functions: Mapping[str, FunctionDef]):
    t = type(node)
    if t is Const:
        return node.value
    if t is Var or t is Param:
        return env[node.name]
    if t is Binary:
        a = _eval(node.left, env, functions)
        b = _eval(node.right, env, functions)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            bv = b.v if isinstance(b, Dual) else b
            if bv == 0.0:
                raise DomainError("division by zero")
            return a / b
        return _pow(a, b)
    if t is Unary:
        return _UNARY_FNS[node.op](_eval(node.arg, env, functions))
    # Call: the body was parsed with the formal argument as its only variable,
    # so keeping the outer env around only exposes parameter values to it.
    f = functions[node.name]
    arg = _eval(node.arg, env, functions)
    inner = dict(env)
    inner[f.arg] = arg
    return _eval(f.body, inner, functions)


def evaluate(
    expr: Expr,
    binding: Mapping[str, float],
    functions: Mapping[str, FunctionDef] | None = None,
) -> float:
    """Value of the expression at the given point (IEEE doubles)."""
    out = _eval(expr, binding, functions or {})
    if isinstance(out, Dual):
        return out.v
    return float(out)


def grad(
    expr: Expr,
    binding: Mapping[str, float],
    wrt: Sequence[str],
    functions: Mapping[str, FunctionDef] | None = None,
) -> np.ndarray:
    """Forward-mode partial derivatives in the order of ``wrt``."""
    m = len(wrt)
    env: dict[str, object] = dict(binding)
    for i, name in enumerate(wrt):
        d = np.zeros(m)
        d[i] = 1.0
        env[name] = Dual(float(binding[name]), d)
    out = _eval(expr, env, functions or {})
    if isinstance(out, Dual):
        return out.d
    return np.zeros(m)


# --------------------------------------------------------------------------
# Printing / rewriting

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(expr: Expr, _parent_prec: int = 0, _right: bool = False) -> str:
    """Pretty-print; parse(to_source(parse(s))) is structurally parse(s)."""
    t = type(expr)
    if t is Const:
        s = _fmt_number(expr.value)
        return f"({s})" if expr.value < 0 and _parent_prec > 0 else s
    if t is Var or t is Param:
        return expr.name
    if t is Unary:
        if expr.op == "neg":
            inner = to_source(expr.arg, _PREC["neg"])
            s = f"-{inner}"
            return f"({s})" if _parent_prec > _PREC["neg"] or (_right and _parent_prec == _PREC["neg"]) else s
        return f"{expr.op}({to_source(expr.arg)})"
    if t is Call:
        return f"{expr.name}({to_source(expr.arg)})"
    prec = _PREC[expr.op]
    left = to_source(expr.left, prec, False)
    right = to_source(expr.right, prec, True)
    s = f"{left} {expr.op} {right}" if expr.op in "+-" else f"{left}{expr.op}{right}"
    if _parent_prec > prec or (_right and _parent_prec == prec):
        return f"({s})"
    return s


def substitute(expr: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables/parameters by expressions (names not in mapping pass through)."""
    t = type(expr)
    if t is Const:
        return expr
    if t is Var or t is Param:
        return mapping.get(expr.name, expr)
    if t is Unary:
        return Unary(expr.op, substitute(expr.arg, mapping))
    if t is Call:
        return Call(expr.name, substitute(expr.arg, mapping))
    return Binary(expr.op, substitute(expr.left, mapping), substitute(expr.right, mapping))


def fold_constants(expr: Expr) -> Expr:
    """Light normalization: evaluate constant subtrees, drop +0/*1 units."""
    t = type(expr)
    if t in (Const, Var, Param):
        return expr
    if t is Unary:
        arg = fold_constants(expr.arg)
        if isinstance(arg, Const):
            return Const(float(_UNARY_FNS[expr.op](arg.value)))
        return Unary(expr.op, arg)
    if t is Call:
        return Call(expr.name, fold_constants(expr.arg))
    left = fold_constants(expr.left)
    right = fold_constants(expr.right)
    if isinstance(left, Const) and isinstance(right, Const):
        env: dict[str, float] = {}
        return Const(evaluate(Binary(expr.op, left, right), env))
    if expr.op == "+":
        if isinstance(left, Const) and left.value == 0.0:
            return right
        if isinstance(right, Const) and right.value == 0.0:
            return left
    if expr.op == "-" and isinstance(right, Const) and right.value == 0.0:
        return left
    if expr.op == "*":
        if isinstance(left, Const) and left.value == 1.0:
            return right
        if isinstance(right, Const) and right.value == 1.0:
            return left
        if isinstance(left, Const) and left.value == 0.0:
            return Const(0.0)
        if isinstance(right, Const) and right.value == 0.0:
            return Const(0.0)
    return Binary(expr.op, left, right)


# --------------------------------------------------------------------------
# Bound scalar field over an ordered coordinate tuple (hot path for integrators)

class ScalarField:
    """Expression bound to a fixed coordinate order and fixed parameter values."""

    def __init__(
        self,
        expr: Expr,
        coords: Sequence[str],
        params: Mapping[str, float] | None = None,
        functions: Mapping[str, FunctionDef] | None = None,
    ):
        self.expr = expr
        self.coords = tuple(coords)
        self.params = dict(params or {})
        self.functions = dict(functions or {})
        self._seeds = np.eye(len(self.coords))

    def value(self, x) -> float:
        env = dict(self.params)
        for name, xi in zip(self.coords, x):
            env[name] = float(xi)
        return evaluate(self.expr, env, self.functions)

    def gradient(self, x) -> np.ndarray:
        env: dict[str, object] = dict(self.params)
        for i, name in enumerate(self.coords):
            env[name] = Dual(float(x[i]), self._seeds[i])
        out = _eval(self.expr, env, self.functions)
        if isinstance(out, Dual):
            return out.d.copy()
        return np.zeros(len(self.coords))

    def value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        env: dict[str, object] = dict(self.params)
        for i, name in enumerate(self.coords):
            env[name] = Dual(float(x[i]), self._seeds[i])
        out = _eval(self.expr, env, self.functions)
        if isinstance(out, Dual):
            return out.v, out.d.copy()
        return float(out), np.zeros(len(self.coords))
