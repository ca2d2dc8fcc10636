"""Expression language for coefficient functions on a chart.

Grammar (whitespace insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' int)?
    atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom

``ident`` is a coordinate (``x``, ``y``) or the constant ``pi``; ``func`` is one
of ``sin``, ``cos``, ``exp``, ``bump``.  Note that ``-x^2`` parses as
``(-x)^2`` because the unary minus belongs to the atom.

``bump(t) = exp(1 - 1/(1 - t^2))`` for ``|t| < 1`` and 0 otherwise.  Products
evaluate their right factor only where the left factor is nonzero, which keeps
``bump(t) * (rational in t)`` total even where the rational factor has poles
outside the support; derivatives of ``bump`` are always built in that order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "bump")
CONSTANTS = {"pi": math.pi}
VARIABLES = ("x", "y")


class Expr:
    def eval(self, env):
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        return frozenset()

    def __str__(self) -> str:
        return to_source(self)

    def __call__(self, **env):
        return evaluate(self, env)

    # Operator sugar for building fields programmatically.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return neg(self)


def _lift(v) -> Expr:
    return v if isinstance(v, Expr) else Num(float(v))


def _shape(env) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def eval(self, env):
        return np.full(_shape(env), self.value)

    def diff(self, var):
        return ZERO


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        try:
            v = env[self.name]
        except KeyError:
            raise EvaluationError(f"variable {self.name!r} is not bound") from None
        return np.broadcast_to(np.asarray(v, dtype=float), _shape(env)).copy()

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def variables(self):
        return frozenset([self.name])


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    right: Expr

    def variables(self):
        return self.left.variables() | self.right.variables()


class Add(BinOp):
    def eval(self, env):
        return self.left.eval(env) + self.right.eval(env)

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))


class Sub(BinOp):
    def eval(self, env):
        return self.left.eval(env) - self.right.eval(env)

    def diff(self, var):
        return sub(self.left.diff(var), self.right.diff(var))


class Mul(BinOp):
    def eval(self, env):
        shape = _shape(env)
        a = np.broadcast_to(self.left.eval(env), shape)
        mask = a != 0
        if mask.all():
            return a * self.right.eval(env)
        out = np.zeros(shape)
        if mask.any():
            sub_env = {k: np.broadcast_to(np.asarray(v, dtype=float), shape)[mask]
                       for k, v in env.items()}
            out[mask] = a[mask] * self.right.eval(sub_env)
        return out

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))


class Div(BinOp):
    def eval(self, env):
        num = self.left.eval(env)
        den = self.right.eval(env)
        if np.any(den == 0):
            raise EvaluationError(f"division by zero in {to_source(self)}")
        return num / den

    def diff(self, var):
        dl, dr = self.left.diff(var), self.right.diff(var)
        return sub(div(dl, self.right), div(mul(self.left, dr), power(self.right, 2)))


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def eval(self, env):
        b = self.base.eval(env)
        if self.exponent < 0 and np.any(b == 0):
            raise EvaluationError(f"division by zero in {to_source(self)}")
        return b ** float(self.exponent) if self.exponent < 0 else b ** self.exponent

    def diff(self, var):
        if self.exponent == 0:
            return ZERO
        return mul(mul(Num(float(self.exponent)), power(self.base, self.exponent - 1)),
                   self.base.diff(var))

    def variables(self):
        return self.base.variables()


def bump_values(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


_FUNC_IMPL = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "bump": bump_values}


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def eval(self, env):
        with np.errstate(over="raise"):
            try:
                return _FUNC_IMPL[self.func](self.arg.eval(env))
            except FloatingPointError:
                raise EvaluationError(f"overflow in {to_source(self)}") from None

    def diff(self, var):
        u = self.arg
        du = u.diff(var)
        if self.func == "sin":
            outer = Call("cos", u)
        elif self.func == "cos":
            outer = neg(Call("sin", u))
        elif self.func == "exp":
            outer = self
        else:
            # bump'(u) = bump(u) * (-2u / (1 - u^2)^2); bump stays on the left.
            outer = mul(self, div(mul(Num(-2.0), u), power(sub(ONE, power(u, 2)), 2)))
        return mul(outer, du)

    def variables(self):
        return self.arg.variables()


ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_num(a) and (n > 0 or a.value != 0):
        return Num(a.value ** n)
    return Pow(a, n)


def evaluate(e: Expr, env) -> np.ndarray:
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    with np.errstate(divide="ignore", invalid="ignore"):
        out = e.eval(env)
    return np.asarray(out, dtype=float)


def differentiate(e: Expr, var: str) -> Expr:
    return e.diff(var)


# ---------------------------------------------------------------- printing


def to_source(e: Expr) -> str:
    if isinstance(e, Num):
        text = repr(float(e.value))
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-({to_source(e.arg)})"
    if isinstance(e, Pow):
        return f"({to_source(e.base)})^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    return f"({to_source(e.left)} {op} {to_source(e.right)})"


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))")


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = src.encode()
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", len(src[:pos].encode()),
                             {"number", "identifier", "operator"})
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.text != text:
            raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.offset, {text})
        self.take()

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Expr:
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            sign = 1
            if self.peek().text == "-":
                self.take()
                sign = -1
            tok = self.peek()
            if tok.kind != "num" or not tok.text.isdigit():
                raise ParseError("exponent must be an integer", tok.offset, {"integer"})
            self.take()
            return Pow(base, sign * int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.take()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in VARIABLES:
                return Var(tok.text)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.offset,
                             set(VARIABLES) | set(CONSTANTS) | set(FUNCTIONS))
        if tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if tok.text == "-":
            self.take()
            return Neg(self.atom())
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.offset,
                         {"number", "identifier", "(", "-"} | set(FUNCTIONS))


def parse(src: str) -> Expr:
    if not src or not src.strip():
        raise ParseError("empty expression", 0, {"number", "identifier", "(", "-"})
    p = _Parser(src)
    node = p.expr()
    tok = p.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected {tok.text!r}", tok.offset, {"+", "-", "*", "/", "^", "end of input"})
    return node
