"""A small arithmetic expression language for metric and tensor components.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' int)?
    atom   := number | var | func '(' expr ')' | '(' expr ')' | '-' factor

Variables are ``x1 .. xn``; functions are sin, cos, exp, log, sqrt.
Unary minus takes a whole factor, so ``-x1^2`` is ``-(x1^2)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log, "sqrt": math.sqrt}

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VAR = re.compile(r"x([1-9][0-9]*)$")
_MINUS = ("-", "−")


class ExpressionError(ValueError):
    """Parse failure; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.reason = message
        self.offset = offset


class EvaluationError(ValueError):
    pass


class Expr:
    def evaluate(self, x) -> float:
        raise NotImplementedError

    def variables(self) -> frozenset[int]:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def evaluate(self, x):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based

    def evaluate(self, x):
        return float(x[self.index - 1])

    def variables(self):
        return frozenset({self.index})

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def evaluate(self, x):
        return -self.operand.evaluate(x)

    def variables(self):
        return self.operand.variables()

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, x):
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0.0:
            raise EvaluationError("division by zero")
        return a / b

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def evaluate(self, x):
        b = self.base.evaluate(x)
        if b == 0.0 and self.exponent < 0:
            raise EvaluationError("zero to a negative power")
        try:
            return b**self.exponent
        except OverflowError:
            raise EvaluationError("overflow in power") from None

    def variables(self):
        return self.base.variables()

    def __str__(self):
        base = str(self.base)
        if not isinstance(self.base, (Num, Var, Call)):
            base = f"({base})"
        return f"{base}^{self.exponent}"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def evaluate(self, x):
        try:
            return FUNCTIONS[self.func](self.arg.evaluate(x))
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"{self.func}: {exc}") from None

    def variables(self):
        return self.arg.variables()

    def __str__(self):
        return f"{self.func}({self.arg})"


class _Parser:
    def __init__(self, src: str, dim: int | None):
        self.src = src
        self.dim = dim
        self.pos = 0

    def error(self, message, pos=None):
        pos = self.pos if pos is None else pos
        raise ExpressionError(message, len(self.src[:pos].encode("utf-8")))

    def skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def parse(self) -> Expr:
        tree = self.expr()
        if self.peek():
            if self.peek() == ")":
                self.error("unbalanced parentheses")
            self.error(f"unexpected {self.peek()!r}")
        return tree

    def expr(self):
        node = self.term()
        while (c := self.peek()) and (c == "+" or c in _MINUS):
            self.pos += 1
            node = BinOp("+" if c == "+" else "-", node, self.term())
        return node

    def term(self):
        node = self.factor()
        while (c := self.peek()) in ("*", "/") and c:
            self.pos += 1
            node = BinOp(c, node, self.factor())
        return node

    def factor(self):
        node = self.atom()
        if self.peek() == "^":
            self.pos += 1
            node = Pow(node, self.integer())
        return node

    def integer(self) -> int:
        self.skip()
        sign = 1
        if self.peek() in _MINUS and self.peek():
            sign = -1
            self.pos += 1
            self.skip()
        m = _NUMBER.match(self.src, self.pos)
        if not m:
            self.error("non-integer exponent" if self.peek() else "unexpected end of input")
        if "." in m.group(0) or m.group(2):
            self.error("non-integer exponent")
        self.pos = m.end()
        return sign * int(m.group(1))

    def atom(self):
        c = self.peek()
        if not c:
            self.error("unexpected end of input")
        if c in _MINUS:
            self.pos += 1
            return Neg(self.factor())
        if c == "(":
            open_at = self.pos
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("unbalanced parentheses", open_at if not self.peek() else None)
            self.pos += 1
            return node
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group(0)))
        m = _IDENT.match(self.src, self.pos)
        if m:
            name, start = m.group(0), self.pos
            self.pos = m.end()
            if name in FUNCTIONS:
                if self.peek() != "(":
                    self.error(f"expected '(' after {name}")
                self.pos += 1
                arg = self.expr()
                if self.peek() != ")":
                    self.error("unbalanced parentheses")
                self.pos += 1
                return Call(name, arg)
            v = _VAR.match(name)
            if v and (self.dim is None or int(v.group(1)) <= self.dim):
                return Var(int(v.group(1)))
            self.error(f"unknown identifier {name!r}", start)
        if c == ")":
            self.error("unbalanced parentheses")
        self.error(f"unexpected {c!r}")


def parse_expression(src: str, dim: int | None = None) -> Expr:
    """Parse ``src``; with ``dim`` given, variables beyond ``x{dim}`` are unknown identifiers."""
    return _Parser(src, dim).parse()
