"""Arithmetic expressions used by derived-metric formulas.

Grammar::

    expr   := term {("+" | "-") term}
    term   := factor {("*" | "/") factor}
    factor := NUMBER | SLOT | "time" | "(" expr ")" | "-" factor

Operators are left associative. ``time`` is the region wall time in seconds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from ..errors import GroupSyntaxError
from ..markers import UNDEFINED

TIME = "time"


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Slot:
    name: str


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Number, Slot, Time, Neg, BinOp]

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str, line: int | None, col0: int):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GroupSyntaxError(
                f"unexpected character {text[pos]!r}", line, col0 + pos + 1,
                "number, slot, 'time', operator or parenthesis",
            )
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), col0 + pos + 1))
        pos = m.end()
    tokens.append(("end", "", col0 + len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, line: int | None, col0: int):
        self.tokens = _tokenize(text, line, col0)
        self.i = 0
        self.line = line

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, expected):
        kind, text, col = self.peek()
        found = "end of expression" if kind == "end" else repr(text)
        raise GroupSyntaxError(f"unexpected {found}", self.line, col, expected)

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error("operator or end of expression")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "number":
            self.advance()
            return Number(float(text))
        if kind == "ident":
            self.advance()
            return Time() if text == TIME else Slot(text)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            if self.peek()[1] != ")":
                self.error("')'")
            self.advance()
            return node
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.factor())
        self.error("number, slot, 'time', '(' or '-'")


def parse_expression(text: str, line: int | None = None, column: int = 0) -> Node:
    """Parse ``text`` into an AST. ``line``/``column`` only shift error positions."""
    return _Parser(text, line, column).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 4


def format_expression(node: Node) -> str:
    """Print with the minimum parentheses needed to re-parse to the same tree."""
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, Slot):
        return node.name
    if isinstance(node, Time):
        return TIME
    if isinstance(node, Neg):
        inner = format_expression(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[node.op]
    left = format_expression(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = format_expression(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left}{node.op}{right}"


def referenced_slots(node: Node) -> set[str]:
    if isinstance(node, Slot):
        return {node.name}
    if isinstance(node, Neg):
        return referenced_slots(node.operand)
    if isinstance(node, BinOp):
        return referenced_slots(node.left) | referenced_slots(node.right)
    return set()


def uses_time(node: Node) -> bool:
    if isinstance(node, Time):
        return True
    if isinstance(node, Neg):
        return uses_time(node.operand)
    if isinstance(node, BinOp):
        return uses_time(node.left) or uses_time(node.right)
    return False


def evaluate(node: Node, bindings: Mapping[str, float], time: float | None = None):
    """Evaluate ``node``. Division by zero and non-finite results give UNDEFINED.

    Raises KeyError for an unbound slot and ValueError if ``time`` is needed
    but not positive.
    """
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Slot):
        return float(bindings[node.name])
    if isinstance(node, Time):
        if time is None or not time > 0:
            raise ValueError("formula references time but no positive time was given")
        return float(time)
    if isinstance(node, Neg):
        v = evaluate(node.operand, bindings, time)
        return UNDEFINED if v is UNDEFINED else -v
    a = evaluate(node.left, bindings, time)
    b = evaluate(node.right, bindings, time)
    if a is UNDEFINED or b is UNDEFINED:
        return UNDEFINED
    op = node.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    else:
        if b == 0:
            return UNDEFINED
        r = a / b
    return r if math.isfinite(r) else UNDEFINED
