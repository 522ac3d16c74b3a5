"""Recursive-descent parser for coordinate formulas.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' signed_number)?
    base   := number | ident | '(' expr ')' | func '(' expr ')'

Unary minus binds looser than ``^``, so ``-y1^2`` is ``neg(y1^2)``. A minus
directly on a numeric literal with no exponent gives a negative constant.
"""
from __future__ import annotations

import re

from ..errors import ParseError, UndeclaredVariableError
from .expr import UNARY_FUNCS, Binary, Const, Expr, Pow, Unary, Var

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            offset = len(text[:pos].encode())
            raise ParseError(f"unexpected character {text[pos]!r}", offset, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        offset = len(self.text[: tok[2]].encode())
        found = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(f"{msg}, found {found}", offset, self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            self.error(f"expected {value!r}")
        return self.take()

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else ("end", "", 0)
            if self.peek()[0] == "num" and not (nxt[0] == "op" and nxt[1] == "^"):
                return Const(-float(self.take()[1]))
            return Unary("neg", self.factor())
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1.0
            if self.peek()[0] == "op" and self.peek()[1] in "+-":
                sign = -1.0 if self.take()[1] == "-" else 1.0
            tok = self.peek()
            if tok[0] != "num":
                self.error("expected numeric exponent")
            self.take()
            node = Pow(node, sign * float(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        kind, value = tok[0], tok[1]
        if kind == "num":
            self.take()
            return Const(float(value))
        if kind == "ident":
            self.take()
            if value in UNARY_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if self.names is not None and value not in self.names:
                raise UndeclaredVariableError(value)
            return Var(value)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected number, coordinate, function or '('")


def parse_expr(text: str, chart=None) -> Expr:
    """Parse ``text`` into an expression tree.

    ``chart`` may be a :class:`Chart` or an iterable of allowed names; with
    ``None`` any identifier is accepted.
    """
    if chart is None:
        names = None
    elif hasattr(chart, "coords"):
        names = frozenset(chart.coords)
    else:
        names = frozenset(chart)
    p = _Parser(text, names)
    node = p.expr()
    if p.peek()[0] != "end":
        p.error("unexpected trailing input")
    return node
