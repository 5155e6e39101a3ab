"""
Recursive-descent parser for kernel / forcing formulas.

Grammar:
    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' integer)?
    unary  := '-' unary | atom
    atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

Offsets in errors are 1-based character positions; running off the end of
the text reports len(text) + 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from src.errors import BadArity, ExprSyntaxError, UnknownFunction
from src.exprlang.nodes import (
    FUNCTIONS,
    VARIABLES,
    BinOp,
    Call,
    Expr,
    Neg,
    Num,
    Pow,
    Var,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | end
    text: str
    offset: int  # 1-based


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(pos + 1, "a number, name, operator or parenthesis", text)
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos + 1))
        pos = m.end()
    tokens.append(Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # -----------------------------------------------------------------
    # Token helpers
    # -----------------------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _is_op(self, *symbols: str) -> bool:
        tok = self.current
        return tok.kind == "op" and tok.text in symbols

    def _advance(self) -> Token:
        tok = self.current
        self.pos += 1
        return tok

    def _expect_op(self, symbol: str, expected: str | None = None) -> Token:
        if not self._is_op(symbol):
            raise ExprSyntaxError(self.current.offset, expected or f"'{symbol}'", self.text)
        return self._advance()

    # -----------------------------------------------------------------
    # Grammar
    # -----------------------------------------------------------------

    def parse(self) -> Expr:
        if self.current.kind == "end":
            raise ExprSyntaxError(self.current.offset, "an expression", self.text)
        node = self.expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(self.current.offset, "an operator or end of input", self.text)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self._is_op("+", "-"):
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self._is_op("*", "/"):
            op = self._advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        node = self.unary()
        if self._is_op("^"):
            self._advance()
            tok = self.current
            if tok.kind != "num" or not tok.text.isdigit():
                raise ExprSyntaxError(tok.offset, "a nonnegative integer exponent", self.text)
            self._advance()
            node = Pow(node, int(tok.text))
        return node

    def unary(self) -> Expr:
        if self._is_op("-"):
            self._advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.current
        if tok.kind == "num":
            self._advance()
            return Num(float(tok.text))

        if tok.kind == "ident":
            self._advance()
            if self._is_op("("):
                return self.call(tok)
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(self.current.offset, "'('", self.text)
            raise ExprSyntaxError(
                tok.offset, "one of the variables " + ", ".join(sorted(VARIABLES)), self.text
            )

        if self._is_op("("):
            self._advance()
            node = self.expr()
            self._expect_op(")")
            return node

        raise ExprSyntaxError(tok.offset, "a number, name, '-' or '('", self.text)

    def call(self, name_tok: Token) -> Expr:
        name = name_tok.text
        if name not in FUNCTIONS:
            raise UnknownFunction(name, name_tok.offset)
        self._expect_op("(")
        args = [self.expr()]
        while not self._is_op(")"):
            self._expect_op(",", "',' or ')'")
            args.append(self.expr())
        self._advance()
        arity = FUNCTIONS[name]
        if len(args) != arity:
            raise BadArity(name, arity, len(args), name_tok.offset)
        return Call(name, tuple(args))


def parse(text: str) -> Expr:
    """
    Parse one formula.

    Raises:
        ExprSyntaxError: malformed text (1-based offset + expected token).
        UnknownFunction: call of a name that is not a builtin.
        BadArity: builtin called with the wrong number of arguments.
    """
    return _Parser(text).parse()
