"""Lexer and recursive-descent parser for the query language.

Grammar, loosest binding first on the boolean side:

    query    : ("P" | "Pr") "[" "<=" number "]" "(" pathop bool ")"
    pathop   : "<>" | "[]"
    bool     : orExpr ("imply" bool)?          right associative
    orExpr   : andExpr ("||" andExpr)*
    andExpr  : notExpr ("&&" notExpr)*
    notExpr  : "!" notExpr | "(" bool ")" | cmp | atom
    cmp      : arith ("<"|"<="|"=="|"!="|">="|">") arith
    arith    : term (("+"|"-") term)*
    term     : factor (("*"|"/") factor)*
    factor   : number | identpath | "-" factor
             | fn "(" arith ("," arith)? ")" | "(" arith ")"
    identpath: ident ("[" integer "]")? ("." ident ("[" integer "]")?)*

``fn`` is one of sqrt, abs, fabs (one argument) and pow (two arguments);
any other name followed by "(" is rejected. "imply" is a reserved word.

An opening "(" inside a property is ambiguous: it may wrap a nested
boolean or the left operand of a comparison ("(a + b) < 3"). The parser
first tries the boolean reading and backtracks when either the inside
fails to be a boolean or the token after the closing ")" can only continue
an arithmetic context. Failures record the furthest offending token, so a
ParseError always points at the first byte where no parse could continue.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .nodes import (
    And,
    Atom,
    BinOp,
    BoolExpr,
    Call,
    Cmp,
    FUNCTIONS,
    Ident,
    IdentifierPath,
    Imply,
    Neg,
    Not,
    NumLit,
    Or,
    PathOp,
    Query,
    Segment,
    TimeBound,
)


class ParseError(Exception):
    """Syntax error with the byte offset of the first offending character."""

    def __init__(self, position: int, message: str):
        super().__init__(f"{message} (at offset {position})")
        self.position = position
        self.message = message


class _Fail(Exception):
    """Internal, recoverable parse failure; never escapes parse_query."""


_IDENT = "ident"
_NUMBER = "number"
_SYM = "sym"
_IMPLY = "imply"
_EOF = "eof"

_SYMBOLS = (
    "<=", ">=", "==", "!=", "&&", "||", "<>", "[]",
    "<", ">", "!", "(", ")", "[", "]", "+", "-", "*", "/", ",", ".",
)

# Tokens that cannot follow a complete boolean sub-expression; seeing one
# right after "(...)" proves the parenthesis was arithmetic.
_ARITH_CONTINUATION = {"<", "<=", "==", "!=", ">=", ">", "+", "-", "*", "/"}

_CMP_TOKENS = ("<", "<=", "==", "!=", ">=", ">")


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    pos: int


def _lex(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(_Token(_IMPLY if word == "imply" else _IDENT, word, i))
            i = j
            continue
        if c.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token(_NUMBER, text[i:j], i))
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token(_SYM, sym, i))
                i += len(sym)
                break
        else:
            raise ParseError(i, f"unexpected character {c!r}")
    tokens.append(_Token(_EOF, "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.err_pos = 0
        self.err_msg = "invalid query"

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != _EOF:
            self.pos += 1
        return tok

    def at_sym(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == _SYM and tok.text in texts

    def fail(self, message: str) -> None:
        tok = self.peek()
        if tok.pos >= self.err_pos:
            self.err_pos = tok.pos
            self.err_msg = message
        raise _Fail()

    def expect_sym(self, text: str) -> None:
        if not self.at_sym(text):
            self.fail(f"expected '{text}'")
        self.advance()

    # -- query ---------------------------------------------------------

    def query(self) -> Query:
        head = self.peek()
        if head.kind != _IDENT or head.text not in ("P", "Pr"):
            self.fail("expected 'P' or 'Pr'")
        self.advance()
        self.expect_sym("[")
        self.expect_sym("<=")
        if self.peek().kind != _NUMBER:
            self.fail("expected a numeric time bound")
        bound = Fraction(self.advance().text)
        self.expect_sym("]")
        self.expect_sym("(")
        if self.at_sym("<>"):
            path_op = PathOp.EVENTUALLY
        elif self.at_sym("[]"):
            path_op = PathOp.GLOBALLY
        else:
            self.fail("expected path operator '<>' or '[]'")
        self.advance()
        prop = self.bool_expr()
        self.expect_sym(")")
        if self.peek().kind != _EOF:
            self.fail("unexpected trailing input")
        return Query(TimeBound(bound), path_op, prop)

    # -- boolean layer --------------------------------------------------

    def bool_expr(self) -> BoolExpr:
        lhs = self.or_expr()
        if self.peek().kind == _IMPLY:
            self.advance()
            return Imply(lhs, self.bool_expr())
        return lhs

    def or_expr(self) -> BoolExpr:
        children = [self.and_expr()]
        while self.at_sym("||"):
            self.advance()
            children.append(self.and_expr())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def and_expr(self) -> BoolExpr:
        children = [self.not_expr()]
        while self.at_sym("&&"):
            self.advance()
            children.append(self.not_expr())
        return children[0] if len(children) == 1 else And(tuple(children))

    def not_expr(self) -> BoolExpr:
        if self.at_sym("!"):
            self.advance()
            return Not(self.not_expr())
        if self.at_sym("("):
            saved = self.pos
            try:
                self.advance()
                inner = self.bool_expr()
                self.expect_sym(")")
            except _Fail:
                self.pos = saved
            else:
                if not (self.peek().kind == _SYM and self.peek().text in _ARITH_CONTINUATION):
                    return inner
                self.pos = saved
        return self.cmp_or_atom()

    def cmp_or_atom(self) -> BoolExpr:
        lhs = self.arith()
        if self.at_sym(*_CMP_TOKENS):
            op = self.advance().text
            return Cmp(op, lhs, self.arith())
        if isinstance(lhs, Ident):
            return Atom(lhs.path)
        self.fail("expected a comparison operator")
        raise AssertionError("unreachable")

    # -- arithmetic layer -----------------------------------------------

    def arith(self) -> BinOp | Call | Ident | Neg | NumLit:
        node = self.term()
        while self.at_sym("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at_sym("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok.kind == _NUMBER:
            self.advance()
            return NumLit(Fraction(tok.text))
        if self.at_sym("-"):
            self.advance()
            return Neg(self.factor())
        if self.at_sym("("):
            self.advance()
            node = self.arith()
            self.expect_sym(")")
            return node
        if tok.kind == _IDENT:
            if self.peek(1).kind == _SYM and self.peek(1).text == "(":
                if tok.text not in FUNCTIONS:
                    self.fail(f"unknown function '{tok.text}'")
                return self.call()
            return Ident(self.identpath())
        self.fail("expected a number, identifier, function call, '-' or '('")

    def call(self) -> Call:
        fn = self.advance().text
        self.expect_sym("(")
        args = [self.arith()]
        if self.at_sym(","):
            if fn != "pow":
                self.fail(f"'{fn}' takes exactly one argument")
            self.advance()
            args.append(self.arith())
        elif fn == "pow":
            self.fail("'pow' takes exactly two arguments")
        self.expect_sym(")")
        return Call(fn, tuple(args))

    def identpath(self) -> IdentifierPath:
        segments = [self.segment()]
        while self.at_sym("."):
            self.advance()
            segments.append(self.segment())
        return IdentifierPath(tuple(segments))

    def segment(self) -> Segment:
        tok = self.peek()
        if tok.kind != _IDENT:
            self.fail("expected an identifier")
        self.advance()
        index = None
        if self.at_sym("["):
            self.advance()
            num = self.peek()
            if num.kind != _NUMBER or "." in num.text:
                self.fail("expected an integer index")
            self.advance()
            index = int(num.text)
            self.expect_sym("]")
        return Segment(tok.text, index)


def parse_query(text: str) -> Query:
    """Parse a query string; raises ParseError pointing at the first bad byte."""
    parser = _Parser(_lex(text))
    try:
        return parser.query()
    except _Fail:
        raise ParseError(parser.err_pos, parser.err_msg) from None


def parse_property(text: str) -> BoolExpr:
    """Parse a bare boolean property (no probability wrapper)."""
    parser = _Parser(_lex(text))
    try:
        prop = parser.bool_expr()
        if parser.peek().kind != _EOF:
            parser.fail("unexpected trailing input")
        return prop
    except _Fail:
        raise ParseError(parser.err_pos, parser.err_msg) from None


def normalize_text(text: str) -> str:
    """Whitespace-insensitive normal form: lexemes joined by single spaces."""
    return " ".join(tok.text for tok in _lex(text)[:-1])
