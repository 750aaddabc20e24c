"""Parser for the mini query language.

    SELECT <items> FROM <table> [WHERE <conjuncts>] [GROUP BY <col>]

Items are column names, agg(col), or count(*); conjuncts are simple
`column <op> literal` comparisons joined by AND.  The grammar is LL(1) and
every parse error carries the byte offset it was detected at.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError
from .types import AggFunc, CmpOp, Predicate

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<float>[-+]?\d+\.\d*([eE][-+]?\d+)?|[-+]?\d+[eE][-+]?\d+)
  | (?P<int>[-+]?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>'(?:[^']|'')*')
  | (?P<op><=|>=|!=|<>|=|<|>)
  | (?P<punct>[(),*])
    """,
    re.VERBOSE,
)

_AGG_NAMES = {
    "count": AggFunc.COUNT,
    "sum": AggFunc.SUM,
    "min": AggFunc.MIN,
    "max": AggFunc.MAX,
    "avg": AggFunc.AVG,
}

_OPS = {
    "=": CmpOp.EQ,
    "!=": CmpOp.NE,
    "<>": CmpOp.NE,
    "<": CmpOp.LT,
    "<=": CmpOp.LE,
    ">": CmpOp.GT,
    ">=": CmpOp.GE,
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


@dataclass(frozen=True)
class SelectItem:
    """One item of the select list; `func` is None for a plain column."""

    func: Optional[AggFunc]
    column: Optional[str]
    display: str


@dataclass
class ParsedQuery:
    table: str
    items: list[SelectItem]
    where: list[Predicate] = field(default_factory=list)
    group_by: Optional[str] = None


def _tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(0), pos))
        pos = m.end()
    out.append(Token("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.cur.offset)

    def expect_keyword(self, word: str) -> None:
        tok = self.cur
        if tok.kind != "ident" or tok.text.lower() != word:
            raise self.error(f"expected {word.upper()}")
        self.advance()

    def keyword_is(self, word: str) -> bool:
        tok = self.cur
        return tok.kind == "ident" and tok.text.lower() == word

    def expect_ident(self, what: str) -> str:
        tok = self.cur
        if tok.kind != "ident":
            raise self.error(f"expected {what}")
        if tok.text.lower() in ("select", "from", "where", "group", "by", "and"):
            raise self.error(f"expected {what}")
        return self.advance().text

    def parse(self) -> ParsedQuery:
        self.expect_keyword("select")
        items = [self.parse_item()]
        while self.cur.text == ",":
            self.advance()
            items.append(self.parse_item())
        self.expect_keyword("from")
        table = self.expect_ident("table name")
        where: list[Predicate] = []
        if self.keyword_is("where"):
            self.advance()
            where.append(self.parse_cmp())
            while self.keyword_is("and"):
                self.advance()
                where.append(self.parse_cmp())
        group_by = None
        if self.keyword_is("group"):
            self.advance()
            self.expect_keyword("by")
            group_by = self.expect_ident("group-by column")
        if self.cur.kind != "eof":
            raise self.error("unexpected trailing input")
        return ParsedQuery(table=table, items=items, where=where,
                           group_by=group_by)

    def parse_item(self) -> SelectItem:
        name = self.expect_ident("column or aggregate")
        if self.cur.text != "(":
            return SelectItem(None, name, name)
        func = _AGG_NAMES.get(name.lower())
        if func is None:
            raise self.error(f"unknown aggregate {name!r}")
        self.advance()  # (
        if self.cur.text == "*":
            if func is not AggFunc.COUNT:
                raise self.error("only count accepts *")
            self.advance()
            func = AggFunc.COUNT_STAR
            column = None
            display = f"{name.lower()}(*)"
        else:
            column = self.expect_ident("aggregate column")
            display = f"{name.lower()}({column})"
        if self.cur.text != ")":
            raise self.error("expected )")
        self.advance()
        return SelectItem(func, column, display)

    def parse_cmp(self) -> Predicate:
        column = self.expect_ident("column")
        tok = self.cur
        if tok.kind != "op":
            raise self.error("expected comparison operator")
        op = _OPS[self.advance().text]
        lit = self.parse_literal()
        return Predicate(column, op, lit)

    def parse_literal(self):
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            return int(tok.text)
        if tok.kind == "float":
            self.advance()
            return float(tok.text)
        if tok.kind == "str":
            self.advance()
            return tok.text[1:-1].replace("''", "'")
        raise self.error("expected literal")


def parse(text: str) -> ParsedQuery:
    return _Parser(text).parse()
