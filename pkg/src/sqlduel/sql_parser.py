"""Tokenizer and recursive-descent parser for the supported SQL subset.

The subset covers SELECT [DISTINCT] lists with aggregates and searched
CASE, INNER JOIN chains with ON conditions, WHERE with comparisons, LIKE,
IN lists, IS NULL and uncorrelated subqueries, GROUP BY, HAVING (parse
only), ORDER BY and LIMIT. Anything else raises :class:`UnsupportedSql`
naming the construct; bad syntax raises :class:`ParseError` with the
character offset.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, UnsupportedSql
from .sql_ast import (
    And,
    Arithmetic,
    CaseWhen,
    ColumnRef,
    Comparison,
    CompareSubquery,
    Expr,
    FromItem,
    FuncCall,
    InList,
    InSubquery,
    IsNull,
    Join,
    Like,
    Literal,
    Not,
    Or,
    OrderItem,
    SelectItem,
    SelectQuery,
    Star,
    SubqueryRef,
    TableRef,
    aggregate_calls,
    walk,
    AGGREGATE_FUNCTIONS,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*|/\*.*?\*/)
  | (?P<number>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<qident>"(?:[^"]|"")*"|`(?:[^`]|``)*`)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|\|\||[-+*/=<>(),.;])
    """,
    re.VERBOSE | re.DOTALL,
)

_UNSUPPORTED_KEYWORDS = {
    "UNION": "UNION", "INTERSECT": "INTERSECT", "EXCEPT": "EXCEPT",
    "EXISTS": "EXISTS", "BETWEEN": "BETWEEN", "CAST": "CAST",
    "OVER": "window function", "LEFT": "LEFT JOIN", "RIGHT": "RIGHT JOIN",
    "FULL": "FULL JOIN", "OUTER": "OUTER JOIN", "CROSS": "CROSS JOIN",
    "NATURAL": "NATURAL JOIN", "OFFSET": "OFFSET", "WITH": "WITH",
}


@dataclass(frozen=True)
class Token:
    kind: str  # number | string | ident | word | op | eof
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ParseError(f"unexpected character {text[pos]!r}", position=pos)
        if match.lastgroup != "ws":
            kind = match.lastgroup
            value = match.group()
            if kind == "qident":
                quote = value[0]
                value = value[1:-1].replace(quote * 2, quote)
                kind = "ident"
            tokens.append(Token(kind, value, pos))
        pos = match.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


def word_tokens(text: str) -> list[str]:
    """Lower-cased word tokens, string literals excluded.

    Falls back to a regex scan when the text does not tokenize, so keyword
    probing stays usable on queries the parser rejects.
    """
    try:
        return [t.value.lower() for t in tokenize(text) if t.kind == "word"]
    except ParseError:
        stripped = re.sub(r"'(?:[^']|'')*'", " ", text)
        return [w.lower() for w in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", stripped)]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.index = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.index + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != "eof":
            self.index += 1
        return token

    def at_keyword(self, *words: str) -> bool:
        token = self.peek()
        return token.kind == "word" and token.value.upper() in words

    def accept_keyword(self, *words: str) -> bool:
        if self.at_keyword(*words):
            self.advance()
            return True
        return False

    def expect_keyword(self, word: str) -> None:
        if not self.accept_keyword(word):
            token = self.peek()
            raise ParseError(f"expected {word}, found {token.value!r}", position=token.pos)

    def accept_op(self, op: str) -> bool:
        token = self.peek()
        if token.kind == "op" and token.value == op:
            self.advance()
            return True
        return False

    def expect_op(self, op: str) -> None:
        if not self.accept_op(op):
            token = self.peek()
            raise ParseError(f"expected {op!r}, found {token.value!r}", position=token.pos)

    def fail_if_unsupported(self) -> None:
        token = self.peek()
        if token.kind == "word":
            construct = _UNSUPPORTED_KEYWORDS.get(token.value.upper())
            if construct:
                raise UnsupportedSql(f"{construct} is not supported")

    # ----- grammar ---------------------------------------------------

    def parse_query(self) -> SelectQuery:
        self.expect_keyword("SELECT")
        distinct = self.accept_keyword("DISTINCT")
        self.accept_keyword("ALL")
        items = [self.parse_select_item()]
        while self.accept_op(","):
            items.append(self.parse_select_item())

        from_item = None
        joins: list[Join] = []
        if self.accept_keyword("FROM"):
            from_item = self.parse_from_item()
            while True:
                self.fail_if_unsupported()
                if self.accept_keyword("INNER"):
                    self.expect_keyword("JOIN")
                elif not self.accept_keyword("JOIN"):
                    break
                item = self.parse_from_item()
                self.expect_keyword("ON")
                joins.append(Join(item=item, condition=self.parse_expr()))
            if self.peek().kind == "op" and self.peek().value == ",":
                raise UnsupportedSql("comma-separated FROM list is not supported")

        where = self.parse_expr() if self.accept_keyword("WHERE") else None

        group_by: list[Expr] = []
        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            group_by.append(self.parse_expr())
            while self.accept_op(","):
                group_by.append(self.parse_expr())

        having = self.parse_expr() if self.accept_keyword("HAVING") else None

        order_by: list[OrderItem] = []
        if self.accept_keyword("ORDER"):
            self.expect_keyword("BY")
            order_by.append(self.parse_order_item())
            while self.accept_op(","):
                order_by.append(self.parse_order_item())

        limit = None
        if self.accept_keyword("LIMIT"):
            token = self.advance()
            if token.kind != "number" or not token.value.isdigit():
                raise ParseError("LIMIT expects a nonnegative integer", position=token.pos)
            limit = int(token.value)

        self.fail_if_unsupported()
        return SelectQuery(
            items=tuple(items),
            distinct=distinct,
            from_item=from_item,
            joins=tuple(joins),
            where=where,
            group_by=tuple(group_by),
            having=having,
            order_by=tuple(order_by),
            limit=limit,
        )

    def parse_select_item(self) -> SelectItem | Star:
        token = self.peek()
        if token.kind == "op" and token.value == "*":
            self.advance()
            return Star()
        if (
            token.kind in ("word", "ident")
            and self.peek(1).value == "."
            and self.peek(2).value == "*"
        ):
            self.advance()
            self.advance()
            self.advance()
            return Star(table=token.value)
        expr = self.parse_expr()
        alias = None
        if self.accept_keyword("AS"):
            alias = self.parse_name("alias")
        elif self.peek().kind == "ident" or (
            self.peek().kind == "word" and self.peek().value.upper() not in _CLAUSE_WORDS
        ):
            alias = self.advance().value
        return SelectItem(expr=expr, alias=alias)

    def parse_from_item(self) -> FromItem:
        self.fail_if_unsupported()
        if self.accept_op("("):
            query = self.parse_query()
            self.expect_op(")")
            self.accept_keyword("AS")
            alias = self.parse_name("derived-table alias")
            return SubqueryRef(query=query, alias=alias)
        name = self.parse_name("table name")
        alias = None
        if self.accept_keyword("AS"):
            alias = self.parse_name("alias")
        elif self.peek().kind == "ident" or (
            self.peek().kind == "word" and self.peek().value.upper() not in _CLAUSE_WORDS
        ):
            alias = self.advance().value
        return TableRef(name=name, alias=alias)

    def parse_name(self, what: str) -> str:
        token = self.peek()
        if token.kind == "ident":
            return self.advance().value
        if token.kind == "word":
            self.fail_if_unsupported()
            if token.value.upper() in _CLAUSE_WORDS:
                raise ParseError(f"expected {what}, found {token.value!r}", position=token.pos)
            return self.advance().value
        raise ParseError(f"expected {what}, found {token.value!r}", position=token.pos)

    def parse_order_item(self) -> OrderItem:
        expr = self.parse_expr()
        descending = False
        if self.accept_keyword("DESC"):
            descending = True
        else:
            self.accept_keyword("ASC")
        return OrderItem(expr=expr, descending=descending)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        items = [self.parse_and()]
        while self.accept_keyword("OR"):
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(items=tuple(items))

    def parse_and(self) -> Expr:
        items = [self.parse_not()]
        while self.accept_keyword("AND"):
            items.append(self.parse_not())
        return items[0] if len(items) == 1 else And(items=tuple(items))

    def parse_not(self) -> Expr:
        if self.accept_keyword("NOT"):
            return Not(operand=self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self) -> Expr:
        self.fail_if_unsupported()
        left = self.parse_additive()
        token = self.peek()
        if token.kind == "op" and token.value in ("=", "<>", "!=", "<", "<=", ">", ">="):
            op = self.advance().value
            if self.peek().value == "(" and self.peek(1).kind == "word" \
                    and self.peek(1).value.upper() == "SELECT":
                self.advance()
                query = self.parse_query()
                self.expect_op(")")
                return CompareSubquery(op=op, operand=left, query=query)
            return Comparison(op=op, left=left, right=self.parse_additive())
        negated = self.accept_keyword("NOT")
        if self.accept_keyword("LIKE"):
            return Like(operand=left, pattern=self.parse_additive(), negated=negated)
        if self.accept_keyword("IN"):
            self.expect_op("(")
            if self.at_keyword("SELECT"):
                query = self.parse_query()
                self.expect_op(")")
                return InSubquery(operand=left, query=query, negated=negated)
            items = [self.parse_additive()]
            while self.accept_op(","):
                items.append(self.parse_additive())
            self.expect_op(")")
            return InList(operand=left, items=tuple(items), negated=negated)
        if negated:
            token = self.peek()
            raise ParseError(
                f"expected LIKE or IN after NOT, found {token.value!r}", position=token.pos
            )
        if self.accept_keyword("IS"):
            negated = self.accept_keyword("NOT")
            self.expect_keyword("NULL")
            return IsNull(operand=left, negated=negated)
        return left

    def parse_additive(self) -> Expr:
        self.fail_if_unsupported()
        left = self.parse_multiplicative()
        while True:
            token = self.peek()
            if token.kind == "op" and token.value in ("+", "-"):
                op = self.advance().value
                left = Arithmetic(op=op, left=left, right=self.parse_multiplicative())
            elif token.kind == "op" and token.value == "||":
                raise UnsupportedSql("string concatenation (||) is not supported")
            else:
                return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while True:
            token = self.peek()
            if token.kind == "op" and token.value in ("*", "/"):
                op = self.advance().value
                left = Arithmetic(op=op, left=left, right=self.parse_unary())
            else:
                return left

    def parse_unary(self) -> Expr:
        if self.accept_op("-"):
            operand = self.parse_unary()
            if isinstance(operand, Literal) and isinstance(operand.value, (int, float)):
                return Literal(value=-operand.value)
            return Arithmetic(op="-", left=Literal(value=0), right=operand)
        if self.accept_op("+"):
            return self.parse_unary()
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        self.fail_if_unsupported()
        token = self.peek()
        if token.kind == "number":
            self.advance()
            text = token.value
            if any(c in text for c in ".eE"):
                return Literal(value=float(text))
            return Literal(value=int(text))
        if token.kind == "string":
            self.advance()
            return Literal(value=token.value[1:-1].replace("''", "'"))
        if token.kind == "op" and token.value == "(":
            self.advance()
            if self.at_keyword("SELECT"):
                raise UnsupportedSql(
                    "subqueries are only supported with IN or a comparison operator"
                )
            expr = self.parse_expr()
            self.expect_op(")")
            return expr
        if token.kind == "word":
            upper = token.value.upper()
            if upper == "NULL":
                self.advance()
                return Literal(value=None)
            if upper == "CASE":
                return self.parse_case()
            if upper in AGGREGATE_FUNCTIONS and self.peek(1).value == "(":
                return self.parse_aggregate()
            if self.peek(1).value == "(" and upper not in _CLAUSE_WORDS:
                raise UnsupportedSql(f"function {token.value!r} is not supported")
        if token.kind in ("word", "ident"):
            name = self.parse_name("column reference")
            if self.accept_op("."):
                column = self.parse_name("column name")
                return ColumnRef(column=column, table=name)
            return ColumnRef(column=name)
        raise ParseError(f"unexpected token {token.value!r}", position=token.pos)

    def parse_aggregate(self) -> Expr:
        name = self.advance().value.upper()
        self.expect_op("(")
        if self.accept_op("*"):
            if name != "COUNT":
                raise ParseError(f"{name}(*) is not valid; only COUNT(*)")
            self.expect_op(")")
            return FuncCall(name="COUNT", arg=None)
        distinct = self.accept_keyword("DISTINCT")
        arg = self.parse_expr()
        self.expect_op(")")
        return FuncCall(name=name, arg=arg, distinct=distinct)

    def parse_case(self) -> Expr:
        self.expect_keyword("CASE")
        if not self.at_keyword("WHEN"):
            raise UnsupportedSql("simple CASE (CASE expr WHEN ...) is not supported")
        whens = []
        while self.accept_keyword("WHEN"):
            cond = self.parse_expr()
            self.expect_keyword("THEN")
            whens.append((cond, self.parse_expr()))
        default = self.parse_expr() if self.accept_keyword("ELSE") else None
        self.expect_keyword("END")
        return CaseWhen(whens=tuple(whens), default=default)


_CLAUSE_WORDS = {
    "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "ON", "AND", "OR",
    "NOT", "IN", "IS", "LIKE", "AS", "JOIN", "INNER", "WHEN", "THEN", "ELSE",
    "END", "ASC", "DESC", "BY", "SELECT", "DISTINCT", "NULL", "UNION",
    "INTERSECT", "EXCEPT", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS",
    "NATURAL", "BETWEEN", "EXISTS", "CASE", "OFFSET", "LIMIT",
}


def parse_sql(text: str) -> SelectQuery:
    """Parse one SELECT statement; a single trailing semicolon is allowed."""
    parser = _Parser(tokenize(text))
    parser.fail_if_unsupported()
    query = parser.parse_query()
    parser.accept_op(";")
    trailing = parser.peek()
    if trailing.kind != "eof":
        parser.fail_if_unsupported()
        raise ParseError(f"unexpected trailing input {trailing.value!r}", position=trailing.pos)
    _validate(query)
    return query


def _validate(query: SelectQuery) -> None:
    for node in walk(query):
        if isinstance(node, FuncCall) and node.arg is not None:
            if aggregate_calls(node.arg):
                raise UnsupportedSql("nested aggregate calls are not supported")
