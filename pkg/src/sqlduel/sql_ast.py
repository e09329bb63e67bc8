"""AST for the supported SQL subset, with a canonical printer.

Nodes are frozen dataclasses, so structural equality and hashing come for
free; printing an AST and reparsing it yields an equal AST.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .values import Scalar, format_number

AGGREGATE_FUNCTIONS = ("COUNT", "SUM", "AVG", "MIN", "MAX")


@dataclass(frozen=True)
class Literal:
    value: Scalar


@dataclass(frozen=True)
class ColumnRef:
    column: str
    table: str | None = None


@dataclass(frozen=True)
class Arithmetic:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Comparison:
    op: str  # = <> != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class And:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Like:
    operand: "Expr"
    pattern: "Expr"
    negated: bool = False


@dataclass(frozen=True)
class InList:
    operand: "Expr"
    items: tuple["Expr", ...]
    negated: bool = False


@dataclass(frozen=True)
class InSubquery:
    operand: "Expr"
    query: "SelectQuery"
    negated: bool = False


@dataclass(frozen=True)
class CompareSubquery:
    op: str
    operand: "Expr"
    query: "SelectQuery"


@dataclass(frozen=True)
class IsNull:
    operand: "Expr"
    negated: bool = False


@dataclass(frozen=True)
class FuncCall:
    name: str  # one of AGGREGATE_FUNCTIONS
    arg: "Expr | None"  # None means COUNT(*)
    distinct: bool = False


@dataclass(frozen=True)
class CaseWhen:
    whens: tuple[tuple["Expr", "Expr"], ...]
    default: "Expr | None" = None


Expr = Union[
    Literal, ColumnRef, Arithmetic, Comparison, And, Or, Not, Like,
    InList, InSubquery, CompareSubquery, IsNull, FuncCall, CaseWhen,
]


@dataclass(frozen=True)
class Star:
    table: str | None = None


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None


@dataclass(frozen=True)
class SubqueryRef:
    query: "SelectQuery"
    alias: str


FromItem = Union[TableRef, SubqueryRef]


@dataclass(frozen=True)
class Join:
    item: FromItem
    condition: Expr


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class SelectQuery:
    items: tuple[Union[SelectItem, Star], ...]
    distinct: bool = False
    from_item: FromItem | None = None
    joins: tuple[Join, ...] = ()
    where: Expr | None = None
    group_by: tuple[Expr, ...] = ()
    having: Expr | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None


def walk(node) -> Iterator:
    """Yield the node and every descendant, subqueries included."""
    yield node
    for child in children(node):
        yield from walk(child)


def children(node):
    if isinstance(node, (Literal, ColumnRef, Star, TableRef)):
        return ()
    if isinstance(node, (Arithmetic, Comparison)):
        return (node.left, node.right)
    if isinstance(node, (And, Or)):
        return node.items
    if isinstance(node, Not):
        return (node.operand,)
    if isinstance(node, Like):
        return (node.operand, node.pattern)
    if isinstance(node, InList):
        return (node.operand, *node.items)
    if isinstance(node, InSubquery):
        return (node.operand, node.query)
    if isinstance(node, CompareSubquery):
        return (node.operand, node.query)
    if isinstance(node, IsNull):
        return (node.operand,)
    if isinstance(node, FuncCall):
        return () if node.arg is None else (node.arg,)
    if isinstance(node, CaseWhen):
        out = [e for pair in node.whens for e in pair]
        if node.default is not None:
            out.append(node.default)
        return tuple(out)
    if isinstance(node, SelectItem):
        return (node.expr,)
    if isinstance(node, SubqueryRef):
        return (node.query,)
    if isinstance(node, Join):
        return (node.item, node.condition)
    if isinstance(node, OrderItem):
        return (node.expr,)
    if isinstance(node, SelectQuery):
        out = list(node.items)
        if node.from_item is not None:
            out.append(node.from_item)
        out.extend(node.joins)
        if node.where is not None:
            out.append(node.where)
        out.extend(node.group_by)
        if node.having is not None:
            out.append(node.having)
        out.extend(node.order_by)
        return tuple(out)
    raise TypeError(f"not an AST node: {node!r}")


def has_where_subqueries(query: SelectQuery) -> bool:
    if query.where is None:
        return False
    return any(isinstance(n, (InSubquery, CompareSubquery)) for n in walk(query.where))


def column_refs(node) -> list[ColumnRef]:
    return [n for n in walk(node) if isinstance(n, ColumnRef)]


def aggregate_calls(node) -> list[FuncCall]:
    return [n for n in walk(node) if isinstance(n, FuncCall)]


_PLAIN_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

_RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "HAVING", "LIMIT",
    "JOIN", "INNER", "ON", "AS", "AND", "OR", "NOT", "IN", "IS", "NULL",
    "LIKE", "DISTINCT", "CASE", "WHEN", "THEN", "ELSE", "END", "ASC", "DESC",
    "BETWEEN", "EXISTS", "UNION",
}


def quote_ident(name: str) -> str:
    if _PLAIN_IDENT.match(name) and name.upper() not in _RESERVED:
        return name
    return '"' + name.replace('"', '""') + '"'


def _sql_string(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def to_sql(node) -> str:
    """Render a node back to SQL text (canonical spacing, original case)."""
    if isinstance(node, Literal):
        if node.value is None:
            return "NULL"
        if isinstance(node.value, str):
            return _sql_string(node.value)
        return format_number(node.value)
    if isinstance(node, ColumnRef):
        prefix = f"{quote_ident(node.table)}." if node.table else ""
        return prefix + quote_ident(node.column)
    if isinstance(node, Arithmetic):
        return f"({to_sql(node.left)} {node.op} {to_sql(node.right)})"
    if isinstance(node, Comparison):
        return f"{to_sql(node.left)} {node.op} {to_sql(node.right)}"
    if isinstance(node, And):
        return "(" + " AND ".join(to_sql(i) for i in node.items) + ")"
    if isinstance(node, Or):
        return "(" + " OR ".join(to_sql(i) for i in node.items) + ")"
    if isinstance(node, Not):
        return f"NOT ({to_sql(node.operand)})"
    if isinstance(node, Like):
        op = "NOT LIKE" if node.negated else "LIKE"
        return f"{to_sql(node.operand)} {op} {to_sql(node.pattern)}"
    if isinstance(node, InList):
        op = "NOT IN" if node.negated else "IN"
        return f"{to_sql(node.operand)} {op} ({', '.join(to_sql(i) for i in node.items)})"
    if isinstance(node, InSubquery):
        op = "NOT IN" if node.negated else "IN"
        return f"{to_sql(node.operand)} {op} ({to_sql(node.query)})"
    if isinstance(node, CompareSubquery):
        return f"{to_sql(node.operand)} {node.op} ({to_sql(node.query)})"
    if isinstance(node, IsNull):
        op = "IS NOT NULL" if node.negated else "IS NULL"
        return f"{to_sql(node.operand)} {op}"
    if isinstance(node, FuncCall):
        if node.arg is None:
            return f"{node.name}(*)"
        inner = ("DISTINCT " if node.distinct else "") + to_sql(node.arg)
        return f"{node.name}({inner})"
    if isinstance(node, CaseWhen):
        parts = ["CASE"]
        for cond, result in node.whens:
            parts.append(f"WHEN {to_sql(cond)} THEN {to_sql(result)}")
        if node.default is not None:
            parts.append(f"ELSE {to_sql(node.default)}")
        parts.append("END")
        return " ".join(parts)
    if isinstance(node, Star):
        return f"{quote_ident(node.table)}.*" if node.table else "*"
    if isinstance(node, SelectItem):
        text = to_sql(node.expr)
        return f"{text} AS {quote_ident(node.alias)}" if node.alias else text
    if isinstance(node, TableRef):
        text = quote_ident(node.name)
        return f"{text} AS {quote_ident(node.alias)}" if node.alias else text
    if isinstance(node, SubqueryRef):
        return f"({to_sql(node.query)}) AS {quote_ident(node.alias)}"
    if isinstance(node, OrderItem):
        return to_sql(node.expr) + (" DESC" if node.descending else " ASC")
    if isinstance(node, SelectQuery):
        parts = ["SELECT"]
        if node.distinct:
            parts.append("DISTINCT")
        parts.append(", ".join(to_sql(i) for i in node.items))
        if node.from_item is not None:
            parts.append("FROM " + to_sql(node.from_item))
            for join in node.joins:
                parts.append(f"INNER JOIN {to_sql(join.item)} ON {to_sql(join.condition)}")
        if node.where is not None:
            parts.append("WHERE " + to_sql(node.where))
        if node.group_by:
            parts.append("GROUP BY " + ", ".join(to_sql(e) for e in node.group_by))
        if node.having is not None:
            parts.append("HAVING " + to_sql(node.having))
        if node.order_by:
            parts.append("ORDER BY " + ", ".join(to_sql(o) for o in node.order_by))
        if node.limit is not None:
            parts.append(f"LIMIT {node.limit}")
        return " ".join(parts)
    raise TypeError(f"not an AST node: {node!r}")
