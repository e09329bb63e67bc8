"""Rewriting WHERE-clause subqueries into joins.

Uncorrelated ``IN (SELECT ...)`` predicates become INNER JOINs against the
DISTINCT subquery result; uncorrelated scalar comparisons against a
provably single-row subquery (a bare aggregate select list) become joins
against a one-row derived table. Everything else (correlated subqueries,
NOT IN, whose column nullability is unknowable without schema constraints,
and multi-row scalar subqueries) raises :class:`RewriteUnsupported`.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import RewriteUnsupported
from .sql_ast import (
    And,
    ColumnRef,
    Comparison,
    CompareSubquery,
    Expr,
    FuncCall,
    InSubquery,
    Join,
    SelectItem,
    SelectQuery,
    Star,
    SubqueryRef,
    TableRef,
    column_refs,
    has_where_subqueries,
    walk,
)

_DERIVED_PREFIX = "subq"


def rewrite_where_subqueries(query: SelectQuery) -> SelectQuery:
    """Return an equivalent query whose WHERE clause is subquery-free."""
    if not has_where_subqueries(query):
        return query
    state = _RewriteState(query)
    new_where = _rewrite_expr(query.where, state)
    return replace(
        query,
        where=new_where,
        joins=query.joins + tuple(state.new_joins),
    )


class _RewriteState:
    def __init__(self, query: SelectQuery):
        self.new_joins: list[Join] = []
        self.taken = {a.lower() for a in _scope_aliases(query)}
        self.counter = 0

    def fresh_alias(self) -> str:
        while True:
            alias = f"{_DERIVED_PREFIX}{self.counter}"
            self.counter += 1
            if alias.lower() not in self.taken:
                self.taken.add(alias.lower())
                return alias


def _scope_aliases(query: SelectQuery) -> list[str]:
    aliases = []
    items = []
    if query.from_item is not None:
        items.append(query.from_item)
        items.extend(join.item for join in query.joins)
    for item in items:
        if isinstance(item, TableRef):
            aliases.append(item.alias or item.name)
        elif isinstance(item, SubqueryRef):
            aliases.append(item.alias)
    return aliases


def _check_uncorrelated(sub: SelectQuery) -> None:
    """A qualified reference to an alias outside the subquery's own FROM
    marks the subquery as correlated. Unqualified names resolve innermost
    first, so they are assumed local."""
    local = {a.lower() for a in _scope_aliases(sub)}
    for node in walk(sub):
        if isinstance(node, SelectQuery) and node is not sub:
            local |= {a.lower() for a in _scope_aliases(node)}
    for ref in column_refs(sub):
        if ref.table is not None and ref.table.lower() not in local:
            raise RewriteUnsupported(
                f"correlated subquery (outer reference {ref.table}.{ref.column})"
            )


def _single_output_expr(sub: SelectQuery) -> Expr:
    if len(sub.items) != 1 or isinstance(sub.items[0], Star):
        raise RewriteUnsupported("subquery must select exactly one expression")
    return sub.items[0].expr


def _is_single_row(sub: SelectQuery) -> bool:
    """True when the subquery provably yields exactly one row: a bare
    aggregate select list with no GROUP BY (and no LIMIT 0)."""
    if sub.group_by or sub.limit == 0:
        return False
    if len(sub.items) != 1 or isinstance(sub.items[0], Star):
        return False
    return any(isinstance(n, FuncCall) for n in walk(sub.items[0].expr))


def _rewrite_expr(expr: Expr, state: _RewriteState) -> Expr | None:
    """Rewrite subquery predicates inside a conjunction. Returns the
    replacement expression, or None when the predicate moved entirely
    into a join."""
    if isinstance(expr, And):
        kept = []
        for item in expr.items:
            rewritten = _rewrite_expr(item, state)
            if rewritten is not None:
                kept.append(rewritten)
        if not kept:
            return None
        if len(kept) == 1:
            return kept[0]
        return And(items=tuple(kept))
    if isinstance(expr, InSubquery):
        if expr.negated:
            raise RewriteUnsupported(
                "NOT IN (subquery): column nullability is unknowable here"
            )
        return _join_in_subquery(expr, state)
    if isinstance(expr, CompareSubquery):
        return _join_scalar_subquery(expr, state)
    for node in walk(expr):
        if isinstance(node, (InSubquery, CompareSubquery)):
            raise RewriteUnsupported(
                "subquery under OR/NOT cannot be rewritten into a join"
            )
    return expr


def _join_in_subquery(expr: InSubquery, state: _RewriteState) -> None:
    sub = expr.query
    _check_uncorrelated(sub)
    output = _single_output_expr(sub)
    alias = state.fresh_alias()
    column = output.column if isinstance(output, ColumnRef) else "v"
    inner = replace(sub, items=(SelectItem(expr=output, alias=column),))
    if sub.limit is not None:
        # LIMIT must pick rows before deduplication: nest, then distinct.
        inner_alias = state.fresh_alias()
        derived = SelectQuery(
            items=(SelectItem(expr=ColumnRef(column=column), alias=column),),
            distinct=True,
            from_item=SubqueryRef(query=inner, alias=inner_alias),
        )
    else:
        derived = replace(inner, distinct=True, order_by=())
    condition = Comparison(
        op="=", left=expr.operand, right=ColumnRef(column=column, table=alias)
    )
    state.new_joins.append(Join(item=SubqueryRef(query=derived, alias=alias),
                                condition=condition))
    return None


def _join_scalar_subquery(expr: CompareSubquery, state: _RewriteState) -> None:
    sub = expr.query
    _check_uncorrelated(sub)
    if not _is_single_row(sub):
        raise RewriteUnsupported(
            "scalar subquery is not provably single-row (needs a bare aggregate)"
        )
    output = _single_output_expr(sub)
    alias = state.fresh_alias()
    derived = replace(sub, items=(SelectItem(expr=output, alias="v"),))
    condition = Comparison(
        op=expr.op, left=expr.operand, right=ColumnRef(column="v", table=alias)
    )
    state.new_joins.append(Join(item=SubqueryRef(query=derived, alias=alias),
                                condition=condition))
    return None
