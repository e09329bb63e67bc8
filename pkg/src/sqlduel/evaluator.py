"""Bag-semantics evaluation of subquery-free queries, with why-provenance.

Every answer row carries a set of *simple terms*; a simple term is the set
of base-row tokens of one surviving FROM/WHERE witness. Aggregate rows
carry every witness of their group, DISTINCT merges the witnesses of the
rows it collapses, and ORDER BY/LIMIT keep only the witnesses of the rows
actually emitted.

WHERE-clause subqueries must be rewritten into joins before evaluation;
derived tables in FROM are evaluated recursively. Predicates are
two-valued: a comparison involving null is false, IS NULL is the only
null-detecting predicate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cmp_to_key, lru_cache
from typing import Iterable, Sequence

from .database import Database, ProvenanceToken
from .errors import BindError, UnsupportedSql
from .sql_ast import (
    And,
    Arithmetic,
    CaseWhen,
    ColumnRef,
    Comparison,
    CompareSubquery,
    FuncCall,
    InList,
    InSubquery,
    IsNull,
    Like,
    Literal,
    Not,
    Or,
    SelectItem,
    SelectQuery,
    Star,
    SubqueryRef,
    TableRef,
    aggregate_calls,
)
from .values import Scalar, compare_values, is_number, row_key, value_key

SimpleTerm = frozenset  # frozenset[ProvenanceToken]
ProvenanceSet = frozenset  # frozenset[SimpleTerm]

_EMPTY_TERM: SimpleTerm = frozenset()
_UNIT_PROV: ProvenanceSet = frozenset({_EMPTY_TERM})


@dataclass(frozen=True)
class AnswerTable:
    rows: tuple[tuple[Scalar, ...], ...]
    arity: int


def evaluate(query: SelectQuery, db: Database) -> AnswerTable:
    answer, _ = evaluate_with_provenance(query, db)
    return answer


def evaluate_with_provenance(
    query: SelectQuery, db: Database
) -> tuple[AnswerTable, tuple[ProvenanceSet, ...]]:
    columns, rows = _Evaluator(db).run(query)
    answer = AnswerTable(
        rows=tuple(values for values, _ in rows),
        arity=len(columns),
    )
    provs = tuple(
        frozenset(term for term in prov if term) for _, prov in rows
    )
    return answer, provs


def collect_terms(per_row_sets: Iterable[ProvenanceSet]) -> ProvenanceSet:
    """Union of the simple terms across all answer rows."""
    out: set = set()
    for prov in per_row_sets:
        out |= prov
    return frozenset(out)


def output_columns(query: SelectQuery, db: Database) -> tuple[str, ...]:
    """Column names of the query's answer (stars expanded)."""
    evaluator = _Evaluator(db)
    sources = evaluator._bind_sources(query)
    return tuple(evaluator._expand_columns(query, sources))


class _Source:
    __slots__ = ("alias", "columns", "rows")

    def __init__(self, alias: str, columns: Sequence[str], rows):
        self.alias = alias
        self.columns = list(columns)
        # rows: list of (values tuple, ProvenanceSet)
        self.rows = rows

    def column_index(self, name: str) -> int | None:
        low = name.lower()
        for i, col in enumerate(self.columns):
            if col.lower() == low:
                return i
        return None


def _truth(value: Scalar) -> bool:
    if value is None:
        return False
    if is_number(value):
        return value != 0
    return False


def _combine_prov(a: ProvenanceSet, b: ProvenanceSet) -> ProvenanceSet:
    return frozenset(x | y for x in a for y in b)


@lru_cache(maxsize=256)
def _like_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), flags=re.IGNORECASE | re.DOTALL)


def _like_match(text: str, pattern: str) -> bool:
    """SQLite-style LIKE: % and _ wildcards, ASCII case-insensitive."""
    return _like_regex(pattern).fullmatch(text) is not None


def _divide(a, b):
    if a is None or b is None or not is_number(a) or not is_number(b):
        return None
    if b == 0:
        return None
    if isinstance(a, int) and isinstance(b, int):
        quotient = abs(a) // abs(b)
        return -quotient if (a < 0) != (b < 0) else quotient
    return a / b


def _arith(op: str, a, b):
    if a is None or b is None or not is_number(a) or not is_number(b):
        return None
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _divide(a, b)
    raise UnsupportedSql(f"arithmetic operator {op!r}")


_KIND_RANK = {True: 0, False: 1}  # numbers sort before text


def _sort_cmp(a: Scalar, b: Scalar) -> int:
    if a is None and b is None:
        return 0
    if a is None:
        return 1  # nulls last
    if b is None:
        return -1
    ra, rb = _KIND_RANK[is_number(a)], _KIND_RANK[is_number(b)]
    if ra != rb:
        return -1 if ra < rb else 1
    if a == b:
        return 0
    return -1 if a < b else 1


class _Evaluator:
    def __init__(self, db: Database):
        self.db = db

    def run(self, query: SelectQuery):
        """Return (column names, list of (values, ProvenanceSet))."""
        if query.having is not None:
            raise UnsupportedSql("HAVING is parsed but not evaluated")
        sources = self._bind_sources(query)
        tuples = self._join(query, sources)
        if query.where is not None:
            if aggregate_calls(query.where):
                raise UnsupportedSql("aggregate call in WHERE")
            tuples = [t for t in tuples if self._predicate(query.where, sources, t[0])]

        columns = self._expand_columns(query, sources)
        aggregated = bool(query.group_by) or any(
            isinstance(item, SelectItem) and aggregate_calls(item.expr)
            for item in query.items
        )
        if aggregated:
            rows, contexts = self._aggregate_rows(query, sources, tuples)
        else:
            rows = [
                (tuple(self._select_values(query, sources, vals)), prov)
                for vals, prov in tuples
            ]
            contexts = [vals for vals, _ in tuples]

        if query.distinct:
            rows = self._distinct(rows)
            contexts = None  # merged rows have no single evaluation context
        if query.order_by:
            rows = self._order(query, sources, rows, columns, contexts, aggregated)
        if query.limit is not None:
            rows = rows[: query.limit]
        return columns, rows

    # ----- binding ----------------------------------------------------

    def _bind_sources(self, query: SelectQuery) -> list[_Source]:
        items: list = []
        if query.from_item is not None:
            items.append(query.from_item)
            items.extend(join.item for join in query.joins)
        sources = []
        seen = set()
        for item in items:
            source = self._bind_one(item)
            low = source.alias.lower()
            if low in seen:
                raise BindError(f"duplicate table alias {source.alias!r}")
            seen.add(low)
            sources.append(source)
        return sources

    def _bind_one(self, item) -> _Source:
        if isinstance(item, TableRef):
            table = self.db.table(item.name)
            if table is None:
                raise BindError(f"unknown table {item.name!r}")
            rows = [
                (row, frozenset({frozenset({ProvenanceToken(table.name, i)})}))
                for i, row in enumerate(table.rows)
            ]
            return _Source(item.alias or item.name, table.columns, rows)
        if isinstance(item, SubqueryRef):
            columns, rows = self.run(item.query)
            return _Source(item.alias, columns, rows)
        raise UnsupportedSql(f"FROM item {type(item).__name__}")

    def _resolve(self, ref: ColumnRef, sources: list[_Source]) -> tuple[int, int]:
        if ref.table is not None:
            low = ref.table.lower()
            for si, source in enumerate(sources):
                if source.alias.lower() == low:
                    ci = source.column_index(ref.column)
                    if ci is None:
                        raise BindError(
                            f"no column {ref.column!r} in {source.alias!r}"
                        )
                    return si, ci
            raise BindError(f"unknown table or alias {ref.table!r}")
        hits = []
        for si, source in enumerate(sources):
            ci = source.column_index(ref.column)
            if ci is not None:
                hits.append((si, ci))
        if not hits:
            raise BindError(f"unknown column {ref.column!r}")
        if len(hits) > 1:
            raise BindError(f"ambiguous column {ref.column!r}")
        return hits[0]

    # ----- join pipeline ----------------------------------------------

    def _join(self, query: SelectQuery, sources: list[_Source]):
        tuples = [([], _UNIT_PROV)]
        if not sources:
            return [(tuple(), _UNIT_PROV)]
        conditions = [None] + [join.condition for join in query.joins]
        for k, source in enumerate(sources):
            bound = sources[: k + 1]
            condition = conditions[k]
            new = []
            for vals, prov in tuples:
                for row_vals, row_prov in source.rows:
                    cand = vals + [row_vals]
                    if condition is not None and not self._predicate(
                        condition, bound, cand
                    ):
                        continue
                    new.append((cand, _combine_prov(prov, row_prov)))
            tuples = new
        return [(tuple(vals), prov) for vals, prov in tuples]

    # ----- scalar expressions -----------------------------------------

    def _value(self, expr, sources: list[_Source], vals) -> Scalar:
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, ColumnRef):
            si, ci = self._resolve(expr, sources)
            if vals is None:
                return None  # empty group: bare column references are null
            return vals[si][ci]
        if isinstance(expr, Arithmetic):
            return _arith(
                expr.op,
                self._value(expr.left, sources, vals),
                self._value(expr.right, sources, vals),
            )
        if isinstance(expr, CaseWhen):
            for cond, result in expr.whens:
                if self._predicate(cond, sources, vals):
                    return self._value(result, sources, vals)
            if expr.default is not None:
                return self._value(expr.default, sources, vals)
            return None
        if isinstance(expr, (Comparison, And, Or, Not, Like, InList, IsNull)):
            return int(self._predicate(expr, sources, vals))
        if isinstance(expr, FuncCall):
            raise UnsupportedSql("aggregate call outside the select list")
        if isinstance(expr, (InSubquery, CompareSubquery)):
            raise UnsupportedSql(
                "WHERE-clause subquery reached the evaluator; rewrite it into a join first"
            )
        raise UnsupportedSql(f"expression {type(expr).__name__}")

    def _predicate(self, expr, sources: list[_Source], vals) -> bool:
        if isinstance(expr, And):
            return all(self._predicate(i, sources, vals) for i in expr.items)
        if isinstance(expr, Or):
            return any(self._predicate(i, sources, vals) for i in expr.items)
        if isinstance(expr, Not):
            return not self._predicate(expr.operand, sources, vals)
        if isinstance(expr, Comparison):
            return compare_values(
                expr.op,
                self._value(expr.left, sources, vals),
                self._value(expr.right, sources, vals),
            )
        if isinstance(expr, Like):
            text = self._value(expr.operand, sources, vals)
            pattern = self._value(expr.pattern, sources, vals)
            if not isinstance(text, str) or not isinstance(pattern, str):
                return False  # null or non-text operands never satisfy LIKE
            hit = _like_match(text, pattern)
            return (not hit) if expr.negated else hit
        if isinstance(expr, InList):
            operand = self._value(expr.operand, sources, vals)
            if operand is None:
                return False  # null satisfies neither IN nor NOT IN
            hit = any(
                compare_values("=", operand, self._value(item, sources, vals))
                for item in expr.items
            )
            return (not hit) if expr.negated else hit
        if isinstance(expr, IsNull):
            operand = self._value(expr.operand, sources, vals)
            return (operand is not None) if expr.negated else (operand is None)
        if isinstance(expr, (InSubquery, CompareSubquery)):
            raise UnsupportedSql(
                "WHERE-clause subquery reached the evaluator; rewrite it into a join first"
            )
        return _truth(self._value(expr, sources, vals))

    # ----- select list -------------------------------------------------

    def _expand_columns(self, query: SelectQuery, sources: list[_Source]) -> list[str]:
        columns = []
        for i, item in enumerate(query.items):
            if isinstance(item, Star):
                for source in self._star_sources(item, sources):
                    columns.extend(source.columns)
            elif item.alias:
                columns.append(item.alias)
            elif isinstance(item.expr, ColumnRef):
                columns.append(item.expr.column)
            else:
                columns.append(f"col{i}")
        return columns

    def _star_sources(self, star: Star, sources: list[_Source]) -> list[_Source]:
        if not sources:
            raise BindError("* requires a FROM clause")
        if star.table is None:
            return sources
        low = star.table.lower()
        for source in sources:
            if source.alias.lower() == low:
                return [source]
        raise BindError(f"unknown table or alias {star.table!r}")

    def _select_values(self, query: SelectQuery, sources, vals) -> list[Scalar]:
        out = []
        for item in query.items:
            if isinstance(item, Star):
                for source in self._star_sources(item, sources):
                    si = sources.index(source)
                    out.extend(vals[si] if vals is not None else [None] * len(source.columns))
            else:
                out.append(self._value(item.expr, sources, vals))
        return out

    # ----- aggregation ------------------------------------------------

    def _aggregate_rows(self, query, sources, tuples):
        if query.group_by:
            groups: dict = {}
            order: list = []
            for vals, prov in tuples:
                key = tuple(
                    value_key(self._value(e, sources, vals)) for e in query.group_by
                )
                if key not in groups:
                    groups[key] = [[], set()]
                    order.append(key)
                groups[key][0].append(vals)
                groups[key][1] |= prov
            buckets = [(groups[k][0], frozenset(groups[k][1])) for k in order]
        else:
            all_prov = set()
            for _, prov in tuples:
                all_prov |= prov
            buckets = [([vals for vals, _ in tuples], frozenset(all_prov))]

        rows = []
        contexts = []
        for group_rows, prov in buckets:
            first = group_rows[0] if group_rows else None
            values = []
            for item in query.items:
                if isinstance(item, Star):
                    for source in self._star_sources(item, sources):
                        si = sources.index(source)
                        values.extend(
                            first[si] if first is not None else [None] * len(source.columns)
                        )
                else:
                    values.append(self._group_value(item.expr, sources, group_rows, first))
            rows.append((tuple(values), prov if group_rows else frozenset()))
            contexts.append(group_rows)
        return rows, contexts

    def _group_value(self, expr, sources, group_rows, first) -> Scalar:
        if isinstance(expr, FuncCall):
            return self._aggregate(expr, sources, group_rows)
        if isinstance(expr, Arithmetic):
            return _arith(
                expr.op,
                self._group_value(expr.left, sources, group_rows, first),
                self._group_value(expr.right, sources, group_rows, first),
            )
        if isinstance(expr, CaseWhen) and aggregate_calls(expr):
            for cond, result in expr.whens:
                if _truth(self._group_value(cond, sources, group_rows, first)):
                    return self._group_value(result, sources, group_rows, first)
            if expr.default is not None:
                return self._group_value(expr.default, sources, group_rows, first)
            return None
        return self._value(expr, sources, first)

    def _aggregate(self, call: FuncCall, sources, group_rows) -> Scalar:
        if call.arg is None:
            return len(group_rows)
        raw = [self._value(call.arg, sources, vals) for vals in group_rows]
        present = [v for v in raw if v is not None]
        if call.distinct:
            seen = set()
            deduped = []
            for v in present:
                k = value_key(v)
                if k not in seen:
                    seen.add(k)
                    deduped.append(v)
            present = deduped
        name = call.name
        if name == "COUNT":
            return len(present)
        numbers = [v for v in present if is_number(v)]
        if name == "SUM":
            return sum(numbers) if numbers else None
        if name == "AVG":
            return sum(numbers) / len(numbers) if numbers else None
        if name in ("MIN", "MAX"):
            if not present:
                return None
            best = present[0]
            for v in present[1:]:
                c = _sort_cmp(v, best)
                if (name == "MIN" and c < 0) or (name == "MAX" and c > 0):
                    best = v
            return best
        raise UnsupportedSql(f"aggregate {name}")

    # ----- distinct / order / limit ------------------------------------

    def _distinct(self, rows):
        merged: dict = {}
        order = []
        for values, prov in rows:
            key = row_key(values)
            if key in merged:
                merged[key] = (merged[key][0], merged[key][1] | prov)
            else:
                merged[key] = (values, prov)
                order.append(key)
        return [merged[k] for k in order]

    def _order(self, query, sources, rows, columns, contexts, aggregated):
        alias_map = {c.lower(): i for i, c in enumerate(columns)}

        def sort_value(order_expr, row_values, context):
            expr = order_expr.expr
            if isinstance(expr, Literal) and isinstance(expr.value, int):
                ordinal = expr.value
                if not 1 <= ordinal <= len(row_values):
                    raise BindError(f"ORDER BY ordinal {ordinal} out of range")
                return row_values[ordinal - 1]
            if isinstance(expr, ColumnRef) and expr.table is None \
                    and expr.column.lower() in alias_map:
                return row_values[alias_map[expr.column.lower()]]
            if context is None:
                raise UnsupportedSql(
                    "ORDER BY on DISTINCT queries must reference output columns"
                )
            if aggregated:
                return self._group_value(expr, sources, context,
                                         context[0] if context else None)
            if aggregate_calls(expr):
                raise UnsupportedSql("aggregate in ORDER BY of a non-aggregate query")
            return self._value(expr, sources, context)

        if contexts is None:
            contexts = [None] * len(rows)
        decorated = list(zip(rows, contexts))
        for order_expr in reversed(query.order_by):
            direction = -1 if order_expr.descending else 1

            def compare(a, b, _oe=order_expr, _dir=direction):
                va = sort_value(_oe, a[0][0], a[1])
                vb = sort_value(_oe, b[0][0], b[1])
                if va is None or vb is None:
                    return _sort_cmp(va, vb)  # nulls last either direction
                return _dir * _sort_cmp(va, vb)

            decorated.sort(key=cmp_to_key(compare))
        return [row for row, _ in decorated]
