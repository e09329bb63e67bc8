"""Candidate queries: SQL text paired with an executable AST."""

from __future__ import annotations

from dataclasses import dataclass

from .rewrite import rewrite_where_subqueries
from .sql_ast import SelectQuery, has_where_subqueries
from .sql_parser import parse_sql


@dataclass(frozen=True)
class CandidateQuery:
    """One candidate: original text plus the subquery-free AST it runs as."""

    text: str
    ast: SelectQuery
    cluster_id: int | None = None
    consistency_score: int | None = None


def prepare_candidate(text: str) -> CandidateQuery:
    """Parse a candidate and rewrite WHERE-clause subqueries when present.

    Raises ParseError/UnsupportedSql on bad input and RewriteUnsupported
    when the query needs a rewrite that cannot be performed.
    """
    ast = parse_sql(text)
    if has_where_subqueries(ast):
        ast = rewrite_where_subqueries(ast)
    return CandidateQuery(text=text, ast=ast)
