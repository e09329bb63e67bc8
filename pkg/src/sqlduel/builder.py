"""Constructing small separating instances from provenance differences.

Given two candidates whose answers differ on the full database, the
builder collects each candidate's simple terms, then repeatedly draws a
few terms (two from the shared set when the term sets are equal,
otherwise (M, N) terms from the two set differences), materializes the
sub-instance they generate, and keeps the first one on which the two
candidates still disagree.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .answers import answers_equal, normalize_answer
from .database import Database, Table
from .errors import BindError, NotSeparableInput, UnsupportedSql
from .evaluator import ProvenanceSet, collect_terms, evaluate, evaluate_with_provenance
from .features import detect_features
from .queries import CandidateQuery
from .sql_ast import ColumnRef, SelectQuery, SubqueryRef, TableRef, children, walk

logger = logging.getLogger(__name__)

COLUMN_POLICIES = ("referenced_plus_keys", "all_columns")

EQUAL_TERMS = "equal_terms"
DIFFERING_TERMS = "differing_terms"


@dataclass(frozen=True)
class BuilderConfig:
    max_attempts: int = 42
    rng_seed: int = 0
    column_policy: str = "referenced_plus_keys"
    sum_case_when_all: bool = True

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.column_policy not in COLUMN_POLICIES:
            raise ValueError(f"column_policy must be one of {COLUMN_POLICIES}")


@dataclass(frozen=True)
class SeparationResult:
    instance: Database | None
    attempts_used: int
    branch: str
    terms_used: ProvenanceSet = frozenset()

    @property
    def separated(self) -> bool:
        return self.instance is not None


def build_separating_instance(
    q1: CandidateQuery,
    q2: CandidateQuery,
    db: Database,
    cfg: BuilderConfig = BuilderConfig(),
) -> SeparationResult:
    a1_raw, provs1 = evaluate_with_provenance(q1.ast, db)
    a2_raw, provs2 = evaluate_with_provenance(q2.ast, db)
    a1, a2 = normalize_answer(a1_raw), normalize_answer(a2_raw)
    if answers_equal(a1, a2):
        raise NotSeparableInput("the candidates agree on the full database")

    p1, p2 = collect_terms(provs1), collect_terms(provs2)
    rng = random.Random(cfg.rng_seed)
    if p1 == p2:
        return _equal_terms_loop(q1, q2, db, cfg, p1, rng)
    return _differing_terms_loop(q1, q2, db, cfg, p1, p2, rng)


def _sorted_terms(terms) -> list[frozenset]:
    # Sets are unordered; sampling needs a stable base for reproducibility.
    return sorted(terms, key=lambda term: sorted(term))


def _equal_terms_loop(q1, q2, db, cfg, terms, rng) -> SeparationResult:
    pool = _sorted_terms(terms)
    if not pool:
        return SeparationResult(None, 0, EQUAL_TERMS)
    # With <= 2 terms every attempt draws the same pair; one try suffices.
    attempts = cfg.max_attempts if len(pool) > 2 else 1
    for attempt in range(1, attempts + 1):
        picked = rng.sample(pool, min(2, len(pool)))
        result = _try_candidate(q1, q2, db, cfg, picked)
        if result is not None:
            return SeparationResult(result, attempt, EQUAL_TERMS, frozenset(picked))
    return SeparationResult(None, attempts, EQUAL_TERMS)


def _differing_terms_loop(q1, q2, db, cfg, p1, p2, rng) -> SeparationResult:
    only1 = _sorted_terms(p1 - p2)
    only2 = _sorted_terms(p2 - p1)
    _, plan = detect_features(q1.text, q2.text, sum_case_when_all=cfg.sum_case_when_all)
    if not only1 and not only2:
        return SeparationResult(None, 0, DIFFERING_TERMS)
    # When both differences fit inside the plan there is only one possible
    # draw, so further attempts would repeat it.
    forced = len(only1) <= plan.m and len(only2) <= plan.n
    attempts = 1 if forced else cfg.max_attempts
    for attempt in range(1, attempts + 1):
        picked = rng.sample(only1, min(plan.m, len(only1))) + rng.sample(
            only2, min(plan.n, len(only2))
        )
        result = _try_candidate(q1, q2, db, cfg, picked)
        if result is not None:
            return SeparationResult(result, attempt, DIFFERING_TERMS, frozenset(picked))
    return SeparationResult(None, attempts, DIFFERING_TERMS)


def _try_candidate(q1, q2, db, cfg, picked) -> Database | None:
    candidate = materialize(frozenset(picked), db, q1, q2, cfg.column_policy)
    try:
        r1 = normalize_answer(evaluate(q1.ast, candidate))
        r2 = normalize_answer(evaluate(q2.ast, candidate))
    except (BindError, UnsupportedSql) as exc:
        logger.debug("attempt discarded, candidate instance not evaluable: %s", exc)
        return None
    if answers_equal(r1, r2):
        return None
    _assert_sound(candidate, db)
    return candidate


def _assert_sound(instance: Database, db: Database) -> None:
    for table in instance.tables:
        base = db.table(table.name)
        assert base is not None, f"table {table.name!r} not in the source database"
        base_rows = {tuple(row) for row in _project_like(base, table).rows}
        for row in table.rows:
            assert tuple(row) in base_rows, (
                f"row {row!r} of {table.name!r} is not a row of the source database"
            )


def _project_like(base: Table, sub: Table) -> Table:
    return base.project(sub.columns)


def materialize(
    terms: ProvenanceSet,
    db: Database,
    q1: CandidateQuery,
    q2: CandidateQuery,
    column_policy: str = "referenced_plus_keys",
) -> Database:
    """Sub-instance generated by the given simple terms.

    Under referenced_plus_keys every column mentioned anywhere in either
    query (select, where, join, group, order; join keys included) is
    kept; all_columns keeps everything. Tables referenced by a query but
    receiving no rows are re-added empty so both candidates stay
    evaluable on the result.
    """
    tokens = {token for term in terms for token in term}
    if not tokens:
        raise ValueError("cannot materialize an instance from no terms")
    keep = None
    if column_policy == "referenced_plus_keys":
        keep = _referenced_columns(db, q1, q2)
    instance = db.subset(tokens, keep)

    present = {t.name.lower() for t in instance.tables}
    missing = []
    for name in _referenced_tables(db, q1, q2):
        if name.lower() not in present:
            base = db.table(name)
            empty = Table(name=base.name, columns=base.columns, rows=(), kinds=base.kinds)
            if keep is not None and base.name.lower() in keep:
                empty = empty.project(keep[base.name.lower()])
            missing.append(empty)
    if missing:
        instance = Database(tables=instance.tables + tuple(missing),
                            metadata=instance.metadata)
    return instance


def _referenced_tables(db: Database, *queries: CandidateQuery) -> list[str]:
    names = []
    for query in queries:
        for node in walk(query.ast):
            if isinstance(node, TableRef) and db.table(node.name) is not None:
                if db.table(node.name).name not in names:
                    names.append(db.table(node.name).name)
    return names


def _referenced_columns(db: Database, *queries: CandidateQuery) -> dict[str, list[str]]:
    """Per-table column whitelist: every column either query mentions."""
    keep: dict[str, list[str]] = {}

    def add(table_name: str, column: str):
        table = db.table(table_name)
        if table is None:
            return
        idx = table.column_index(column)
        if idx is None:
            return
        canonical = table.columns[idx]
        bucket = keep.setdefault(table.name.lower(), [])
        if canonical not in bucket:
            bucket.append(canonical)

    for query in queries:
        for scope in _scopes(query.ast):
            alias_to_table = {}
            for item in scope["items"]:
                if isinstance(item, TableRef) and db.table(item.name) is not None:
                    alias_to_table[(item.alias or item.name).lower()] = item.name
            base_tables = list(alias_to_table.values())
            for ref in scope["refs"]:
                if ref.table is not None:
                    target = alias_to_table.get(ref.table.lower())
                    if target:
                        add(target, ref.column)
                else:
                    for table_name in base_tables:
                        add(table_name, ref.column)
    return keep


def _scopes(ast) -> list[dict]:
    """FROM items and column refs per SELECT scope (derived tables are
    their own scope, so their inner refs map through their own FROM)."""
    scopes = []
    queue = [ast]
    while queue:
        query = queue.pop()
        items = []
        if query.from_item is not None:
            items.append(query.from_item)
            items.extend(join.item for join in query.joins)
        scopes.append({"items": items, "refs": _own_refs(query)})
        for item in items:
            if isinstance(item, SubqueryRef):
                queue.append(item.query)
    return scopes


def _own_refs(query: SelectQuery) -> list[ColumnRef]:
    """Column refs of this query, excluding those inside nested SELECTs."""
    refs: list[ColumnRef] = []

    def visit(node):
        for child in children(node):
            if isinstance(child, SelectQuery):
                continue
            if isinstance(child, ColumnRef):
                refs.append(child)
            visit(child)

    visit(query)
    return refs
