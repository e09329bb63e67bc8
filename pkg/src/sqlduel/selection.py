"""Candidate clustering, the binary selection unit, the round-robin
tournament and the consistency/checklist baselines."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .answers import NormalizedAnswer, answers_equal, normalize_answer
from .backends import LlmBackend
from .builder import BuilderConfig, build_separating_instance
from .database import Database
from .errors import (
    BackendError,
    BindError,
    ParseError,
    ResponseParseError,
    RewriteUnsupported,
    SqlDuelError,
    UnsupportedSql,
)
from .evaluator import evaluate
from .nl_eval import Task, evaluate_nl
from .prompts import render_naive_prompt
from .queries import CandidateQuery
from .rewrite import rewrite_where_subqueries
from .sql_ast import has_where_subqueries
from .sql_parser import parse_sql

logger = logging.getLogger(__name__)

Q1WINS = "Q1WINS"
Q2WINS = "Q2WINS"
DRAW = "DRAW"

REASON_COMPARATOR = "comparator"
REASON_BUILDER_FAILURE = "builder_failure"
REASON_NL_ABSTAIN = "nl_abstain"
REASON_EVALUATION_ERROR = "evaluation_error"


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    representative: int
    query: CandidateQuery
    answer: NormalizedAnswer

    @property
    def consistency_score(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class BinaryOutcome:
    verdict: str
    a1: NormalizedAnswer
    a2: NormalizedAnswer
    reason: str
    separating_instance: Database | None = None
    nl_answer: NormalizedAnswer | None = None
    attempts_used: int = 0
    branch: str | None = None

    def __post_init__(self):
        if self.verdict != DRAW:
            assert self.separating_instance is not None and self.nl_answer is not None


@dataclass(frozen=True)
class PairOutcome:
    left: int  # cluster index
    right: int
    outcome: BinaryOutcome


@dataclass(frozen=True)
class TournamentReport:
    clusters: tuple[Cluster, ...]
    pairs: tuple[PairOutcome, ...]
    scores: tuple[float, ...]  # aligned with clusters
    winner_cluster: int
    winner_index: int  # candidate index of the winning representative
    fallback_used: bool


def cluster_candidates(candidates: list[str], db: Database) -> list[Cluster]:
    """Group candidates by their normalized answer on the full database.

    Unparseable or unexecutable candidates are dropped with a warning. The
    representative prefers a member with no WHERE-clause subqueries, then
    the first member whose rewrite succeeded.
    """
    executed = []  # (index, text, plain ast or None, executable ast, answer)
    for index, text in enumerate(candidates):
        try:
            ast = parse_sql(text)
        except (ParseError, UnsupportedSql) as exc:
            logger.warning("candidate %d dropped (parse): %s", index, exc)
            continue
        subqueries = has_where_subqueries(ast)
        exec_ast = ast
        if subqueries:
            try:
                exec_ast = rewrite_where_subqueries(ast)
            except RewriteUnsupported as exc:
                logger.warning("candidate %d dropped (rewrite): %s", index, exc)
                continue
        try:
            answer = normalize_answer(evaluate(exec_ast, db))
        except (BindError, UnsupportedSql) as exc:
            logger.warning("candidate %d dropped (execution): %s", index, exc)
            continue
        executed.append((index, text, subqueries, exec_ast, answer))

    clusters: list[Cluster] = []
    buckets: dict = {}
    for index, text, subqueries, exec_ast, answer in executed:
        buckets.setdefault(answer.row_sets, []).append((index, text, subqueries, exec_ast))
    ordered = sorted(buckets.values(), key=lambda members: members[0][0])
    for cluster_id, members in enumerate(ordered):
        rep = next((m for m in members if not m[2]), members[0])
        indices = tuple(m[0] for m in members)
        answer = next(a for i, t, s, e, a in executed if i == rep[0])
        clusters.append(
            Cluster(
                members=indices,
                representative=rep[0],
                query=CandidateQuery(
                    text=rep[1],
                    ast=rep[3],
                    cluster_id=cluster_id,
                    consistency_score=len(indices),
                ),
                answer=answer,
            )
        )
    return clusters


def binary_select(
    q1: CandidateQuery,
    q2: CandidateQuery,
    task: Task,
    db: Database,
    backend: LlmBackend,
    schema: str,
    builder_cfg: BuilderConfig = BuilderConfig(),
    votes: int = 3,
) -> BinaryOutcome:
    """One match of the tournament: build D', ask the NL evaluator, compare.

    The candidates must disagree on the full database (NotSeparableInput
    propagates otherwise; that is a caller bug, not a draw).
    """
    result = build_separating_instance(q1, q2, db, builder_cfg)
    if not result.separated:
        a1 = normalize_answer(evaluate(q1.ast, db))
        a2 = normalize_answer(evaluate(q2.ast, db))
        return BinaryOutcome(
            verdict=DRAW, a1=a1, a2=a2, reason=REASON_BUILDER_FAILURE,
            attempts_used=result.attempts_used, branch=result.branch,
        )
    instance = result.instance
    try:
        raw1 = evaluate(q1.ast, instance)
        raw2 = evaluate(q2.ast, instance)
    except SqlDuelError as exc:
        logger.warning("evaluation on the separating instance failed: %s", exc)
        a1 = normalize_answer(evaluate(q1.ast, db))
        a2 = normalize_answer(evaluate(q2.ast, db))
        return BinaryOutcome(
            verdict=DRAW, a1=a1, a2=a2, reason=REASON_EVALUATION_ERROR,
            separating_instance=instance,
            attempts_used=result.attempts_used, branch=result.branch,
        )
    a1, a2 = normalize_answer(raw1), normalize_answer(raw2)
    assert not answers_equal(a1, a2), "separating instance does not separate"

    if raw1.arity != raw2.arity:
        logger.warning(
            "candidates disagree in arity (%d vs %d); prompting with the first",
            raw1.arity, raw2.arity,
        )
    tuple_length = max(1, raw1.arity)
    nl_answer = evaluate_nl(
        task, schema, instance, backend, votes=votes, tuple_length=tuple_length
    )
    common = dict(
        a1=a1, a2=a2, separating_instance=instance,
        attempts_used=result.attempts_used, branch=result.branch,
    )
    if nl_answer is None:
        return BinaryOutcome(verdict=DRAW, reason=REASON_NL_ABSTAIN, **common)
    nl_normalized = normalize_answer(nl_answer)
    if answers_equal(nl_normalized, a1):
        verdict = Q1WINS
    elif answers_equal(nl_normalized, a2):
        verdict = Q2WINS
    else:
        verdict = DRAW
    return BinaryOutcome(
        verdict=verdict, reason=REASON_COMPARATOR, nl_answer=nl_normalized, **common
    )


def run_tournament(
    clusters: list[Cluster],
    task: Task,
    db: Database,
    backend: LlmBackend,
    schema: str,
    builder_cfg: BuilderConfig = BuilderConfig(),
    votes: int = 3,
) -> TournamentReport:
    """Round-robin over cluster representatives: win 1, draw 0.5, loss 0.

    A unique top score wins; ties fall back to the consistency score and
    then to the lowest candidate index.
    """
    if not clusters:
        raise ValueError("run_tournament needs at least one cluster")
    scores = [0.0] * len(clusters)
    pairs = []
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            outcome = binary_select(
                clusters[i].query, clusters[j].query, task, db,
                backend, schema, builder_cfg, votes,
            )
            pairs.append(PairOutcome(left=i, right=j, outcome=outcome))
            if outcome.verdict == Q1WINS:
                scores[i] += 1.0
            elif outcome.verdict == Q2WINS:
                scores[j] += 1.0
            else:
                scores[i] += 0.5
                scores[j] += 0.5

    best = max(scores)
    top = [i for i, s in enumerate(scores) if s == best]
    fallback_used = len(top) > 1
    if fallback_used:
        most_consistent = max(clusters[i].consistency_score for i in top)
        top = [i for i in top if clusters[i].consistency_score == most_consistent]
    winner_cluster = min(top, key=lambda i: clusters[i].representative)
    return TournamentReport(
        clusters=tuple(clusters),
        pairs=tuple(pairs),
        scores=tuple(scores),
        winner_cluster=winner_cluster,
        winner_index=clusters[winner_cluster].representative,
        fallback_used=fallback_used,
    )


def consistency_select(clusters: list[Cluster]) -> int:
    """Representative of the largest cluster; ties pick the lowest index."""
    if not clusters:
        raise ValueError("consistency_select needs at least one cluster")
    best = max(c.consistency_score for c in clusters)
    return min(
        (c.representative for c in clusters if c.consistency_score == best)
    )


_WHITESPACE_RE = re.compile(r"\s+")


def _normalize_sql_text(sql: str) -> str:
    return _WHITESPACE_RE.sub(" ", sql).strip().rstrip(";").strip()


def naive_select(task: Task, schema: str, backend: LlmBackend) -> int:
    """Checklist-prompt selection; any failure falls back to the first
    candidate, which is also the prompt's own default."""
    if not task.candidates:
        raise ValueError("naive_select needs at least one candidate")
    prompt = render_naive_prompt(schema, task.question, task.evidence,
                                 list(task.candidates))
    try:
        reply = backend.complete(prompt)
    except BackendError as exc:
        logger.warning("naive selection transport failure: %s", exc)
        return 0
    try:
        chosen = _extract_sql_choice(reply)
    except ResponseParseError as exc:
        logger.warning("naive selection reply unusable: %s", exc)
        return 0
    wanted = _normalize_sql_text(chosen)
    for index, candidate in enumerate(task.candidates):
        if _normalize_sql_text(candidate) == wanted:
            return index
    logger.warning("naive selection reply matches no candidate; using the first")
    return 0


def _extract_sql_choice(reply: str) -> str:
    decoder = json.JSONDecoder()
    candidates = []
    fenced = re.findall(r"```(?:json)?\s*(.*?)```", reply, flags=re.DOTALL)
    candidates.extend(fenced)
    candidates.append(reply)
    for chunk in candidates:
        for pos, char in enumerate(chunk):
            if char != "{":
                continue
            text = chunk[pos:]
            for attempt in (text, _strip_json_comments(text)):
                try:
                    obj, _ = decoder.raw_decode(attempt)
                except (json.JSONDecodeError, ValueError):
                    continue
                if isinstance(obj, dict) and isinstance(obj.get("sql"), str):
                    return obj["sql"]
    raise ResponseParseError("no json object with an 'sql' field found")


def _strip_json_comments(text: str) -> str:
    no_comments = re.sub(r"//[^\n]*", "", text)
    return re.sub(r",(\s*[}\]])", r"\1", no_comments)
