"""Batch pipeline: load tasks and databases, select, score, emit reports."""

from __future__ import annotations

import json
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .answers import NormalizedAnswer, answer_to_lists, answers_equal, normalize_answer
from .backends import DEFAULT_SAMPLING, HttpChatBackend, LlmBackend, OracleBackend, ScriptedBackend
from .builder import BuilderConfig
from .database import Database
from .errors import SqlDuelError
from .evaluator import evaluate
from .instance_io import load_instance_json, schema_text, serialize_instance
from .nl_eval import Task
from .queries import prepare_candidate
from .selection import (
    TournamentReport,
    cluster_candidates,
    consistency_select,
    naive_select,
    run_tournament,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("separating", "consistency", "naive")

STAGE_OK = "ok"
STAGE_LOAD_DB = "load_db"
STAGE_CLUSTER = "cluster"
STAGE_GOLD = "gold_eval"
STAGE_SELECT = "select"


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "oracle"  # oracle | scripted | http
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "SQLDUEL_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    sampling: dict | None = None
    replies: tuple[str, ...] = ()

    def build(self, gold_sql: str | None = None) -> LlmBackend:
        if self.kind == "oracle":
            if not gold_sql:
                raise ValueError("the oracle backend needs the task's gold SQL")
            return OracleBackend(gold_sql)
        if self.kind == "scripted":
            return ScriptedBackend(list(self.replies))
        if self.kind == "http":
            if not self.endpoint or not self.model:
                raise ValueError("the http backend needs --endpoint and --model")
            return HttpChatBackend(
                endpoint=self.endpoint,
                model=self.model,
                api_key=os.environ.get(self.api_key_env) or None,
                timeout=self.timeout,
                max_retries=self.max_retries,
                sampling=self.sampling if self.sampling else DEFAULT_SAMPLING,
            )
        raise ValueError(f"unknown backend kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    tasks_path: str
    dbs_dir: str
    out_dir: str | None = None
    strategy: str = "separating"
    backend: BackendSpec = field(default_factory=BackendSpec)
    votes: int = 3
    seed: int = 0
    max_attempts: int = 42
    column_policy: str = "referenced_plus_keys"
    workers: int = 1
    count_failures_as_wrong: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")


@dataclass
class Metrics:
    tasks_total: int = 0
    tasks_scored: int = 0
    tasks_matched: int = 0
    execution_accuracy: float | None = None
    execution_accuracy_strict: float | None = None
    technical_coverage: float | None = None
    builder_success_rate: float | None = None
    pairs_attempted: int = 0
    pairs_separated: int = 0
    failure_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tasks_total": self.tasks_total,
            "tasks_scored": self.tasks_scored,
            "tasks_matched": self.tasks_matched,
            "execution_accuracy": self.execution_accuracy,
            "execution_accuracy_strict": self.execution_accuracy_strict,
            "technical_coverage": self.technical_coverage,
            "builder_success_rate": self.builder_success_rate,
            "pairs_attempted": self.pairs_attempted,
            "pairs_separated": self.pairs_separated,
            "failure_counts": dict(sorted(self.failure_counts.items())),
        }


@dataclass
class TaskResult:
    stage: str
    record: dict
    report: TournamentReport | None = None
    gold_answer: NormalizedAnswer | None = None
    winner_index: int | None = None
    gold_match: bool | None = None
    fallback_used: bool = False


def task_seed(seed: int, question_id: int) -> int:
    """Stable per-task seed, independent of task order and worker count."""
    return zlib.crc32(f"{seed}:{question_id}".encode())


def answer_json(answer: NormalizedAnswer | None):
    return None if answer is None else answer_to_lists(answer)


def run_single(
    task: Task,
    db: Database,
    strategy: str = "separating",
    backend_spec: BackendSpec = BackendSpec(),
    votes: int = 3,
    seed: int = 0,
    max_attempts: int = 42,
    column_policy: str = "referenced_plus_keys",
) -> TaskResult:
    """Run one task end to end and assemble its report record."""
    record = {
        "question_id": task.question_id,
        "db_id": task.db_id,
        "strategy": strategy,
        "stage": STAGE_OK,
        "seed": seed,
    }

    gold_answer = None
    if task.gold_sql:
        try:
            gold = prepare_candidate(task.gold_sql)
            gold_answer = normalize_answer(evaluate(gold.ast, db))
        except SqlDuelError as exc:
            logger.warning("task %s: gold SQL unusable: %s", task.question_id, exc)
            record["stage"] = STAGE_GOLD
            record["error"] = str(exc)
            return TaskResult(stage=STAGE_GOLD, record=record)
    record["gold_answer"] = answer_json(gold_answer)

    clusters = cluster_candidates(list(task.candidates), db)
    record["clusters"] = [
        {
            "members": list(c.members),
            "representative": c.representative,
            "consistency_score": c.consistency_score,
            "answer": answer_json(c.answer),
        }
        for c in clusters
    ]
    if not clusters:
        record["stage"] = STAGE_CLUSTER
        record["error"] = "no executable candidate"
        return TaskResult(stage=STAGE_CLUSTER, record=record)

    schema = schema_text(db)
    builder_cfg = BuilderConfig(
        max_attempts=max_attempts,
        rng_seed=task_seed(seed, task.question_id),
        column_policy=column_policy,
    )

    report = None
    fallback_used = False
    try:
        if len(clusters) == 1:
            winner = clusters[0].representative
            record["single_cluster"] = True
        elif strategy == "separating":
            backend = backend_spec.build(gold_sql=task.gold_sql)
            report = run_tournament(
                clusters, task, db, backend, schema, builder_cfg, votes
            )
            winner = report.winner_index
            fallback_used = report.fallback_used
            record["tournament"] = _report_json(report)
        elif strategy == "consistency":
            winner = consistency_select(clusters)
        else:
            winner = naive_select(task, schema, backend_spec.build(gold_sql=task.gold_sql))
    except (SqlDuelError, ValueError) as exc:
        logger.warning("task %s: selection failed: %s", task.question_id, exc)
        record["stage"] = STAGE_SELECT
        record["error"] = str(exc)
        return TaskResult(stage=STAGE_SELECT, record=record)

    record["winner_index"] = winner
    record["winner_sql"] = (
        task.candidates[winner] if 0 <= winner < len(task.candidates) else None
    )
    record["fallback_used"] = fallback_used

    gold_match = None
    if gold_answer is not None:
        winner_answer = next(
            (c.answer for c in clusters if winner in c.members), None
        )
        if winner_answer is None:
            # Possible under the naive strategy, which may pick a
            # candidate that never made it into a cluster.
            try:
                winner_answer = normalize_answer(
                    evaluate(prepare_candidate(task.candidates[winner]).ast, db)
                )
            except SqlDuelError:
                winner_answer = None
        gold_match = winner_answer is not None and answers_equal(
            winner_answer, gold_answer
        )
    record["gold_match"] = gold_match

    return TaskResult(
        stage=STAGE_OK,
        record=record,
        report=report,
        gold_answer=gold_answer,
        winner_index=winner,
        gold_match=gold_match,
        fallback_used=fallback_used,
    )


def _report_json(report: TournamentReport) -> dict:
    return {
        "scores": list(report.scores),
        "winner_cluster": report.winner_cluster,
        "winner_index": report.winner_index,
        "fallback_used": report.fallback_used,
        "pairs": [
            {
                "left": p.left,
                "right": p.right,
                "verdict": p.outcome.verdict,
                "reason": p.outcome.reason,
                "branch": p.outcome.branch,
                "attempts_used": p.outcome.attempts_used,
                "a1": answer_json(p.outcome.a1),
                "a2": answer_json(p.outcome.a2),
                "nl_answer": answer_json(p.outcome.nl_answer),
                "separating_instance": (
                    json.loads(serialize_instance(p.outcome.separating_instance))
                    if p.outcome.separating_instance is not None
                    else None
                ),
            }
            for p in report.pairs
        ],
    }


def load_tasks(path: str | Path) -> list[Task]:
    with open(path, encoding="utf-8") as handle:
        records = json.load(handle)
    if not isinstance(records, list):
        raise ValueError("tasks file must hold a json array of task records")
    return [Task.from_dict(r) for r in records]


def load_database(dbs_dir: str | Path, db_id: str) -> Database:
    path = Path(dbs_dir) / f"{db_id}.json"
    return load_instance_json(path.read_text("utf-8"))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _dump(record) -> str:
    return json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run_benchmark(cfg: RunConfig) -> tuple[Metrics, list[dict]]:
    """Run every task in the tasks file and compute aggregate metrics.

    Deterministic given the seed and a non-HTTP backend: per-task seeds
    depend only on (seed, question_id), and records carry no timestamps.
    """
    tasks = load_tasks(cfg.tasks_path)
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def process(task: Task) -> TaskResult:
        try:
            db = load_database(cfg.dbs_dir, task.db_id)
        except (OSError, SqlDuelError) as exc:
            record = {
                "question_id": task.question_id,
                "db_id": task.db_id,
                "strategy": cfg.strategy,
                "stage": STAGE_LOAD_DB,
                "seed": cfg.seed,
                "error": str(exc),
            }
            return TaskResult(stage=STAGE_LOAD_DB, record=record)
        return run_single(
            task, db,
            strategy=cfg.strategy,
            backend_spec=cfg.backend,
            votes=cfg.votes,
            seed=cfg.seed,
            max_attempts=cfg.max_attempts,
            column_policy=cfg.column_policy,
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(process, tasks))
    else:
        results = [process(task) for task in tasks]

    metrics = _aggregate(results, cfg)
    records = [r.record for r in results]
    if out_dir:
        for task, record in zip(tasks, records):
            _atomic_write(out_dir / f"task_{task.question_id}.json", _dump(record))
        _atomic_write(out_dir / "metrics.json", _dump(metrics.to_dict()))
    return metrics, records


def _aggregate(results: list[TaskResult], cfg: RunConfig) -> Metrics:
    metrics = Metrics(tasks_total=len(results))
    strict_scored = strict_matched = 0
    for result in results:
        if result.stage != STAGE_OK:
            metrics.failure_counts[result.stage] = (
                metrics.failure_counts.get(result.stage, 0) + 1
            )
            continue
        metrics.tasks_scored += 1
        if result.gold_match:
            metrics.tasks_matched += 1
        if not result.fallback_used:
            strict_scored += 1
            if result.gold_match:
                strict_matched += 1
        report = result.record.get("tournament")
        if report:
            for pair in report["pairs"]:
                metrics.pairs_attempted += 1
                if pair["separating_instance"] is not None:
                    metrics.pairs_separated += 1

    denominator = metrics.tasks_scored
    if cfg.count_failures_as_wrong:
        denominator = metrics.tasks_total
    if denominator:
        metrics.execution_accuracy = metrics.tasks_matched / denominator
    if strict_scored:
        metrics.execution_accuracy_strict = strict_matched / strict_scored
    if metrics.tasks_total:
        metrics.technical_coverage = metrics.tasks_scored / metrics.tasks_total
    if metrics.pairs_attempted:
        metrics.builder_success_rate = metrics.pairs_separated / metrics.pairs_attempted
    return metrics
