"""FastAPI service wrapping the selection pipeline.

Run with: uvicorn sqlduel.service:app
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException

from . import __version__
from .benchmark import BackendSpec, RunConfig, run_benchmark, run_single
from .critique import emit_critique
from .database import Database
from .errors import NoCritique, SqlDuelError
from .evaluator import evaluate
from .instance_io import load_instance_json, serialize_instance
from .nl_eval import Task
from .queries import prepare_candidate
from .schemas import (
    BackendModel,
    BenchmarkRequest,
    BenchmarkResponse,
    BuildInstanceRequest,
    BuildInstanceResponse,
    CritiqueRequest,
    CritiqueResponse,
    EvalSqlRequest,
    EvalSqlResponse,
    HealthResponse,
    SelectRequest,
    SelectResponse,
    TaskModel,
)
from .builder import BuilderConfig, build_separating_instance


def _database(doc: dict) -> Database:
    return load_instance_json(json.dumps(doc))


def _task(model: TaskModel) -> Task:
    return Task(
        question_id=model.question_id,
        db_id=model.db_id,
        question=model.question,
        evidence=model.evidence,
        gold_sql=model.SQL,
        candidates=tuple(model.candidates),
    )


def _backend_spec(model: BackendModel) -> BackendSpec:
    return BackendSpec(
        kind=model.kind,
        endpoint=model.endpoint,
        model=model.model,
        api_key_env=model.api_key_env,
        timeout=model.timeout,
        max_retries=model.max_retries,
        sampling=model.sampling,
        replies=tuple(model.replies),
    )


def _instance_doc(db: Database) -> dict:
    return json.loads(serialize_instance(db, "json"))


def eval_sql(request: EvalSqlRequest) -> EvalSqlResponse:
    db = _database(request.database)
    candidate = prepare_candidate(request.sql)
    answer = evaluate(candidate.ast, db)
    return EvalSqlResponse(rows=[list(r) for r in answer.rows], arity=answer.arity)


def build_instance(request: BuildInstanceRequest) -> BuildInstanceResponse:
    db = _database(request.database)
    cfg = BuilderConfig(
        max_attempts=request.max_attempts,
        rng_seed=request.seed,
        column_policy=request.column_policy,
    )
    result = build_separating_instance(
        prepare_candidate(request.q1), prepare_candidate(request.q2), db, cfg
    )
    return BuildInstanceResponse(
        separated=result.separated,
        attempts_used=result.attempts_used,
        branch=result.branch,
        instance=_instance_doc(result.instance) if result.separated else None,
    )


def select(request: SelectRequest) -> SelectResponse:
    db = _database(request.database)
    result = run_single(
        _task(request.task), db,
        strategy=request.strategy,
        backend_spec=_backend_spec(request.backend),
        votes=request.votes,
        seed=request.seed,
        max_attempts=request.max_attempts,
        column_policy=request.column_policy,
    )
    return SelectResponse(
        stage=result.stage,
        winner_index=result.winner_index,
        winner_sql=result.record.get("winner_sql"),
        gold_match=result.gold_match,
        record=result.record,
    )


def critique(request: CritiqueRequest) -> CritiqueResponse:
    db = _database(request.database)
    task = _task(request.task)
    result = run_single(
        task, db,
        strategy="separating",
        backend_spec=_backend_spec(request.backend),
        votes=request.votes,
        seed=request.seed,
        max_attempts=request.max_attempts,
        column_policy=request.column_policy,
    )
    if result.stage != "ok" or result.report is None:
        raise NoCritique(f"selection did not produce a tournament (stage {result.stage})")
    text = emit_critique(task, result.report, result.gold_answer)
    return CritiqueResponse(critique=text)


def benchmark(request: BenchmarkRequest) -> BenchmarkResponse:
    cfg = RunConfig(
        tasks_path=request.tasks_path,
        dbs_dir=request.dbs_dir,
        out_dir=request.out_dir,
        strategy=request.strategy,
        backend=_backend_spec(request.backend),
        votes=request.votes,
        seed=request.seed,
        max_attempts=request.max_attempts,
        column_policy=request.column_policy,
        workers=request.workers,
        count_failures_as_wrong=request.count_failures_as_wrong,
    )
    metrics, records = run_benchmark(cfg)
    return BenchmarkResponse(metrics=metrics.to_dict(), records=records)


def create_app() -> FastAPI:
    app = FastAPI(title="sqlduel", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/eval-sql", response_model=EvalSqlResponse)
    def eval_sql_route(request: EvalSqlRequest) -> EvalSqlResponse:
        return _guard(eval_sql, request)

    @app.post("/build-instance", response_model=BuildInstanceResponse)
    def build_instance_route(request: BuildInstanceRequest) -> BuildInstanceResponse:
        return _guard(build_instance, request)

    @app.post("/select", response_model=SelectResponse)
    def select_route(request: SelectRequest) -> SelectResponse:
        return _guard(select, request)

    @app.post("/critique", response_model=CritiqueResponse)
    def critique_route(request: CritiqueRequest) -> CritiqueResponse:
        return _guard(critique, request)

    @app.post("/benchmark", response_model=BenchmarkResponse)
    def benchmark_route(request: BenchmarkRequest) -> BenchmarkResponse:
        return _guard(benchmark, request)

    return app


def _guard(handler, request):
    try:
        return handler(request)
    except NoCritique as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    except (SqlDuelError, ValueError, OSError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


app = create_app()
