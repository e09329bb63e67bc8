"""Command-line client for the selection service.

Every subcommand builds a service request and dispatches it either to a
remote server (--server URL) or to the in-process service layer; the CLI
itself contains no selection logic. Exit codes: 0 success, 1 task
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from . import service
from .errors import NoCritique, SqlDuelError
from .schemas import (
    BackendModel,
    BenchmarkRequest,
    BuildInstanceRequest,
    CritiqueRequest,
    EvalSqlRequest,
    SelectRequest,
    TaskModel,
)


class CliError(Exception):
    pass


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text("utf-8")


def _read_json(path: str):
    try:
        return json.loads(_read_text(path))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read json from {path}: {exc}") from exc


def _backend_model(args) -> BackendModel:
    replies = []
    if getattr(args, "replies", None):
        replies = _read_json(args.replies)
        if not isinstance(replies, list):
            raise CliError("--replies file must hold a json array of strings")
    return BackendModel(
        kind=args.backend,
        endpoint=args.endpoint,
        model=args.model,
        timeout=args.timeout,
        max_retries=args.max_retries,
        replies=replies,
    )


def _find_task(args) -> dict:
    records = _read_json(args.tasks)
    if not isinstance(records, list) or not records:
        raise CliError("tasks file must hold a nonempty json array")
    if args.task_id is None:
        return records[0]
    for record in records:
        if record.get("question_id") == args.task_id:
            return record
    raise CliError(f"no task with question_id {args.task_id} in {args.tasks}")


def _load_db_for_task(args, task: dict) -> dict:
    if getattr(args, "db", None):
        return _read_json(args.db)
    if not args.dbs:
        raise CliError("either --db or --dbs is required")
    return _read_json(str(Path(args.dbs) / f"{task['db_id']}.json"))


_HANDLERS = {
    "/eval-sql": service.eval_sql,
    "/build-instance": service.build_instance,
    "/select": service.select,
    "/critique": service.critique,
    "/benchmark": service.benchmark,
}


def _dispatch(args, path: str, request):
    if args.server:
        url = args.server.rstrip("/") + path
        try:
            response = httpx.post(url, json=request.model_dump(), timeout=args.timeout)
        except httpx.HTTPError as exc:
            raise CliError(f"request to {url} failed: {exc}") from exc
        if response.status_code >= 400:
            detail = response.json().get("detail", response.text) \
                if response.headers.get("content-type", "").startswith("application/json") \
                else response.text
            raise CliError(f"{path} failed: {detail}")
        return response.json()
    handler = _HANDLERS[path]
    try:
        return handler(request).model_dump()
    except NoCritique as exc:
        raise CliError(str(exc)) from exc
    except (SqlDuelError, ValueError, OSError) as exc:
        raise CliError(f"{path} failed: {exc}") from exc


def _emit(args, payload: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)


def _cmd_eval_sql(args) -> int:
    request = EvalSqlRequest(sql=args.sql, database=_read_json(args.db))
    body = _dispatch(args, "/eval-sql", request)
    _emit(args, json.dumps(body, indent=2, ensure_ascii=False))
    return 0


def _cmd_build_instance(args) -> int:
    request = BuildInstanceRequest(
        q1=args.q1,
        q2=args.q2,
        database=_read_json(args.db),
        seed=args.seed,
        max_attempts=args.max_attempts,
        column_policy=args.column_policy,
    )
    body = _dispatch(args, "/build-instance", request)
    if not body["separated"]:
        print(
            f"no separating instance found "
            f"({body['branch']}, {body['attempts_used']} attempts)",
            file=sys.stderr,
        )
        return 1
    _emit(args, json.dumps(body["instance"], indent=2, ensure_ascii=False))
    return 0


def _cmd_select(args) -> int:
    task = _find_task(args)
    request = SelectRequest(
        task=TaskModel(**task),
        database=_load_db_for_task(args, task),
        strategy=args.strategy,
        backend=_backend_model(args),
        votes=args.votes,
        seed=args.seed,
        max_attempts=args.max_attempts,
        column_policy=args.column_policy,
    )
    body = _dispatch(args, "/select", request)
    _emit(args, json.dumps(body["record"], indent=2, sort_keys=True, ensure_ascii=False))
    if body["stage"] != "ok":
        print(f"task failed at stage {body['stage']}", file=sys.stderr)
        return 1
    return 0


def _cmd_critique(args) -> int:
    task = _find_task(args)
    request = CritiqueRequest(
        task=TaskModel(**task),
        database=_load_db_for_task(args, task),
        backend=_backend_model(args),
        votes=args.votes,
        seed=args.seed,
        max_attempts=args.max_attempts,
        column_policy=args.column_policy,
    )
    body = _dispatch(args, "/critique", request)
    _emit(args, body["critique"])
    return 0


def _cmd_benchmark(args) -> int:
    request = BenchmarkRequest(
        tasks_path=args.tasks,
        dbs_dir=args.dbs,
        out_dir=args.out,
        strategy=args.strategy,
        backend=_backend_model(args),
        votes=args.votes,
        seed=args.seed,
        max_attempts=args.max_attempts,
        column_policy=args.column_policy,
        workers=args.workers,
        count_failures_as_wrong=args.count_failures_as_wrong,
    )
    body = _dispatch(args, "/benchmark", request)
    print(json.dumps(body["metrics"], indent=2, sort_keys=True, ensure_ascii=False))
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("oracle", "scripted", "http"),
                        default="oracle", help="NL evaluation backend")
    parser.add_argument("--endpoint", help="chat-completions endpoint URL (http backend)")
    parser.add_argument("--model", help="model name (http backend)")
    parser.add_argument("--replies", help="json file with scripted replies")
    parser.add_argument("--votes", type=int, default=3)
    parser.add_argument("--max-retries", type=int, default=3, dest="max_retries")


def _add_builder_flags(parser: argparse.ArgumentParser, policy_default: str) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-attempts", type=int, default=42, dest="max_attempts")
    parser.add_argument("--column-policy", dest="column_policy",
                        choices=("referenced_plus_keys", "all_columns"),
                        default=policy_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlduel",
        description="SQL candidate selection via small separating instances",
    )
    parser.add_argument("--server", help="service URL; defaults to in-process execution")
    parser.add_argument("--timeout", type=float, default=300.0,
                        help="client-side request timeout in seconds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-sql", help="evaluate a SQL query on an instance file")
    p.add_argument("--db", required=True, help="instance json file ('-' for stdin)")
    p.add_argument("--sql", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_sql)

    p = sub.add_parser("build-instance", help="build a separating instance for a pair")
    p.add_argument("--db", required=True, help="instance json file ('-' for stdin)")
    p.add_argument("--q1", required=True)
    p.add_argument("--q2", required=True)
    _add_builder_flags(p, "referenced_plus_keys")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_build_instance)

    p = sub.add_parser("select", help="run selection for one task")
    p.add_argument("--tasks", required=True, help="tasks json file")
    p.add_argument("--task-id", type=int, dest="task_id",
                   help="question_id to run (default: first task)")
    p.add_argument("--dbs", help="directory with <db_id>.json instances")
    p.add_argument("--db", help="explicit instance json file")
    p.add_argument("--strategy", choices=("separating", "consistency", "naive"),
                   default="separating")
    _add_backend_flags(p)
    _add_builder_flags(p, "referenced_plus_keys")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("critique", help="emit an evidence-based critique for one task")
    p.add_argument("--tasks", required=True)
    p.add_argument("--task-id", type=int, dest="task_id")
    p.add_argument("--dbs")
    p.add_argument("--db")
    _add_backend_flags(p)
    _add_builder_flags(p, "all_columns")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_critique)

    p = sub.add_parser("benchmark", help="run all tasks and compute metrics")
    p.add_argument("--tasks", required=True)
    p.add_argument("--dbs", required=True)
    p.add_argument("--strategy", choices=("separating", "consistency", "naive"),
                   default="separating")
    _add_backend_flags(p)
    _add_builder_flags(p, "referenced_plus_keys")
    p.add_argument("--out", help="directory for per-task reports and metrics.json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--count-failures-as-wrong", action="store_true",
                   dest="count_failures_as_wrong")
    p.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
