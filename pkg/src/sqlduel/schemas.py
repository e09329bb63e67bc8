"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class TaskModel(BaseModel):
    question_id: int = 0
    db_id: str = ""
    question: str
    evidence: str = ""
    SQL: Optional[str] = None
    candidates: list[str] = Field(default_factory=list)


class BackendModel(BaseModel):
    kind: str = "oracle"  # oracle | scripted | http
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: str = "SQLDUEL_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    sampling: Optional[dict[str, Any]] = None
    replies: list[str] = Field(default_factory=list)


class EvalSqlRequest(BaseModel):
    sql: str
    database: dict[str, Any]


class EvalSqlResponse(BaseModel):
    rows: list[list[Any]]
    arity: int


class BuildInstanceRequest(BaseModel):
    q1: str
    q2: str
    database: dict[str, Any]
    seed: int = 0
    max_attempts: int = 42
    column_policy: str = "referenced_plus_keys"


class BuildInstanceResponse(BaseModel):
    separated: bool
    attempts_used: int
    branch: str
    instance: Optional[dict[str, Any]] = None


class SelectRequest(BaseModel):
    task: TaskModel
    database: dict[str, Any]
    strategy: str = "separating"
    backend: BackendModel = Field(default_factory=BackendModel)
    votes: int = 3
    seed: int = 0
    max_attempts: int = 42
    column_policy: str = "referenced_plus_keys"


class SelectResponse(BaseModel):
    stage: str
    winner_index: Optional[int] = None
    winner_sql: Optional[str] = None
    gold_match: Optional[bool] = None
    record: dict[str, Any]


class CritiqueRequest(BaseModel):
    task: TaskModel
    database: dict[str, Any]
    backend: BackendModel = Field(default_factory=BackendModel)
    votes: int = 3
    seed: int = 0
    max_attempts: int = 42
    column_policy: str = "all_columns"  # critiques keep id columns as evidence


class CritiqueResponse(BaseModel):
    critique: str


class BenchmarkRequest(BaseModel):
    tasks_path: str  # paths are resolved on the service host
    dbs_dir: str
    out_dir: Optional[str] = None
    strategy: str = "separating"
    backend: BackendModel = Field(default_factory=BackendModel)
    votes: int = 3
    seed: int = 0
    max_attempts: int = 42
    column_policy: str = "referenced_plus_keys"
    workers: int = 1
    count_failures_as_wrong: bool = False


class BenchmarkResponse(BaseModel):
    metrics: dict[str, Any]
    records: list[dict[str, Any]]


class HealthResponse(BaseModel):
    status: str
    version: str
