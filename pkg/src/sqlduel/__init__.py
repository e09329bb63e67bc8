"""sqlduel: pick the right SQL candidate by pitting queries against each
other on small separating database instances."""

__version__ = "0.1.0"

from .answers import NormalizedAnswer, answers_equal, normalize_answer
from .builder import BuilderConfig, SeparationResult, build_separating_instance, materialize
from .database import Database, ProvenanceToken, Table, subset_by_tokens
from .evaluator import (
    AnswerTable,
    collect_terms,
    evaluate,
    evaluate_with_provenance,
)
from .features import FeatureFlags, SamplingPlan, detect_features
from .instance_io import load_instance_json, schema_text, serialize_instance
from .nl_eval import Task, evaluate_nl, parse_llm_response
from .queries import CandidateQuery, prepare_candidate
from .rewrite import rewrite_where_subqueries
from .selection import (
    BinaryOutcome,
    Cluster,
    TournamentReport,
    binary_select,
    cluster_candidates,
    consistency_select,
    naive_select,
    run_tournament,
)
from .sql_ast import to_sql
from .sql_parser import parse_sql

__all__ = [
    "AnswerTable",
    "BinaryOutcome",
    "BuilderConfig",
    "CandidateQuery",
    "Cluster",
    "Database",
    "FeatureFlags",
    "NormalizedAnswer",
    "ProvenanceToken",
    "SamplingPlan",
    "SeparationResult",
    "Table",
    "Task",
    "TournamentReport",
    "answers_equal",
    "binary_select",
    "build_separating_instance",
    "cluster_candidates",
    "collect_terms",
    "consistency_select",
    "detect_features",
    "evaluate",
    "evaluate_nl",
    "evaluate_with_provenance",
    "load_instance_json",
    "materialize",
    "naive_select",
    "normalize_answer",
    "parse_llm_response",
    "parse_sql",
    "prepare_candidate",
    "rewrite_where_subqueries",
    "run_tournament",
    "schema_text",
    "serialize_instance",
    "subset_by_tokens",
    "to_sql",
]
