"""Natural-language evaluation of a question on a small instance.

The question is rendered into the answer-evaluation prompt, sent to a
backend a fixed number of times, and the replies are parsed and grouped
under normalized equality; a strict plurality wins, anything else (ties,
parse failures, transport failures) abstains.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .answers import normalize_answer
from .backends import LlmBackend
from .database import Database
from .errors import BackendError, ResponseParseError
from .evaluator import AnswerTable
from .prompts import render_prompt
from .values import coerce_scalar

logger = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

ANSWER_KEY = "tuples_that_answer_question"


@dataclass(frozen=True)
class Task:
    """One benchmark entry: a question over a database plus SQL candidates."""

    question_id: int
    db_id: str
    question: str
    evidence: str = ""
    gold_sql: str | None = None
    candidates: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question:
            raise ValueError("task question must be nonempty")

    @classmethod
    def from_dict(cls, record: dict) -> "Task":
        if not isinstance(record, dict) or "question" not in record:
            raise ValueError(f"task record must be an object with a question: {record!r}")
        return cls(
            question_id=int(record.get("question_id", 0)),
            db_id=str(record.get("db_id", "")),
            question=record["question"],
            evidence=record.get("evidence", "") or "",
            gold_sql=record.get("SQL") or record.get("gold_sql"),
            candidates=tuple(record.get("candidates", ())),
        )


def _candidate_objects(text: str):
    for match in _FENCE_RE.finditer(text):
        yield match.group(1)
    decoder = json.JSONDecoder()
    for pos, char in enumerate(text):
        if char == "{":
            yield text[pos:]


def parse_llm_response(text: str) -> AnswerTable:
    """Extract the answer tuples from a reply.

    Never raises anything but :class:`ResponseParseError`, whatever the
    input looks like.
    """
    decoder = json.JSONDecoder()
    obj = None
    for chunk in _candidate_objects(text):
        chunk = chunk.strip()
        try:
            candidate, _ = decoder.raw_decode(chunk)
        except (json.JSONDecodeError, ValueError):
            continue
        if isinstance(candidate, dict) and ANSWER_KEY in candidate:
            obj = candidate
            break
    if obj is None:
        raise ResponseParseError(f"no json object with {ANSWER_KEY!r} found in reply")

    tuples = obj[ANSWER_KEY]
    if not isinstance(tuples, list):
        raise ResponseParseError(f"{ANSWER_KEY} must be a list")
    if not tuples:
        return AnswerTable(rows=(), arity=0)
    rows = []
    for item in tuples:
        if not isinstance(item, list):
            item = [item]  # bare scalars count as 1-tuples
        try:
            rows.append(tuple(coerce_scalar(v) for v in item))
        except TypeError as exc:
            raise ResponseParseError(str(exc)) from exc
    arity = len(rows[0])
    if any(len(row) != arity for row in rows):
        raise ResponseParseError("ragged answer tuples")
    return AnswerTable(rows=tuple(rows), arity=arity)


def evaluate_nl(
    task: Task,
    schema_text: str,
    instance: Database,
    backend: LlmBackend,
    votes: int = 3,
    tuple_length: int = 1,
    instance_format: str = "json",
) -> AnswerTable | None:
    """Majority-voted answer to the task's question on ``instance``.

    Returns None (abstain) when no answer group holds a strict plurality,
    including the all-votes-failed case.
    """
    prompt = render_prompt(
        schema_text, task.question, task.evidence, instance, tuple_length,
        instance_format,
    )
    groups: dict = {}
    order: list = []
    for vote in range(votes):
        try:
            reply = backend.complete(prompt)
            answer = parse_llm_response(reply)
        except (BackendError, ResponseParseError) as exc:
            logger.debug("vote %d abstained: %s", vote + 1, exc)
            continue
        key = normalize_answer(answer).row_sets
        if key not in groups:
            groups[key] = [answer, 0]
            order.append(key)
        groups[key][1] += 1
    if not groups:
        return None
    counts = sorted((groups[k][1] for k in order), reverse=True)
    best = counts[0]
    if len(counts) > 1 and counts[1] == best:
        return None  # tie between answer groups
    for key in order:
        if groups[key][1] == best:
            return groups[key][0]
    return None
