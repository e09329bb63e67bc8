"""Prompt rendering from the packaged template assets."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .database import Database
from .instance_io import serialize_instance

INSTANCE_SECTION = "[Database Instance]:"
SECTION_RULE = "**************************"


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("sqlduel").joinpath(f"templates/{name}").read_text("utf-8")


def render_prompt(
    schema_text: str,
    question: str,
    hint: str,
    instance: Database,
    tuple_length: int = 1,
    instance_format: str = "json",
) -> str:
    """Fill the answer-evaluation template; the instance defaults to json."""
    if tuple_length < 1:
        raise ValueError("tuple_length must be >= 1")
    return _template("nl_answer.txt").format(
        schema=schema_text,
        question=question,
        hint=hint,
        instance=serialize_instance(instance, instance_format),
        tuple_length=tuple_length,
    )


def render_naive_prompt(
    schema_text: str, question: str, evidence: str, candidates: list[str]
) -> str:
    """Fill the checklist-based selection template."""
    numbered = "\n".join(f"{i + 1}. {sql}" for i, sql in enumerate(candidates))
    return _template("naive_choice.txt").format(
        DB_SCHEMA=schema_text,
        QUESTION=question,
        KNOWLEDGE_EVIDENCE=evidence,
        SQL_QUERIES=numbered,
    )


def extract_instance_block(prompt: str) -> str:
    """Pull the serialized instance back out of a rendered prompt.

    Used by the oracle backend, whose only input channel is the prompt
    text itself.
    """
    start = prompt.index(INSTANCE_SECTION) + len(INSTANCE_SECTION)
    end = prompt.index(SECTION_RULE, start)
    return prompt[start:end].strip()
