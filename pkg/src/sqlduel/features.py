"""Keyword probing of candidate SQL texts and the term-sampling plan.

Detection is lexical (word tokens, string literals excluded, case
insensitive) rather than AST-based, so it keeps working on queries the
parser cannot fully handle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .sql_parser import word_tokens


@dataclass(frozen=True)
class FeatureFlags:
    has_sum: bool
    has_case: bool
    has_when: bool
    has_count: bool


class SamplingPlan(NamedTuple):
    """How many simple terms to draw from each provenance difference."""

    m: int
    n: int


def detect_features(
    q1_text: str, q2_text: str, *, sum_case_when_all: bool = True
) -> tuple[FeatureFlags, SamplingPlan]:
    """Probe both texts and derive the (M, N) sampling plan.

    (3, 4) when sum/case/when all occur across the union of both texts
    (any one of them suffices when ``sum_case_when_all`` is False),
    (1, 2) when count occurs, (1, 1) otherwise.
    """
    words = set(word_tokens(q1_text)) | set(word_tokens(q2_text))
    flags = FeatureFlags(
        has_sum="sum" in words,
        has_case="case" in words,
        has_when="when" in words,
        has_count="count" in words,
    )
    sum_case_when = (
        flags.has_sum and flags.has_case and flags.has_when
        if sum_case_when_all
        else flags.has_sum or flags.has_case or flags.has_when
    )
    if sum_case_when:
        plan = SamplingPlan(3, 4)
    elif flags.has_count:
        plan = SamplingPlan(1, 2)
    else:
        plan = SamplingPlan(1, 1)
    return flags, plan
