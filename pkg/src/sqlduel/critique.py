"""Evidence-based critique documents derived from tournament reports.

When a decisive pair's winner disagrees with the gold answer on the full
database, the separating instance's rows become concrete evidence that the
gold query misses or miscounts something, and the report is rendered as a
human-readable critique.
"""

from __future__ import annotations

import json

from .answers import NormalizedAnswer, answers_equal
from .errors import NoCritique
from .nl_eval import Task
from .selection import Q1WINS, Q2WINS, PairOutcome, TournamentReport


def emit_critique(
    task: Task,
    report: TournamentReport,
    gold_answer: NormalizedAnswer | None,
) -> str:
    """Render the critique for the first decisive pair whose winner's
    answer on the full database differs from the gold answer."""
    if gold_answer is None:
        raise NoCritique("gold answer unavailable")
    pair = _find_disputed_pair(report, gold_answer)
    if pair is None:
        raise NoCritique("no decisive pair disagrees with the gold answer")

    winner_cluster = pair.left if pair.outcome.verdict == Q1WINS else pair.right
    winner = report.clusters[winner_cluster]
    instance = pair.outcome.separating_instance

    lines = ["BIRD ENTRY"]
    entry = {
        "question_id": task.question_id,
        "db_id": task.db_id,
        "question": task.question,
        "evidence": task.evidence,
        "SQL": task.gold_sql,
    }
    lines.append(json.dumps(entry, indent=4, ensure_ascii=False))
    lines.append("")
    lines.append("CRITIQUE")
    lines.append("")
    lines.append("The database contains the following rows:")
    for table in instance.tables:
        for i, row in enumerate(table.rows):
            cells = json.dumps(dict(zip(table.columns, row)), indent=6, ensure_ascii=False)
            lines.append(f'"row_{i}_of_{table.name}": {cells}')
    lines.append("")
    lines.append(
        "On these rows the 'gold' answer and the selected query disagree, "
        "and the tournament sided with the selected query. The query"
    )
    lines.append("")
    lines.append(winner.query.text)
    lines.append("")
    lines.append("seems better than the 'gold' answer.")
    return "\n".join(lines)


def _find_disputed_pair(
    report: TournamentReport, gold_answer: NormalizedAnswer
) -> PairOutcome | None:
    for pair in report.pairs:
        if pair.outcome.verdict not in (Q1WINS, Q2WINS):
            continue
        winner_cluster = pair.left if pair.outcome.verdict == Q1WINS else pair.right
        winner = report.clusters[winner_cluster]
        if not answers_equal(winner.answer, gold_answer):
            return pair
    return None
