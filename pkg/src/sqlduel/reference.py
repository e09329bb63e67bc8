"""Reference evaluation of SQL text through an in-memory sqlite3 database.

This is a testing aid: an independent, subquery-capable evaluation path
used to cross-check the engine and the subquery rewrite. It is not part
of the selection pipeline. Known dialect differences (documented in the
README): sqlite uses three-valued NOT, while the engine's predicates are
two-valued.
"""

from __future__ import annotations

import sqlite3

from .database import Database
from .errors import BindError
from .evaluator import AnswerTable
from .values import coerce_scalar


def _quoted(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def load_sqlite(db: Database) -> sqlite3.Connection:
    conn = sqlite3.connect(":memory:")
    for table in db.tables:
        cols = ", ".join(_quoted(c) for c in table.columns)
        conn.execute(f"CREATE TABLE {_quoted(table.name)} ({cols})")
        if table.rows:
            marks = ", ".join("?" for _ in table.columns)
            conn.executemany(
                f"INSERT INTO {_quoted(table.name)} VALUES ({marks})",
                [tuple(row) for row in table.rows],
            )
    return conn


def reference_evaluate(sql: str, db: Database) -> AnswerTable:
    """Run raw SQL text on a sqlite3 copy of ``db``."""
    conn = load_sqlite(db)
    try:
        cursor = conn.execute(sql)
        rows = tuple(tuple(coerce_scalar(v) for v in row) for row in cursor.fetchall())
        arity = len(cursor.description) if cursor.description else 0
        return AnswerTable(rows=rows, arity=arity)
    except sqlite3.Error as exc:
        raise BindError(f"sqlite reference evaluation failed: {exc}") from exc
    finally:
        conn.close()
