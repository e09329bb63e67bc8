"""Loading and serializing database instances.

The canonical interchange format is a json object whose keys follow the
``row_<k>_of_<table>`` pattern, each mapping to a flat attribute→scalar
object. A ``{table: [row, ...]}`` shape is accepted on input as well.
Markdown tables and SQL INSERT scripts are emit-only formats.
"""

from __future__ import annotations

import json
import logging
import re

from .database import Database, Table
from .errors import ParseError
from .values import (
    KIND_INTEGER,
    KIND_REAL,
    KIND_TEXT,
    coerce_scalar,
    format_number,
    kinds_conflict,
    promote_kind,
    scalar_to_text,
    value_kind,
)

logger = logging.getLogger(__name__)

FORMATS = ("json", "markdown", "sql_inserts")

_ROW_KEY_RE = re.compile(r"^row_(\d+)_of_(.+)$")

_SQL_TYPE = {KIND_INTEGER: "INTEGER", KIND_REAL: "REAL", KIND_TEXT: "TEXT"}


def load_instance_json(text: str) -> Database:
    """Parse an instance document into a :class:`Database`.

    Column sets are the union of attribute names across a table's rows;
    attributes absent from a row become null. When a column mixes text and
    numeric values, every value is coerced to text and a warning is logged.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed instance json: {exc.msg}", position=exc.pos) from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a json object")
    if not doc:
        return Database()

    # table name -> list of (ordering key, row dict)
    staged: dict[str, list[tuple[int, dict]]] = {}
    row_keys = all(_ROW_KEY_RE.match(k) for k in doc)
    if row_keys:
        for key, row in doc.items():
            match = _ROW_KEY_RE.match(key)
            if not isinstance(row, dict):
                raise ParseError(f"value of {key!r} must be an object")
            ordinal, table_name = int(match.group(1)), match.group(2)
            staged.setdefault(table_name, []).append((ordinal, row))
    elif all(isinstance(v, list) for v in doc.values()):
        for table_name, rows in doc.items():
            for i, row in enumerate(rows):
                if not isinstance(row, dict):
                    raise ParseError(f"table {table_name!r}: row {i} is not an object")
                staged.setdefault(table_name, []).append((i, row))
    else:
        raise ParseError(
            "instance keys must all match row_<k>_of_<table> or all map to row lists"
        )

    tables = []
    for table_name, entries in staged.items():
        entries.sort(key=lambda pair: pair[0])
        tables.append(_build_table(table_name, [row for _, row in entries]))
    return Database(tables=tuple(tables))


def _build_table(name: str, row_dicts: list[dict]) -> Table:
    columns: list[str] = []
    seen = set()
    for row in row_dicts:
        for attr in row:
            if attr.lower() not in seen:
                seen.add(attr.lower())
                columns.append(attr)

    grid = []
    kinds = {c.lower(): "null" for c in columns}
    for row in row_dicts:
        lowered = {k.lower(): v for k, v in row.items()}
        cells = []
        for col in columns:
            try:
                value = coerce_scalar(lowered.get(col.lower()))
            except TypeError as exc:
                raise ParseError(f"table {name!r}, column {col!r}: {exc}") from exc
            cells.append(value)
            low = col.lower()
            kind = value_kind(value)
            if kinds_conflict(kinds[low], kind):
                logger.warning(
                    "table %r column %r mixes %s and %s values; coercing to text",
                    name, col, kinds[low], kind,
                )
                kinds[low] = KIND_TEXT
            else:
                kinds[low] = promote_kind(kinds[low], kind)
        grid.append(cells)

    text_cols = {i for i, c in enumerate(columns) if kinds[c.lower()] == KIND_TEXT}
    rows = tuple(
        tuple(scalar_to_text(v) if i in text_cols else v for i, v in enumerate(cells))
        for cells in grid
    )
    return Table(name=name, columns=tuple(columns), rows=rows)


def serialize_instance(db: Database, fmt: str = "json") -> str:
    if fmt == "json":
        return _to_json(db)
    if fmt == "markdown":
        return _to_markdown(db)
    if fmt == "sql_inserts":
        return _to_sql_inserts(db)
    raise ValueError(f"unknown instance format {fmt!r}; expected one of {FORMATS}")


def _to_json(db: Database) -> str:
    doc = {}
    for table in db.tables:
        for i, row in enumerate(table.rows):
            doc[f"row_{i}_of_{table.name}"] = dict(zip(table.columns, row))
    return json.dumps(doc, indent=2, ensure_ascii=False)


def _render_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return format_number(value)


def _to_markdown(db: Database) -> str:
    blocks = []
    for table in db.tables:
        grid = [[_render_cell(v) for v in row] for row in table.rows]
        widths = []
        for i, col in enumerate(table.columns):
            # Value cells pad one extra space past their widest entry.
            value_width = max((len(r[i]) + 1 for r in grid), default=0)
            widths.append(max(len(col), value_width))
        header = "| " + " | ".join(c.ljust(w) for c, w in zip(table.columns, widths)) + " |"
        rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        lines = [f"### {table.name}", "", header, rule]
        for cells in grid:
            lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _sql_literal(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return format_number(value)


def _to_sql_inserts(db: Database) -> str:
    statements = []
    for table in db.tables:
        cols = ", ".join(
            f'"{c}" {_SQL_TYPE.get(k, "TEXT")}' for c, k in zip(table.columns, table.kinds)
        )
        statements.append(f'CREATE TABLE "{table.name}" ({cols});')
        for row in table.rows:
            values = ", ".join(_sql_literal(v) for v in row)
            statements.append(f'INSERT INTO "{table.name}" VALUES ({values});')
    return "\n".join(statements) + ("\n" if statements else "")


def schema_text(db: Database) -> str:
    """Human-readable schema description used in prompts."""
    parts = []
    if db.metadata:
        parts.append(db.metadata.rstrip())
    for table in db.tables:
        cols = ",\n".join(
            f"  `{c}` {_SQL_TYPE.get(k, 'TEXT')}" for c, k in zip(table.columns, table.kinds)
        )
        parts.append(f"CREATE TABLE `{table.name}` (\n{cols}\n);")
    return "\n".join(parts)
