"""In-memory relational model: tables, databases and provenance tokens.

A :class:`Database` is immutable after construction; every row is addressed
by a :class:`ProvenanceToken` (table name + row ordinal) that stays unique
within the database. Table and column identifiers are case-insensitive,
cell text is case-sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ParseError, TokenNotFound
from .values import KIND_NULL, Scalar, promote_kind, value_kind


class ProvenanceToken(NamedTuple):
    """Unique label of one base-table row."""

    table: str
    row: int


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Scalar, ...], ...]
    kinds: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.kinds:
            object.__setattr__(self, "kinds", infer_kinds(self.columns, self.rows))
        if len(self.kinds) != len(self.columns):
            raise ParseError(f"table {self.name!r}: kinds do not align with columns")
        seen = set()
        for col in self.columns:
            low = col.lower()
            if low in seen:
                raise ParseError(f"table {self.name!r}: duplicate column {col!r}")
            seen.add(low)
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ParseError(
                    f"table {self.name!r}: row {i} has {len(row)} values, "
                    f"expected {len(self.columns)}"
                )

    def column_index(self, name: str) -> int | None:
        low = name.lower()
        for i, col in enumerate(self.columns):
            if col.lower() == low:
                return i
        return None

    def tokens(self) -> list[ProvenanceToken]:
        return [ProvenanceToken(self.name, i) for i in range(len(self.rows))]

    def project(self, columns: Sequence[str]) -> "Table":
        """Keep the named columns (case-insensitive), in table order."""
        wanted = {c.lower() for c in columns}
        idx = [i for i, c in enumerate(self.columns) if c.lower() in wanted]
        return Table(
            name=self.name,
            columns=tuple(self.columns[i] for i in idx),
            rows=tuple(tuple(row[i] for i in idx) for row in self.rows),
            kinds=tuple(self.kinds[i] for i in idx),
        )


def infer_kinds(columns: Sequence[str], rows: Iterable[Sequence[Scalar]]) -> tuple[str, ...]:
    kinds = [KIND_NULL] * len(columns)
    for row in rows:
        for i, value in enumerate(row):
            kinds[i] = promote_kind(kinds[i], value_kind(value))
    return tuple(kinds)


@dataclass(frozen=True)
class Database:
    tables: tuple[Table, ...] = ()
    metadata: str | None = None
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_name = {}
        for table in self.tables:
            low = table.name.lower()
            if low in by_name:
                raise ParseError(f"duplicate table name {table.name!r}")
            by_name[low] = table
        object.__setattr__(self, "_by_name", by_name)

    def table(self, name: str) -> Table | None:
        return self._by_name.get(name.lower())

    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    def tokens(self) -> frozenset[ProvenanceToken]:
        return frozenset(tok for t in self.tables for tok in t.tokens())

    def total_rows(self) -> int:
        return sum(len(t.rows) for t in self.tables)

    def subset(
        self,
        tokens: Iterable[ProvenanceToken],
        keep_columns: Mapping[str, Sequence[str]] | None = None,
    ) -> "Database":
        """Sub-instance holding exactly the rows named by ``tokens``.

        ``keep_columns`` maps table name (case-insensitive) to a column
        whitelist; tables absent from the mapping, or the whole mapping
        being None, keep every column. Tables with no selected rows are
        omitted.
        """
        wanted: dict[str, set[int]] = {}
        for token in tokens:
            table = self.table(token.table)
            if table is None or not 0 <= token.row < len(table.rows):
                raise TokenNotFound(f"no row {token.row} in table {token.table!r}")
            wanted.setdefault(table.name.lower(), set()).add(token.row)

        whitelists = {k.lower(): v for k, v in keep_columns.items()} if keep_columns else {}
        out = []
        for table in self.tables:
            ordinals = wanted.get(table.name.lower())
            if not ordinals:
                continue
            sub = Table(
                name=table.name,
                columns=table.columns,
                rows=tuple(table.rows[i] for i in sorted(ordinals)),
                kinds=table.kinds,
            )
            whitelist = whitelists.get(table.name.lower())
            if whitelist is not None:
                sub = sub.project(whitelist)
            out.append(sub)
        return Database(tables=tuple(out), metadata=self.metadata)


def subset_by_tokens(
    db: Database,
    tokens: Iterable[ProvenanceToken],
    keep_columns: Mapping[str, Sequence[str]] | None = None,
) -> Database:
    return db.subset(tokens, keep_columns)
