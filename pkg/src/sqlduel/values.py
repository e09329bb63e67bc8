"""Cell values and kind-aware comparison rules.

Cells are plain Python scalars: ``None``, ``int``, ``float`` or ``str``.
Numbers of either kind compare by numeric value (1 equals 1.0), text never
equals a number, and ``None`` equals only ``None`` (for deduplication; it
never satisfies a comparison predicate). Reals are quantized to nine
decimal places inside comparison keys so that equality stays transitive
and values stay hashable.
"""

from __future__ import annotations

from typing import Union

Scalar = Union[None, int, float, str]

KIND_NULL = "null"
KIND_INTEGER = "integer"
KIND_REAL = "real"
KIND_TEXT = "text"

_REAL_QUANTUM_DIGITS = 9

# Promotion lattice for inferred column kinds.
_KIND_ORDER = {KIND_NULL: 0, KIND_INTEGER: 1, KIND_REAL: 2, KIND_TEXT: 3}


def coerce_scalar(value) -> Scalar:
    """Normalize a raw (e.g. json-decoded) value into a cell scalar.

    Booleans become 0/1 since the value model has no boolean kind.
    """
    if isinstance(value, bool):
        return int(value)
    if value is None or isinstance(value, (int, float, str)):
        return value
    raise TypeError(f"unsupported cell value of type {type(value).__name__}: {value!r}")


def value_kind(value: Scalar) -> str:
    if value is None:
        return KIND_NULL
    if isinstance(value, bool):
        return KIND_INTEGER
    if isinstance(value, int):
        return KIND_INTEGER
    if isinstance(value, float):
        return KIND_REAL
    if isinstance(value, str):
        return KIND_TEXT
    raise TypeError(f"unsupported cell value of type {type(value).__name__}")


def value_key(value: Scalar) -> Scalar:
    """Canonical form used for equality, hashing and deduplication.

    Relies on Python's cross-type numeric equality (1 == 1.0) and quantizes
    floats; strings and None are their own keys.
    """
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        quantized = round(value, _REAL_QUANTUM_DIGITS)
        return int(quantized) if quantized.is_integer() else quantized
    return value


def values_equal(a: Scalar, b: Scalar) -> bool:
    """Kind-aware equality: numeric across int/real, None only to None."""
    return value_key(a) == value_key(b)


def row_key(row) -> tuple:
    return tuple(value_key(v) for v in row)


def promote_kind(a: str, b: str) -> str:
    """Join of two column kinds in the null < integer < real < text lattice."""
    return a if _KIND_ORDER[a] >= _KIND_ORDER[b] else b


def kinds_conflict(a: str, b: str) -> bool:
    """True when one side is text and the other numeric (forces coercion)."""
    numeric = {KIND_INTEGER, KIND_REAL}
    return (a == KIND_TEXT and b in numeric) or (b == KIND_TEXT and a in numeric)


def format_number(value) -> str:
    """Shortest round-trip decimal for reals, plain digits for integers."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def scalar_to_text(value: Scalar) -> Scalar:
    """Coercion applied when a column's kinds conflict and it becomes text."""
    if value is None or isinstance(value, str):
        return value
    return format_number(value)


def is_number(value: Scalar) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def compare_values(op: str, a: Scalar, b: Scalar) -> bool:
    """SQL predicate semantics for a binary comparison.

    Any comparison involving None is false. Numbers compare numerically
    across kinds; text compares byte-wise and case-sensitively. A number
    never satisfies any comparison against text.
    """
    if a is None or b is None:
        return False
    a_num, b_num = is_number(a), is_number(b)
    if a_num != b_num:
        return False
    if op == "=":
        return values_equal(a, b)
    if op in ("<>", "!="):
        return not values_equal(a, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a < b or values_equal(a, b)
    if op == ">":
        return a > b
    if op == ">=":
        return a > b or values_equal(a, b)
    raise ValueError(f"unknown comparison operator {op!r}")
