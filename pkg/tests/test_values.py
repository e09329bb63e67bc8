from hypothesis import given
from hypothesis import strategies as st

from sqlduel.values import (
    compare_values,
    format_number,
    kinds_conflict,
    promote_kind,
    scalar_to_text,
    value_kind,
    value_key,
    values_equal,
)

scalars = st.one_of(
    st.none(),
    st.integers(min_value=-10**6, max_value=10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(max_size=8),
)


def test_kind_classification():
    assert value_kind(None) == "null"
    assert value_kind(3) == "integer"
    assert value_kind(3.5) == "real"
    assert value_kind("3") == "text"


def test_numeric_equality_across_kinds():
    assert values_equal(1, 1.0)
    assert values_equal(76944, 76944.0)
    assert not values_equal(1, "1")
    assert not values_equal(0, None)
    assert values_equal(None, None)


def test_tolerance_quantization():
    assert values_equal(1.0, 1.0 + 4e-10)
    assert not values_equal(1.0, 1.0 + 1e-6)


def test_text_case_sensitive():
    assert not values_equal("East Bohemia", "east Bohemia")
    assert values_equal("east Bohemia", "east Bohemia")


@given(scalars)
def test_equality_reflexive(v):
    assert values_equal(v, v)


@given(scalars, scalars, scalars)
def test_equality_transitive(a, b, c):
    if values_equal(a, b) and values_equal(b, c):
        assert values_equal(a, c)


@given(scalars)
def test_key_idempotent(v):
    assert value_key(value_key(v)) == value_key(v)


def test_comparisons_with_null_are_false():
    for op in ("=", "<>", "<", "<=", ">", ">="):
        assert compare_values(op, None, 1) is False
        assert compare_values(op, 1, None) is False
        assert compare_values(op, None, None) is False


def test_comparisons_across_kinds_are_false():
    for op in ("=", "<", ">"):
        assert compare_values(op, 1, "1") is False
        assert compare_values(op, "a", 0) is False


def test_numeric_ordering():
    assert compare_values("<", 1, 1.5)
    assert compare_values(">=", 2.0, 2)
    assert compare_values("<>", 1, 2)
    assert not compare_values("<>", 2.0, 2)


def test_kind_promotion():
    assert promote_kind("null", "integer") == "integer"
    assert promote_kind("integer", "real") == "real"
    assert promote_kind("real", "text") == "text"
    assert kinds_conflict("integer", "text")
    assert not kinds_conflict("integer", "real")


def test_number_formatting_round_trip():
    assert format_number(3) == "3"
    assert format_number(0.1) == "0.1"
    assert float(format_number(1 / 3)) == 1 / 3
    assert scalar_to_text(1) == "1"
    assert scalar_to_text(None) is None
