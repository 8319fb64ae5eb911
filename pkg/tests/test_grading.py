from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gradednet.grading import (
    INTEGER, PAIR, PARITY, RATIONAL, Grade, GradeError, GradingSignature, SignatureError,
    VariantMismatch, as_grade, grade_add, grade_from_json, grade_to_json, parse_grade, render_grade,
    validate_signature,
)

GRADE_STRATEGIES = {
    INTEGER: st.integers(0, 10 ** 6).map(Grade.integer),
    RATIONAL: st.builds(Grade.rational, st.integers(-1000, 1000), st.integers(1, 1000)),
    PAIR: st.builds(Grade.pair, st.integers(0, 1000), st.integers(0, 1000)),
    PARITY: st.integers(0, 1).map(Grade.parity),
}


def test_grade_add_examples():
    assert grade_add(Grade.integer(2), Grade.integer(3)) == Grade.integer(5)
    assert grade_add(Grade.pair(1, 2), Grade.pair(0, 1)) == Grade.pair(1, 3)
    assert grade_add(Grade.parity(1), Grade.parity(1)) == Grade.parity(0)


def test_rational_reduction():
    half = Grade.rational(1, 2)
    assert grade_add(half, half) == Grade.rational(1, 1)
    assert Grade.rational(2, 4).value == Fraction(1, 2)
    assert Grade.rational(1, -2).value.denominator == 2


def test_mixed_variants_rejected():
    with pytest.raises(VariantMismatch):
        grade_add(Grade.integer(1), Grade.rational(1))
    with pytest.raises(VariantMismatch):
        Grade.integer(1) < Grade.pair(0, 1)
    assert Grade.integer(1) != Grade.rational(1)
    assert Grade.integer(0) != Grade.parity(0)


@pytest.mark.parametrize("bad", [(INTEGER, -1), (INTEGER, 1.5), (INTEGER, True), (PAIR, (1,)),
                                 (PAIR, (-1, 0)), (PARITY, 2), (RATIONAL, 0.5), ("octonion", 1)])
def test_malformed_grades(bad):
    with pytest.raises(GradeError):
        Grade(*bad)


def test_pair_order_is_lexicographic():
    assert Grade.pair(0, 5) < Grade.pair(1, 0) < Grade.pair(1, 2)


@pytest.mark.parametrize("kind", sorted(GRADE_STRATEGIES))
def test_monoid_laws(kind):
    g = GRADE_STRATEGIES[kind]

    @settings(max_examples=1000)
    @given(g, g, g)
    def check(a, b, c):
        assert grade_add(grade_add(a, b), c) == grade_add(a, grade_add(b, c))
        assert grade_add(a, b) == grade_add(b, a)
        assert grade_add(a, Grade.zero(kind)) == a

    check()


@pytest.mark.parametrize("kind", sorted(GRADE_STRATEGIES))
def test_render_parse_round_trip(kind):
    @given(GRADE_STRATEGIES[kind])
    def check(g):
        assert parse_grade(render_grade(g), kind) == g
        assert grade_from_json(grade_to_json(g)) == g

    check()


def test_render_forms():
    assert [render_grade(g) for g in (Grade.integer(2), Grade.rational(1, 2), Grade.pair(1, 2),
                                      Grade.parity(0), Grade.parity(1))] == ["2", "1/2", "(1,2)", "even", "odd"]
    assert as_grade("3") == Grade.integer(3)
    assert parse_grade("3", RATIONAL) == Grade.rational(3)


def test_validate_signature_examples():
    assert validate_signature([(2, 1), (4, 1), (6, 1), (10, 1)]).ok
    assert validate_signature([(2, 3), (2, 4)]).violation == "duplicate-grade"
    assert validate_signature([(2, 0)]).violation == "zero-dimension"
    assert validate_signature([]).violation == "empty"
    assert validate_signature([(2, 1), (Fraction(1, 2), 1)]).violation == "mixed-variant"
    assert validate_signature([(2, 1.0)]).violation == "bad-dimension"
    assert validate_signature([(-1, 1)]).violation == "bad-grade"


def test_signature_is_sorted_and_sized():
    sig = GradingSignature([(10, 1), (2, 3), (4, 2)])
    assert [g.value for g in sig.grades] == [2, 4, 10]
    assert sig.total_dim == 6
    assert sig.offsets() == {Grade.integer(2): 0, Grade.integer(4): 3, Grade.integer(10): 5}
    assert sig.dim(4) == 2 and 10 in sig and 3 not in sig
    with pytest.raises(SignatureError):
        GradingSignature([(2, 1), (2, 1)])


@pytest.mark.parametrize("sig", [
    GradingSignature.of(2, 4, 6, 10),
    GradingSignature([(Grade.rational(1, 2), 2), (Grade.rational(3), 1)]),
    GradingSignature([(Grade.pair(1, 0), 2), (Grade.pair(0, 1), 3)]),
    GradingSignature.parity(3, 4),
])
def test_signature_json_round_trip(sig):
    obj = sig.to_json()
    assert obj["variant"] == sig.variant
    assert GradingSignature.from_json(obj) == sig


def test_rational_json_is_pair():
    sig = GradingSignature([(Grade.rational(1, 2), 1)])
    assert sig.to_json()["grades"] == [[[1, 2], 1]]
