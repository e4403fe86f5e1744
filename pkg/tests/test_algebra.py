import random

import pytest
from hypothesis import given, strategies as st

from ledgermine.algebra import (
    Atom,
    Seq,
    depth,
    format_pattern,
    hours_to_seconds,
    parse_pattern,
    seconds_to_hours_text,
    validate_pattern,
)
from ledgermine.errors import PatternSyntaxError, UnknownEventType, WindowError

from gen import random_pattern

H = 3600


def test_bike_then_work_example():
    p = parse_pattern("exercise.bike W[2,4] work")
    assert p == Seq(Atom("exercise.bike"), Atom("work"), (7200, 14400))
    assert format_pattern(p) == "exercise.bike W[2,4] work"


def test_zero_width_window():
    assert parse_pattern("a W[0,0] b").window == (0, 0)


@pytest.mark.parametrize("text", ["a W[4,2] b", "a W[-1,2] b"])
def test_bad_windows(text):
    with pytest.raises(WindowError):
        parse_pattern(text)


def test_left_associative():
    flat = parse_pattern("a W[1,2] b W[3,4] c")
    assert flat == Seq(Seq(Atom("a"), Atom("b"), (H, 2 * H)), Atom("c"), (3 * H, 4 * H))
    assert flat == parse_pattern("(a W[1,2] b) W[3,4] c")
    assert format_pattern(flat) == "a W[1,2] b W[3,4] c"


def test_right_nesting_keeps_parens():
    p = parse_pattern("a W[1,2] (b W[3,4] c)")
    assert p.right == Seq(Atom("b"), Atom("c"), (3 * H, 4 * H))
    assert format_pattern(p) == "a W[1,2] (b W[3,4] c)"


def test_format_atom():
    assert format_pattern(Atom("sleep")) == "sleep"


def test_fractional_hours():
    p = parse_pattern("a w [0.25, 1.5] b")
    assert p.window == (900, 5400)
    assert format_pattern(p) == "a W[0.25,1.5] b"


@pytest.mark.parametrize(
    "text, offset",
    [
        ("a W[1,2]", 8),
        ("a W[1 2] b", 6),
        ("a W[1.234,2] b", 4),
        ("(a W[1,2] b", 11),
        ("a b", 2),
        ("", 0),
    ],
)
def test_syntax_error_offsets(text, offset):
    with pytest.raises(PatternSyntaxError) as ei:
        parse_pattern(text)
    assert ei.value.offset == offset


def test_offset_counts_bytes():
    with pytest.raises(PatternSyntaxError) as ei:
        parse_pattern("a W[1,2] é")
    assert ei.value.offset == len("a W[1,2] ".encode())


def test_validate(taxonomy):
    validate_pattern(Atom("exercise.bike"), taxonomy)
    with pytest.raises(UnknownEventType) as ei:
        validate_pattern(Atom("jetpack"), taxonomy)
    assert ei.value.paths == ["jetpack"]
    with pytest.raises(UnknownEventType) as ei:
        validate_pattern(parse_pattern("work W[0,1] jetpack"), taxonomy)
    assert ei.value.paths == ["jetpack"]


@given(st.integers(0, 10**6))
def test_hours_seconds_exact(units):
    # every two-decimal hour count converts and back without rounding
    text = f"{units // 100}.{units % 100:02d}"
    s = hours_to_seconds(text)
    assert s == units * 36
    assert hours_to_seconds(seconds_to_hours_text(s)) == s


@given(st.integers(0, 2**32))
def test_roundtrip_property(seed):
    p = random_pattern(random.Random(seed), depth=4)
    assert parse_pattern(format_pattern(p)) == p
    assert depth(p) <= 4


def test_parse_is_pure():
    text = "x W[0.5,1] (y W[0,0.01] z)"
    assert parse_pattern(text) == parse_pattern(text)
