import pytest
from hypothesis import given, settings, strategies as st

from powersched.schedule import MIN_INTERVAL, Schedule, ScheduleError, canonicalize, insert_mode


def test_validation():
    with pytest.raises(ScheduleError):
        Schedule((1, 2), (), 5.0)
    with pytest.raises(ScheduleError):
        Schedule((1, 2, 1), (2.0, 2.0), 5.0)
    with pytest.raises(ScheduleError):
        Schedule((1, 2), (5.0,), 5.0)
    with pytest.raises(ScheduleError):
        Schedule((0,), (), 5.0)
    with pytest.raises(ScheduleError):
        Schedule((1,), (), 0.0)


def test_mode_at_is_right_continuous():
    s = Schedule((1, 2, 1), (1.0, 2.0), 5.0)
    assert [s.mode_at(t) for t in (0.0, 0.999, 1.0, 1.5, 2.0, 5.0)] == [1, 1, 2, 2, 1, 1]


def test_insert_centered():
    s = insert_mode(Schedule.constant(1, 5.0), 2, 2.5, 0.1)
    assert s.sigma == (1, 2, 1)
    assert s.tau == pytest.approx((2.45, 2.55), abs=1e-12)


def test_insert_at_start():
    s = insert_mode(Schedule.constant(1, 5.0), 2, 0.0, 0.1)
    assert s.sigma == (2, 1)
    assert s.tau == pytest.approx((0.1,), abs=1e-12)


def test_insert_at_end():
    s = insert_mode(Schedule.constant(1, 5.0), 2, 5.0, 0.1)
    assert s.sigma == (1, 2)
    assert s.tau == pytest.approx((4.9,), abs=1e-12)


def test_insert_active_mode_is_noop():
    s = Schedule((1, 2, 1), (1.0, 2.0), 5.0)
    assert insert_mode(s, 2, 1.5, 0.2) == s
    assert insert_mode(s, 1, 3.0, 0.5) == s


def test_insert_errors():
    s = Schedule.constant(1, 5.0)
    with pytest.raises(ScheduleError):
        insert_mode(s, 2, 1.0, 5.0)
    with pytest.raises(ScheduleError):
        insert_mode(s, 2, 1.0, 0.0)
    with pytest.raises(ScheduleError):
        insert_mode(s, 2, 6.0, 0.1)


def test_canonicalize_merges_and_drops():
    raw = Schedule((1, 1, 2, 1), (1.0, 2.0, 2.0 + 1e-13), 5.0)
    assert canonicalize(raw) == Schedule.constant(1, 5.0)
    raw = Schedule((1, 1, 2, 2, 1), (1.0, 2.0, 3.0, 4.0), 5.0)
    assert canonicalize(raw) == Schedule((1, 2, 1), (2.0, 4.0), 5.0)


def test_tiny_gap_survives_canonicalization():
    s = Schedule((1, 2, 1), (1.0, 1.0 + 1e-8), 5.0)
    assert canonicalize(s) == s


def test_restrict_and_shift():
    s = Schedule((1, 2, 1), (1.0, 2.0), 5.0)
    assert s.restrict(0.5, 1.5) == Schedule((1, 2), (0.5,), 1.0)
    assert s.shift(1.5) == Schedule((2, 1), (0.5,), 5.0)
    assert Schedule((1, 2), (4.0,), 5.0).shift(0.5).sigma == (1, 2)
    tail = Schedule((1, 2), (4.0,), 5.0).shift(4.5)
    assert tail == Schedule((2,), (), 5.0)


def test_json_round_trip(tmp_path):
    s = Schedule((2, 1, 2), (0.1, 3.3), 5.0)
    s.dump(tmp_path / "s.json")
    assert Schedule.load(tmp_path / "s.json") == s


@st.composite
def raw_schedules(draw):
    n = draw(st.integers(0, 6))
    cuts = sorted(draw(st.sets(st.floats(0.01, 4.99, allow_nan=False), min_size=n, max_size=n)))
    modes = draw(st.lists(st.integers(1, 3), min_size=len(cuts) + 1, max_size=len(cuts) + 1))
    return Schedule(tuple(modes), tuple(cuts), 5.0)


@settings(max_examples=200, deadline=None)
@given(raw_schedules())
def test_canonicalize_idempotent(s):
    c = canonicalize(s)
    assert canonicalize(c) == c
    assert c.is_canonical()
    for t in (0.0, 0.7, 2.5, 4.999):
        assert c.mode_at(t) == s.mode_at(t)


@settings(max_examples=200, deadline=None)
@given(raw_schedules(), st.integers(1, 3), st.floats(0.0, 5.0), st.floats(1e-6, 2.0))
def test_insertion_is_valid_and_bounded(s, sigma, tau, lam):
    c = canonicalize(s)
    out = insert_mode(c, sigma, tau, lam)
    assert out.is_canonical()
    assert out.M <= c.M + 2
    assert all(b - a >= MIN_INTERVAL for a, b in zip(out.edges, out.edges[1:]))


def differing_time(a, b):
    edges = sorted(set(a.edges) | set(b.edges))
    return sum(v - u for u, v in zip(edges, edges[1:]) if a.mode_at(0.5 * (u + v)) != b.mode_at(0.5 * (u + v)))


@settings(max_examples=100, deadline=None)
@given(raw_schedules(), st.floats(0.0, 5.0), st.integers(1, 3))
def test_vanishing_insertion_converges(s, tau, sigma):
    c = canonicalize(s)
    for lam in (1e-2, 1e-4, 1e-6):
        out = insert_mode(c, sigma, tau, lam)
        # the schedules agree outside a set of measure at most lam
        assert differing_time(out, c) <= lam * (1 + 1e-9)
