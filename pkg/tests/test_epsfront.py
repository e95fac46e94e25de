import pytest

from bowsp import gen
from bowsp.core import WSPError
from bowsp.epsfront import (
    BoundedMinimizeQuery,
    OracleBackend,
    PatternBackend,
    eps_front,
    oracle_front,
)
from conftest import corpus

SMALL = corpus(30, start=100)


def test_query_validation():
    with pytest.raises(ValueError):
        BoundedMinimizeQuery(2, 0, 1, 0, 1)
    assert BoundedMinimizeQuery(0, 3, 2, 0, 1).empty


@pytest.mark.parametrize("Backend", [OracleBackend, PatternBackend])
def test_empty_box_returns_none(Backend, fixture_schema):
    assert Backend().solve(fixture_schema, BoundedMinimizeQuery(0, 5, 4, 0, 10)) is None


@pytest.mark.parametrize("i", range(len(SMALL)))
def test_backends_agree_on_queries(i):
    s = SMALL[i]
    o, p = OracleBackend(), PatternBackend()
    # the pattern backend keeps one (cheapest) plan per pattern, so it is exact
    # whenever the omega_A lower bound is 0
    for q in [BoundedMinimizeQuery(0, 0, s.BA, 0, s.BC), BoundedMinimizeQuery(1, 0, s.BA, 0, s.BC),
              BoundedMinimizeQuery(0, 0, 60, 0, 40), BoundedMinimizeQuery(1, 0, 80, 1, 1000),
              BoundedMinimizeQuery(0, 0, 1000, 3, 1000)]:
        ro, rp = o.solve(s, q), p.solve(s, q)
        assert (ro is None) == (rp is None)
        if ro is not None:
            # same optimal objective value
            assert (ro[1] if q.alpha else ro[2]) == (rp[1] if q.alpha else rp[2])
            assert q.admits(rp[1], rp[2])


@pytest.mark.parametrize("i", range(len(SMALL)))
def test_front_and_query_count(i):
    s = SMALL[i]
    want = oracle_front(s).weight_set()
    for backend in (OracleBackend(), PatternBackend()):
        trace = []
        f = eps_front(s, backend, trace)
        assert f.weight_set() == want
        # two queries per point, plus one failed probe unless the loop ran dry
        assert len(trace) in (2 * len(f), 2 * len(f) + 1)


def test_worst_case_eps():
    s = gen.worst_case_family(4)
    trace = []
    f = eps_front(s, PatternBackend(), trace)
    assert len(f) == 15


def test_empty_front(fixture_schema):
    s = fixture_schema.without_users([5])  # nobody else can do s2
    s = s.with_bounds(BA=100, BC=100)
    trace = []
    assert len(eps_front(s, PatternBackend(), trace)) == 0
    assert len(trace) == 1 and trace[0].result is None


def test_oracle_budget(monkeypatch, fixture_schema):
    monkeypatch.setenv("BOWSP_ORACLE_BUDGET", "1000")
    with pytest.raises(WSPError) as e:
        oracle_front(fixture_schema)
    assert e.value.code == "oracle-too-large"


def test_first_plan_wins_ties(fixture_schema):
    f = oracle_front(fixture_schema)
    # lexicographically first valid plan
    assert f.points[0].plan.assignment == (0, 5, 0, 0, 5, 7)
