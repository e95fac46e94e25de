import pytest

from bowsp import gen
from bowsp.core import Pattern, Schema, LinearUser, at_most, separation_of_duty
from bowsp.epsfront import oracle_front
from bowsp.pbb import (
    AT_MOST_RHO,
    PatternBranchAndBound,
    branch_step_score,
    constraint_lower_bound,
    enumerate_patterns,
    pbb_front,
    reachable_counts,
    enumeration_front,
)
from conftest import corpus
from helpers import bound_violations

BELL = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203, 7: 877}


@pytest.mark.parametrize("k", sorted(BELL))
def test_pattern_count_is_bell(k):
    pats = list(enumerate_patterns(k))
    assert len(pats) == BELL[k]
    assert len(set(pats)) == BELL[k]
    full = (1 << k) - 1
    assert all(p.assigned == full for p in pats)


def test_bell_10():
    assert sum(1 for _ in enumerate_patterns(10)) == 115975


def test_reachable_counts():
    assert list(reachable_counts(0, 3, 5)) == [1, 2, 3]
    assert list(reachable_counts(2, 3, 5)) == [2, 3, 4, 5]
    assert list(reachable_counts(2, 0, 5)) == [2]


def test_constraint_lower_bound_partial():
    c = at_most(range(5), 3, {4: 4, 5: 11})
    # four singleton blocks on the scope, one step left: count ends at 4 or 5
    P = Pattern.from_blocks([1, 2, 4, 8])
    assert constraint_lower_bound(c, P) == 4
    # two blocks, three steps left: count 2..5, minimum 0
    P = Pattern.from_blocks([0b11, 0b100])
    assert constraint_lower_bound(c, P) == 0


def test_heuristic_table_lookup():
    assert AT_MOST_RHO[(1, 1)] == 0 or AT_MOST_RHO  # table present
    s = gen.purchase_order_fixture()
    scores = [branch_step_score(s, Pattern(()), i) for i in range(s.k)]
    assert all(isinstance(x, int) for x in scores)


def test_fixture_front(fixture_schema):
    f = pbb_front(fixture_schema)
    assert f.weights() == [(0, 0)]
    from bowsp.core import plan_weights
    assert plan_weights(fixture_schema, f.points[0].plan) == (0, 0)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_worst_case_family(k):
    s = gen.worst_case_family(k)
    total = sum(2**i for i in range(1, k * (k - 1) // 2 + 1))
    f = pbb_front(s)
    assert len(f) == BELL[k]
    assert all(c + a == total for c, a in f.weights())
    assert enumeration_front(s).weight_set() == f.weight_set()


SMALL = corpus(40)


@pytest.mark.parametrize("i", range(len(SMALL)))
def test_matches_oracle(i):
    s = SMALL[i]
    want = oracle_front(s).weight_set()
    assert pbb_front(s).weight_set() == want
    assert pbb_front(s, prune=False).weight_set() == want
    assert enumeration_front(s).weight_set() == want
    for order in ("index", "random"):
        assert pbb_front(s, order=order, seed=i).weight_set() == want


@pytest.mark.parametrize("i", range(0, 40, 3))
def test_lower_bounds_sound(i):
    bad, visited = bound_violations(SMALL[i])
    assert visited > 0
    assert not bad


def test_parallel_same_csv():
    s = gen.generate(gen.GenParams(k=8, d=0.8, e=0.3, seed=5, staff=30, consultants=3, counting=2))
    ref = pbb_front(s).to_csv(s)
    for w in (2, 3, 8):
        assert pbb_front(s, workers=w).to_csv(s) == ref


def test_pruning_reduces_nodes():
    s = gen.generate(gen.GenParams(k=7, d=0.7, e=0.3, seed=2, staff=20, consultants=3, counting=2))
    on = PatternBranchAndBound(s)
    off = PatternBranchAndBound(s, prune=False)
    assert on.solve().weight_set() == off.solve().weight_set()
    assert on.stats.nodes < off.stats.nodes
    assert sum(on.stats.prunes.values()) > 0


def test_more_blocks_than_users_leaf_skipped():
    # two users, SoD on all three pairs: no plan with three distinct users exists
    s = Schema(k=3, users=(LinearUser((0, 0, 0)), LinearUser((0, 0, 0))),
               constraints=tuple(separation_of_duty(a, b, 5) for a, b in [(0, 1), (0, 2), (1, 2)]),
               BA=100, BC=100)
    assert pbb_front(s).weight_set() == oracle_front(s).weight_set() == {(5, 0)}


def test_unknown_order():
    with pytest.raises(ValueError):
        PatternBranchAndBound(gen.purchase_order_fixture(), order="bogus")


@pytest.mark.parametrize("k", [3, 4])
def test_lower_bounds_sound_non_monotone(k):
    # explicit tables: a block may get cheaper as it grows
    bad, _ = bound_violations(gen.worst_case_family(k))
    assert not bad


def test_node_lower_bounds_standalone():
    from bowsp.pbb import node_lower_bounds
    s = gen.worst_case_family(3)
    # {s1} alone is expensive for every user, but {s1,s2,s3} costs 0 for u_S
    assert node_lower_bounds(s, Pattern.from_blocks([0b001]))[0] == 0
