from hypothesis import given, settings, strategies as st

from bowsp.core import Plan
from bowsp.pareto import ParetoFront, dominates, front_from_points

P = Plan((0,))


def brute_front(points, BA=None, BC=None):
    pts = [p for p in points if (BA is None or p[1] <= BA) and (BC is None or p[0] <= BC)]
    out = []
    for p in pts:
        if any(dominates(q, p) for q in pts):
            continue
        if p not in out:
            out.append(p)
    return set(out)


def test_dominance_is_strict_sum():
    assert dominates((1, 2), (1, 3))
    assert not dominates((1, 2), (1, 2))
    assert not dominates((1, 3), (2, 2))


def test_weight_equal_rejected_first_kept():
    f = ParetoFront()
    assert f.offer(1, 1, Plan((0,)))
    assert not f.offer(1, 1, Plan((1,)))
    assert f.points[0].plan.assignment == (0,)


def test_dominated_points_removed():
    f = ParetoFront()
    f.offer(5, 5, P)
    f.offer(3, 7, P)
    f.offer(2, 2, P)
    assert f.weights() == [(2, 2)]


def test_bounds():
    f = ParetoFront(BA=3, BC=3)
    assert not f.offer(4, 0, P)
    assert not f.offer(0, 4, P)
    assert f.offer(3, 3, P)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12)), max_size=40),
       st.one_of(st.none(), st.integers(0, 12)), st.one_of(st.none(), st.integers(0, 12)))
def test_front_equals_brute_force(points, BA, BC):
    f = front_from_points([(c, a, P) for c, a in points], BA, BC)
    assert f.weight_set() == brute_front(points, BA, BC)
    ws = f.weights()
    # sorted by omega_C ascending and omega_A strictly descending
    assert all(x[0] < y[0] and x[1] > y[1] for x, y in zip(ws, ws[1:]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=25),
       st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=25))
def test_merge_equals_union(a, b):
    fa = front_from_points([(c, w, P) for c, w in a])
    fb = front_from_points([(c, w, P) for c, w in b])
    fa.merge(fb)
    assert fa.weight_set() == brute_front(a + b)


def test_csv():
    f = ParetoFront()
    f.offer(0, 2, Plan((0, 1)))
    assert f.to_csv() == "omega_C,omega_A,plan\n0,2,s1:u1 s2:u2\n"
