import itertools
import random

import pytest

from bowsp.core import WSPError
from bowsp.matching import assign_from_candidates, min_weight_block_assignment


def brute(cost):
    p, n = len(cost), len(cost[0])
    best = None
    for perm in itertools.permutations(range(n), p):
        total = sum(cost[i][u] for i, u in enumerate(perm))
        if best is None or (total, perm) < best:
            best = (total, perm)
    return best


def test_matches_brute_force_on_random_matrices():
    rng = random.Random(20240)
    for _ in range(1000):
        p = rng.randint(1, 6)
        n = rng.randint(p, 10)
        hi = rng.choice([3, 20, 1000])
        cost = [[rng.randint(0, hi) for _ in range(n)] for _ in range(p)]
        assign, total = min_weight_block_assignment(cost)
        want_total, want = brute(cost)
        assert total == want_total
        assert len(set(assign)) == p
        assert sum(cost[i][u] for i, u in enumerate(assign)) == total
        # ties break towards the lexicographically smallest assignment
        assert tuple(assign) == want


def test_square_example():
    cost = [[4, 1, 3], [2, 0, 5], [3, 2, 2]]
    assign, total = min_weight_block_assignment(cost)
    assert total == 5
    assert assign == [1, 0, 2]


def test_more_blocks_than_users():
    with pytest.raises(WSPError) as e:
        min_weight_block_assignment([[1], [2]])
    assert e.value.code == "more-blocks-than-users"


def test_candidate_fast_path_and_conflicts():
    # candidates are (cost, user); distinct cheapest users
    assign, total = assign_from_candidates([[(0, 2), (3, 1)], [(1, 0)]], 4)
    assert assign == [2, 0] and total == 1
    # both blocks want user 0; the second block moves to user 2 (cost 1 + 2)
    assign, total = assign_from_candidates([[(1, 0), (5, 1)], [(1, 0), (2, 2)]], 3)
    assert total == 3 and assign == [0, 2]
