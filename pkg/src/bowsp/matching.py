"""Minimum-weight injective assignment of pattern blocks to users.

Rectangular Hungarian method (rows = blocks, columns = users, rows <= columns).
Among optimal assignments the lexicographically smallest user vector is
returned; ties are broken exactly by folding a base-``n`` rank of the
assignment vector into the low digits of each cost.
"""
from __future__ import annotations

from typing import Sequence

from .core import WSPError

_INF = float("inf")


def _hungarian(cost: list[list[int]]) -> list[int]:
    """Row -> column assignment minimizing total cost; requires rows <= cols."""
    p = len(cost)
    m = len(cost[0])
    u = [0] * (p + 1)
    v = [0] * (m + 1)
    match = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, p + 1):
        match[0] = i
        j0 = 0
        minv = [_INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = _INF
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    out = [0] * p
    for j in range(1, m + 1):
        if match[j]:
            out[match[j] - 1] = j - 1
    return out


def assign_from_candidates(cands: Sequence[Sequence[tuple[int, int]]], n: int) -> tuple[list[int], int]:
    """Solve the assignment given, per block, its cheapest users.

    ``cands[q]`` lists ``(weight, user)`` pairs sorted ascending and must
    contain at least the ``len(cands)`` cheapest users of block ``q`` (or
    all users).  A block never needs a user outside its own ``p`` cheapest:
    one of those is always free for it and no worse.
    """
    p = len(cands)
    if p == 0:
        return [], 0
    if p > n:
        raise WSPError("more-blocks-than-users", f"{p} blocks, {n} users")
    firsts = [c[0][1] for c in cands]
    if len(set(firsts)) == p:
        return firsts, sum(c[0][0] for c in cands)

    cols: list[int] = sorted({u for c in cands for _, u in c[:p]})
    col_index = {u: j for j, u in enumerate(cols)}
    scale = n**p
    big = None
    enc = []
    for q, c in enumerate(cands):
        place = n ** (p - 1 - q)
        row = [None] * len(cols)
        for w, u in c[:p]:
            row[col_index[u]] = w * scale + u * place
        enc.append(row)
    # Columns outside a row's candidate list are never better than some free
    # candidate; give them a cost above every real entry.
    for row in enc:
        for j, val in enumerate(row):
            if val is None:
                if big is None:
                    big = (max(x for r in enc for x in r if x is not None) + 1) * (p + 1)
                row[j] = big
    picked = _hungarian(enc)
    assignment = [cols[j] for j in picked]
    weights = [dict((u, w) for w, u in c[:p]) for c in cands]
    total = sum(weights[q][u] for q, u in enumerate(assignment))
    return assignment, total


def min_weight_block_assignment(cost: Sequence[Sequence[int]]) -> tuple[list[int], int]:
    """Injective block -> user assignment of minimum total cost.

    ``cost[q][u]`` is the weight of giving block ``q`` to user ``u``.
    Returns ``(assignment, total)`` with ``assignment[q]`` the user of block q.
    """
    p = len(cost)
    if p == 0:
        return [], 0
    n = len(cost[0])
    if p > n:
        raise WSPError("more-blocks-than-users", f"{p} blocks, {n} users")
    cands = [sorted((w, u) for u, w in enumerate(row))[:p] for row in cost]
    return assign_from_candidates(cands, n)
