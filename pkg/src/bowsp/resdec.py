"""Static, decremental and dynamic t-resiliency at desk scale.

Resiliency is decided through userset families: ``F = (U_1, ..., U_k)``
where ``U_i`` is the set of users available at position ``i`` of the
execution order.  A family is survivable if some linear extension and
some valid plan put every position's step on an available user.

A user is authorized for a step when doing that step alone costs nothing,
and a plan is valid when every step is authorized and the constraint
weight is zero.  For staff and per-step users this is the same as
``omega_A = omega_C = 0``.

Shrinking any ``U_i`` can only hurt, so only families that remove exactly
``min(t, n)`` users per position are checked for the static and dynamic
flavors.  Decremental families are enumerated as nested removal chains.
Note that the constant family is itself decremental and is no easier than
any chain that ends in the same removal set, so static and decremental
answers always agree under this family formulation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Pattern, Schema, WSPError, popcount
from .pbb import constraint_lower_bound

STATIC, DECREMENTAL, DYNAMIC = "static", "decremental", "dynamic"
FLAVORS = (STATIC, DECREMENTAL, DYNAMIC)
DEFAULT_BUDGET = 10**7
_PLAN_TABLE_LIMIT = 2_000_000


@dataclass(frozen=True)
class UsersetFamily:
    """Available users per position, as user bitmasks."""

    sets: tuple[int, ...]
    flavor: str = DYNAMIC

    def removed(self, n: int) -> tuple[int, ...]:
        full = (1 << n) - 1
        return tuple(full & ~U for U in self.sets)

    def is_t_close(self, n: int, t: int) -> bool:
        return all(n - popcount(U) <= t for U in self.sets)

    def describe(self, schema: Schema | None = None) -> str:
        def name(u):
            return schema.user_name(u) if schema is not None else f"u{u + 1}"
        parts = []
        for i, U in enumerate(self.sets, 1):
            users = [name(u) for u in range(U.bit_length()) if U >> u & 1]
            parts.append(f"U{i}={{{','.join(users)}}}")
        return " ".join(parts)


def authorized_matrix(schema: Schema) -> list[list[bool]]:
    """``auth[s][u]``: user ``u`` may do step ``s`` at no cost."""
    return [[schema.auth_weight(1 << s, u) == 0 for u in range(schema.n)] for s in range(schema.k)]


def linear_extensions(schema: Schema) -> Iterator[tuple[int, ...]]:
    """Every total order of the steps that respects the schema's order."""
    k = schema.k
    preds = [0] * k
    for a, b in schema.order:
        preds[b] |= 1 << a
    seq: list[int] = []

    def rec(done: int):
        if len(seq) == k:
            yield tuple(seq)
            return
        for s in range(k):
            if not done >> s & 1 and preds[s] & ~done == 0:
                seq.append(s)
                yield from rec(done | 1 << s)
                seq.pop()

    yield from rec(0)


# ---------------------------------------------------------------------------
# Compatibility


def _partial_pattern(assignment: dict[int, int]) -> Pattern:
    blocks: dict[int, int] = {}
    for s, u in assignment.items():
        blocks[u] = blocks.get(u, 0) | 1 << s
    return Pattern.from_blocks(blocks.values())


def compatible_valid_plan_exists(schema: Schema, F: UsersetFamily,
                                 extensions: list[tuple[int, ...]] | None = None) -> bool:
    """Some linear extension and valid plan with ``pi(s_i)`` in ``U_i``."""
    return find_compatible_plan(schema, F, extensions) is not None


def find_compatible_plan(schema: Schema, F: UsersetFamily,
                         extensions: list[tuple[int, ...]] | None = None):
    """``(extension, assignment)`` witnessing compatibility, or ``None``."""
    auth = authorized_matrix(schema)
    n = schema.n
    for ext in extensions if extensions is not None else linear_extensions(schema):
        assignment: dict[int, int] = {}

        def dfs(i: int) -> bool:
            if i == len(ext):
                return True
            s = ext[i]
            for u in range(n):
                if not (F.sets[i] >> u & 1 and auth[s][u]):
                    continue
                assignment[s] = u
                P = _partial_pattern(assignment)
                if all(constraint_lower_bound(c, P) == 0 for c in schema.constraints):
                    if dfs(i + 1):
                        return True
                del assignment[s]
            return False

        if dfs(0):
            return ext, tuple(assignment[s] for s in range(schema.k))
    return None


def valid_plans(schema: Schema) -> np.ndarray:
    """All valid complete plans as rows (DFS over authorized users)."""
    auth = authorized_matrix(schema)
    k = schema.k
    out: list[tuple[int, ...]] = []
    assignment: dict[int, int] = {}

    def dfs(s: int):
        if s == k:
            out.append(tuple(assignment[i] for i in range(k)))
            if len(out) > _PLAN_TABLE_LIMIT:
                raise WSPError("resiliency-too-large", f"more than {_PLAN_TABLE_LIMIT} valid plans")
            return
        for u in range(schema.n):
            if not auth[s][u]:
                continue
            assignment[s] = u
            P = _partial_pattern(assignment)
            if all(constraint_lower_bound(c, P) == 0 for c in schema.constraints):
                dfs(s + 1)
            del assignment[s]

    dfs(0)
    return np.array(out, dtype=np.int64).reshape(len(out), k)


class _Checker:
    """Answers "is this family survivable?" from a table of valid plans."""

    def __init__(self, schema: Schema, plans: np.ndarray, extensions: list[tuple[int, ...]]):
        self.n = schema.n
        # position-ordered views of the plans, one per extension
        self.views = [plans[:, list(ext)] for ext in extensions]

    def survivable(self, removed: tuple[int, ...]) -> bool:
        if not len(self.views) or self.views[0].shape[0] == 0:
            return False
        blocked = np.array([[r >> u & 1 for u in range(self.n)] for r in removed], dtype=bool)
        for view in self.views:
            hit = np.zeros(view.shape[0], dtype=bool)
            for i in range(view.shape[1]):
                hit |= blocked[i][view[:, i]]
            if not hit.all():
                return True
        return False


# ---------------------------------------------------------------------------
# Family enumeration


def _subsets(n: int, size: int) -> list[int]:
    return [sum(1 << u for u in c) for c in itertools.combinations(range(n), size)]


def _chains(n: int, k: int, t: int) -> Iterator[tuple[int, ...]]:
    """Nested removal sets ``R_1 <= ... <= R_k`` with ``|R_k| <= t``.

    Each removed user is tagged with the first position it is missing from.
    """
    for size in range(min(t, n) + 1):
        for users in itertools.combinations(range(n), size):
            for starts in itertools.product(range(k), repeat=size):
                yield tuple(
                    sum(1 << u for u, st in zip(users, starts) if st <= i) for i in range(k)
                )


def count_families(n: int, k: int, t: int, flavor: str) -> int:
    from math import comb
    t = min(t, n)
    if flavor == STATIC:
        return comb(n, t)
    if flavor == DYNAMIC:
        return comb(n, t) ** k
    return sum(comb(n, j) * k**j for j in range(t + 1))


def families(n: int, k: int, t: int, flavor: str) -> Iterator[tuple[int, ...]]:
    """Removal tuples ``(U \\ U_1, ..., U \\ U_k)`` to check for ``flavor``."""
    t = min(t, n)
    if flavor == STATIC:
        for R in _subsets(n, t):
            yield (R,) * k
    elif flavor == DECREMENTAL:
        yield from _chains(n, k, t)
    elif flavor == DYNAMIC:
        yield from itertools.product(_subsets(n, t), repeat=k)
    else:
        raise WSPError("bad-flavor", f"unknown flavor {flavor!r}")


def _user_classes(schema: Schema) -> list[int]:
    """Class id per user: users with identical specs are interchangeable."""
    ids: dict[object, int] = {}
    return [ids.setdefault(spec, len(ids)) for spec in schema.users]


def _canonical(removed: tuple[int, ...], classes: list[int], n: int) -> tuple:
    """Family up to relabeling users within a class of identical users."""
    profiles = []
    for u in range(n):
        profiles.append((classes[u], tuple(r >> u & 1 for r in removed)))
    return tuple(sorted(profiles))


@dataclass
class ResilienceResult:
    resilient: bool
    flavor: str
    t: int
    families_checked: int
    counterexample: UsersetFamily | None = None
    users_considered: tuple[int, ...] = ()


def check_resilient(schema: Schema, t: int, flavor: str, budget: int = DEFAULT_BUDGET,
                    use_marking: bool = True, symmetry: bool = True) -> ResilienceResult:
    if flavor not in FLAVORS:
        raise WSPError("bad-flavor", f"unknown flavor {flavor!r}")
    if not 0 <= t <= schema.n:
        raise WSPError("bad-t", f"t must lie in [0, {schema.n}]")
    keep = marked_userset(schema, t) if use_marking else ()
    if not keep:
        # nobody is authorized for anything; nothing to shrink
        keep = tuple(range(schema.n))
    work = schema.restrict_users(keep) if len(keep) < schema.n else schema
    n, k = work.n, work.k
    total = count_families(n, k, t, flavor)
    if total > budget:
        raise WSPError("resiliency-too-large",
                       f"{total} {flavor} families over {n} users exceed the budget of {budget}")
    exts = list(linear_extensions(work))
    checker = _Checker(work, valid_plans(work), exts)
    classes = _user_classes(work)
    seen: set = set()
    checked = 0
    for removed in families(n, k, t, flavor):
        if symmetry:
            key = _canonical(removed, classes, n)
            if key in seen:
                continue
            seen.add(key)
        checked += 1
        if not checker.survivable(removed):
            full = (1 << n) - 1
            # report the family on the original user indices
            sets = []
            for r in removed:
                avail = 0
                for j, u in enumerate(keep):
                    if (full & ~r) >> j & 1:
                        avail |= 1 << u
                # unmarked users stay available; they are never needed
                for u in range(schema.n):
                    if u not in keep:
                        avail |= 1 << u
                sets.append(avail)
            cx = UsersetFamily(tuple(sets), flavor)
            return ResilienceResult(False, flavor, t, checked, cx, tuple(keep))
    return ResilienceResult(True, flavor, t, checked, None, tuple(keep))


def decide_resilient(schema: Schema, t: int, flavor: str, budget: int = DEFAULT_BUDGET,
                     use_marking: bool = True) -> bool:
    return check_resilient(schema, t, flavor, budget, use_marking).resilient


# ---------------------------------------------------------------------------
# Marking


def marked_userset(schema: Schema, t: int) -> tuple[int, ...]:
    """Users kept by the marking step.

    Every non-empty step set is a block of some partition, so looping over
    all subsets visits exactly the blocks of all partitions.
    """
    auth = authorized_matrix(schema)
    k, n = schema.k, schema.n
    cap = k + t
    marked: set[int] = set()
    for T in range(1, 1 << k):
        N = [u for u in range(n) if all(auth[s][u] for s in range(k) if T >> s & 1)]
        marked.update(N if len(N) < cap else N[:cap])
    return tuple(sorted(marked))


__all__ = [
    "DECREMENTAL", "DYNAMIC", "FLAVORS", "STATIC", "ResilienceResult", "UsersetFamily",
    "authorized_matrix", "check_resilient", "compatible_valid_plan_exists", "count_families",
    "decide_resilient", "families", "find_compatible_plan", "linear_extensions",
    "marked_userset", "valid_plans",
]
