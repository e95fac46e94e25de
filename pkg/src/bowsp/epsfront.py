"""Epsilon-constraint Pareto front computation and the exhaustive oracle.

:func:`eps_front` drives any :class:`BoundedMinimizer`: a black box that
minimizes one weight inside a box on both weights.  Weights are integers,
so strict inequalities become ``+-1`` offsets.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, Protocol

import numpy as np

from .core import Plan, Schema, WSPError
from .pareto import ParetoFront
from .pbb import SchemaContext, SearchState

DEFAULT_ORACLE_BUDGET = 10**8
_CHUNK = 1 << 18
_CACHE_LIMIT = 4_000_000


def oracle_budget() -> int:
    return int(os.environ.get("BOWSP_ORACLE_BUDGET", DEFAULT_ORACLE_BUDGET))


@dataclass(frozen=True)
class BoundedMinimizeQuery:
    """Minimize omega_A (``alpha == 0``) or omega_C (``alpha == 1``) with
    ``a <= omega_A <= b`` and ``c <= omega_C <= d``."""

    alpha: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.alpha not in (0, 1):
            raise ValueError("alpha must be 0 or 1")
        if min(self.a, self.c) < 0:
            raise ValueError("box bounds must be non-negative")

    @property
    def empty(self) -> bool:
        return self.a > self.b or self.c > self.d

    def admits(self, omega_C: int, omega_A: int) -> bool:
        return self.a <= omega_A <= self.b and self.c <= omega_C <= self.d


Result = tuple[Plan, int, int]


class BoundedMinimizer(Protocol):
    name: str

    def solve(self, schema: Schema, query: BoundedMinimizeQuery) -> Result | None: ...


# ---------------------------------------------------------------------------
# Exhaustive evaluation of every plan


def auth_table(schema: Schema) -> np.ndarray:
    """``W[u, T]`` = omega(T, u) for every user and step subset."""
    full = 1 << schema.k
    W = np.empty((schema.n, full), dtype=np.int64)
    for u in range(schema.n):
        W[u] = [schema.auth_weight(T, u) for T in range(full)]
    return W


def _decode(start: int, stop: int, k: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    plans = np.empty((stop - start, k), dtype=np.int64)
    for s in range(k - 1, -1, -1):
        plans[:, s] = idx % n
        idx //= n
    return plans


def evaluate_all_plans(schema: Schema, W: np.ndarray | None = None,
                       chunk: int = _CHUNK) -> Iterator[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(start, plans, omega_C, omega_A)`` over all ``n**k`` plans in
    lexicographic order, straight from the definitions."""
    k, n = schema.k, schema.n
    total = n**k
    if total > oracle_budget():
        raise WSPError("oracle-too-large", f"{n}^{k} = {total} plans exceeds budget {oracle_budget()}")
    if W is None:
        W = auth_table(schema)
    scopes = [[s for s in range(k) if c.scope >> s & 1] for c in schema.constraints]
    tables = [np.asarray((0,) + c.table, dtype=np.int64) for c in schema.constraints]
    weights = 1 << np.arange(k, dtype=np.int64)
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        plans = _decode(start, stop, k, n)
        wa = np.zeros(stop - start, dtype=np.int64)
        for u in range(n):
            masks = ((plans == u) * weights).sum(axis=1)
            wa += W[u, masks]
        wc = np.zeros(stop - start, dtype=np.int64)
        for steps, table in zip(scopes, tables):
            count = np.zeros(stop - start, dtype=np.int64)
            for i, s in enumerate(steps):
                new = np.ones(stop - start, dtype=bool)
                for t in steps[:i]:
                    new &= plans[:, s] != plans[:, t]
                count += new
            wc += table[count]
        yield start, plans, wc, wa


def oracle_front(schema: Schema) -> ParetoFront:
    """Offer every complete plan to an empty front (first plan wins ties)."""
    first: dict[tuple[int, int], tuple[int, tuple[int, ...]]] = {}
    for start, plans, wc, wa in evaluate_all_plans(schema):
        keep = (wa <= schema.BA) & (wc <= schema.BC)
        if not keep.any():
            continue
        pts = np.stack([wc[keep], wa[keep]], axis=1)
        uniq, idx = np.unique(pts, axis=0, return_index=True)
        rows = np.nonzero(keep)[0][idx]
        for (c, a), r in zip(uniq.tolist(), rows.tolist()):
            if (c, a) not in first:
                first[(c, a)] = (start + r, tuple(plans[r].tolist()))
    front = ParetoFront(schema.BA, schema.BC)
    # offering in enumeration order keeps the first plan of each weight point
    for (c, a), (_, plan) in sorted(first.items(), key=lambda kv: kv[1][0]):
        front.offer(c, a, Plan(plan, c, a))
    return front


class OracleBackend:
    """Bounded minimization by scanning all ``n**k`` plans."""

    name = "oracle"

    def __init__(self):
        self._cache: dict[int, tuple[Schema, list]] = {}

    def _chunks(self, schema: Schema):
        hit = self._cache.get(id(schema))
        if hit is not None and hit[0] is schema:
            return hit[1]
        gen = evaluate_all_plans(schema)
        if schema.n**schema.k > _CACHE_LIMIT:
            return gen
        chunks = list(gen)
        self._cache = {id(schema): (schema, chunks)}
        return chunks

    def solve(self, schema: Schema, query: BoundedMinimizeQuery) -> Result | None:
        if query.empty:
            return None
        best = None
        for start, plans, wc, wa in self._chunks(schema):
            ok = (wa >= query.a) & (wa <= query.b) & (wc >= query.c) & (wc <= query.d)
            if not ok.any():
                continue
            obj = np.where(ok, wa if query.alpha == 0 else wc, np.iinfo(np.int64).max)
            r = int(np.argmin(obj))
            if best is None or obj[r] < best[0]:
                best = (int(obj[r]), tuple(plans[r].tolist()), int(wc[r]), int(wa[r]))
        if best is None:
            return None
        _, plan, c, a = best
        return Plan(plan, c, a), c, a


class PatternBackend:
    """Bounded minimization by pattern search.

    Each complete pattern is represented by its minimum-authorization plan.
    That is all an epsilon-constraint loop needs: any other plan of the same
    pattern has the same constraint weight and a larger authorization
    weight, so it never sits on the front.
    """

    name = "pattern"

    def __init__(self):
        self._ctx: SchemaContext | None = None
        self.nodes = 0

    def _context(self, schema: Schema) -> SchemaContext:
        if self._ctx is None or self._ctx.schema is not schema:
            self._ctx = SchemaContext(schema)
        return self._ctx

    def solve(self, schema: Schema, query: BoundedMinimizeQuery) -> Result | None:
        if query.empty:
            return None
        ctx = self._context(schema)
        state = SearchState(ctx)
        best: list = [None]  # (objective, plan, omega_C, omega_A)
        alpha = query.alpha

        def dfs():
            self.nodes += 1
            if state.lb_auth > query.b or state.lb_cons > query.d:
                return
            bound = state.lb_auth if alpha == 0 else state.lb_cons
            if best[0] is not None and bound > best[0][0]:
                return
            if state.complete:
                wc = state.lb_cons
                if wc < query.c:
                    return
                found = ctx.best_assignment(state.blocks)
                if found is None:
                    return
                plan, wa = found
                if not query.a <= wa <= query.b:
                    return
                cand = (wa if alpha == 0 else wc, plan, wc, wa)
                if best[0] is None or cand[:2] < best[0][:2]:
                    best[0] = cand
                return
            s = state.choose_step("heuristic")
            for j in range(state.children()):
                state.push(s, j)
                dfs()
                state.pop()

        dfs()
        if best[0] is None:
            return None
        _, plan, wc, wa = best[0]
        return Plan(plan, wc, wa), wc, wa


# ---------------------------------------------------------------------------
# Control loop


@dataclass
class QueryRecord:
    query: BoundedMinimizeQuery
    result: tuple[int, int] | None  # (omega_C, omega_A)


def eps_front(schema: Schema, backend: BoundedMinimizer,
              trace: list[QueryRecord] | None = None) -> ParetoFront:
    """Pareto front by repeated bounded minimization (epsilon = 1)."""
    BA, BC = schema.BA, schema.BC
    trace = trace if trace is not None else []

    def ask(alpha, a, b, c, d) -> Result | None:
        q = BoundedMinimizeQuery(alpha, a, b, c, d)
        try:
            res = backend.solve(schema, q)
        except WSPError:
            raise
        except Exception as exc:  # pragma: no cover - backend specific
            raise RuntimeError(f"{backend.name} backend failed on {q}: {exc}") from exc
        if res is not None and not q.admits(res[1], res[2]):
            raise RuntimeError(f"{backend.name} backend returned {res[1:]} outside {q}")
        trace.append(QueryRecord(q, None if res is None else (res[1], res[2])))
        return res

    front = ParetoFront(BA, BC)
    first = ask(0, 0, BA, 0, BC)
    if first is None:
        return front
    _, _, a0 = first
    left = ask(1, a0, a0, 0, BC)
    if left is None:  # cannot happen for an exact backend
        return front
    front.offer(left[1], left[2], left[0])
    lc, la = left[1], left[2]

    probe = ask(1, la + 1, BA, 0, lc - 1)
    if probe is None:
        return front
    right = ask(0, la + 1, BA, probe[1], probe[1])
    if right is None:
        return front
    front.offer(right[1], right[2], right[0])
    rc, ra = right[1], right[2]

    while ra - la > 1 and lc - rc > 1:
        probe = ask(1, la + 1, ra - 1, rc + 1, lc - 1)
        if probe is None:
            return front
        mid = ask(0, la + 1, ra - 1, probe[1], probe[1])
        if mid is None:
            return front
        front.offer(mid[1], mid[2], mid[0])
        rc, ra = mid[1], mid[2]
    return front
