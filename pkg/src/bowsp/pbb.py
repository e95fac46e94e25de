"""Pattern Branch and Bound and plain pattern enumeration.

Both solvers work on patterns (partitions of the assigned steps into
blocks).  Every complete pattern has a fixed constraint weight; its best
authorization weight comes from a minimum-weight block-to-user matching.
"""
from __future__ import annotations

import heapq
import logging
import random
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .core import (
    AT_LEAST,
    AT_MOST,
    BOD,
    SOD,
    ExplicitUser,
    Pattern,
    Plan,
    Schema,
    WeightedConstraint,
    blocks_meeting,
    constraint_weight_of_pattern,
    popcount,
)
from .matching import assign_from_candidates
from .pareto import ParetoFront

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Pattern enumeration


def enumerate_patterns(k: int) -> Iterator[Pattern]:
    """Yield every set partition of ``k`` steps once, in restricted-growth order."""
    if k < 1:
        return
    rgs = [0] * k
    maxes = [0] * k  # maxes[i] = max(rgs[:i]) + 1 (0 for i == 0 is unused)

    def emit() -> Pattern:
        blocks = [0] * (max(rgs) + 1)
        for s, b in enumerate(rgs):
            blocks[b] |= 1 << s
        return Pattern(tuple(blocks))

    while True:
        yield emit()
        i = k - 1
        while i > 0:
            bound = max(rgs[:i]) + 1
            if rgs[i] < bound:
                rgs[i] += 1
                for j in range(i + 1, k):
                    rgs[j] = 0
                break
            i -= 1
        else:
            return


# ---------------------------------------------------------------------------
# Lower bounds


def reachable_counts(m: int, unassigned: int, size: int) -> range:
    """Distinct-user counts a scope can end with, given ``m`` blocks already
    meeting it and ``unassigned`` scope steps still open."""
    return range(max(m, 1), min(m + unassigned, size) + 1)


def constraint_lower_bound(c: WeightedConstraint, P: Pattern) -> int:
    m = blocks_meeting(P.blocks, c.scope)
    open_steps = popcount(c.scope & ~P.assigned)
    return min(c.table[j - 1] for j in reachable_counts(m, open_steps, c.size))


def node_lower_bounds(schema: Schema, P: Pattern, ctx: "SchemaContext | None" = None) -> tuple[int, int]:
    """``(lb_auth, lb_cons)`` valid for every complete plan extending ``P``."""
    ctx = ctx or SchemaContext(schema)
    lb_auth = sum(ctx.block_floor(b) for b in P.blocks)
    lb_cons = sum(constraint_lower_bound(c, P) for c in schema.constraints)
    return lb_auth, lb_cons


# ---------------------------------------------------------------------------
# Branching heuristic

# rows: distinct users m = 1..4, columns: assigned scope steps t = 1..4
AT_MOST_RHO = {
    (1, 1): 0, (1, 2): 0, (1, 3): 0, (1, 4): 0,
    (2, 2): 0, (2, 3): 20, (2, 4): 0,
    (3, 3): 500, (3, 4): 500,
    (4, 4): 200,
}
AT_LEAST_RHO = {
    (1, 1): 0, (1, 2): 0, (1, 3): 10, (1, 4): 5,
    (2, 2): 0, (2, 3): 0, (2, 4): 20,
    (3, 3): 0, (3, 4): 0,
    (4, 4): 0,
}


@dataclass(frozen=True)
class HeuristicConfig:
    psi: dict = field(default_factory=lambda: {SOD: 1, BOD: 1, AT_MOST: 5, AT_LEAST: 5, "explicit": 5})
    rho: dict = field(default_factory=lambda: {AT_MOST: AT_MOST_RHO, AT_LEAST: AT_LEAST_RHO})
    sod_in_at_most: int = 50
    at_most_at_least_overlap: int = 50


def step_importance(schema: Schema, s: int, cfg: HeuristicConfig) -> int:
    """Pattern-independent part of the branching score of step ``s``."""
    bit = 1 << s
    mine = [c for c in schema.constraints if c.scope & bit]
    score = sum(cfg.psi.get(c.kind, 0) for c in mine)
    sods = [c for c in mine if c.kind == SOD]
    mosts = [c for c in mine if c.kind == AT_MOST]
    leasts = [c for c in mine if c.kind == AT_LEAST]
    score += cfg.sod_in_at_most * sum(
        1 for c in sods for d in mosts if c.scope & d.scope == c.scope and c.scope != d.scope
    )
    score += cfg.at_most_at_least_overlap * sum(
        1 for c in mosts for d in leasts if popcount(c.scope & d.scope) >= 3
    )
    score += sum(1 for u in range(schema.n) if schema.auth_weight(bit, u) > 0)
    return score


def _rho(cfg: HeuristicConfig, c: WeightedConstraint, m: int, t: int) -> int:
    table = cfg.rho.get(c.kind)
    if not table:
        return 0
    return table.get((m, t), 0)


def branch_step_score(schema: Schema, P: Pattern, s: int, cfg: HeuristicConfig | None = None,
                      importance: int | None = None) -> int:
    cfg = cfg or HeuristicConfig()
    if P.assigned >> s & 1:
        raise ValueError(f"step s{s + 1} already assigned")
    phi = step_importance(schema, s, cfg) if importance is None else importance
    total = phi
    for c in schema.constraints:
        if c.scope >> s & 1:
            m = blocks_meeting(P.blocks, c.scope)
            t = popcount(P.assigned & c.scope)
            total += _rho(cfg, c, m, t)
    return total


# ---------------------------------------------------------------------------
# Shared search machinery


class SchemaContext:
    """Per-schema caches shared by the pattern searches."""

    def __init__(self, schema: Schema, cfg: HeuristicConfig | None = None):
        self.schema = schema
        self.k = schema.k
        self.n = schema.n
        self.cfg = cfg or HeuristicConfig()
        self.constraints = schema.constraints
        self.cons_of_step = [
            [i for i, c in enumerate(schema.constraints) if c.scope >> s & 1] for s in range(self.k)
        ]
        self.sizes = [c.size for c in schema.constraints]
        # lb_table[i][m][t]: lower bound of constraint i with m blocks meeting
        # the scope and t of its steps assigned
        self.lb_table = []
        for c in schema.constraints:
            size = c.size
            rows = []
            for m in range(size + 1):
                row = []
                for t in range(size + 1):
                    rng = reachable_counts(m, size - t, size)
                    row.append(min(c.table[j - 1] for j in rng) if len(rng) else 0)
                rows.append(row)
            self.lb_table.append(rows)
        self.rho_tables = [self.cfg.rho.get(c.kind) or None for c in schema.constraints]
        self._cands: dict[int, list[tuple[int, int]]] = {}
        self._floor_cache: dict[int, int] = {}
        self._phi: list[int] | None = None
        self._lock = threading.Lock()
        self._monotone = [u for u, spec in enumerate(schema.users) if not isinstance(spec, ExplicitUser)]
        self._explicit_floor = self._superset_floor(
            [u for u, spec in enumerate(schema.users) if isinstance(spec, ExplicitUser)])

    _FLOOR_MAX_K = 20

    def _superset_floor(self, users: list[int]):
        """``floor[B]`` = min over listed users and supersets ``T >= B`` of omega(T, u).

        Staff, consultant and per-step weights never drop when a block
        grows, but an explicit table may, so a partial block can only be
        bounded by what its supersets cost.
        """
        if not users:
            return None
        k = self.k
        if k > self._FLOOR_MAX_K:
            return 0  # weights are non-negative; a weak but admissible floor
        size = 1 << k
        best = None
        for u in users:
            spec = self.schema.users[u]
            arr = np.full(size, spec.default, dtype=np.int64)
            for mask, w in spec.table:
                arr[mask] = w
            arr[0] = 0
            for b in range(k):
                v = arr.reshape(-1, 2, 1 << b)
                np.minimum(v[:, 0, :], v[:, 1, :], out=v[:, 0, :])
            best = arr if best is None else np.minimum(best, arr)
        return best

    @property
    def phi(self) -> list[int]:
        if self._phi is None:
            self._phi = [step_importance(self.schema, s, self.cfg) for s in range(self.k)]
        return self._phi

    def candidates(self, mask: int) -> list[tuple[int, int]]:
        """The ``k`` cheapest ``(weight, user)`` pairs for a block."""
        c = self._cands.get(mask)
        if c is None:
            w = self.schema.auth_weight
            c = heapq.nsmallest(self.k, ((w(mask, u), u) for u in range(self.n)))
            self._cands[mask] = c
        return c

    def min_weight(self, mask: int) -> int:
        return self.candidates(mask)[0][0]

    def block_floor(self, mask: int) -> int:
        """Lower bound on the weight of any block that grows out of ``mask``."""
        f = self._floor_cache.get(mask)
        if f is None:
            if self._explicit_floor is None:
                f = self.min_weight(mask)
            else:
                w = self.schema.auth_weight
                ex = self._explicit_floor if isinstance(self._explicit_floor, int) else int(self._explicit_floor[mask])
                f = min([ex] + [w(mask, u) for u in self._monotone])
            self._floor_cache[mask] = f
        return f

    def best_assignment(self, blocks) -> tuple[tuple[int, ...], int] | None:
        """Plan of minimum authorization weight with the given complete pattern."""
        if len(blocks) > self.n:
            return None
        cands = [self.candidates(b) for b in blocks]
        users, total = assign_from_candidates(cands, self.n)
        plan = [0] * self.k
        for b, u in zip(blocks, users):
            s = 0
            while b:
                if b & 1:
                    plan[s] = u
                b >>= 1
                s += 1
        return tuple(plan), total


class SearchState:
    """Mutable pattern with incremental lower bounds; children via push/pop."""

    def __init__(self, ctx: SchemaContext):
        self.ctx = ctx
        nc = len(ctx.constraints)
        self.blocks: list[int] = []
        self.assigned = 0
        self.m = [0] * nc
        self.t = [0] * nc
        self.lb_c = [ctx.lb_table[i][0][0] for i in range(nc)]
        self.lb_auth = 0
        self.lb_cons = sum(self.lb_c)
        self._undo: list[tuple] = []

    def copy(self) -> "SearchState":
        other = SearchState.__new__(SearchState)
        other.ctx = self.ctx
        other.blocks = list(self.blocks)
        other.assigned = self.assigned
        other.m = list(self.m)
        other.t = list(self.t)
        other.lb_c = list(self.lb_c)
        other.lb_auth = self.lb_auth
        other.lb_cons = self.lb_cons
        other._undo = []
        return other

    @property
    def complete(self) -> bool:
        return self.assigned == (1 << self.ctx.k) - 1

    def push(self, s: int, j: int) -> None:
        """Add step ``s`` to block ``j`` (``j == len(blocks)`` opens a new block)."""
        ctx = self.ctx
        bit = 1 << s
        if j == len(self.blocks):
            old = 0
            self.blocks.append(bit)
            new = bit
        else:
            old = self.blocks[j]
            new = old | bit
            self.blocks[j] = new
        d_auth = ctx.block_floor(new) - (ctx.block_floor(old) if old else 0)
        d_cons = 0
        touched = ctx.cons_of_step[s]
        lbt = ctx.lb_table
        constraints = ctx.constraints
        for i in touched:
            self.t[i] += 1
            if not old & constraints[i].scope:
                self.m[i] += 1
            v = lbt[i][self.m[i]][self.t[i]]
            d_cons += v - self.lb_c[i]
            self.lb_c[i] = v
        self.lb_auth += d_auth
        self.lb_cons += d_cons
        self.assigned |= bit
        self._undo.append((s, j, old, d_auth, d_cons))

    def pop(self) -> None:
        s, j, old, d_auth, d_cons = self._undo.pop()
        ctx = self.ctx
        if old == 0:
            self.blocks.pop()
        else:
            self.blocks[j] = old
        for i in ctx.cons_of_step[s]:
            self.t[i] -= 1
            if not old & ctx.constraints[i].scope:
                self.m[i] -= 1
            self.lb_c[i] = ctx.lb_table[i][self.m[i]][self.t[i]]
        self.lb_auth -= d_auth
        self.lb_cons -= d_cons
        self.assigned &= ~(1 << s)

    def pattern(self) -> Pattern:
        return Pattern.from_blocks(self.blocks)

    def choose_step(self, order: str, seed: int = 0) -> int:
        ctx = self.ctx
        free = [s for s in range(ctx.k) if not self.assigned >> s & 1]
        if order == "index":
            return free[0]
        if order == "random":
            rng = random.Random(f"{seed}:{sorted(self.blocks)}")
            return rng.choice(free)
        phi = ctx.phi
        best, best_score = free[0], None
        for s in free:
            score = phi[s]
            for i in ctx.cons_of_step[s]:
                table = ctx.rho_tables[i]
                if table:
                    score += table.get((self.m[i], self.t[i]), 0)
            if best_score is None or score > best_score:
                best, best_score = s, score
        return best

    def children(self) -> int:
        """Number of children: join each block, or open a new one if a user remains."""
        p = len(self.blocks)
        return p + (1 if p < self.ctx.n else 0)


@dataclass
class SearchNode:
    pattern: Pattern
    lb_auth: int
    lb_cons: int
    remaining: int


@dataclass
class SearchStats:
    nodes: int = 0
    leaves: int = 0
    prunes: Counter = field(default_factory=Counter)

    def add(self, other: "SearchStats") -> None:
        self.nodes += other.nodes
        self.leaves += other.leaves
        self.prunes.update(other.prunes)

    def as_dict(self) -> dict:
        return {"nodes": self.nodes, "leaves": self.leaves, "prunes": dict(sorted(self.prunes.items()))}


# ---------------------------------------------------------------------------
# PBB


class PatternBranchAndBound:
    """Depth-first pattern search collecting the Pareto front.

    ``order`` picks the branching step: ``"heuristic"`` (default),
    ``"index"`` or ``"random"``.  ``prune=False`` disables all three pruning
    rules (used to check that pruning never changes the result).
    """

    def __init__(self, schema: Schema, order: str = "heuristic", prune: bool = True,
                 seed: int = 0, cfg: HeuristicConfig | None = None,
                 on_node: Callable[[SearchNode], None] | None = None,
                 ctx: SchemaContext | None = None):
        if order not in ("heuristic", "index", "random"):
            raise ValueError(f"unknown branching order {order!r}")
        self.schema = schema
        self.ctx = ctx or SchemaContext(schema, cfg)
        self.order = order
        self.prune = prune
        self.seed = seed
        self.on_node = on_node
        self.stats = SearchStats()

    def solve(self, workers: int = 1) -> ParetoFront:
        front = ParetoFront(self.schema.BA, self.schema.BC)
        state = SearchState(self.ctx)
        if workers <= 1:
            self._dfs(state, front, self.stats)
            return front
        tasks = self._split(state, front, workers * 4)
        results: list[tuple[ParetoFront, SearchStats]] = []

        def run(task_state: SearchState):
            local = ParetoFront(self.schema.BA, self.schema.BC)
            st = SearchStats()
            self._dfs(task_state, local, st)
            return local, st

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
        # merging in task order reproduces the single-threaded witnesses
        for local, st in results:
            front.merge(local)
            self.stats.add(st)
        return front

    def _split(self, root: SearchState, front: ParetoFront, want: int) -> list[SearchState]:
        """Expand the top of the tree breadth-first (in DFS child order) into subtrees."""
        level = [root]
        while len(level) < want:
            nxt = []
            grew = False
            for st in level:
                if st.complete:
                    nxt.append(st)
                    continue
                s = st.choose_step(self.order, self.seed)
                for j in range(st.children()):
                    child = st.copy()
                    child.push(s, j)
                    nxt.append(child)
                    grew = True
            if not grew:
                break
            level = nxt
        for st in level:
            st._undo = []
        return level

    def _visit_leaf(self, state: SearchState, front: ParetoFront, stats: SearchStats) -> None:
        stats.leaves += 1
        best = self.ctx.best_assignment(state.blocks)
        if best is None:
            return
        plan, omega_A = best
        front.offer(state.lb_cons, omega_A, Plan(plan, state.lb_cons, omega_A))

    def _dfs(self, state: SearchState, front: ParetoFront, stats: SearchStats) -> None:
        stats.nodes += 1
        if self.on_node is not None:
            self.on_node(SearchNode(state.pattern(), state.lb_auth, state.lb_cons,
                                    self.ctx.schema.all_steps & ~state.assigned))
        if self.prune:
            if state.lb_auth > self.schema.BA:
                stats.prunes["auth-bound"] += 1
                return
            if state.lb_cons > self.schema.BC:
                stats.prunes["cons-bound"] += 1
                return
            if front.covered(state.lb_cons, state.lb_auth):
                stats.prunes["dominated"] += 1
                return
        if state.complete:
            self._visit_leaf(state, front, stats)
            return
        s = state.choose_step(self.order, self.seed)
        for j in range(state.children()):
            state.push(s, j)
            self._dfs(state, front, stats)
            state.pop()


def pbb_front(schema: Schema, **options) -> ParetoFront:
    workers = options.pop("workers", 1)
    return PatternBranchAndBound(schema, **options).solve(workers=workers)


def enumeration_front(schema: Schema) -> ParetoFront:
    """Enumerate every complete pattern and keep the non-dominated best plans."""
    ctx = SchemaContext(schema)
    front = ParetoFront(schema.BA, schema.BC)
    for P in enumerate_patterns(schema.k):
        omega_C = sum(constraint_weight_of_pattern(c, P) for c in schema.constraints)
        best = ctx.best_assignment(P.blocks)
        if best is None:
            continue
        plan, omega_A = best
        front.offer(omega_C, omega_A, Plan(plan, omega_C, omega_A))
    return front
