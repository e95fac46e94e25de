"""Reductions to the bi-objective solvers: minimum user count / cost and
availability-aware plan selection."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    LinearUser,
    ExplicitUser,
    Plan,
    Schema,
    WSPError,
    at_most,
    binding_of_duty,
    check_int64,
    make_plan,
    separation_of_duty,
)
from .epsfront import BoundedMinimizeQuery, PatternBackend
from .pareto import ParetoFront
from .pbb import pbb_front


def authorized(schema: Schema, s: int, u: int) -> bool:
    """A user is authorized for a step when doing it alone costs nothing."""
    return schema.auth_weight(1 << s, u) == 0


def is_satisfiable(schema: Schema) -> Plan | None:
    """A valid plan (both weights zero) or ``None``."""
    front = pbb_front(schema.with_bounds(0, 0))
    return front.points[0].plan if len(front) else None


# ---------------------------------------------------------------------------
# Minimum number of users


@dataclass
class CmupResult:
    users: int
    plan: Plan
    calls: int


def cmup_binary_search(schema: Schema) -> CmupResult:
    """Fewest distinct users in a valid plan, by binary search on atmost(S, r)."""
    k = schema.k
    calls = 1
    base = is_satisfiable(schema)
    if base is None:
        raise WSPError("cmup-unsatisfiable-base", "the instance has no valid plan")
    best = base
    lo, hi = 1, k  # atmost(S, k) always holds
    while lo < hi:
        mid = (lo + hi) // 2
        calls += 1
        found = is_satisfiable(schema.with_constraints(_at_most_users(schema, mid)))
        if found is not None:
            hi = mid
            best = found
        else:
            lo = mid + 1
    plan = make_plan(schema, best.assignment)
    return CmupResult(lo, plan, calls)


def _at_most_users(schema: Schema, r: int):
    return at_most(range(schema.k), r, {m: schema.M for m in range(r + 1, schema.k + 1)})


@dataclass(frozen=True)
class UserCostModel:
    costs: tuple[int, ...]
    M: int | None = None

    def __post_init__(self):
        if any(c <= 0 for c in self.costs):
            raise WSPError("bad-costs", "user costs must be positive")
        if self.M is not None and self.M <= sum(self.costs):
            raise WSPError("bad-costs", "M must exceed the total user cost")

    @property
    def big(self) -> int:
        return self.M if self.M is not None else sum(self.costs) + 1


def user_cost_schema(schema: Schema, model: UserCostModel) -> Schema:
    """Charge ``mu_u`` per involved user, ``M`` for any unauthorized set."""
    if len(model.costs) != schema.n:
        raise WSPError("bad-costs", f"expected {schema.n} user costs")
    M = model.big
    users = []
    for u in range(schema.n):
        ok = 0
        for s in range(schema.k):
            if authorized(schema, s, u):
                ok |= 1 << s
        table = tuple((T, model.costs[u]) for T in range(1, 1 << schema.k) if T & ~ok == 0)
        users.append(ExplicitUser(table, M))
    return schema.replace(users=tuple(users), M=M)


def min_user_cost(schema: Schema, costs: UserCostModel, backend=None) -> tuple[Plan, int]:
    """Valid plan minimizing the total cost of the users it involves."""
    weighted = user_cost_schema(schema, costs)
    backend = backend or PatternBackend()
    res = backend.solve(weighted, BoundedMinimizeQuery(0, 0, sum(costs.costs), 0, 0))
    if res is None:
        raise WSPError("cmup-unsatisfiable-base", "the instance has no valid plan")
    plan, _, total = res
    return plan, total


# ---------------------------------------------------------------------------
# Availability model


@dataclass(frozen=True)
class AvailabilityModel:
    """Authorization, known availability and scaled unavailability probability
    per (step, user); probabilities are integers over ``scale``."""

    authorized: tuple[tuple[int, ...], ...]  # [s][u] in {0, 1}
    available: tuple[tuple[int, ...], ...]   # [s][u] in {0, 1}
    rho: tuple[tuple[int, ...], ...]         # [s][u] in 0..scale
    scale: int
    M: int

    def __post_init__(self):
        k = len(self.rho)
        if self.scale < 1:
            raise WSPError("bad-model", "scale must be positive")
        for name, grid in (("authorized", self.authorized), ("available", self.available)):
            if len(grid) != k or any(v not in (0, 1) for row in grid for v in row):
                raise WSPError("bad-model", f"{name} must be a 0/1 grid with one row per step")
        if any(not 0 <= v <= self.scale for row in self.rho for v in row):
            raise WSPError("bad-model", "rho must lie in [0, scale]")
        if self.M <= k * self.scale:
            raise WSPError("bad-model", "M must exceed k * scale")

    @property
    def k(self) -> int:
        return len(self.rho)

    def step_weight(self, s: int, u: int) -> int:
        if self.authorized[s][u] * self.available[s][u] == 0:
            return self.M
        return self.rho[s][u]

    @classmethod
    def from_json(cls, data: str | bytes) -> "AvailabilityModel":
        doc = json.loads(data)
        try:
            return cls(
                authorized=tuple(tuple(r) for r in doc["authorized"]),
                available=tuple(tuple(r) for r in doc["available"]),
                rho=tuple(tuple(r) for r in doc["rho"]),
                scale=doc["scale"],
                M=doc["M"],
            )
        except KeyError as exc:
            raise WSPError("bad-model", f"missing field {exc.args[0]!r}") from None

    def to_json(self) -> str:
        doc = {
            "scale": self.scale,
            "M": self.M,
            "authorized": [list(r) for r in self.authorized],
            "available": [list(r) for r in self.available],
            "rho": [list(r) for r in self.rho],
        }
        return json.dumps(doc, indent=1) + "\n"


def availability_schema(schema: Schema, model: AvailabilityModel) -> Schema:
    if model.k != schema.k or any(len(r) != schema.n for r in model.rho):
        raise WSPError("bad-model", "model shape does not match the schema")
    users = tuple(
        LinearUser(tuple(check_int64(model.step_weight(s, u)) for s in range(schema.k)))
        for u in range(schema.n)
    )
    return schema.replace(users=users, M=model.M, weight_scale=model.scale)


@dataclass
class ResilientPoint:
    omega_C: int
    omega_A: int
    plan: Plan
    expected_failures: Fraction | None
    success_bound: Fraction | None


def resilient_plan(schema: Schema, model: AvailabilityModel, violation_budget: int,
                   BA: int | None = None) -> tuple[ParetoFront, list[ResilientPoint]]:
    """Front of plans with at most ``violation_budget`` constraint weight,
    each annotated with a lower bound on the chance that every step runs."""
    weighted = availability_schema(schema, model)
    weighted = weighted.with_bounds(BA=model.M - 1 if BA is None else BA, BC=violation_budget)
    front = pbb_front(weighted)
    points = []
    for p in front:
        if p.omega_A < model.M:
            expected = Fraction(p.omega_A, model.scale)
            bound = max(Fraction(0), 1 - expected)
        else:
            expected = bound = None
        points.append(ResilientPoint(p.omega_C, p.omega_A, p.plan, expected, bound))
    return front, points


def uniform_availability(schema: Schema, rho_by_user, scale: int, M: int | None = None) -> AvailabilityModel:
    """Model where each user's unavailability does not depend on the step."""
    k, n = schema.k, schema.n
    auth = tuple(tuple(int(authorized(schema, s, u)) for u in range(n)) for s in range(k))
    avail = tuple(tuple(1 for _ in range(n)) for _ in range(k))
    rho = tuple(tuple(rho_by_user[u] for u in range(n)) for _ in range(k))
    return AvailabilityModel(auth, avail, rho, scale, M if M is not None else schema.M)


# unavailability per user in hundredths, for the purchase-order example
AVAILABILITY_EXAMPLE_RHO = (1, 6, 3, 5, 7, 5, 6, 1)


def availability_example(penalty: int = 1) -> tuple[Schema, AvailabilityModel]:
    """Purchase-order workflow with per-user unavailability and unit-penalty
    constraints SoD(s1,s2), BoD(s1,s3), SoD(s3,s5), SoD(s1,s4)."""
    from .gen import purchase_order_fixture

    base = purchase_order_fixture()
    constraints = (
        separation_of_duty(0, 1, penalty),
        binding_of_duty(0, 2, penalty),
        separation_of_duty(2, 4, penalty),
        separation_of_duty(0, 3, penalty),
    )
    schema = base.replace(constraints=constraints)
    return schema, uniform_availability(schema, AVAILABILITY_EXAMPLE_RHO, 100)


def min_auth_point(points: list[ResilientPoint]) -> ResilientPoint | None:
    """The front point with the smallest authorization weight."""
    return min(points, key=lambda p: (p.omega_A, p.omega_C), default=None)


def markov_success_bound(omega_A: int, scale: int) -> Fraction:
    return max(Fraction(0), 1 - Fraction(omega_A, scale))


__all__ = [
    "AVAILABILITY_EXAMPLE_RHO", "AvailabilityModel", "CmupResult", "ResilientPoint", "UserCostModel",
    "availability_example", "availability_schema", "min_auth_point", "cmup_binary_search", "is_satisfiable", "markov_success_bound",
    "min_user_cost", "resilient_plan", "uniform_availability", "user_cost_schema",
]
