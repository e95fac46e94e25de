"""Domain model: schemas, users, weighted constraints, plans and patterns.

Steps and users are 0-based internally.  Instance documents use 1-based
indices (``s1..sk``, ``u1..un``); the conversion happens only in
:func:`load_instance` / :func:`save_instance`.

A set of steps is an ``int`` bitmask throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

DEFAULT_M = 1_000_000
INT64_MAX = 2**63 - 1


class WSPError(ValueError):
    """Raised for invalid inputs; ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


def check_int64(value: int, what: str = "weight") -> int:
    if value < 0 or value > INT64_MAX:
        raise WSPError("weight-overflow", f"{what} {value} outside [0, 2^63-1]")
    return value


def mask_of(steps: Iterable[int]) -> int:
    m = 0
    for s in steps:
        m |= 1 << s
    return m


def steps_of(mask: int) -> list[int]:
    out = []
    s = 0
    while mask:
        if mask & 1:
            out.append(s)
        mask >>= 1
        s += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


# ---------------------------------------------------------------------------
# Users (the per-user pieces of the weighted set-authorization function)


@dataclass(frozen=True)
class StaffUser:
    """Authorized for ``A``; may stand in on ``B`` at ``sigma`` per step; ``M`` elsewhere."""

    A: int
    B: int
    sigma: int

    kind = "staff"

    def weight(self, T: int, M: int) -> int:
        return self.sigma * popcount(T & self.B) + M * popcount(T & ~(self.A | self.B))


@dataclass(frozen=True)
class ConsultantUser:
    """Costs ``sigma`` for any non-empty subset of ``B``, ``M`` otherwise."""

    B: int
    sigma: int

    kind = "consultant"

    def weight(self, T: int, M: int) -> int:
        if not T:
            return 0
        return self.sigma if T & ~self.B == 0 else M


@dataclass(frozen=True)
class LinearUser:
    """Per-step costs; the weight of a set is the sum over its steps."""

    costs: tuple[int, ...]

    kind = "linear"

    def weight(self, T: int, M: int) -> int:
        total = 0
        s = 0
        while T:
            if T & 1:
                total += self.costs[s]
            T >>= 1
            s += 1
        return total


@dataclass(frozen=True)
class ExplicitUser:
    """Arbitrary set weights; unlisted non-empty sets cost ``default``."""

    table: tuple[tuple[int, int], ...]  # (mask, weight), sorted by mask
    default: int

    kind = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "_lookup", dict(self.table))

    def weight(self, T: int, M: int) -> int:
        if not T:
            return 0
        return self._lookup.get(T, self.default)


UserSpec = StaffUser | ConsultantUser | LinearUser | ExplicitUser


# ---------------------------------------------------------------------------
# Constraints

SOD, BOD, AT_MOST, AT_LEAST, EXPLICIT = "sod", "bod", "at-most", "at-least", "explicit"
CONSTRAINT_KINDS = (SOD, BOD, AT_MOST, AT_LEAST, EXPLICIT)


@dataclass(frozen=True)
class WeightedConstraint:
    """A user-independent counting constraint.

    ``table[m - 1]`` is the penalty when the scope is covered by ``m``
    distinct users, for ``m`` in ``1..|scope|``.
    """

    kind: str
    scope: int
    table: tuple[int, ...]
    r: int | None = None

    @property
    def size(self) -> int:
        return popcount(self.scope)

    def weight_for_count(self, m: int) -> int:
        return self.table[m - 1]


def separation_of_duty(s: int, t: int, penalty: int = DEFAULT_M) -> WeightedConstraint:
    return WeightedConstraint(SOD, mask_of((s, t)), (penalty, 0))


def binding_of_duty(s: int, t: int, penalty: int = DEFAULT_M) -> WeightedConstraint:
    return WeightedConstraint(BOD, mask_of((s, t)), (0, penalty))


def at_most(scope: Iterable[int], r: int, penalties: dict[int, int]) -> WeightedConstraint:
    mask = mask_of(scope)
    size = popcount(mask)
    table = tuple(0 if m <= r else penalties[m] for m in range(1, size + 1))
    return WeightedConstraint(AT_MOST, mask, table, r)


def at_least(scope: Iterable[int], r: int, penalties: dict[int, int]) -> WeightedConstraint:
    mask = mask_of(scope)
    size = popcount(mask)
    table = tuple(0 if m >= r else penalties[m] for m in range(1, size + 1))
    return WeightedConstraint(AT_LEAST, mask, table, r)


def explicit_constraint(scope: Iterable[int], table: Sequence[int]) -> WeightedConstraint:
    return WeightedConstraint(EXPLICIT, mask_of(scope), tuple(table))


def _validate_constraint(c: WeightedConstraint, k: int, where: str) -> None:
    if c.kind not in CONSTRAINT_KINDS:
        raise WSPError("unknown-constraint-kind", f"{where}: {c.kind!r}")
    if c.scope == 0 or c.scope >> k:
        raise WSPError("dangling-step", f"{where}: scope outside s1..s{k}")
    if len(c.table) != c.size:
        raise WSPError("bad-table", f"{where}: table has {len(c.table)} entries, scope has {c.size}")
    for w in c.table:
        if w < 0:
            raise WSPError("negative-weight", f"{where}: {w}")
        check_int64(w)
    if c.kind in (SOD, BOD) and c.size != 2:
        raise WSPError("bad-table", f"{where}: {c.kind} needs a 2-step scope")
    if c.kind == SOD and (c.table[1] != 0 or c.table[0] <= 0):
        raise WSPError("bad-table", f"{where}: sod table must be [M, 0]")
    if c.kind == BOD and (c.table[0] != 0 or c.table[1] <= 0):
        raise WSPError("bad-table", f"{where}: bod table must be [0, M']")
    if c.kind in (AT_MOST, AT_LEAST):
        if c.r is None or not 1 <= c.r <= c.size:
            raise WSPError("bad-table", f"{where}: r must lie in 1..|scope|")
        for m, w in enumerate(c.table, start=1):
            satisfied = m <= c.r if c.kind == AT_MOST else m >= c.r
            if satisfied and w != 0:
                raise WSPError("bad-table", f"{where}: nonzero penalty for satisfied count {m}")
            if not satisfied and w == 0:
                raise WSPError("bad-table", f"{where}: zero penalty for violated count {m}")


# ---------------------------------------------------------------------------
# Schema


def transitive_closure(k: int, pairs: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    """Close ``pairs`` (``i < j``) transitively; raise on cycles."""
    succ = [0] * k
    for i, j in pairs:
        if not (0 <= i < k and 0 <= j < k):
            raise WSPError("dangling-step", f"order pair ({i + 1},{j + 1})")
        succ[i] |= 1 << j
    changed = True
    while changed:
        changed = False
        for i in range(k):
            reach = succ[i]
            for j in steps_of(succ[i]):
                reach |= succ[j]
            if reach != succ[i]:
                succ[i] = reach
                changed = True
    for i in range(k):
        if succ[i] >> i & 1:
            raise WSPError("cyclic-order", f"step s{i + 1} precedes itself")
    return frozenset((i, j) for i in range(k) for j in steps_of(succ[i]))


@dataclass(frozen=True)
class Schema:
    """Weighted constrained workflow schema."""

    k: int
    users: tuple[UserSpec, ...]
    constraints: tuple[WeightedConstraint, ...] = ()
    order: frozenset[tuple[int, int]] = frozenset()
    M: int = DEFAULT_M
    weight_scale: int = 1
    BA: int = 1000
    BC: int = 1000
    user_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise WSPError("bad-schema", "k must be positive")
        object.__setattr__(self, "order", transitive_closure(self.k, self.order))
        if self.BA < 0 or self.BC < 0:
            raise WSPError("negative-weight", "bounds must be non-negative")
        if self.weight_scale < 1:
            raise WSPError("bad-schema", "weight_scale must be positive")
        check_int64(self.M, "M")
        for i, c in enumerate(self.constraints):
            _validate_constraint(c, self.k, f"constraints[{i}]")
        for i, u in enumerate(self.users):
            _validate_user(u, self.k, f"users[{i}]")

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def all_steps(self) -> int:
        return (1 << self.k) - 1

    def auth_weight(self, T: int, u: int) -> int:
        """The weighted set-authorization function omega(T, u)."""
        return self.users[u].weight(T, self.M)

    def user_name(self, u: int) -> str:
        if self.user_names:
            return self.user_names[u]
        return f"u{u + 1}"

    def replace(self, **changes) -> "Schema":
        fields = dict(
            k=self.k, users=self.users, constraints=self.constraints, order=self.order,
            M=self.M, weight_scale=self.weight_scale, BA=self.BA, BC=self.BC,
            user_names=self.user_names,
        )
        fields.update(changes)
        return Schema(**fields)

    def with_bounds(self, BA: int | None = None, BC: int | None = None) -> "Schema":
        return self.replace(BA=self.BA if BA is None else BA, BC=self.BC if BC is None else BC)

    def with_constraints(self, *extra: WeightedConstraint) -> "Schema":
        return self.replace(constraints=self.constraints + tuple(extra))

    def restrict_users(self, keep: Iterable[int]) -> "Schema":
        """Schema over the users in ``keep`` (renumbered, names preserved)."""
        keep = sorted(set(keep))
        names = tuple(self.user_name(u) for u in keep)
        return self.replace(users=tuple(self.users[u] for u in keep), user_names=names)

    def without_users(self, drop: Iterable[int]) -> "Schema":
        drop = set(drop)
        return self.restrict_users(u for u in range(self.n) if u not in drop)


def _validate_user(u: UserSpec, k: int, where: str) -> None:
    full = (1 << k) - 1
    if isinstance(u, StaffUser):
        if (u.A | u.B) & ~full:
            raise WSPError("dangling-step", where)
        if u.A & u.B:
            raise WSPError("bad-user", f"{where}: A and B overlap")
        if u.sigma < 0:
            raise WSPError("negative-weight", where)
    elif isinstance(u, ConsultantUser):
        if u.B & ~full:
            raise WSPError("dangling-step", where)
        if u.sigma < 0:
            raise WSPError("negative-weight", where)
    elif isinstance(u, LinearUser):
        if len(u.costs) != k:
            raise WSPError("bad-user", f"{where}: expected {k} per-step costs")
        if any(c < 0 for c in u.costs):
            raise WSPError("negative-weight", where)
        for c in u.costs:
            check_int64(c)
    elif isinstance(u, ExplicitUser):
        if u.default < 0:
            raise WSPError("negative-weight", where)
        for mask, w in u.table:
            if mask & ~full:
                raise WSPError("dangling-step", where)
            if w < 0:
                raise WSPError("negative-weight", where)
            if mask == 0 and w != 0:
                raise WSPError("nonzero-empty-weight", f"{where}: omega(empty set) must be 0")
            check_int64(w)
    else:
        raise WSPError("bad-user", f"{where}: unsupported user spec {type(u).__name__}")


# ---------------------------------------------------------------------------
# Plans and patterns


@dataclass(frozen=True)
class Plan:
    """A (partial) plan; ``assignment[s]`` is a user index or ``None``."""

    assignment: tuple[int | None, ...]
    omega_C: int | None = None
    omega_A: int | None = None

    @property
    def complete(self) -> bool:
        return all(u is not None for u in self.assignment)

    def blocks(self) -> dict[int, int]:
        """Map user -> mask of the steps that user performs."""
        inv: dict[int, int] = {}
        for s, u in enumerate(self.assignment):
            if u is not None:
                inv[u] = inv.get(u, 0) | 1 << s
        return inv

    def pattern(self) -> "Pattern":
        return Pattern.from_blocks(self.blocks().values())

    def describe(self, schema: Schema | None = None) -> str:
        parts = []
        for s, u in enumerate(self.assignment):
            name = "-" if u is None else (schema.user_name(u) if schema else f"u{u + 1}")
            parts.append(f"s{s + 1}:{name}")
        return " ".join(parts)


@dataclass(frozen=True)
class Pattern:
    """A partition of the assigned steps into blocks, ordered by minimum step."""

    blocks: tuple[int, ...]

    @classmethod
    def from_blocks(cls, blocks: Iterable[int]) -> "Pattern":
        blocks = [b for b in blocks]
        seen = 0
        for b in blocks:
            if b == 0:
                raise WSPError("bad-pattern", "empty block")
            if b & seen:
                raise WSPError("bad-pattern", "blocks overlap")
            seen |= b
        return cls(tuple(sorted(blocks, key=lambda b: b & -b)))

    @property
    def assigned(self) -> int:
        m = 0
        for b in self.blocks:
            m |= b
        return m

    def __len__(self) -> int:
        return len(self.blocks)

    def restricted_growth(self, k: int) -> tuple[int | None, ...]:
        label = [None] * k
        for q, b in enumerate(self.blocks):
            for s in steps_of(b):
                label[s] = q
        return tuple(label)


def blocks_meeting(blocks: Iterable[int], scope: int) -> int:
    return sum(1 for b in blocks if b & scope)


def constraint_weight_of_pattern(c: WeightedConstraint, P: Pattern) -> int:
    if c.scope & ~P.assigned:
        raise WSPError("partial-scope", "pattern does not assign the whole scope")
    return c.weight_for_count(blocks_meeting(P.blocks, c.scope))


def constraint_weight(schema: Schema, P: Pattern) -> int:
    return sum(constraint_weight_of_pattern(c, P) for c in schema.constraints)


def plan_weights(schema: Schema, plan: Plan | Sequence[int]) -> tuple[int, int]:
    """Return ``(omega_C, omega_A)`` of a complete plan."""
    assignment = plan.assignment if isinstance(plan, Plan) else tuple(plan)
    if len(assignment) != schema.k or any(u is None for u in assignment):
        raise WSPError("incomplete-plan", "every step must be assigned")
    inv: dict[int, int] = {}
    for s, u in enumerate(assignment):
        if not 0 <= u < schema.n:
            raise WSPError("dangling-user", f"s{s + 1} -> user index {u}")
        inv[u] = inv.get(u, 0) | 1 << s
    omega_A = sum(schema.auth_weight(T, u) for u, T in inv.items())
    omega_C = constraint_weight(schema, Pattern.from_blocks(inv.values()))
    return check_int64(omega_C), check_int64(omega_A)


def make_plan(schema: Schema, assignment: Sequence[int]) -> Plan:
    wc, wa = plan_weights(schema, assignment)
    return Plan(tuple(assignment), wc, wa)


# ---------------------------------------------------------------------------
# Instance documents


def _user_to_doc(u: UserSpec, k: int) -> dict:
    if isinstance(u, StaffUser):
        return {"kind": "staff", "A": _one_based(u.A), "B": _one_based(u.B), "sigma": u.sigma}
    if isinstance(u, ConsultantUser):
        return {"kind": "consultant", "B": _one_based(u.B), "sigma": u.sigma}
    if isinstance(u, LinearUser):
        return {"kind": "linear", "costs": list(u.costs)}
    return {
        "kind": "explicit",
        "default": u.default,
        "table": [[_one_based(mask), w] for mask, w in u.table],
    }


def _one_based(mask: int) -> list[int]:
    return [s + 1 for s in steps_of(mask)]


def _constraint_to_doc(c: WeightedConstraint) -> dict:
    doc = {"kind": c.kind, "scope": _one_based(c.scope)}
    if c.r is not None:
        doc["r"] = c.r
    doc["table"] = list(c.table)
    return doc


def schema_to_doc(schema: Schema) -> dict:
    users = []
    for u, spec in enumerate(schema.users):
        d = _user_to_doc(spec, schema.k)
        if schema.user_names:
            d = {"name": schema.user_names[u], **d}
        users.append(d)
    return {
        "k": schema.k,
        "order": [[i + 1, j + 1] for i, j in sorted(schema.order)],
        "users": users,
        "constraints": [_constraint_to_doc(c) for c in schema.constraints],
        "auth": {"kind": "per-user", "M": schema.M},
        "weight_scale": schema.weight_scale,
        "bounds": {"BA": schema.BA, "BC": schema.BC},
    }


def save_instance(schema: Schema) -> bytes:
    return (json.dumps(schema_to_doc(schema), indent=1) + "\n").encode("utf-8")


class _Reader:
    """Field access with JSON-path diagnostics."""

    def __init__(self, k: int):
        self.k = k

    def int_(self, v, where: str, minimum: int | None = 0) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise WSPError("bad-document", f"{where}: expected integer, got {v!r}")
        if minimum is not None and v < minimum:
            code = "negative-weight" if minimum == 0 else "bad-document"
            raise WSPError(code, f"{where}: {v} < {minimum}")
        return v

    def steps(self, v, where: str) -> int:
        if not isinstance(v, list):
            raise WSPError("bad-document", f"{where}: expected list of steps")
        mask = 0
        for i, s in enumerate(v):
            s = self.int_(s, f"{where}[{i}]", minimum=None)
            if not 1 <= s <= self.k:
                raise WSPError("dangling-step", f"{where}[{i}]: step {s} not in 1..{self.k}")
            mask |= 1 << (s - 1)
        return mask


def _field(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise WSPError("bad-document", f"{where}: missing field {key!r}")
    return doc[key]


def schema_from_doc(doc: dict) -> Schema:
    k = _field(doc, "k", "$")
    rd = _Reader(k if isinstance(k, int) else 0)
    k = rd.int_(k, "$.k", minimum=1)
    order = []
    for i, pair in enumerate(_field(doc, "order", "$")):
        where = f"$.order[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise WSPError("bad-document", f"{where}: expected [i, j]")
        a = rd.int_(pair[0], where + "[0]", minimum=None)
        b = rd.int_(pair[1], where + "[1]", minimum=None)
        if not (1 <= a <= k and 1 <= b <= k):
            raise WSPError("dangling-step", f"{where}: ({a},{b})")
        if a == b:
            raise WSPError("cyclic-order", f"{where}: s{a} < s{a}")
        order.append((a - 1, b - 1))

    auth = _field(doc, "auth", "$")
    if _field(auth, "kind", "$.auth") != "per-user":
        raise WSPError("bad-document", f"$.auth.kind: unknown {auth['kind']!r}")
    M = rd.int_(_field(auth, "M", "$.auth"), "$.auth.M", minimum=1)

    users, names = [], []
    for i, ud in enumerate(_field(doc, "users", "$")):
        where = f"$.users[{i}]"
        kind = _field(ud, "kind", where)
        if "name" in ud:
            names.append(str(ud["name"]))
        if kind == "staff":
            users.append(StaffUser(
                rd.steps(_field(ud, "A", where), where + ".A"),
                rd.steps(_field(ud, "B", where), where + ".B"),
                rd.int_(_field(ud, "sigma", where), where + ".sigma"),
            ))
        elif kind == "consultant":
            users.append(ConsultantUser(
                rd.steps(_field(ud, "B", where), where + ".B"),
                rd.int_(_field(ud, "sigma", where), where + ".sigma"),
            ))
        elif kind == "linear":
            costs = _field(ud, "costs", where)
            if not isinstance(costs, list) or len(costs) != k:
                raise WSPError("bad-document", f"{where}.costs: expected {k} entries")
            users.append(LinearUser(tuple(rd.int_(c, f"{where}.costs[{j}]") for j, c in enumerate(costs))))
        elif kind == "explicit":
            table = {}
            for j, entry in enumerate(_field(ud, "table", where)):
                ew = f"{where}.table[{j}]"
                if not isinstance(entry, list) or len(entry) != 2:
                    raise WSPError("bad-document", f"{ew}: expected [steps, weight]")
                mask = rd.steps(entry[0], ew + "[0]")
                w = rd.int_(entry[1], ew + "[1]")
                if mask == 0 and w != 0:
                    raise WSPError("nonzero-empty-weight", f"{ew}: omega(empty set, u) must be 0")
                table[mask] = w
            table.pop(0, None)
            users.append(ExplicitUser(tuple(sorted(table.items())), rd.int_(_field(ud, "default", where), where + ".default")))
        else:
            raise WSPError("bad-document", f"{where}.kind: unknown user kind {kind!r}")
    if names and len(names) != len(users):
        raise WSPError("bad-document", "$.users: names must be given for all users or none")

    constraints = []
    for i, cd in enumerate(_field(doc, "constraints", "$")):
        where = f"$.constraints[{i}]"
        kind = _field(cd, "kind", where)
        if kind not in CONSTRAINT_KINDS:
            raise WSPError("unknown-constraint-kind", f"{where}.kind: {kind!r}")
        scope = rd.steps(_field(cd, "scope", where), where + ".scope")
        table = _field(cd, "table", where)
        if not isinstance(table, list):
            raise WSPError("bad-document", f"{where}.table: expected list")
        table = tuple(rd.int_(w, f"{where}.table[{j}]") for j, w in enumerate(table))
        r = cd.get("r")
        if r is not None:
            r = rd.int_(r, where + ".r", minimum=1)
        c = WeightedConstraint(kind, scope, table, r)
        _validate_constraint(c, k, where)
        constraints.append(c)

    bounds = _field(doc, "bounds", "$")
    return Schema(
        k=k,
        users=tuple(users),
        constraints=tuple(constraints),
        order=frozenset(order),
        M=M,
        weight_scale=rd.int_(_field(doc, "weight_scale", "$"), "$.weight_scale", minimum=1),
        BA=rd.int_(_field(bounds, "BA", "$.bounds"), "$.bounds.BA"),
        BC=rd.int_(_field(bounds, "BC", "$.bounds"), "$.bounds.BC"),
        user_names=tuple(names) if names else None,
    )


def load_instance(data: bytes | str) -> Schema:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WSPError("bad-document", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return schema_from_doc(doc)


def read_instance(path) -> Schema:
    with open(path, "rb") as fh:
        return load_instance(fh.read())


def write_instance(schema: Schema, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_instance(schema))
