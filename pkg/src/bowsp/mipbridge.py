"""Mixed-integer model of a bounded minimization query, as LP-format text.

The model follows the textbook encodings (staff members are linear,
consultants use "touches anything" / "touches outside B" indicators,
separation of duty uses a same-user indicator, counting constraints use
per-user scope indicators and count thresholds).  All linking rows are
two-sided, so every auxiliary is forced by ``x``.  The box rows bound the
weights from below as well as above, and with one-sided links a solver
could inflate an auxiliary just to reach a lower bound.

:class:`ExternalBackend` runs the emitted text through SciPy's HiGHS
interface, which plays the part of an external MIP solver.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BOD,
    SOD,
    ConsultantUser,
    LinearUser,
    Plan,
    Schema,
    StaffUser,
    WSPError,
    plan_weights,
    steps_of,
)
from .epsfront import BoundedMinimizeQuery, Result

INTEGRALITY_TOL = 1e-6
_LINE = 200


@dataclass
class Row:
    name: str
    coeffs: dict[str, int]
    sense: str  # "<=", ">=", "="
    rhs: int


@dataclass
class MipModel:
    """Variables, rows and the two weight expressions of one query."""

    alpha: int
    variables: list[str] = field(default_factory=list)
    binaries: set[str] = field(default_factory=set)
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    omega_A: dict[str, int] = field(default_factory=dict)
    omega_C: dict[str, int] = field(default_factory=dict)
    header: list[str] = field(default_factory=list)

    def var(self, name: str, binary: bool = False, lb: int = 0, ub: int = 1) -> str:
        if name in self.bounds:
            raise ValueError(f"duplicate variable {name}")
        self.variables.append(name)
        self.bounds[name] = (lb, ub)
        if binary:
            self.binaries.add(name)
        return name

    def row(self, name: str, coeffs: dict[str, int], sense: str, rhs: int) -> None:
        self.rows.append(Row(name, {v: c for v, c in coeffs.items() if c}, sense, rhs))

    @property
    def objective(self) -> dict[str, int]:
        obj = {v: 0 for v in ("wA", "wC")}
        obj["wA" if self.alpha == 0 else "wC"] = 1
        return obj

    def to_lp(self) -> str:
        out = io.StringIO()
        for line in self.header:
            out.write(f"\\ {line}\n")
        out.write("Minimize\n")
        obj = self.objective
        out.write(f" obj: {obj['wA']} wA + {obj['wC']} wC\n")
        out.write("Subject To\n")
        for r in self.rows:
            out.write(_format_row(r))
        out.write("Bounds\n")
        for v in self.variables:
            lb, ub = self.bounds[v]
            if v in self.binaries and (lb, ub) == (0, 1):
                continue
            out.write(f" {lb} <= {v} <= {ub}\n")
        out.write("Binaries\n")
        names = [v for v in self.variables if v in self.binaries]
        for i in range(0, len(names), 8):
            out.write(" " + " ".join(names[i:i + 8]) + "\n")
        out.write("End\n")
        return out.getvalue()


def _format_row(r: Row) -> str:
    parts = []
    for v, c in r.coeffs.items():
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c)} {v}")
    if parts and parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    if not parts:
        parts = ["0 wA"]
    lines, cur = [], f" {r.name}:"
    for p in parts:
        if len(cur) + len(p) + 1 > _LINE:
            lines.append(cur)
            cur = "   "
        cur += " " + p
    cur += f" {r.sense} {r.rhs}"
    lines.append(cur)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Building the model


def _x(s: int, u: int) -> str:
    return f"x_s{s + 1}_u{u + 1}"


def build_model(schema: Schema, query: BoundedMinimizeQuery) -> MipModel:
    k, n, M = schema.k, schema.n, schema.M
    model = MipModel(query.alpha)
    model.header = [
        f"bounded minimization: alpha={query.alpha} omega_A in [{query.a}, {query.b}] omega_C in [{query.c}, {query.d}]",
        "objective (1 - alpha) wA + alpha wC; auxiliaries are linked from both sides",
        f"k={k} n={n} M={M}",
    ]
    for s in range(k):
        for u in range(n):
            model.var(_x(s, u), binary=True)
    for s in range(k):
        model.row(f"assign_s{s + 1}", {_x(s, u): 1 for u in range(n)}, "=", 1)

    A: dict[str, int] = {}
    for u, spec in enumerate(schema.users):
        if isinstance(spec, (StaffUser, LinearUser)):
            for s in range(k):
                c = spec.weight(1 << s, M)
                if c:
                    A[_x(s, u)] = c
        elif isinstance(spec, ConsultantUser):
            _consultant(model, A, spec, u, k, M)
        else:
            raise WSPError("no-linear-encoding", f"user u{u + 1} has an explicit set table")
    model.omega_A = A

    C: dict[str, int] = {}
    for i, c in enumerate(schema.constraints):
        steps = steps_of(c.scope)
        if c.kind in (SOD, BOD) and len(steps) == 2:
            _pairwise(model, C, c, i, steps, n)
        else:
            _counting(model, C, c, i, steps, n)
    model.omega_C = C

    # weight definitions and the box
    model.var("wA", lb=0, ub=max(query.b, 0))
    model.var("wC", lb=0, ub=max(query.d, 0))
    model.row("def_wA", {**A, "wA": -1}, "=", 0)
    model.row("def_wC", {**C, "wC": -1}, "=", 0)
    model.row("box_A_lo", {"wA": 1}, ">=", query.a)
    model.row("box_A_hi", {"wA": 1}, "<=", query.b)
    model.row("box_C_lo", {"wC": 1}, ">=", query.c)
    model.row("box_C_hi", {"wC": 1}, "<=", query.d)
    return model


def _consultant(model: MipModel, A, spec: ConsultantUser, u: int, k: int, M: int) -> None:
    p = model.var(f"p_u{u + 1}")
    q = model.var(f"q_u{u + 1}")
    for s in range(k):
        model.row(f"p_u{u + 1}_ge_s{s + 1}", {p: 1, _x(s, u): -1}, ">=", 0)
    model.row(f"p_u{u + 1}_le", {p: 1, **{_x(s, u): -1 for s in range(k)}}, "<=", 0)
    outside = [s for s in range(k) if not spec.B >> s & 1]
    for s in outside:
        model.row(f"q_u{u + 1}_ge_s{s + 1}", {q: 1, _x(s, u): -1}, ">=", 0)
    model.row(f"q_u{u + 1}_le", {q: 1, **{_x(s, u): -1 for s in outside}}, "<=", 0)
    A[p] = spec.sigma
    A[q] = M - spec.sigma


def _pairwise(model: MipModel, C, c, i: int, steps, n: int) -> None:
    """Same-user indicator for SoD, different-users indicator for BoD."""
    s, t = steps
    pc = model.var(f"p_c{i + 1}")
    for u in range(n):
        xs, xt = _x(s, u), _x(t, u)
        if c.kind == SOD:
            # pc = 1 iff some user does both steps
            model.row(f"c{i + 1}_ge_u{u + 1}", {pc: 1, xs: -1, xt: -1}, ">=", -1)
            model.row(f"c{i + 1}_le_u{u + 1}", {pc: 1, xs: 1, xt: -1}, "<=", 1)
        else:
            # pc = 1 iff the steps go to different users
            model.row(f"c{i + 1}_ge_u{u + 1}", {pc: 1, xs: -1, xt: 1}, ">=", 0)
            model.row(f"c{i + 1}_le_u{u + 1}", {pc: 1, xs: 1, xt: 1}, "<=", 2)
    C[pc] = c.table[0] if c.kind == SOD else c.table[1]


def _counting(model: MipModel, C, c, i: int, steps, n: int) -> None:
    size = len(steps)
    f = (None,) + c.table  # f[m] for m = 1..size
    count = {}
    for u in range(n):
        z = model.var(f"z_u{u + 1}_c{i + 1}")
        for s in steps:
            model.row(f"z_u{u + 1}_c{i + 1}_ge_s{s + 1}", {z: 1, _x(s, u): -1}, ">=", 0)
        model.row(f"z_u{u + 1}_c{i + 1}_le", {z: 1, **{_x(s, u): -1 for s in steps}}, "<=", 0)
        count[z] = 1
    if f[size] == 0:
        # p^m = [count <= m]; f(N) = sum_m (f(m) - f(m+1)) p^m
        for m in range(1, size):
            diff = f[m] - f[m + 1]
            if diff == 0:
                continue
            p = model.var(f"p{m}_c{i + 1}", binary=True)
            model.row(f"c{i + 1}_le{m}_hi", {**count, p: size - m}, "<=", size)
            model.row(f"c{i + 1}_le{m}_lo", {**count, p: m}, ">=", m + 1)
            C[p] = diff
    else:
        # p^m = [count >= m]; f(N) = f(1) + sum_m (f(m) - f(m-1)) p^m
        for m in range(2, size + 1):
            diff = f[m] - f[m - 1]
            if diff == 0:
                continue
            p = model.var(f"p{m}_c{i + 1}", binary=True)
            model.row(f"c{i + 1}_ge{m}_lo", {**count, p: -m}, ">=", 0)
            model.row(f"c{i + 1}_ge{m}_hi", {**count, p: -(size - m + 1)}, "<=", m - 1)
            C[p] = diff
        if f[1]:
            one = model.var(f"one_c{i + 1}", lb=1, ub=1)
            C[one] = f[1]


def emit_model(schema: Schema, query: BoundedMinimizeQuery) -> str:
    return build_model(schema, query).to_lp()


# ---------------------------------------------------------------------------
# Forced values and evaluation (encoding faithfulness)


def forced_values(schema: Schema, model: MipModel, plan) -> dict[str, int]:
    """Every variable's value implied by a complete plan."""
    assignment = plan.assignment if isinstance(plan, Plan) else tuple(plan)
    vals = {v: 0 for v in model.variables}
    for s, u in enumerate(assignment):
        vals[_x(s, u)] = 1
    C_val, A_val = plan_weights(schema, assignment)
    for v in model.variables:
        kind, idx = parse_name(v)
        if kind == "p_u":
            (u,) = idx
            vals[v] = int(any(a == u for a in assignment))
        elif kind == "q_u":
            (u,) = idx
            B = schema.users[u].B
            vals[v] = int(any(a == u and not B >> s & 1 for s, a in enumerate(assignment)))
    for i, c in enumerate(schema.constraints):
        steps = steps_of(c.scope)
        users = {assignment[s] for s in steps}
        N = len(users)
        if c.kind in (SOD, BOD) and len(steps) == 2:
            same = int(N == 1)
            vals[f"p_c{i + 1}"] = same if c.kind == SOD else 1 - same
            continue
        for u in users:
            vals[f"z_u{u + 1}_c{i + 1}"] = 1
        for v in model.variables:
            m = re.fullmatch(rf"p(\d+)_c{i + 1}", v)
            if m:
                lvl = int(m.group(1))
                vals[v] = int(N <= lvl) if c.table[-1] == 0 else int(N >= lvl)
        if f"one_c{i + 1}" in vals:
            vals[f"one_c{i + 1}"] = 1
    vals["wA"], vals["wC"] = A_val, C_val
    return vals


def evaluate_model(model: MipModel, values: dict[str, float]) -> tuple[float, float]:
    """(omega_A, omega_C) expressions of the model at ``values``."""
    a = sum(c * values.get(v, 0) for v, c in model.omega_A.items())
    c = sum(w * values.get(v, 0) for v, w in model.omega_C.items())
    return a, c


def violated_rows(model: MipModel, values: dict[str, float], tol: float = 1e-9) -> list[str]:
    bad = []
    for r in model.rows:
        lhs = sum(c * values.get(v, 0) for v, c in r.coeffs.items())
        if (r.sense == "<=" and lhs > r.rhs + tol) or (r.sense == ">=" and lhs < r.rhs - tol) \
                or (r.sense == "=" and abs(lhs - r.rhs) > tol):
            bad.append(r.name)
    for v, (lb, ub) in model.bounds.items():
        x = values.get(v, 0)
        if x < lb - tol or x > ub + tol:
            bad.append(f"bound:{v}")
    return bad


_NAME_PATTERNS = [
    ("x", re.compile(r"x_s(\d+)_u(\d+)")),
    ("p_u", re.compile(r"p_u(\d+)")),
    ("q_u", re.compile(r"q_u(\d+)")),
    ("p_c", re.compile(r"p_c(\d+)")),
    ("z", re.compile(r"z_u(\d+)_c(\d+)")),
    ("p", re.compile(r"p(\d+)_c(\d+)")),
    ("one", re.compile(r"one_c(\d+)")),
    ("w", re.compile(r"w([AC])")),
]


def parse_name(name: str) -> tuple[str, tuple]:
    """Reverse the naming scheme: ``x_s2_u5`` -> ``("x", (1, 4))`` (0-based)."""
    for kind, pat in _NAME_PATTERNS:
        m = pat.fullmatch(name)
        if m:
            if kind == "w":
                return kind, (m.group(1),)
            if kind == "p":
                return kind, (int(m.group(1)), int(m.group(2)) - 1)
            return kind, tuple(int(g) - 1 for g in m.groups())
    raise ValueError(f"unknown variable name {name!r}")


# ---------------------------------------------------------------------------
# Reading LP text and solution files


_TOKEN = re.compile(r"<=|>=|=|[+-]|[^\s+\-<>=]+")


def parse_lp(text: str) -> MipModel:
    """Read the LP subset this module writes (enough to hand it to a solver)."""
    section = None
    sections: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": [], "bin": []}
    heads = {"minimize": "obj", "subject to": "rows", "bounds": "bounds", "binaries": "bin", "end": None}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        if line.lower() in heads:
            section = heads[line.lower()]
            continue
        if section is None:
            raise WSPError("bad-lp", f"text outside a section: {line!r}")
        sections[section].append(line)

    obj_row = _parse_rows(" ".join(sections["obj"]))
    if len(obj_row) != 1:
        raise WSPError("bad-lp", "expected one objective")
    model = MipModel(alpha=1 if obj_row[0].coeffs.get("wC") else 0)
    rows = _parse_rows(" ".join(sections["rows"]))
    seen: dict[str, None] = {}
    for r in rows:
        for v in r.coeffs:
            seen.setdefault(v)
    for v in obj_row[0].coeffs:
        seen.setdefault(v)
    binaries = set(" ".join(sections["bin"]).split())
    bounds = {}
    for line in sections["bounds"]:
        m = re.fullmatch(r"(-?\d+)\s*<=\s*(\S+)\s*<=\s*(-?\d+)", line)
        if not m:
            raise WSPError("bad-lp", f"unsupported bound line {line!r}")
        bounds[m.group(2)] = (int(m.group(1)), int(m.group(3)))
        seen.setdefault(m.group(2))
    for v in binaries:
        seen.setdefault(v)
    for v in seen:
        lb, ub = bounds.get(v, (0, 1))
        model.var(v, binary=v in binaries, lb=lb, ub=ub)
    model.rows = rows
    return model


def _parse_rows(text: str) -> list[Row]:
    rows = []
    for chunk in re.split(r"\s(?=[A-Za-z_][\w]*:)", " " + text):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, _, body = chunk.partition(":")
        toks = _TOKEN.findall(body)
        coeffs: dict[str, int] = {}
        sense = rhs = None
        sign, coef = 1, None
        i = 0
        while i < len(toks):
            t = toks[i]
            if t in ("+", "-"):
                sign = -1 if t == "-" else 1
            elif t in ("<=", ">=", "="):
                sense = t
                rest = "".join(toks[i + 1:])
                rhs = int(rest)
                break
            elif re.fullmatch(r"\d+", t):
                coef = int(t)
            else:
                coeffs[t] = coeffs.get(t, 0) + sign * (1 if coef is None else coef)
                sign, coef = 1, None
            i += 1
        rows.append(Row(name.strip(), coeffs, sense or "=", rhs if rhs is not None else 0))
    return rows


def parse_solution(text: str) -> dict[str, float]:
    vals = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise WSPError("bad-solution", f"line {lineno}: expected 'name value'")
        try:
            vals[parts[0]] = float(parts[1])
        except ValueError:
            raise WSPError("bad-solution", f"line {lineno}: bad value {parts[1]!r}") from None
    return vals


def format_solution(values: dict[str, float]) -> str:
    return "".join(f"{v} {values[v]:.10g}\n" for v in values)


def import_solution(schema: Schema, model: MipModel, text: str) -> Result:
    """Plan from the ``x`` values, with weights recomputed from the schema."""
    vals = parse_solution(text)
    assignment = [None] * schema.k
    for s in range(schema.k):
        for u in range(schema.n):
            name = _x(s, u)
            if name not in vals:
                raise WSPError("infeasible-solution-file", f"no value for {name}")
            v = vals[name]
            if min(abs(v), abs(v - 1)) > INTEGRALITY_TOL:
                raise WSPError("infeasible-solution-file", f"{name} = {v} is not 0/1")
            if v > 0.5:
                if assignment[s] is not None:
                    raise WSPError("infeasible-solution-file", f"step s{s + 1} has two users")
                assignment[s] = u
        if assignment[s] is None:
            raise WSPError("infeasible-solution-file", f"step s{s + 1} has no user")
    forced = forced_values(schema, model, assignment)
    for v, want in forced.items():
        if v in ("wA", "wC") or v not in vals or v.startswith("x_"):
            continue
        if abs(vals[v] - want) > INTEGRALITY_TOL:
            raise WSPError("inconsistent-solution", f"{v} = {vals[v]} but the plan forces {want}")
    wc, wa = plan_weights(schema, assignment)
    return Plan(tuple(assignment), wc, wa), wc, wa


# ---------------------------------------------------------------------------
# A solver behind the LP text


def solve_lp(model: MipModel) -> dict[str, float] | None:
    """Optimal values for every variable, or ``None`` if infeasible."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    index = {v: j for j, v in enumerate(model.variables)}
    nv = len(index)
    c = np.zeros(nv)
    for v, w in model.objective.items():
        c[index[v]] = w
    A = lil_matrix((len(model.rows), nv))
    lo = np.empty(len(model.rows))
    hi = np.empty(len(model.rows))
    for i, r in enumerate(model.rows):
        for v, w in r.coeffs.items():
            A[i, index[v]] = w
        lo[i] = r.rhs if r.sense in (">=", "=") else -np.inf
        hi[i] = r.rhs if r.sense in ("<=", "=") else np.inf
    lb = np.array([model.bounds[v][0] for v in model.variables], dtype=float)
    ub = np.array([model.bounds[v][1] for v in model.variables], dtype=float)
    integrality = np.array([1 if v in model.binaries else 0 for v in model.variables])
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi), bounds=Bounds(lb, ub),
               integrality=integrality,
               options={"mip_rel_gap": 0.0, "presolve": True, "disp": False})
    if res.status == 2 or res.x is None:
        return None
    if res.status != 0:
        raise RuntimeError(f"MIP solver stopped: {res.message}")
    x = res.x
    return {v: float(x[j]) for v, j in index.items()}


class ExternalBackend:
    """Round trip through LP text: emit, read back, solve, write and import
    a ``name value`` solution file."""

    name = "external"

    def __init__(self, keep_files: bool = False):
        self.keep_files = keep_files
        self.files: list[tuple[str, str]] = []

    def solve(self, schema: Schema, query: BoundedMinimizeQuery) -> Result | None:
        if query.empty:
            return None
        model = build_model(schema, query)
        text = model.to_lp()
        values = solve_lp(parse_lp(text))
        if values is None:
            return None
        sol = format_solution(values)
        if self.keep_files:
            self.files.append((text, sol))
        plan, wc, wa = import_solution(schema, model, sol)
        return plan, wc, wa


__all__ = [
    "ExternalBackend", "MipModel", "Row", "build_model", "emit_model", "evaluate_model",
    "forced_values", "format_solution", "import_solution", "parse_lp", "parse_name",
    "parse_solution", "solve_lp", "violated_rows",
]
