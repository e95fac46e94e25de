import itertools
import random

import pytest

from bowsp import gen
from bowsp.core import (
    ConsultantUser,
    LinearUser,
    Schema,
    StaffUser,
    WSPError,
    at_least,
    at_most,
    binding_of_duty,
    explicit_constraint,
    plan_weights,
    separation_of_duty,
)
from bowsp.epsfront import BoundedMinimizeQuery, OracleBackend, eps_front, oracle_front
from bowsp.mipbridge import (
    ExternalBackend,
    build_model,
    emit_model,
    evaluate_model,
    forced_values,
    format_solution,
    import_solution,
    parse_lp,
    parse_name,
    violated_rows,
)
from conftest import corpus

Q = BoundedMinimizeQuery(0, 0, 1000, 0, 1000)


def mixed_schema():
    """Every user and constraint kind the model can encode, on 4 steps."""
    users = (
        StaffUser(A=0b0011, B=0b0100, sigma=7),
        StaffUser(A=0b1100, B=0b0011, sigma=5),
        ConsultantUser(B=0b0110, sigma=12),
        LinearUser((3, 0, 9, 1)),
    )
    constraints = (
        separation_of_duty(0, 1, 40),
        binding_of_duty(2, 3, 25),
        at_most([0, 1, 2, 3], 2, {3: 4, 4: 11}),
        at_least([0, 1, 2], 3, {1: 30, 2: 2}),
        explicit_constraint([1, 2, 3], (5, 0, 8)),
    )
    return Schema(k=4, users=users, constraints=constraints, M=100, BA=1000, BC=1000)


def test_trivial_model():
    s = Schema(k=1, users=(LinearUser((0,)), LinearUser((1,))))
    m = build_model(s, Q)
    assert sorted(m.binaries) == ["x_s1_u1", "x_s1_u2"]
    assert [r.name for r in m.rows if r.name.startswith("assign")] == ["assign_s1"]


def test_sod_rows_and_objective():
    n = 3
    s = Schema(k=2, users=tuple(LinearUser((0, 0)) for _ in range(n)),
               constraints=(separation_of_duty(0, 1, 1000),))
    m = build_model(s, Q)
    ge = [r for r in m.rows if r.name.startswith("c1_ge_u")]
    assert len(ge) == n
    assert ge[0].coeffs == {"p_c1": 1, "x_s1_u1": -1, "x_s2_u1": -1} and ge[0].rhs == -1
    assert m.omega_C == {"p_c1": 1000}
    text = emit_model(s, Q)
    assert " c1_ge_u1: 1 p_c1 - 1 x_s1_u1 - 1 x_s2_u1 >= -1" in text


def test_explicit_user_has_no_encoding():
    with pytest.raises(WSPError) as e:
        build_model(gen.worst_case_family(3), Q)
    assert e.value.code == "no-linear-encoding"


@pytest.mark.parametrize("schema", [mixed_schema(), gen.purchase_order_fixture(),
                                    *corpus(6, start=300)])
def test_encoding_faithful_to_plan_weights(schema):
    m = build_model(schema, Q)
    plans = list(itertools.product(range(schema.n), repeat=schema.k))
    rng = random.Random(schema.k * 1000 + schema.n)
    if len(plans) > 4000:
        plans = rng.sample(plans, 4000)
    box_rows = {"box_A_hi", "box_C_hi", "bound:wA", "bound:wC"}
    flip_sample = set(rng.sample(range(len(plans)), min(150, len(plans))))
    for i, plan in enumerate(plans):
        vals = forced_values(schema, m, plan)
        wc, wa = plan_weights(schema, plan)
        assert evaluate_model(m, vals) == (wa, wc)
        assert set(violated_rows(m, vals)) <= box_rows
        if i not in flip_sample:
            continue
        # no other value of any auxiliary is feasible: flip each in turn
        for v in m.variables:
            if v.startswith("x_") or v in ("wA", "wC") or v.startswith("one_"):
                continue
            flipped = dict(vals)
            flipped[v] = 1 - vals[v]
            assert set(violated_rows(m, flipped)) - box_rows, v


def test_names_reversible():
    m = build_model(mixed_schema(), Q)
    assert len(set(m.variables)) == len(m.variables)
    assert parse_name("x_s2_u5") == ("x", (1, 4))
    assert parse_name("z_u3_c4") == ("z", (2, 3))
    assert parse_name("p4_c2") == ("p", (4, 1))
    for v in m.variables:
        parse_name(v)


def test_lp_text_round_trip():
    m = build_model(mixed_schema(), BoundedMinimizeQuery(1, 3, 500, 1, 900))
    text = m.to_lp()
    back = parse_lp(text)
    assert back.variables and set(back.variables) == set(m.variables)
    assert back.binaries == m.binaries
    assert [(r.name, r.coeffs, r.sense, r.rhs) for r in back.rows] == \
        [(r.name, r.coeffs, r.sense, r.rhs) for r in m.rows]
    assert back.alpha == 1
    assert emit_model(mixed_schema(), Q) == emit_model(mixed_schema(), Q)


def _exhaustive_optimum(schema, m, q):
    """Best plan of the model by enumerating every 0/1 assignment matrix."""
    best = None
    for plan in itertools.product(range(schema.n), repeat=schema.k):
        vals = forced_values(schema, m, plan)
        if violated_rows(m, vals):
            continue
        obj = vals["wA"] if q.alpha == 0 else vals["wC"]
        if best is None or obj < best[0]:
            best = (obj, vals)
    return best


K4 = [gen.generate(gen.small_params(4, seed, n=5, d=0.6, e=0.5, M=30)) for seed in (7, 8, 9)]


@pytest.mark.parametrize("schema", [mixed_schema(), *K4])
def test_round_trip_matches_true_bounded_minimum(schema):
    oracle = OracleBackend()
    for q in [BoundedMinimizeQuery(0, 0, 1000, 0, 1000), BoundedMinimizeQuery(1, 0, 1000, 0, 1000),
              BoundedMinimizeQuery(0, 5, 200, 1, 60), BoundedMinimizeQuery(1, 10, 90, 0, 1000)]:
        m = build_model(schema, q)
        got = _exhaustive_optimum(schema, m, q)
        want = oracle.solve(schema, q)
        assert (got is None) == (want is None)
        if got is None:
            continue
        plan, wc, wa = import_solution(schema, m, format_solution(got[1]))
        assert (wc, wa) == plan_weights(schema, plan)
        assert q.admits(wc, wa)
        assert (wa if q.alpha == 0 else wc) == (want[2] if q.alpha == 0 else want[1])


def test_import_fixture_tau():
    s = gen.purchase_order_fixture()
    m = build_model(s, Q)
    tau = (0, 5, 0, 1, 5, 7)
    plan, wc, wa = import_solution(s, m, format_solution(forced_values(s, m, tau)))
    assert plan.assignment == tau and (wc, wa) == (0, 0)


def test_import_one_step():
    s = Schema(k=1, users=(LinearUser((0,)), LinearUser((1,))))
    m = build_model(s, Q)
    plan, wc, wa = import_solution(s, m, "x_s1_u1 1\nx_s1_u2 0\nwA 0\nwC 0\n")
    assert plan.assignment == (0,) and (wc, wa) == (0, 0)


def test_import_errors():
    s = Schema(k=2, users=(LinearUser((0, 0)), LinearUser((1, 1))), constraints=(separation_of_duty(0, 1, 9),))
    m = build_model(s, Q)
    with pytest.raises(WSPError) as e:
        import_solution(s, m, "x_s1_u1 1\nx_s1_u2 0\nx_s2_u1 0\nx_s2_u2 0\n")
    assert e.value.code == "infeasible-solution-file"
    with pytest.raises(WSPError) as e:
        import_solution(s, m, "x_s1_u1 0.5\nx_s1_u2 0.5\nx_s2_u1 0\nx_s2_u2 1\n")
    assert e.value.code == "infeasible-solution-file"
    with pytest.raises(WSPError) as e:
        # the plan splits the SoD pair, so p_c1 must be 0
        import_solution(s, m, "x_s1_u1 1\nx_s1_u2 0\nx_s2_u1 0\nx_s2_u2 1\np_c1 1\n")
    assert e.value.code == "inconsistent-solution"
    with pytest.raises(WSPError) as e:
        import_solution(s, m, "x_s1_u1 1 extra\n")
    assert e.value.code == "bad-solution"


@pytest.mark.parametrize("schema", [mixed_schema(), gen.purchase_order_fixture(), *corpus(8, start=500)])
def test_external_backend_front(schema):
    assert eps_front(schema, ExternalBackend()).weight_set() == oracle_front(schema).weight_set()
