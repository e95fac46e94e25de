import csv
import io
import json
import subprocess
import sys

import pytest

from bowsp import gen
from bowsp.cli import main, parse_range
from bowsp.core import save_instance
from bowsp.mipbridge import build_model, format_solution, forced_values, parse_lp
from bowsp.epsfront import BoundedMinimizeQuery


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def fx_path(tmp_path):
    p = tmp_path / "po.json"
    p.write_bytes(save_instance(gen.load_fixture()))
    return p


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_fixture(capsys, fx_path, tmp_path):
    code, out, _ = run(capsys, "solve", fx_path)
    assert code == 0
    r = rows(out)
    assert [(x["omega_C"], x["omega_A"]) for x in r] == [("0", "0")]
    out_csv = tmp_path / "front.csv"
    code, _, _ = run(capsys, "solve", fx_path, "--out", out_csv, "--plot", tmp_path / "front.png")
    assert code == 0
    report = json.loads((tmp_path / "front.csv.report.json").read_text())
    assert report["solver"] == "pbb" and report["nodes"] > 0
    assert report["instance_digest"].startswith("sha256:")
    assert report["points"][0]["omega_A"] == 0
    assert (tmp_path / "front.png").read_bytes()[:4] == b"\x89PNG"


@pytest.mark.parametrize("solver", ["pbb", "eps", "enum", "oracle"])
def test_worstcase_all_solvers(capsys, tmp_path, solver):
    inst = tmp_path / "w4.json"
    assert run(capsys, "worstcase", "--k", 4, "--out", inst)[0] == 0
    code, out, _ = run(capsys, "solve", inst, "--solver", solver)
    assert code == 0 and len(rows(out)) == 15


def test_generate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(capsys, "generate", "--k", 9, "--d", 0.9, "--e", 0.3, "--seed", 42, "--out", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    run(capsys, "generate", "--k", 9, "--d", 0.9, "--e", 0.3, "--seed", 43, "--out", b)
    assert a.read_bytes() != b.read_bytes()


def test_workers_and_solvers_agree(capsys, tmp_path):
    inst = tmp_path / "g.json"
    run(capsys, "generate", "--k", 5, "--d", 1.5, "--e", 0.5, "--seed", 3, "--staff", 8,
        "--consultants", 2, "--counting", 2, "--scope-size", 4, "--out", inst)
    outs = {}
    for extra in [("--workers", 1), ("--workers", 4), ("--solver", "oracle"), ("--solver", "eps"),
                  ("--solver", "eps", "--backend", "external")]:
        code, out, _ = run(capsys, "solve", inst, *extra)
        assert code in (0, 2)
        outs[extra] = out
    assert outs[("--workers", 1)] == outs[("--workers", 4)]
    weights = {k: [(r["omega_C"], r["omega_A"]) for r in rows(v)] for k, v in outs.items()}
    assert len(set(map(tuple, weights.values()))) == 1


def test_empty_front_exit_2(capsys, tmp_path):
    inst = tmp_path / "u.json"
    inst.write_bytes(save_instance(gen.load_fixture().without_users([5])))
    code, out, _ = run(capsys, "solve", inst, "--ba", 0, "--bc", 0)
    assert code == 2 and rows(out) == []


def test_errors_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert run(capsys, "solve", bad)[0] == 1
    assert run(capsys, "solve", tmp_path / "missing.json")[0] == 1
    assert run(capsys, "generate", "--k", 1, "--d", 1, "--e", 0.3)[0] == 1
    with pytest.raises(SystemExit) as e:
        main(["solve"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["solve", str(bad), "--solver", "magic"])
    assert e.value.code == 1


def test_module_entry_point(tmp_path):
    inst = tmp_path / "po.json"
    p = subprocess.run([sys.executable, "-m", "bowsp", "fixture", "--out", str(inst)])
    assert p.returncode == 0
    p = subprocess.run([sys.executable, "-m", "bowsp", "solve", str(inst), "--ba", "0", "--bc", "0"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.splitlines()[1].startswith("0,0,")
    p = subprocess.run([sys.executable, "-m", "bowsp", "bogus"], capture_output=True, text=True)
    assert p.returncode == 1


def test_apps_commands(capsys, fx_path):
    code, out, _ = run(capsys, "cmup", fx_path)
    assert code == 0 and out.startswith("users=3 ")
    code, out, _ = run(capsys, "mincost", fx_path)
    assert code == 0 and out.startswith("cost=3")
    code, out, _ = run(capsys, "mincost", fx_path, "--costs", "1,1,1,1,1,1,1,50")
    assert code == 0 and out.startswith("cost=52")


def test_resilient_plan_example(capsys, tmp_path):
    code, out, _ = run(capsys, "resilient-plan", "--example", "--budget", 1)
    assert code == 0
    best = min(rows(out), key=lambda r: int(r["omega_A"]))
    assert best["omega_A"] == "10" and best["success_bound"] == "0.9"
    assert run(capsys, "resilient-plan")[0] == 1


def test_resilient_plan_model_file(capsys, tmp_path):
    from bowsp import apps
    schema, model = apps.availability_example()
    inst, mfile = tmp_path / "i.json", tmp_path / "m.json"
    inst.write_bytes(save_instance(schema))
    mfile.write_text(model.to_json())
    code, out, _ = run(capsys, "resilient-plan", inst, "--model", mfile, "--budget", 0,
                       "--plot", tmp_path / "r.svg")
    assert code == 0 and min(int(r["omega_A"]) for r in rows(out)) == 14
    assert (tmp_path / "r.svg").exists()


def test_resilient_command(capsys, fx_path):
    code, out, _ = run(capsys, "resilient", fx_path, "--t", 0, "--flavor", "dynamic")
    assert code == 0 and "dynamic t=0: resilient" in out
    code, out, _ = run(capsys, "resilient", fx_path, "--t", 1)
    assert code == 0 and "not resilient" in out and "counterexample: U1=" in out
    assert run(capsys, "resilient", fx_path, "--t", 2, "--flavor", "dynamic", "--budget", 5, "--no-marking")[0] == 1


def test_mip_round_trip(capsys, fx_path, tmp_path):
    lp = tmp_path / "m.lp"
    assert run(capsys, "mip", "emit", fx_path, "--out", lp)[0] == 0
    model = parse_lp(lp.read_text())
    schema = gen.load_fixture()
    sol = tmp_path / "m.sol"
    sol.write_text(format_solution(forced_values(schema, model, (0, 5, 0, 1, 5, 7))))
    code, out, _ = run(capsys, "mip", "import", fx_path, lp, sol)
    assert code == 0 and out.startswith("omega_C=0 omega_A=0")
    sol.write_text("x_s1_u1 1\n")
    assert run(capsys, "mip", "import", fx_path, lp, sol)[0] == 1
    # emitting is stable
    run(capsys, "mip", "emit", fx_path, "--out", tmp_path / "m2.lp")
    assert (tmp_path / "m2.lp").read_text() == lp.read_text()


def test_bench_small(capsys, tmp_path):
    out = tmp_path / "b.csv"
    code, _, _ = run(capsys, "bench", "--k-range", "6..7", "--density", "0.3", "--e", "0.3", "--reps", 2,
                     "--solver", "pbb,eps", "--timeout", 60, "--out", out, "--plot", tmp_path / "b.png")
    assert code == 0
    r = rows(out.read_text())
    assert len(r) == 4
    assert all(x["completed"] == "2" and x["censored"] == "0" for x in r)
    assert (tmp_path / "b.png").exists()


def test_bench_censoring(capsys, tmp_path):
    out = tmp_path / "b.csv"
    run(capsys, "bench", "--k-range", "14", "--reps", 1, "--timeout", 0.01, "--out", out)
    r = rows(out.read_text())[0]
    assert r["censored"] == "1" and float(r["median_s"]) == pytest.approx(0.01)


def test_parse_range():
    assert parse_range("8..10") == [8, 9, 10]
    assert parse_range("3-4") == [3, 4]
    assert parse_range("5,7") == [5, 7]
