"""Command-line interface: ``bowsp <command> ...``.

Exit codes: 0 on success, 2 when a solve finds no plan within the bounds,
1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import multiprocessing as mp
import statistics
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import apps, gen, mipbridge, resdec
from .core import WSPError, load_instance, save_instance
from .epsfront import BoundedMinimizeQuery, OracleBackend, PatternBackend, eps_front, oracle_front
from .pareto import ParetoFront
from .pbb import PatternBranchAndBound, enumeration_front

log = logging.getLogger("bowsp")

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2
SOLVERS = ("pbb", "eps", "enum", "oracle")
BACKENDS = ("pattern", "oracle", "external")


@dataclass
class RunReport:
    instance_digest: str
    solver: str
    backend: str | None
    points: list[dict]
    nodes: int | None = None
    queries: int | None = None
    wall_time_s: float = 0.0
    prunes: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _write_bytes(path, data: bytes) -> None:
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise WSPError("unreadable-file", f"{path}: {exc.strerror}") from None


def _backend(name: str):
    return {"pattern": PatternBackend, "oracle": OracleBackend, "external": mipbridge.ExternalBackend}[name]()


def run_solver(schema, solver: str, backend: str = "pattern", workers: int = 1, order: str = "heuristic"):
    """Return ``(front, nodes, queries, prunes)``."""
    if solver == "pbb":
        bb = PatternBranchAndBound(schema, order=order)
        front = bb.solve(workers=workers)
        return front, bb.stats.nodes, None, dict(sorted(bb.stats.prunes.items()))
    if solver == "eps":
        trace: list = []
        be = _backend(backend)
        front = eps_front(schema, be, trace)
        return front, getattr(be, "nodes", None), len(trace), {}
    if solver == "enum":
        return enumeration_front(schema), None, None, {}
    if solver == "oracle":
        return oracle_front(schema), None, None, {}
    raise WSPError("bad-flag", f"unknown solver {solver!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    data = _read(args.instance)
    schema = load_instance(data)
    schema = schema.with_bounds(BA=args.ba, BC=args.bc)
    t0 = time.perf_counter()
    front, nodes, queries, prunes = run_solver(schema, args.solver, args.backend, args.workers, args.order)
    wall = time.perf_counter() - t0
    csv_text = front.to_csv(schema)
    out = args.out
    _write_text(out, csv_text)
    report = RunReport(
        instance_digest="sha256:" + hashlib.sha256(data).hexdigest(),
        solver=args.solver,
        backend=args.backend if args.solver == "eps" else None,
        points=[{"omega_C": p.omega_C, "omega_A": p.omega_A, "plan": p.plan.describe(schema)} for p in front],
        nodes=nodes, queries=queries, wall_time_s=round(wall, 6), prunes=prunes,
        bounds={"BA": schema.BA, "BC": schema.BC},
    )
    report_path = args.report or (None if out in (None, "-") else str(out) + ".report.json")
    if report_path:
        _write_text(report_path, json.dumps(asdict(report), indent=1) + "\n")
    if args.plot:
        from .plotting import plot_front
        plot_front(front, args.plot, title=Path(args.instance).name, scale=schema.weight_scale)
    log.info("%s: %d points in %.3fs", args.solver, len(front), wall)
    return EXIT_OK if len(front) else EXIT_EMPTY


def cmd_generate(args) -> int:
    params = gen.GenParams(k=args.k, d=args.d, e=args.e, seed=args.seed, staff=args.staff,
                           consultants=args.consultants, counting=args.counting,
                           scope_size=args.scope_size, BA=args.ba, BC=args.bc)
    _write_bytes(args.out, save_instance(gen.generate(params)))
    return EXIT_OK


def cmd_worstcase(args) -> int:
    _write_bytes(args.out, save_instance(gen.worst_case_family(args.k)))
    return EXIT_OK


def cmd_fixture(args) -> int:
    from importlib import resources
    data = resources.files("bowsp").joinpath("data/purchase_order.json").read_bytes()
    _write_bytes(args.out, data)
    return EXIT_OK


def cmd_cmup(args) -> int:
    schema = load_instance(_read(args.instance))
    res = apps.cmup_binary_search(schema)
    print(f"users={res.users} calls={res.calls}")
    print(res.plan.describe(schema))
    return EXIT_OK


def cmd_mincost(args) -> int:
    schema = load_instance(_read(args.instance))
    costs = tuple(int(c) for c in args.costs.split(",")) if args.costs else (1,) * schema.n
    plan, total = apps.min_user_cost(schema, apps.UserCostModel(costs))
    print(f"cost={total}")
    print(plan.describe(schema))
    return EXIT_OK


def cmd_resilient_plan(args) -> int:
    if args.example:
        schema, model = apps.availability_example()
    else:
        if not args.instance or not args.model:
            raise WSPError("bad-flag", "give an instance and --model, or --example")
        schema = load_instance(_read(args.instance))
        model = apps.AvailabilityModel.from_json(_read(args.model))
    front, points = apps.resilient_plan(schema, model, args.budget)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega_C", "omega_A", "expected_unexecuted", "success_bound", "plan"])
    for p in points:
        exp = "" if p.expected_failures is None else f"{float(p.expected_failures):.6g}"
        bound = "" if p.success_bound is None else f"{float(p.success_bound):.6g}"
        w.writerow([p.omega_C, p.omega_A, exp, bound, p.plan.describe(schema)])
    _write_text(args.out, buf.getvalue())
    if args.plot:
        from .plotting import plot_front
        plot_front(front, args.plot, title="availability", scale=model.scale)
    return EXIT_OK if points else EXIT_EMPTY


def cmd_resilient(args) -> int:
    schema = load_instance(_read(args.instance))
    res = resdec.check_resilient(schema, args.t, args.flavor, budget=args.budget,
                                 use_marking=not args.no_marking)
    verdict = "resilient" if res.resilient else "not resilient"
    print(f"{args.flavor} t={args.t}: {verdict} ({res.families_checked} families checked, "
          f"{len(res.users_considered)} users after marking)")
    if res.counterexample is not None:
        print("counterexample: " + res.counterexample.describe(schema))
    return EXIT_OK


def cmd_mip(args) -> int:
    schema = load_instance(_read(args.instance))
    if args.mip_cmd == "emit":
        q = BoundedMinimizeQuery(args.alpha, args.a, args.b if args.b is not None else schema.BA,
                                 args.c, args.d if args.d is not None else schema.BC)
        _write_text(args.out, mipbridge.emit_model(schema, q))
        return EXIT_OK
    model = mipbridge.parse_lp(_read(args.model).decode("utf-8"))
    plan, wc, wa = mipbridge.import_solution(schema, model, _read(args.solution).decode("utf-8"))
    print(f"omega_C={wc} omega_A={wa}")
    print(plan.describe(schema))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _bench_one(queue, schema_bytes: bytes, solver: str, backend: str):
    schema = load_instance(schema_bytes)
    t0 = time.perf_counter()
    front, *_ = run_solver(schema, solver, backend)
    queue.put((time.perf_counter() - t0, len(front)))


def _timed_run(schema_bytes: bytes, solver: str, backend: str, timeout: float):
    """``(seconds, front size)`` or ``None`` when censored by the timeout."""
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    queue = ctx.Queue()
    proc = ctx.Process(target=_bench_one, args=(queue, schema_bytes, solver, backend))
    proc.start()
    proc.join(timeout)
    if proc.is_alive():
        proc.terminate()
        proc.join()
        return None
    return None if queue.empty() else queue.get()


def parse_range(text: str) -> list[int]:
    for sep in ("..", "-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def bench_rows(ks, densities, es, reps, solvers, backend="pattern", timeout=600.0, seed0=0,
               jobs: int = 1) -> list[dict]:
    from concurrent.futures import ThreadPoolExecutor

    tasks = []
    for k in ks:
        for dens in densities:
            for e in es:
                instances = [save_instance(gen.generate(gen.GenParams(k=k, d=dens * k, e=e, seed=seed0 + r)))
                             for r in range(reps)]
                for solver in solvers:
                    tasks.append(((k, dens, e, solver), instances))
    flat = [(key, inst) for key, insts in tasks for inst in insts]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda kv: _timed_run(kv[1], kv[0][3], backend, timeout), flat))
    grouped: dict[tuple, list] = {}
    for (key, _), res in zip(flat, results):
        grouped.setdefault(key, []).append(res)
    rows = []
    for (k, dens, e, solver), res in grouped.items():
        done = [r for r in res if r is not None]
        rows.append({
            "k": k, "d": dens, "e": e, "solver": solver, "reps": len(res),
            "completed": len(done), "censored": len(res) - len(done),
            # censored runs count as "at least the timeout" in the median
            "median_s": f"{statistics.median([r[0] if r else timeout for r in res]):.6f}" if res else "",
            "median_front": statistics.median([r[1] for r in done]) if done else "",
        })
    return rows


def cmd_bench(args) -> int:
    rows = bench_rows(parse_range(args.k_range), [float(x) for x in args.density.split(",")],
                      [float(x) for x in args.e.split(",")], args.reps, args.solver.split(","),
                      args.backend, args.timeout, args.seed, args.jobs)
    buf = io.StringIO()
    cols = ["k", "d", "e", "solver", "reps", "completed", "censored", "median_s", "median_front"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write_text(args.out, buf.getvalue())
    if args.plot:
        from .plotting import plot_bench
        plot_bench(rows, args.plot)
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for an empty front."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bowsp", description=__doc__.splitlines()[0])
    p.add_argument("--log", default="warning", help="logging level")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute the Pareto front of an instance")
    s.add_argument("instance")
    s.add_argument("--solver", choices=SOLVERS, default="pbb")
    s.add_argument("--backend", choices=BACKENDS, default="pattern", help="bounded minimizer for --solver eps")
    s.add_argument("--ba", type=int, help="authorization weight bound (overrides the instance)")
    s.add_argument("--bc", type=int, help="constraint weight bound (overrides the instance)")
    s.add_argument("--out", default="-", help="front CSV (default stdout)")
    s.add_argument("--report", help="run report JSON (default <out>.report.json)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--order", choices=("heuristic", "index", "random"), default="heuristic")
    s.add_argument("--plot", help="write a front figure (PNG/PDF/SVG by extension)")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="seeded random instance")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--d", type=float, required=True, help="mean authorized-set size")
    g.add_argument("--e", type=float, required=True, help="fraction of step pairs with SoD")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--staff", type=int)
    g.add_argument("--consultants", type=int, default=10)
    g.add_argument("--counting", type=int)
    g.add_argument("--scope-size", type=int, default=5)
    g.add_argument("--ba", type=int, default=1000)
    g.add_argument("--bc", type=int, default=1000)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    w = sub.add_parser("worstcase", help="instance whose front has one point per set partition")
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_worstcase)

    f = sub.add_parser("fixture", help="the purchase-order example instance")
    f.add_argument("--out", default="-")
    f.set_defaults(func=cmd_fixture)

    b = sub.add_parser("bench", help="median wall times over generated instances")
    b.add_argument("--k-range", default="8..14")
    b.add_argument("--density", default="0.1", help="authorization density(ies); d = density * k")
    b.add_argument("--e", default="0.3")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--solver", default="pbb", help="comma-separated solvers")
    b.add_argument("--backend", choices=BACKENDS, default="pattern")
    b.add_argument("--timeout", type=float, default=600.0, help="seconds per run")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", default="-")
    b.add_argument("--plot")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cmup", help="fewest users in a valid plan")
    c.add_argument("instance")
    c.set_defaults(func=cmd_cmup)

    m = sub.add_parser("mincost", help="valid plan of least total user cost")
    m.add_argument("instance")
    m.add_argument("--costs", help="comma-separated per-user costs (default all 1)")
    m.set_defaults(func=cmd_mincost)

    r = sub.add_parser("resilient-plan", help="availability-aware front with success bounds")
    r.add_argument("instance", nargs="?")
    r.add_argument("--model", help="availability model JSON")
    r.add_argument("--example", action="store_true", help="use the built-in purchase-order model")
    r.add_argument("--budget", type=int, default=0, help="allowed constraint weight")
    r.add_argument("--out", default="-")
    r.add_argument("--plot")
    r.set_defaults(func=cmd_resilient_plan)

    t = sub.add_parser("resilient", help="decide t-resiliency")
    t.add_argument("instance")
    t.add_argument("--t", type=int, required=True)
    t.add_argument("--flavor", choices=resdec.FLAVORS, default="static")
    t.add_argument("--budget", type=int, default=resdec.DEFAULT_BUDGET)
    t.add_argument("--no-marking", action="store_true")
    t.set_defaults(func=cmd_resilient)

    x = sub.add_parser("mip", help="LP model export and solution import")
    xs = x.add_subparsers(dest="mip_cmd", required=True, parser_class=_Parser)
    e = xs.add_parser("emit")
    e.add_argument("instance")
    e.add_argument("--alpha", type=int, choices=(0, 1), default=0)
    e.add_argument("--a", type=int, default=0)
    e.add_argument("--b", type=int)
    e.add_argument("--c", type=int, default=0)
    e.add_argument("--d", type=int)
    e.add_argument("--out", default="-")
    i = xs.add_parser("import")
    i.add_argument("instance")
    i.add_argument("model")
    i.add_argument("solution")
    x.set_defaults(func=cmd_mip)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log.upper(), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except WSPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
