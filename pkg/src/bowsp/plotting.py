"""Static figures for the report path (written to files, never shown)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .pareto import ParetoFront  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def plot_front(front: ParetoFront, path, title: str = "", scale: int = 1) -> None:
    """Staircase of the front, omega_A against omega_C."""
    pts = front.weights()
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        if pts:
            xs = [c for c, _ in pts]
            ys = [a / scale for _, a in pts]
            ax.step(xs, ys, where="post", color="0.6", lw=0.8)
            ax.plot(xs, ys, "o", ms=4, color="C0")
        ax.set_xlabel(r"$\omega_C$")
        ax.set_ylabel(r"$\omega_A$" if scale == 1 else rf"$\omega_A$ / {scale}")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_bench(rows: list[dict], path, value: str = "median_s") -> None:
    """Median wall time per k, one line per (solver, d, e)."""
    series: dict[tuple, list[tuple[int, float]]] = {}
    for r in rows:
        if r.get(value) in (None, ""):
            continue
        series.setdefault((r["solver"], r["d"], r["e"]), []).append((int(r["k"]), float(r[value])))
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for (solver, d, e), pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, label=f"{solver} d={d} e={e}")
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel("median wall time (s)")
        if series:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
