"""Rerun the pendulum and Campbell-Moore convergence tables next to the published values.

    python scripts/reproduce_tables.py [--which pendulum3 pendulum5 campbell-moore]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from lsqdae.metrics import run_convergence_study
from lsqdae.problems import campbell_moore, pendulum

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import reference_tables as ref  # noqa: E402

NAMES = ["x", "x'", "y", "y'", "lambda"]


def _side_by_side(n_list, ours, published, names):
    head = "| n | " + " | ".join(f"{c} | {c} (pub) | ratio" for c in names) + " |"
    lines = [head, "|" + "---|" * (1 + 3 * len(names))]
    for n, a, b in zip(n_list, ours, published):
        cells = " | ".join(f"{x:.2e} | {y:.2e} | {x / y:.2f}" for x, y in zip(a, b))
        lines.append(f"| {n} | {cells} |")
    return "\n".join(lines)


def pendulum_table(N):
    n_list = ref.PENDULUM_N3_N if N == 3 else ref.PENDULUM_N5_N
    published = ref.PENDULUM_N3_ERR if N == 3 else ref.PENDULUM_N5_ERR
    st = run_convergence_study(pendulum(), N, N + 1, "uniform", n_list)
    E = st.error_matrix(h1d=False)[:, ref.PENDULUM_COLUMNS]
    print(f"\n## pendulum, N={N}, M={N + 1} uniform\n")
    print(_side_by_side(n_list, E, published, NAMES))
    print("\norders (ours):")
    for n, o in zip(n_list[1:], np.log2(E[:-1] / E[1:])):
        print(f"  {n:4d}  " + "  ".join(f"{v:5.1f}" for v in o))


def campbell_moore_table():
    prob = campbell_moore()
    n_list = ref.CAMPBELL_MOORE_N[:5]
    cols = []
    for N in range(1, 6):
        st = run_convergence_study(prob, N, N + 1, "gauss", n_list)
        cols.append([r.h1d for r in st.rows])
    ours = np.array(cols).T
    print("\n## Campbell-Moore, H1_D errors, M=N+1 Gauss\n")
    print(_side_by_side(n_list, ours, ref.CAMPBELL_MOORE_H1D[:5], [f"N={N}" for N in range(1, 6)]))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--which", nargs="+", default=["pendulum3", "pendulum5", "campbell-moore"],
                   choices=["pendulum3", "pendulum5", "campbell-moore"])
    args = p.parse_args(argv)
    for w in args.which:
        t0 = time.perf_counter()
        if w == "campbell-moore":
            campbell_moore_table()
        else:
            pendulum_table(int(w[-1]))
        print(f"\n({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
