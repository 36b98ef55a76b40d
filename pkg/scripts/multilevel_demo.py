"""Warm-started nested refinement against independent cold rows on the pendulum."""

import argparse

from lsqdae.collocation import make_scheme
from lsqdae.mesh import AnsatzSpace, interpolate, make_uniform_partition
from lsqdae.metrics import run_convergence_study
from lsqdae.multilevel import MultilevelConfig, multilevel_solve
from lsqdae.problems import pendulum


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--n0", type=int, default=10)
    args = p.parse_args(argv)
    prob = pendulum()
    sys = prob.sys
    n_list = [args.n0 * 2 ** i for i in range(args.levels)]
    cold = run_convergence_study(prob, args.N, args.N + 1, "uniform", n_list)
    space = AnsatzSpace(make_uniform_partition(sys.a, sys.b, args.n0), args.N, sys.m, sys.k)
    x0 = interpolate(space, lambda t: sys.reference_batch(t)[0], vectorized=True)
    warm = multilevel_solve(sys, make_scheme(args.N + 1, "uniform", N=args.N), space, x0,
                            MultilevelConfig(levels=args.levels))
    print("   n  cold iters  warm iters  cold err    warm err    psi at warm start")
    for row, lvl in zip(cold.rows, warm):
        print(f"{row.n:4d}  {row.gn_iters:10d}  {lvl.trace.iterations:10d}  "
              f"{row.h1d:.3e}   {lvl.errors.h1d:.3e}   {lvl.psi_warm_start:.2e}")
    print(f"total iterations: cold {sum(r.gn_iters for r in cold.rows)}, "
          f"warm {sum(lvl.trace.iterations for lvl in warm)}")


if __name__ == "__main__":
    main()
