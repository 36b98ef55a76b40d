"""Smallest singular value of the collocation Jacobian on linear chains of index 1..4.

The fitted log-log slope in the H1_D norm is expected near ``mu - 1``.
"""

import argparse

from lsqdae.metrics import run_sv_scan
from lsqdae.problems import linear_chain


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--nodes", default="uniform", choices=["uniform", "gauss"])
    p.add_argument("--n-list", default="16,32,64,128")
    p.add_argument("--norms", nargs="+", default=["h1d", "l2", "coeff"])
    args = p.parse_args(argv)
    n_list = [int(v) for v in args.n_list.split(",")]
    print("mu  " + "  ".join(f"{nm:>7s}" for nm in args.norms))
    for mu in (1, 2, 3, 4):
        prob = linear_chain(mu)
        slopes = [run_sv_scan(prob, args.N, args.N + 1, args.nodes, n_list, norm=nm).slope for nm in args.norms]
        print(f"{mu:2d}  " + "  ".join(f"{s:7.2f}" for s in slopes))


if __name__ == "__main__":
    main()
