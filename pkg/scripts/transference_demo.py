"""Distribution of the maximal function on a torus shift versus its lift to Z^2."""
import argparse

import numpy as np

from sparse_ergodic.dynamics import ball_family, transference_check


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--R", type=int, default=1)
    a = ap.parse_args()
    F = np.zeros((a.L, a.L), dtype=np.int64)
    F[0, 0] = 1
    F[a.L // 3, a.L // 5] = 1
    rep = transference_check(a.L, ball_family(2, range(a.R + 1)), F, K=a.K)
    print(f"edge factor {rep.edge_factor} = {float(rep.edge_factor):.4f}; interior agrees: {rep.interior_agrees}")
    for row in rep.rows:
        print(f"lambda {str(row.lam):5s}  torus {row.dyn_count:6d}  bound {float(row.bound):10.2f}  {'ok' if row.holds else 'FAIL'}")


if __name__ == "__main__":
    main()
