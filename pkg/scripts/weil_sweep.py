"""Weil bound check for the moment curve over all primes up to pmax."""
import argparse

from sparse_ergodic.arith import weil_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pmax", type=int, default=61)
    ap.add_argument("--m", type=int, nargs="+", default=[2, 3])
    a = ap.parse_args()
    worst = 0.0
    for r in weil_sweep(a.m, a.pmax):
        ratio = r.max_nonzero / r.bound
        worst = max(worst, ratio)
        print(f"p={r.p:4d} m={r.m}  max {r.max_nonzero:.5f}  bound {r.bound:.5f}  ratio {ratio:.3f}"
              f"  {'ok' if r.passed else 'VIOLATED'}")
    print(f"worst ratio {worst:.3f}")


if __name__ == "__main__":
    main()
