"""Fitted log2-slopes of the punctured sup of nu_j * nu~_j for the speckled set.

Usage: python3 scripts/speckled_slopes.py [--jmax 10] [--trials 20] [--gamma 0.8]
"""
import argparse

import numpy as np

from sparse_ergodic.random_sparse import SpeckledConfig, cancellation_profile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--gamma", type=float, default=0.8)
    ap.add_argument("--jmin", type=int, default=6)
    ap.add_argument("--jmax", type=int, default=10)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    prof = cancellation_profile(SpeckledConfig(a.d, a.gamma, a.seed, a.jmin, a.jmax), trials=a.trials)
    target = prof.expected_slope
    print(f"expected slope {target:+.3f}  (threshold {target + 0.15:+.3f})")
    slopes = [s for s in prof.slopes if s is not None]
    for t, s in enumerate(prof.slopes):
        print(f"trial {t:2d}  slope {'n/a' if s is None else f'{s:+.3f}'}")
    if slopes:
        arr = np.array(slopes)
        print(f"mean {arr.mean():+.3f}  sd {arr.std():.3f}  below threshold {np.sum(arr <= target + 0.15)}/{len(arr)}")


if __name__ == "__main__":
    main()
