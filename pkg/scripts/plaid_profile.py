"""Per-pattern sup of the chi pieces for the plaid set, with the predicted exponents."""
import argparse

from sparse_ergodic.random_sparse import PlaidConfig, pattern_order_violations, plaid_profile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.4)
    ap.add_argument("--jmin", type=int, default=6)
    ap.add_argument("--jmax", type=int, default=10)
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    prof = plaid_profile(PlaidConfig(2, a.alpha, a.seed, a.jmin, a.jmax), trials=a.trials)
    pats = sorted(prof.exponents, key=lambda I: (len(I), I))
    print("pattern  exponent  " + "  ".join(f"j={j:<8d}" for j in range(a.jmin, a.jmax + 1)))
    for I in pats:
        cells = []
        for j in range(a.jmin, a.jmax + 1):
            v = max(prof.sups[(t, j)][I] for t in range(a.trials))
            cells.append(f"{v:10.3e}")
        print(f"{str(I):8s} {prof.exponents[I]:+8.2f}  " + "  ".join(cells))
    print("reconstruction exact:", all(prof.reconstruction.values()))
    for t in range(a.trials):
        print(f"trial {t} ordering violations at j={a.jmax}:", pattern_order_violations(prof.sups[(t, a.jmax)]))


if __name__ == "__main__":
    main()
