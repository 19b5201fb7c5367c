"""Word-ball growth in the discrete Heisenberg group against Z^2."""
import argparse

from sparse_ergodic.groups import heis3, word_ball_growth, zd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=18)
    a = ap.parse_args()
    for model in (zd(2), heis3()):
        rep = word_ball_growth(model, a.N)
        print(f"{rep.model}: inferred degree {rep.degree}")
        for N in range(1, a.N + 1):
            fol = f"{rep.folner[N - 1]:.4f}" if N <= len(rep.folner) else "-"
            print(f"  N={N:3d}  #A^N={rep.sizes[N]:8d}  ratio {rep.ratios[N - 1]:.4f}  folner {fol}")


if __name__ == "__main__":
    main()
