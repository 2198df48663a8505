"""Table of N * sup_z |e^{-Nz} - F(z)^N| for several theta."""
import argparse
import math

from weakspde.spectral import leroux_gap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta", type=float, nargs="+", default=[0.6, 0.75, 1.0])
    ap.add_argument("--max-power", type=int, default=10)
    args = ap.parse_args()
    Ns = [2**k for k in range(0, args.max_power + 1)]
    print("N".rjust(6) + "".join(f"{'theta=' + str(t):>14}" for t in args.theta))
    for N in Ns:
        print(f"{N:6d}" + "".join(f"{N * leroux_gap(t, N):14.6f}" for t in args.theta))
    # large-N limit of N*gap: 4 (theta - 1/2) e^{-2}
    print("limit " + "".join(f"{4 * (t - 0.5) * math.exp(-2):14.6f}" for t in args.theta))


if __name__ == "__main__":
    main()
