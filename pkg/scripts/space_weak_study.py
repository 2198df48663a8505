"""Space weak order for P1 elements: fully discrete error at a pinned N next to
the time-continuous (semi-discrete) error, to show how much of the total is
time error."""
import argparse

from weakspde import covariance as cov
from weakspde.fem1d import build_p1_space
from weakspde.laws import Functional, continuous_law, discrete_law, expect_functional, semidiscrete_law
from weakspde.spectral import ThetaScheme, build_dirichlet_laplacian_1d
from weakspde.study import fit_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=512)
    ap.add_argument("--N", type=int, default=4096)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--M", type=int, nargs="+", default=[4, 8, 16, 32])
    args = ap.parse_args()

    m = build_dirichlet_laplacian_1d(args.K)
    Q = cov.white(m)
    sc = ThetaScheme(args.theta, 1.0, args.N)
    for name, phi in (("cos(x_1)", Functional.cosine([1.0])), ("exp(-|x|^2)", Functional.gaussian())):
        ref = expect_functional(continuous_law(m, Q, None, 1.0), phi)
        full, semi = [], []
        print(f"\n{name}, N={args.N}, theta={args.theta}")
        print(f"{'M':>4}{'fully discrete':>18}{'time-continuous':>18}")
        for M in args.M:
            sp = build_p1_space(M, m)
            full.append(abs(expect_functional(discrete_law(sp, Q, sc, None), phi) - ref))
            semi.append(abs(expect_functional(semidiscrete_law(sp, Q, None, 1.0), phi) - ref))
            print(f"{M:>4}{full[-1]:18.6e}{semi[-1]:18.6e}")
        sf = fit_rate([(1 / M, e) for M, e in zip(args.M, full)])[0]
        ss = fit_rate([(1 / M, e) for M, e in zip(args.M, semi)])[0]
        print(f"slope{sf:17.4f}{ss:18.4f}")


if __name__ == "__main__":
    main()
