"""Monte Carlo estimates of E cos((g, X_h^N)) against the exact discrete law,
and coupled-refinement strong errors against the exact strong error."""
import argparse
import math

from weakspde import covariance as cov
from weakspde.fem1d import build_spectral_space
from weakspde.laws import Functional, discrete_law, expect_functional, strong_error_sq
from weakspde.montecarlo import NoiseStream, SchemeSampler, coupled_refinement_error, mc_expect
from weakspde.spectral import ThetaScheme, build_dirichlet_laplacian_1d


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    m = build_dirichlet_laplacian_1d(args.K)
    sp = build_spectral_space(args.K, m)
    Q = cov.white(m)
    stream = NoiseStream(args.seed)
    phi = Functional.cosine([3.0, 1.0])
    print(f"{'N':>5}{'MC':>12}{'stderr':>11}{'exact':>12}{'z':>7}{'E|Xc-Xf|^2':>14}{'exact e(N)^2':>14}")
    for N in (8, 16, 32, 64):
        sc = ThetaScheme(1.0, 1.0, N)
        est, se = mc_expect(SchemeSampler(sp, Q, sc, None, stream), phi, args.paths, args.jobs)
        exact = expect_functional(discrete_law(sp, Q, sc, None), phi)
        c = coupled_refinement_error(sp, sp, Q, ThetaScheme(1.0, 1.0, 2 * N), sc, stream, args.paths, n_jobs=args.jobs)
        e2 = strong_error_sq(m, sp, Q, sc, None)
        print(f"{N:5d}{est:12.6f}{se:11.2e}{exact:12.6f}{(est - exact) / se:7.2f}{c.estimate:14.4e}{e2:14.4e}")


if __name__ == "__main__":
    main()
