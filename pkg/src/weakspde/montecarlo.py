"""Monte Carlo sampling of the theta-scheme with counter-based randomness.

Every standard normal is a pure function of (seed, path, step, mode), so
results do not depend on evaluation order or on how paths are split across
threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtri

from ._linalg import psd_power
from .covariance import CovarianceModel
from .fem1d import DiscreteSpace
from .laws import Functional, _pad
from .spectral import ThetaScheme

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

CHUNK = 4096  # paths per task; fixed so results do not depend on n_jobs


def philox4x32(counter, key, rounds: int = 10) -> tuple[np.ndarray, ...]:
    """Philox4x32 block function.

    ``counter`` is a 4-tuple of uint32 arrays (broadcastable), ``key`` a pair of
    uint32 scalars. Returns the four output words as uint64 arrays < 2^32.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@dataclass(frozen=True)
class NoiseStream:
    """Map (path, step, mode) -> N(0, 1) through Philox4x32-10.

    Counter words are (mode pair, step, path low 32 bits, path high 32 bits);
    the key is the 64-bit seed. Each pair of output words gives a 53-bit uniform
    in (0, 1), which is mapped through the inverse normal CDF (scipy's ndtri, a fixed rational
    approximation).
    """

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def key(self) -> tuple[int, int]:
        s = int(self.seed)
        return s & 0xFFFFFFFF, s >> 32

    def uniforms(self, paths, step: int, n_modes: int) -> np.ndarray:
        """Uniforms of shape (len(paths), n_modes).

        One block serves two modes: words (0, 1) give mode 2j and words (2, 3)
        give mode 2j+1, where j is the first counter word.
        """
        paths = np.asarray(paths, dtype=np.uint64)[:, None]
        pairs = np.arange((n_modes + 1) // 2, dtype=np.uint64)[None, :]
        w = philox4x32((pairs, np.uint64(step), paths & _MASK, paths >> _S32), self.key)
        out = np.empty((paths.shape[0], 2 * pairs.shape[1]))
        out[:, 0::2] = _to_unit(w[0], w[1])
        out[:, 1::2] = _to_unit(w[2], w[3])
        return out[:, :n_modes]

    def normals(self, paths, step: int, n_modes: int) -> np.ndarray:
        return ndtri(self.uniforms(paths, step, n_modes))

    def aggregated_normals(self, paths, coarse_step: int, n_modes: int, ratio: int) -> np.ndarray:
        """Normal for coarse step ``coarse_step`` (1-based) built from the ``ratio``
        fine steps it covers: sum of fine normals / sqrt(ratio)."""
        first = (coarse_step - 1) * ratio + 1
        acc = self.normals(paths, first, n_modes)
        for s in range(first + 1, first + ratio):
            acc = acc + self.normals(paths, s, n_modes)
        return acc if ratio == 1 else acc * (1.0 / math.sqrt(ratio))


def _to_unit(hi, lo) -> np.ndarray:
    """53-bit uniform in (0, 1) from two 32-bit words, never 0 or 1."""
    a = (hi >> np.uint64(5)).astype(np.float64)
    b = (lo >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b + 0.5) / 9007199254740992.0


class MCResult(NamedTuple):
    estimate: float
    stderr: float


class SchemeSampler:
    """Draws X_h^N for fixed (space, Q, scheme, x).

    noise="projected" draws dim(V_h) normals per step and colours them with the
    symmetric root of Gamma Q Gamma^T, which has the exact law of P_h Q^{1/2} chi.
    noise="ambient" draws K normals and applies Gamma Q^{1/2}; use it when paths
    in different spaces must share the same Brownian motion.
    """

    def __init__(self, space: DiscreteSpace, Q: CovarianceModel, scheme: ThetaScheme, x=None,
                 stream: NoiseStream | None = None, noise: str = "projected"):
        if noise not in ("projected", "ambient"):
            raise ValueError("noise must be 'projected' or 'ambient'")
        if Q.K != space.model.mode_count:
            raise ValueError("covariance and space use different truncations")
        self.space, self.Q, self.scheme = space, Q, scheme
        self.stream = stream if stream is not None else NoiseStream(0)
        self.noise = noise
        lam = space.eigenvalues
        self.F = scheme.amplification(lam)
        self.G = scheme.resolvent(lam)
        self.x0 = space.gamma @ _pad(x, space.model.mode_count)
        if noise == "projected":
            self.factor = psd_power(space.gamma @ Q.matrix @ space.gamma.T, 0.5)
        else:
            self.factor = space.gamma @ Q.sqrt
        self.n_noise = self.factor.shape[1]

    def _increments(self, paths, step: int, ratio: int) -> np.ndarray:
        if ratio == 1:
            return self.stream.normals(paths, step, self.n_noise)
        return self.stream.aggregated_normals(paths, step, self.n_noise, ratio)

    def sample(self, paths, ratio: int = 1) -> np.ndarray:
        """Endpoints xi^N for the given path ids, shape (len(paths), dim V_h).

        ``ratio`` > 1 feeds each step the aggregate of ``ratio`` finer steps of
        the same stream.
        """
        paths = np.asarray(paths, dtype=np.uint64)
        xi = np.tile(self.x0, (paths.size, 1))
        scale = math.sqrt(self.scheme.dt) * self.G
        noisy = np.any(self.factor)
        for n in range(1, self.scheme.N + 1):
            xi = xi * self.F
            if noisy:
                xi = xi + (self._increments(paths, n, ratio) @ self.factor.T) * scale
        return xi

    def sample_range(self, n_paths: int, n_jobs: int = 1, ratio: int = 1) -> np.ndarray:
        return _run_chunks(lambda ids: self.sample(ids, ratio), n_paths, n_jobs)


def _run_chunks(fn: Callable[[np.ndarray], np.ndarray], n_paths: int, n_jobs: int) -> np.ndarray:
    ids = [np.arange(a, min(a + CHUNK, n_paths), dtype=np.uint64) for a in range(0, n_paths, CHUNK)]
    if n_jobs <= 1 or len(ids) == 1:
        parts = [fn(c) for c in ids]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(fn, ids))
    return np.concatenate(parts, axis=0)


def simulate_scheme_path(space: DiscreteSpace, Q: CovarianceModel, scheme: ThetaScheme, x,
                         stream: NoiseStream, path_id: int) -> np.ndarray:
    """One sample of xi^N (discrete eigen-coordinates of X_h^N)."""
    return SchemeSampler(space, Q, scheme, x, stream).sample([path_id])[0]


def simulate_paths(space, Q, scheme, x, stream, n_paths: int, n_jobs: int = 1) -> np.ndarray:
    return SchemeSampler(space, Q, scheme, x, stream).sample_range(n_paths, n_jobs)


def _mean_stderr(values: np.ndarray) -> MCResult:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least 2 paths")
    est = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size))
    return MCResult(est, se)


def mc_expect(sampler: SchemeSampler, phi, n_paths: int, n_jobs: int = 1) -> MCResult:
    """Sample mean and standard error of phi(X_h^N) over paths 0..n_paths-1.

    ``phi`` is a Functional or any callable mapping an (M, dim) sample array to M values.
    """
    if n_paths < 2:
        raise ValueError("need at least 2 paths")
    X = sampler.sample_range(n_paths, n_jobs)
    if isinstance(phi, Functional):
        vals = phi.evaluate(X, sampler.space)
    else:
        vals = np.asarray(phi(X), dtype=float) * np.ones(X.shape[0])
    return _mean_stderr(vals)


def coupled_refinement_error(space_fine: DiscreteSpace, space_coarse: DiscreteSpace, Q: CovarianceModel,
                             scheme_fine: ThetaScheme, scheme_coarse: ThetaScheme, stream: NoiseStream,
                             n_paths: int, x=None, n_jobs: int = 1) -> MCResult:
    """MC estimate of E |X_coarse^N - X_fine^{N'}|_H^2 under shared Brownian increments.

    Both paths read the same stream; each coarse step sums the normals of the
    fine steps it covers. When the two spaces coincide the difference is taken
    exactly in discrete coordinates; otherwise both are mapped to the K sine
    modes and the noise is drawn in the K-dimensional ambient layout.
    """
    if scheme_fine.T != scheme_coarse.T or scheme_fine.theta != scheme_coarse.theta:
        raise ValueError("schemes must share T and theta")
    if scheme_fine.N % scheme_coarse.N:
        raise ValueError("fine step count must be an integer multiple of the coarse one")
    ratio = scheme_fine.N // scheme_coarse.N
    same = space_fine is space_coarse
    noise = "projected" if same else "ambient"
    fine = SchemeSampler(space_fine, Q, scheme_fine, x, stream, noise)
    coarse = SchemeSampler(space_coarse, Q, scheme_coarse, x, stream, noise)

    def diff_sq(ids):
        ids = np.asarray(ids, dtype=np.uint64)
        a = np.tile(fine.x0, (ids.size, 1))
        b = np.tile(coarse.x0, (ids.size, 1))
        sa = math.sqrt(scheme_fine.dt) * fine.G
        sb = math.sqrt(scheme_coarse.dt) * coarse.G
        inv = 1.0 / math.sqrt(ratio)
        for n in range(1, scheme_coarse.N + 1):
            agg = None
            for s in range((n - 1) * ratio + 1, n * ratio + 1):
                z = stream.normals(ids, s, fine.n_noise)
                a = a * fine.F + (z @ fine.factor.T) * sa
                agg = z if agg is None else agg + z
            # same arithmetic as NoiseStream.aggregated_normals
            b = b * coarse.F + ((agg if ratio == 1 else agg * inv) @ coarse.factor.T) * sb
        d = a - b if same else a @ space_fine.gamma - b @ space_coarse.gamma
        return np.sum(d * d, axis=1)

    return _mean_stderr(_run_chunks(diff_sq, n_paths, n_jobs))
