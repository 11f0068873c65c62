"""
The discrete subordinator tau_n = R_1 + ... + R_n: truncated law, tail,
tail asymptotics and sampling.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import fft as sp_fft
from scipy.special import gamma

from .bernstein import Family, eval_psi
from .errors import DomainError

logger = logging.getLogger('subwalk')

DIRECT_CONVOLUTION_SIZE = 1024
NEGATIVE_ROUNDOFF = -1e-12
TAIL_DRAW_CAP = 2 ** 52
CHUNK_REPLICAS = 4096
DRAWS_PER_BLOCK = 2 ** 20


@dataclass(frozen=True)
class SubordinatorTable:
    """Law of tau_n up to K: ``pmf[k]`` is P(tau_n = k) for k = 0..K (zero below n)."""
    n: int
    pmf: np.ndarray
    tail_mass: float
    K: int
    coeffs: object


def _convolve(a, b, K, workers):
    if K + 1 <= DIRECT_CONVOLUTION_SIZE:
        return np.convolve(a, b)[:K + 1]
    size = 1 << int(math.ceil(math.log2(2 * (K + 1))))
    fa = sp_fft.rfft(a, size, workers=workers)
    fb = fa if b is a else sp_fft.rfft(b, size, workers=workers)
    out = sp_fft.irfft(fa * fb, size, workers=workers)[:K + 1]
    low = out.min()
    if low < NEGATIVE_ROUNDOFF:
        logger.warning('tau_pmf: FFT round-off %.3g below %.0e clamped at 0', low, NEGATIVE_ROUNDOFF)
    return np.clip(out, 0.0, None)


def tau_pmf(coeffs, n, K=None, workers=1):
    """
    P(tau_n = k) for k <= K by repeated squaring of the coefficient sequence.

    Coefficients beyond ``coeffs.K`` count as missing mass, so ``tail_mass``
    covers the truncation of c and of tau_n together.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer, got %r" % (n,))
    n = int(n)
    K = coeffs.K if K is None else int(K)
    if K < n:
        raise DomainError("K=%d must be at least n=%d" % (K, n))
    base = np.zeros(K + 1)
    m = min(K, coeffs.K)
    base[:m + 1] = coeffs.c[:m + 1]
    result = None
    power = n
    while power:
        if power & 1:
            result = base.copy() if result is None else _convolve(result, base, K, workers)
        power >>= 1
        if power:
            base = _convolve(base, base, K, workers)
    tail = max(0.0, 1.0 - float(np.sum(result)))
    logger.debug('tau_pmf: n=%d K=%d tail_mass=%.3g', n, K, tail)
    result.setflags(write=False)
    return SubordinatorTable(n=n, pmf=result, tail_mass=tail, K=K, coeffs=coeffs)


def tau_tail(table, t):
    """G_n(t) = P(tau_n > t), counting the untabulated mass as tail."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t >= table.K:
        return table.tail_mass
    return max(0.0, 1.0 - float(np.sum(table.pmf[:int(math.floor(t)) + 1])))


def tail_bracket(table, t):
    """(lower, upper) bounds on the true tail; they coincide when nothing is truncated."""
    upper = tau_tail(table, t)
    return max(0.0, upper - table.tail_mass), upper


def tail_predictor(spec, n, t):
    """n psi(1/t) / Gamma(1 - alpha/2)."""
    if not t > 0:
        raise DomainError("t must be positive")
    return n * eval_psi(spec, 1.0 / t) / gamma(1.0 - spec.index)


class StepSampler(object):
    """
    Draws of R with P(R = k) = c(psi, k): inverse CDF on the table, and for the
    stable family the closed-form tail k^(-alpha/2) / Gamma(1 - alpha/2)
    beyond it. Other families redraw whatever lands in the untabulated mass.
    """

    def __init__(self, coeffs):
        self.coeffs = coeffs
        self.cdf = np.cumsum(coeffs.c)
        self.K = coeffs.K
        self.analytic_tail = coeffs.spec.family is Family.STABLE
        if self.analytic_tail:
            self.tail_scale = gamma(1.0 - coeffs.spec.index)
            self.tail_power = -1.0 / coeffs.spec.index
        self.rejected = 0
        self.drawn = 0

    def draw(self, rng, size):
        u = rng.random(size)
        k = np.searchsorted(self.cdf, u, side='right')
        beyond = k > self.K
        if np.any(beyond):
            if self.analytic_tail:
                tail = np.floor(((1.0 - u[beyond]) * self.tail_scale) ** self.tail_power)
                k[beyond] = np.clip(tail, self.K + 1, TAIL_DRAW_CAP).astype(np.int64)
            else:
                count = int(beyond.sum())
                self.rejected += count
                k[beyond] = self.draw(rng, count)
        self.drawn += int(np.size(u))
        return k

    @property
    def rejection_rate(self):
        return self.rejected / self.drawn if self.drawn else 0.0


def sum_steps(sampler, rng, n, replicas):
    total = np.zeros(replicas, dtype=np.int64)
    block = max(1, DRAWS_PER_BLOCK // max(replicas, 1))
    done = 0
    while done < n:
        steps = min(block, n - done)
        total += sampler.draw(rng, (replicas, steps)).sum(axis=1)
        done += steps
    return total


def sample_tau(coeffs, n, seed):
    """One draw of tau_n from ``default_rng(seed)``; tau_0 = 0."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 0
    sampler = StepSampler(coeffs)
    value = int(sum_steps(sampler, np.random.default_rng(seed), int(n), 1)[0])
    if sampler.rejected:
        logger.warning('sample_tau: %d tail draws rejected (rate %.3g)', sampler.rejected, sampler.rejection_rate)
    return value


def chunk_rng(seed, chunk):
    """Generator for one chunk of replicas; independent of how chunks are spread over workers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def chunks(replicas, size=CHUNK_REPLICAS):
    return [(i, min(size, replicas - start)) for i, start in enumerate(range(0, replicas, size))]


def sample_tau_many(coeffs, n, replicas, seed, threads=1):
    """``replicas`` independent draws of tau_n, chunked over ``threads`` workers."""
    def run(chunk, size):
        sampler = StepSampler(coeffs)
        return sum_steps(sampler, chunk_rng(seed, chunk), int(n), size), sampler.rejected, sampler.drawn

    results = Parallel(n_jobs=threads, prefer="threads")(
        delayed(run)(chunk, size) for chunk, size in chunks(replicas)
    )
    rejected = sum(r for _, r, _ in results)
    if rejected:
        logger.warning('sample_tau_many: %d of %d tail draws rejected',
                       rejected, sum(d for _, _, d in results))
    if not results:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([draws for draws, _, _ in results])


def laplace_transform(spec, n, lam):
    """E exp(-lam tau_n) = (1 - psi(1 - exp(-lam)))^n."""
    return (1.0 - eval_psi(spec, -np.expm1(-np.asarray(lam, dtype=float)))) ** n
