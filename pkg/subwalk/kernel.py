"""
The subordinated transition function p_psi(x, n): the time-average route
sum_k p(x, k) P(tau_n = k), the Fourier route through
Phi_psi = 1 - psi(1 - Phi), the smoothed kernel and endpoint simulation.
"""

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from joblib import Parallel, delayed
from scipy import fft as sp_fft

from .bernstein import eval_psi, eval_psi_complex, spatial_scale
from .errors import DomainError, NumericError, ResourceError
from .subordinator import StepSampler, sum_steps, chunk_rng, chunks
from .walk import TABLE_CAP, advance, analyze, check_table_size, one_minus_char_fn, origin_table

logger = logging.getLogger('subwalk')

CACHE_BUDGET = 2 ** 24
GRID_FLOOR = {1: 4096, 2: 64, 3: 16}
NEAR_PERIODIC = 1e-15


@dataclass(frozen=True)
class KernelTable:
    """p_psi(x, n) on a window of lattice points, one row of ``points`` per value."""
    n: int
    points: np.ndarray
    values: np.ndarray
    error_bound: np.ndarray
    route: str

    def __getitem__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        hit = np.flatnonzero(np.all(self.points == x, axis=1))
        if not hit.size:
            raise KeyError(tuple(x))
        return float(self.values[hit[0]])


class ConvolutionCache(object):
    """
    Convolution tables p(., k) keyed by ``(walk, k)``.

    Tables are built by stepping from the nearest cached table below ``k``
    and kept in least-recently-used order until ``budget`` entries are held.
    The most advanced table of every walk is always retained.
    """

    def __init__(self, budget=CACHE_BUDGET):
        self.budget = budget
        self._tables = OrderedDict()
        self._frontier = {}
        self._size = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._tables)

    def clear(self):
        with self._lock:
            self._tables.clear()
            self._frontier.clear()
            self._size = 0

    def _store(self, walk, table):
        with self._lock:
            key = (walk, table.n)
            if key not in self._tables:
                self._tables[key] = table
                self._size += table.values.size
            front = self._frontier.get(walk)
            if front is None or front.n < table.n:
                self._frontier[walk] = table
            while self._size > self.budget and len(self._tables) > 1:
                _, old = self._tables.popitem(last=False)
                self._size -= old.values.size

    def _start(self, walk, k):
        # caller holds the lock
        table = self._tables.get((walk, k - 1))
        if table is not None:
            return table
        front = self._frontier.get(walk)
        if front is not None and front.n <= k:
            return front
        below = [key[1] for key in list(self._tables) if key[0] == walk and key[1] <= k]
        if below:
            return self._tables[(walk, max(below))]
        return origin_table(walk)

    def table(self, walk, k):
        with self._lock:
            table = self._tables.get((walk, k))
            if table is not None:
                self.hits += 1
                self._tables.move_to_end((walk, k))
                return table
            self.misses += 1
            table = self._start(walk, k)
        check_table_size(walk, k)
        while table.n < k:
            table = advance(walk, table)
            self._store(walk, table)
        return table

    def profile(self, walk, points, K):
        """Array ``out[i, k] = p(points[i], k)`` for k = 0..K."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, walk.d)
        out = np.zeros((len(points), K + 1))
        for k in range(K + 1):
            table = self.table(walk, k)
            idx = points + table.offset
            inside = np.all((idx >= 0) & (idx < table.values.shape[0]), axis=1)
            out[inside, k] = table.values[tuple(idx[inside].T)]
        logger.debug('convolution cache: %d tables, %d hits, %d misses', len(self), self.hits, self.misses)
        return out


default_cache = ConvolutionCache()

cached_analysis = lru_cache(maxsize=32)(analyze)


def _as_points(walk, x):
    points = np.asarray(x, dtype=np.int64)
    if points.ndim == 0:
        points = points.reshape(1, 1)
    return points.reshape(-1, walk.d)


def _exact(walk, sub, points, shifts=1, cache=None):
    cache = default_cache if cache is None else cache
    K = sub.K
    prof = cache.profile(walk, points, K + shifts - 1)
    smoothed = sum(prof[:, j:j + K + 1] for j in range(shifts))
    values = smoothed[:, sub.n:] @ sub.pmf[sub.n:]
    analysis = cached_analysis(walk)
    last = max(K - analysis.r + 1, 0)
    peak = smoothed[:, last:].max(axis=1)
    inside = np.array([analysis.norm2(p) <= K for p in points])
    bound = np.where(inside, sub.tail_mass * peak, sub.tail_mass * shifts)
    return values, bound


def kernel_exact(walk, sub, x, n=None, cache=None):
    """
    p_psi(x, n) = sum_{k=n..K} p(x, k) P(tau_n = k) with its truncation bound.

    When ||x||^2 <= K the peak of k -> p(x, k) lies inside the table and
    p(x, k) decreases along each residue class beyond it, so the bound is
    tail_mass * max(p(x, K - r + 1), ..., p(x, K)). Otherwise it is tail_mass.
    """
    if n is not None and n != sub.n:
        raise DomainError("subordinator table was built for n=%d, not n=%d" % (sub.n, n))
    values, bound = _exact(walk, sub, _as_points(walk, x), cache=cache)
    return float(values[0]), float(bound[0])


def kernel_exact_table(walk, sub, window, cache=None):
    points = _as_points(walk, window)
    values, bound = _exact(walk, sub, points, cache=cache)
    return KernelTable(n=sub.n, points=points, values=values, error_bound=bound, route='exact')


def default_grid(walk, psi, x, n):
    """Smallest power of two above both the dimension floor and 8 (|x|_inf + 8 s(n))."""
    reach = np.abs(np.asarray(x)).max() if np.size(x) else 0
    scale = spatial_scale(psi, n) if n > 0 else 0.0
    target = max(GRID_FLOOR.get(walk.d, 16), 8 * (reach + 8 * math.ceil(scale)))
    return 1 << int(math.ceil(math.log2(target)))


def _clog1p(w):
    """log(1 + w) for complex w, accurate for small |w|."""
    re = 0.5 * np.log1p(2 * w.real + w.real ** 2 + w.imag ** 2)
    return re + 1j * np.arctan2(w.imag, 1 + w.real)


@lru_cache(maxsize=8)
def fourier_grid(walk, psi, n, M, shifts=1, workers=1):
    """
    M-periodic table of p_psi(., n) on {0..M-1}^d from the uniform theta grid.

    With ``shifts`` = r the transform is multiplied by 1 + Phi + ... + Phi^{r-1},
    which yields the smoothed kernel.
    """
    if M ** walk.d > TABLE_CAP:
        raise ResourceError("grid M=%d in d=%d exceeds %d entries" % (M, walk.d, TABLE_CAP))
    axis = 2 * np.pi * np.arange(M) / M
    theta = np.stack(np.meshgrid(*([axis] * walk.d), indexing='ij'), axis=-1)
    gap = one_minus_char_fn(walk, theta)
    flagged = gap.real < NEAR_PERIODIC
    flagged[(0,) * walk.d] = False
    if np.any(flagged):
        where = np.argwhere(flagged)[0]
        raise NumericError("characteristic function is numerically periodic",
                           diagnostics={'theta': tuple(float(t) for t in axis[where]),
                                        'one_minus_phi': complex(gap[tuple(where)])})
    step = 1.0 - eval_psi_complex(psi, gap)
    transform = np.zeros_like(step)
    near = np.abs(step - 1.0) < 0.5
    far = ~near & (step != 0)
    transform[near] = np.exp(n * _clog1p(step[near] - 1.0))
    transform[far] = np.exp(n * np.log(step[far]))
    if shifts > 1:
        phi = 1.0 - gap
        transform *= sum(phi ** j for j in range(shifts))
    table = sp_fft.fftn(transform, workers=workers).real / M ** walk.d
    logger.debug('fourier grid: d=%d M=%d n=%d mass %.15g', walk.d, M, n, table.sum())
    table.setflags(write=False)
    return table


def aliasing_estimate(walk, psi, x, n, M, images=2):
    """Heavy-tail estimate of sum_{m != 0} p_psi(x + m M, n) over nearby images."""
    if psi.alpha is None:
        return 0.0
    from .asymptotics import const_C
    analysis = cached_analysis(walk)
    C = const_C(walk.d, psi.alpha, analysis.Q)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    total = 0.0
    offsets = np.stack(np.meshgrid(*([np.arange(-images, images + 1)] * walk.d), indexing='ij'), -1)
    for m in offsets.reshape(-1, walk.d):
        if not m.any():
            continue
        norm2 = analysis.norm2(x + m * M)
        total += C * n * norm2 ** (-walk.d / 2) * eval_psi(psi, 1.0 / norm2)
    return total


def _check_grid(walk, x, M):
    if M % 2 or M <= 2 * np.abs(np.asarray(x)).max():
        raise DomainError("grid size M=%d must be even and exceed 2|x|_inf" % M)


def kernel_fourier(walk, psi, x, n, M=None, workers=1):
    """
    The M-periodised kernel sum_m p_psi(x + m M, n) and an aliasing estimate.

    Returns
    -------
    value, aliasing_note : float, float
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    x = _as_points(walk, x)[0]
    if n == 0:
        return (1.0 if not x.any() else 0.0), 0.0
    M = default_grid(walk, psi, x, n) if M is None else int(M)
    _check_grid(walk, x, M)
    table = fourier_grid(walk, psi, int(n), M, workers=workers)
    value = float(table[tuple(x % M)])
    note = aliasing_estimate(walk, psi, x, n, M)
    if note > 1e-6 * max(abs(value), 1e-300):
        logger.warning('kernel_fourier: aliasing estimate %.3g at x=%s, M=%d', note, tuple(x), M)
    return value, note


def kernel_fourier_table(walk, psi, window, n, M=None, workers=1):
    points = _as_points(walk, window)
    M = default_grid(walk, psi, points, n) if M is None else int(M)
    _check_grid(walk, points, M)
    table = fourier_grid(walk, psi, int(n), M, workers=workers)
    values = table[tuple((points % M).T)]
    bound = np.array([aliasing_estimate(walk, psi, p, n, M) for p in points])
    return KernelTable(n=n, points=points, values=values, error_bound=bound, route='fourier')


def smoothed_kernel(walk, psi, x, n, route='fourier', sub=None, M=None, workers=1):
    """
    sum_{j<r} (p^{(j)} * p_psi)(x, n) = sum_{j<r} sum_k p(x, k + j) P(tau_n = k).

    ``route='exact'`` needs a subordinator table ``sub`` built for n.
    """
    r = cached_analysis(walk).r
    if route == 'exact':
        if sub is None or sub.n != n:
            raise DomainError("the exact route needs a subordinator table for n=%d" % n)
        values, _ = _exact(walk, sub, _as_points(walk, x), shifts=r)
        return float(values[0])
    x = _as_points(walk, x)[0]
    M = default_grid(walk, psi, x, n) if M is None else int(M)
    _check_grid(walk, x, M)
    table = fourier_grid(walk, psi, int(n), M, shifts=r, workers=workers)
    return float(table[tuple(x % M)])


def neighbour_smoothing(walk, psi, x, n, M=None, workers=1):
    """(1/2d) sum_j (p_psi(x + e_j) + 2 p_psi(x) + p_psi(x - e_j)) on the Fourier grid."""
    x = _as_points(walk, x)[0]
    M = default_grid(walk, psi, np.abs(x) + 1, n) if M is None else int(M)
    _check_grid(walk, np.abs(x) + 1, M)
    table = fourier_grid(walk, psi, int(n), M, workers=workers)
    total = 0.0
    for j in range(walk.d):
        e = np.zeros(walk.d, dtype=np.int64)
        e[j] = 1
        total += table[tuple((x + e) % M)] + 2 * table[tuple(x % M)] + table[tuple((x - e) % M)]
    return float(total / (2 * walk.d))


def step_count(n, t):
    """[n t], reading t as the decimal it prints as; 100 * 0.29 gives 29 steps."""
    return int(math.floor(n * Fraction(repr(float(t)))))


def _walk_steps(rng, walk, steps):
    counts = rng.multinomial(np.asarray(steps, dtype=np.int64), walk.probs)
    return counts @ walk.vectors


def simulate_endpoint(walk, coeffs, n, t_grid, seed):
    """
    Endpoints S_psi([n t]) of one subordinated path for each t of ``t_grid``.

    Subordinator increments over successive times are drawn first; the walk
    then takes that many steps, split exactly over the support by a
    multinomial draw.
    """
    times = np.asarray(t_grid, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("t_grid must be nonnegative and nondecreasing")
    rng = np.random.default_rng(seed)
    sampler = StepSampler(coeffs)
    position = np.zeros(walk.d, dtype=np.int64)
    done = 0
    out = []
    for t in times:
        m = step_count(n, t)
        if m > done:
            steps = sum_steps(sampler, rng, m - done, 1)[0]
            position = position + _walk_steps(rng, walk, steps)
            done = m
        out.append(tuple(int(c) for c in position))
    return out


def simulate_endpoints(walk, coeffs, n, t, replicas, seed, threads=1):
    """``replicas`` independent endpoints S_psi([n t]) as an array of shape (replicas, d)."""
    m = step_count(n, t)

    def run(chunk, size):
        rng = chunk_rng(seed, chunk)
        if m == 0:
            return np.zeros((size, walk.d), dtype=np.int64)
        steps = sum_steps(StepSampler(coeffs), rng, m, size)
        return _walk_steps(rng, walk, steps)

    results = Parallel(n_jobs=threads, prefer="threads")(
        delayed(run)(chunk, size) for chunk, size in chunks(replicas)
    )
    if not results:
        return np.zeros((0, walk.d), dtype=np.int64)
    return np.concatenate(results)
