"""
Closed-form constants, the stable limit law and the verification suites
that compare finite-n quantities with their asymptotic predictions.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma, gammaincc, gammaln, j0
from scipy.stats import kstwobign, levy_stable

from .bernstein import coefficients, eval_psi, eval_psi_complex, inverse_psi, spatial_scale
from .errors import DomainError, NumericError, ResourceError
from .kernel import (GRID_FLOOR, cached_analysis, fourier_grid, kernel_fourier, simulate_endpoints, smoothed_kernel,
                     step_count)
from .subordinator import tail_bracket, tail_predictor, tau_pmf
from .walk import one_minus_char_fn

logger = logging.getLogger('subwalk')

DEFAULT_TOLERANCES = {
    'tail': 0.15,
    'onsite': 0.05,
    'ratio': 0.01,
    'polya': 0.15,
    'doa': 0.01,
    'flt': 0.02,
    'scaling': 0.01,
}

CONVENTIONS = ('effective', 'stated')

GAUSS_NODES = 16
RADIAL_TAIL = 1e-12
MAX_PANELS = 200000
ROTATION_THRESHOLD = 256.0
FLT_COEFFICIENTS = 2 ** 16
KS_LEVEL = 0.001
FLT_EXACT_REACH = 256
FLT_EXACT_GRID_CAP = 2 ** 22
CDF_GRID_EDGE = 50.0


def _check_alpha(alpha):
    if not 0 < alpha < 2:
        raise DomainError("alpha must lie in (0,2)")


def _det(d, Q):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape != (d, d) or not np.allclose(Q, Q.T):
        raise DomainError("Q must be a symmetric %dx%d matrix" % (d, d))
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise DomainError("Q must be positive definite")
    return float(np.linalg.det(Q))


def const_polya(alpha):
    """c_alpha = alpha 2^(alpha-1) pi^(-3/2) Gamma((alpha+1)/2) Gamma(alpha/2) sin(pi alpha/2)."""
    _check_alpha(alpha)
    return (alpha * 2 ** (alpha - 1) * math.pi ** -1.5 * gamma((alpha + 1) / 2) * gamma(alpha / 2)
            * math.sin(math.pi * alpha / 2))


def const_C(d, alpha, Q):
    _check_alpha(alpha)
    det = _det(d, Q)
    return (alpha * 2 ** (alpha / 2) * math.pi ** (-d / 2 - 1) / math.sqrt(det) * gamma(alpha / 2)
            * gamma((d + alpha) / 2) * math.sin(math.pi * alpha / 2))


def const_D(d, alpha, Q):
    _check_alpha(alpha)
    det = _det(d, Q)
    return (2 * math.pi) ** (d / 2) * math.exp(gammaln(1 + d / alpha) - gammaln(1 + d / 2)) / math.sqrt(det)


def onsite_constant(d, alpha, Q, convention='effective'):
    """Prefactor of psi^{-1}(1/n)^{d/2} in p_psi(0, n)."""
    if convention == 'stated':
        return const_D(d, alpha, Q)
    return const_D(d, alpha, Q) / (2 * math.pi) ** d


def polya_constant(d, alpha, Q, r, convention='effective'):
    """Prefactor of n ||x||^{-d} psi(||x||^{-2}) in the smoothed kernel."""
    if convention == 'stated':
        return r * const_C(d, alpha, Q)
    return r * const_C(d, alpha, Q) / 2


@dataclass(frozen=True)
class StableLimit:
    """Law with characteristic function exp(-t (<Q xi, xi>/2)^(alpha/2))."""
    d: int
    alpha: float
    Q: np.ndarray

    def __post_init__(self):
        _check_alpha(self.alpha)
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        _det(self.d, Q)
        object.__setattr__(self, 'Q', Q)

    @classmethod
    def for_walk(cls, walk, psi):
        return cls(d=walk.d, alpha=psi.alpha, Q=cached_analysis(walk).Q)

    def density(self, x, t=1.0):
        return stable_density(self, x, t)

    def marginal_scale(self, t=1.0, coord=0):
        """Scale of the coordinate projection, a symmetric alpha-stable law."""
        return t ** (1.0 / self.alpha) * math.sqrt(self.Q[coord, coord] / 2)

    def marginal_cdf(self, z, t=1.0, coord=0):
        return standard_stable_cdf(self.alpha, np.asarray(z, dtype=float) / self.marginal_scale(t, coord))


def _panels(a, b, width):
    count = max(1, int(math.ceil((b - a) / width)))
    return np.linspace(a, b, count + 1)


def _gauss(edges, func):
    nodes, weights = leggauss(GAUSS_NODES)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    points = (lo + hi) / 2 + half * nodes[None, :]
    return float(np.sum(half * weights[None, :] * func(points)))


def _with_refinement(edges, levels=40):
    """Split the first panel geometrically towards 0, where rho^alpha is not smooth."""
    first = edges[1]
    inner = first * 0.5 ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], inner, edges[1:]])


def _radial_direct(d, alpha, w, c):
    def f(rho):
        return np.exp(-c * rho ** alpha)

    R = (30.0 / c) ** (1.0 / alpha)
    doublings = 0
    while _radial_tail(d, alpha, c, R) > RADIAL_TAIL:
        R *= 2
        doublings += 1
        if doublings > 60:
            raise NumericError("radial truncation did not converge", diagnostics={'d': d, 'alpha': alpha})
    width = R / 64 if w == 0 else min(math.pi / w, R / 64)
    if R / width > MAX_PANELS:
        raise NumericError("radial quadrature needs too many panels",
                           diagnostics={'d': d, 'alpha': alpha, 'w': w, 'panels': int(R / width)})
    edges = _with_refinement(_panels(0.0, R, width))
    if d == 1:
        return _gauss(edges, lambda rho: 2 * f(rho) * np.cos(rho * w))
    if d == 2:
        return _gauss(edges, lambda rho: 2 * math.pi * f(rho) * j0(rho * w) * rho)
    return _gauss(edges, lambda rho: 4 * math.pi / w * f(rho) * rho * np.sin(rho * w))


def _radial_tail(d, alpha, c, R):
    sphere = 2 * math.pi ** (d / 2) / gamma(d / 2)
    return sphere * gamma(d / alpha) * gammaincc(d / alpha, c * R ** alpha) / (alpha * c ** (d / alpha))


def _radial_origin(d, alpha, c):
    sphere = 2 * math.pi ** (d / 2) / gamma(d / 2)
    return sphere * gamma(d / alpha) / (alpha * c ** (d / alpha))


def _radial_rotated(d, alpha, w, c):
    """
    Odd d far from the origin: rotate the oscillatory integral onto the ray
    arg v = theta, where exp(i v) decays and exp(-c (v/w)^alpha) stays bounded.
    """
    m = (d - 1) // 2
    theta = min(math.pi / 2, math.pi / (2 * alpha))
    rot = np.exp(1j * theta)
    S = 60.0 / math.sin(theta)
    edges = _with_refinement(_panels(0.0, S, 0.5))

    def integrand(s):
        v = s * rot
        value = np.exp(-c * (s / w) ** alpha * np.exp(1j * alpha * theta)) * v ** m * np.exp(1j * v) * rot
        return value.imag if m else value.real

    scale = 2.0 if d == 1 else 4 * math.pi
    return scale * _gauss(edges, integrand) / w ** (1 + 2 * m)


def stable_density(limit, x, t=1.0):
    """
    Density of the stable limit at time ``t``.

    The characteristic function is inverted after whitening xi -> Q^(-1/2) eta,
    which reduces the integral to a radial one in |eta| against the whitened
    point w = |Q^(-1/2) x|. Gauss-Legendre panels cover [0, R] with R doubled
    until the integrand tail is below 1e-12; for odd d and large w R the
    contour is rotated instead.
    """
    if limit.d > 3:
        raise DomainError("stable densities are supported for d <= 3 only")
    if not t > 0:
        raise DomainError("t must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Q_inv = np.linalg.inv(limit.Q)
    w = math.sqrt(max(float(x @ Q_inv @ x), 0.0))
    c = t * 2 ** (-limit.alpha / 2)
    prefactor = 1.0 / (math.sqrt(np.linalg.det(limit.Q)) * (2 * math.pi) ** limit.d)
    if w == 0:
        return prefactor * _radial_origin(limit.d, limit.alpha, c)
    R = (30.0 / c) ** (1.0 / limit.alpha)
    if limit.d != 2 and w * R > ROTATION_THRESHOLD:
        value = _radial_rotated(limit.d, limit.alpha, w, c)
    else:
        value = _radial_direct(limit.d, limit.alpha, w, c)
    return max(prefactor * value, 0.0)


def _stable_tail_series(alpha, z, terms=40):
    """P(Z > z) for the standard symmetric alpha-stable law, valid for large z."""
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for k in range(1, terms + 1):
        coef = math.exp(gammaln(alpha * k) - gammaln(k + 1)) * math.sin(k * math.pi * alpha / 2) / math.pi
        term = (-1) ** (k + 1) * coef * z ** (-alpha * k)
        total += term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return total


@lru_cache(maxsize=16)
def _stable_cdf_interpolant(alpha):
    u = np.linspace(-math.asinh(CDF_GRID_EDGE), math.asinh(CDF_GRID_EDGE), 801)
    z = np.sinh(u)
    values = levy_stable.cdf(z, alpha, 0.0)
    return PchipInterpolator(z, values)


def standard_stable_cdf(alpha, z):
    """CDF of the symmetric alpha-stable law with characteristic function exp(-|s|^alpha)."""
    z = np.asarray(z, dtype=float)
    if alpha == 1.0:
        out = 0.5 + np.arctan(z) / math.pi
    else:
        out = np.empty_like(z)
        inner = np.abs(z) <= CDF_GRID_EDGE
        out[inner] = _stable_cdf_interpolant(alpha)(z[inner])
        tail = _stable_tail_series(alpha, np.abs(z[~inner]))
        out[~inner] = np.where(z[~inner] > 0, 1.0 - tail, tail)
    return out if out.ndim else float(out)


def ks_distance(samples, cdf):
    """
    Kolmogorov distance between the empirical law of ``samples`` and ``cdf``.

    Lattice samples have ties; each atom is compared at the midpoint of the
    empirical jump.
    """
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    total = counts.sum()
    after = np.cumsum(counts) / total
    before = after - counts / total
    mid = 0.5 * (before + after)
    return float(np.max(np.abs(cdf(values) - mid)))


def ks_critical(replicas, level=KS_LEVEL):
    return float(kstwobign.ppf(1 - level) / math.sqrt(replicas))


def flt_exact_distance(walk, psi, n, t=1.0, M=None, workers=1):
    """
    Kolmogorov distance between the exact law of S_psi([n t]) / s(n) and the
    stable marginal at time t, for one-dimensional walks.

    The law is read off the Fourier grid on {-M/2, ..., M/2 - 1}; the grid
    reaches FLT_EXACT_REACH spatial scales to either side. Each atom is
    compared at the midpoint of its jump.
    """
    if walk.d != 1:
        raise DomainError("the exact law is tabulated for d = 1 only")
    if psi.alpha is None:
        raise DomainError("the stable limit needs an index alpha")
    m = step_count(n, t)
    if m < 1:
        raise DomainError("[n t] must be at least 1, got n=%r t=%r" % (n, t))
    scale = spatial_scale(psi, n)
    if M is None:
        target = max(GRID_FLOOR[1], FLT_EXACT_REACH * scale)
        M = 1 << int(math.ceil(math.log2(target)))
    M = int(M)
    if M > FLT_EXACT_GRID_CAP:
        raise ResourceError("exact law at n=%d needs a grid of %d > %d points" % (n, M, FLT_EXACT_GRID_CAP))
    law = np.roll(fourier_grid(walk, psi, m, M, workers=workers), M // 2)
    x = np.arange(-(M // 2), M // 2)
    mid = np.cumsum(law) - 0.5 * law
    limit = StableLimit.for_walk(walk, psi)
    distance = float(np.max(np.abs(limit.marginal_cdf(x / scale, t) - mid)))
    logger.debug('flt_exact_distance: n=%d M=%d KS=%.4g', n, M, distance)
    return distance


@dataclass
class AsymptoticReport:
    """Outcome of one verification suite; ``table`` has one row per grid cell."""
    theorem: str
    table: pd.DataFrame
    tolerance: float
    passed: bool
    worst_ratio: float
    notes: dict = field(default_factory=dict)

    def summary(self):
        out = {'theorem': self.theorem, 'pass': bool(self.passed),
               'worst_ratio': float(self.worst_ratio), 'tolerance': float(self.tolerance)}
        out.update(self.notes)
        return out


def _cells(func, cells, threads):
    return Parallel(n_jobs=threads, prefer="threads")(delayed(func)(*cell) for cell in cells)


def _tolerance(suite, tolerance):
    return DEFAULT_TOLERANCES[suite] if tolerance is None else float(tolerance)


def verify_tail(psi, grid=((4, 1e4), (4, 1e6)), tolerance=None, threads=1, K=None):
    """
    tau_tail / tail_predictor on a grid of (n, t).

    The cell with the smallest n psi(1/t) decides; it passes when the tail
    bracket divided by the predictor reaches into 1 +/- tolerance.
    """
    tolerance = _tolerance('tail', tolerance)
    grid = [(int(n), float(t)) for n, t in grid]
    if K is None:
        K = 1 << int(math.ceil(math.log2(4 * max(t for _, t in grid))))
    coeffs = coefficients(psi, K)

    def cell(n, t):
        table = tau_pmf(coeffs, n, K)
        lower, upper = tail_bracket(table, t)
        predicted = tail_predictor(psi, n, t)
        return {'n': n, 't': t, 'n_psi': n * eval_psi(psi, 1.0 / t), 'measured': upper,
                'lower': lower, 'predicted': predicted, 'ratio': upper / predicted}

    table = pd.DataFrame(_cells(cell, grid, threads))
    decisive = table.loc[table['n_psi'].idxmin()]
    lo, hi = decisive['lower'] / decisive['predicted'], decisive['ratio']
    passed = hi >= 1 - tolerance and lo <= 1 + tolerance
    return AsymptoticReport('tail', table, tolerance, bool(passed), float(decisive['ratio']))


def verify_onsite(walk, psi, n_list=(100, 1000, 10000), tolerance=None, convention='effective',
                  threads=1, M=None, burn_in=0):
    """
    p_psi(0, n) against D psi^{-1}(1/n)^{d/2}; the largest n decides.

    The ``trend`` note holds when |ratio - 1| does not increase from one n to
    the next, ignoring the first ``burn_in`` cells.
    """
    tolerance = _tolerance('onsite', tolerance)
    analysis = cached_analysis(walk)
    D = onsite_constant(walk.d, psi.alpha, analysis.Q, convention)
    origin = (0,) * walk.d

    def cell(n):
        value, note = kernel_fourier(walk, psi, origin, n, M=M, workers=threads)
        predicted = D * inverse_psi(psi, 1.0 / n) ** (walk.d / 2)
        return {'n': n, 'measured': value, 'aliasing': note, 'predicted': predicted,
                'ratio': value / predicted}

    table = pd.DataFrame([cell(n) for n in sorted(n_list)])
    decisive = table.loc[table['n'].idxmax()]
    passed = abs(decisive['ratio'] - 1) <= tolerance
    deviation = (table['ratio'] - 1).abs().to_numpy()[burn_in:]
    notes = {'convention': convention, 'trend': bool(np.all(np.diff(deviation) <= 0))}
    return AsymptoticReport('onsite', table, tolerance, bool(passed), float(decisive['ratio']), notes)


def _point(walk, x):
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if x.size == 1 and walk.d > 1:
        x = np.concatenate([x, np.zeros(walk.d - 1, dtype=np.int64)])
    return x


def verify_ratio(walk, psi, pairs=((5, 100), (5, 1000), (5, 10000)), tolerance=None, threads=1, M=None):
    """p_psi(x, n) / p_psi(0, n); the cell with the largest n psi(||x||^-2) decides."""
    tolerance = _tolerance('ratio', tolerance)
    analysis = cached_analysis(walk)
    origin = (0,) * walk.d
    rows = []
    for x, n in pairs:
        x = _point(walk, x)
        at_x, _ = kernel_fourier(walk, psi, x, n, M=M, workers=threads)
        at_0, _ = kernel_fourier(walk, psi, origin, n, M=M, workers=threads)
        norm2 = analysis.norm2(x)
        rows.append({'x': ';'.join(map(str, x)), 'n': n, 'n_psi': n * eval_psi(psi, 1.0 / norm2),
                     'measured': at_x, 'predicted': at_0, 'ratio': at_x / at_0})
    table = pd.DataFrame(rows)
    decisive = table.loc[table['n_psi'].idxmax()]
    passed = abs(decisive['ratio'] - 1) <= tolerance
    return AsymptoticReport('ratio', table, tolerance, bool(passed), float(decisive['ratio']))


def verify_polya(walk, psi, pairs=((200, 10), (2000, 10)), tolerance=None, convention='effective',
                 threads=1, M=2 ** 14):
    """
    Smoothed kernel against its heavy-tail prediction; the cell with the
    smallest n psi(||x||^-2) decides.
    """
    tolerance = _tolerance('polya', tolerance)
    analysis = cached_analysis(walk)
    C = polya_constant(walk.d, psi.alpha, analysis.Q, analysis.r, convention)
    rows = []
    for x, n in pairs:
        x = _point(walk, x)
        value = smoothed_kernel(walk, psi, x, n, M=M, workers=threads)
        norm2 = analysis.norm2(x)
        n_psi = n * eval_psi(psi, 1.0 / norm2)
        predicted = C * n_psi * norm2 ** (-walk.d / 2)
        rows.append({'x': ';'.join(map(str, x)), 'n': n, 'n_psi': n_psi, 'measured': value,
                     'predicted': predicted, 'ratio': value / predicted})
    table = pd.DataFrame(rows)
    decisive = table.loc[table['n_psi'].idxmin()]
    passed = abs(decisive['ratio'] - 1) <= tolerance
    return AsymptoticReport('polya', table, tolerance, bool(passed), float(decisive['ratio']),
                            {'convention': convention})


def log_char_fn(walk, psi, theta, n):
    """n Log Phi_psi(theta) on the principal branch."""
    gap = one_minus_char_fn(walk, np.atleast_1d(np.asarray(theta, dtype=float)))
    w = -eval_psi_complex(psi, gap)
    re = 0.5 * np.log1p(2 * w.real + w.real ** 2 + w.imag ** 2)
    return n * complex(re + 1j * np.arctan2(w.imag, 1 + w.real))


def verify_doa(walk, psi, xi=(1.0,), n_list=(10 ** 2, 10 ** 4, 10 ** 6), tolerance=None):
    """
    n Log Phi_psi(xi / s(n)) against -2^(-alpha/2) <Q xi, xi>^(alpha/2).

    The tolerance is absolute and the largest n decides.
    """
    tolerance = _tolerance('doa', tolerance)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != walk.d:
        raise DomainError("xi must have %d coordinates" % walk.d)
    Q = cached_analysis(walk).Q
    target = -2 ** (-psi.alpha / 2) * float(xi @ Q @ xi) ** (psi.alpha / 2)
    rows = []
    for n in n_list:
        value = log_char_fn(walk, psi, xi / spatial_scale(psi, n), n)
        rows.append({'n': n, 'measured': value.real, 'measured_imag': value.imag,
                     'predicted': target, 'ratio': value.real / target,
                     'deviation': abs(value.real - target)})
    table = pd.DataFrame(rows)
    decisive = table.loc[table['n'].idxmax()]
    passed = decisive['deviation'] <= tolerance
    return AsymptoticReport('doa', table, tolerance, bool(passed), float(decisive['ratio']))


def verify_scaling(psi, n_list=(10 ** 2, 10 ** 4, 10 ** 6), lam=(0.5, 1.0, 2.0), tolerance=None):
    """E exp(-lam tau_n / b_n) with b_n = psi^{-1}(1/n)^{-1} against exp(-lam^(alpha/2))."""
    tolerance = _tolerance('scaling', tolerance)
    rows = []
    for n in n_list:
        b = 1.0 / inverse_psi(psi, 1.0 / n)
        for value in lam:
            measured = (1.0 - eval_psi(psi, -math.expm1(-value / b))) ** n
            predicted = math.exp(-value ** (psi.alpha / 2))
            rows.append({'n': n, 'lam': value, 'measured': measured, 'predicted': predicted,
                         'ratio': measured / predicted, 'deviation': abs(measured - predicted)})
    table = pd.DataFrame(rows)
    last = table[table['n'] == table['n'].max()]
    worst = last.loc[last['deviation'].idxmax()]
    passed = worst['deviation'] <= tolerance
    return AsymptoticReport('scaling', table, tolerance, bool(passed), float(worst['ratio']))


def verify_flt_marginal(walk, psi, n=2000, t=1.0, replicas=100000, seed=0, tolerance=None, threads=1,
                        coord=0, K=FLT_COEFFICIENTS):
    """
    KS distance between the coordinate projection of S_psi([n t]) / s(n) and
    the stable marginal at time t. The predicted column is the Kolmogorov
    critical value at level 0.001 for the replica count.

    For d = 1 the notes also carry the exact-law distances at n and n // 10;
    their decrease is the ``trend`` note.
    """
    tolerance = _tolerance('flt', tolerance)
    started = time.time()
    coeffs = coefficients(psi, K)
    endpoints = simulate_endpoints(walk, coeffs, n, t, replicas, seed, threads=threads)
    scaled = endpoints[:, coord] / spatial_scale(psi, n)
    limit = StableLimit.for_walk(walk, psi)
    distance = ks_distance(scaled, lambda z: limit.marginal_cdf(z, t, coord))
    critical = ks_critical(replicas)
    logger.debug('verify_flt_marginal: n=%d replicas=%d KS=%.4g in %.1fs', n, replicas, distance,
                 time.time() - started)
    table = pd.DataFrame([{'n': n, 't': t, 'replicas': replicas, 'seed': seed, 'measured': distance,
                           'predicted': critical, 'ratio': distance / critical}])
    notes = {'ties': 'mid-rank'}
    if walk.d == 1:
        try:
            exact = flt_exact_distance(walk, psi, n, t, workers=threads)
            coarse = flt_exact_distance(walk, psi, max(n // 10, 1), t, workers=threads)
        except (DomainError, ResourceError) as e:
            logger.info('verify_flt_marginal: exact law skipped: %s', e)
        else:
            notes.update(exact_ks=exact, exact_ks_coarse=coarse, trend=bool(exact < coarse))
    return AsymptoticReport('flt', table, tolerance, bool(distance < tolerance), distance / critical, notes)
