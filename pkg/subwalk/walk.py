"""
Finite-range mean-zero random walks on the integer lattice: period and
residue classes, covariance form, exact n-step tables, characteristic
function and the local limit main term.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import DomainError, PeriodError, ReducibleWalkError, RegimeError, ResourceError, WalkError

logger = logging.getLogger('subwalk')

N_PERIOD = 64
IRREDUCIBILITY_BOX = 3
TABLE_CAP = 2 ** 28
MASS_TOLERANCE = 1e-14


def _simple(d):
    support = []
    for i in range(d):
        for sign in (1, -1):
            v = [0] * d
            v[i] = sign
            support.append({'v': v, 'p': '1/%d' % (2 * d)})
    return {'d': d, 'support': support}


NAMED_WALKS = {
    'simple-1d': _simple(1),
    'simple-2d': _simple(2),
    'simple-3d': _simple(3),
    'lazy-1d': {'d': 1, 'support': [{'v': [0], 'p': '1/2'},
                                    {'v': [1], 'p': '1/4'},
                                    {'v': [-1], 'p': '1/4'}]},
}


@dataclass(frozen=True)
class WalkSpec:
    """The step law p on a finite set of lattice vectors.

    ``support`` is a tuple of ``(vector, probability)`` pairs; instances are
    hashable and serve as cache keys.
    """
    d: int
    support: tuple

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise WalkError("d must be a positive integer, got %r" % (self.d,))
        if any(int(c) != c for v, _ in self.support for c in v):
            raise WalkError("support vectors must have integer coordinates")
        support = tuple((tuple(int(c) for c in v), float(p)) for v, p in self.support)
        if not support:
            raise WalkError("support must not be empty")
        vectors = [v for v, _ in support]
        if any(len(v) != self.d for v in vectors):
            raise WalkError("every support vector must have %d coordinates" % self.d)
        if len(set(vectors)) != len(vectors):
            raise WalkError("support vectors must be distinct")
        probs = [p for _, p in support]
        if any(not p > 0 for p in probs):
            raise WalkError("probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > MASS_TOLERANCE:
            raise WalkError("probabilities sum to %r, not 1" % math.fsum(probs))
        for i in range(self.d):
            drift = math.fsum(p * v[i] for v, p in support)
            if abs(drift) > MASS_TOLERANCE:
                raise WalkError("walk has nonzero mean %r in coordinate %d" % (drift, i))
        object.__setattr__(self, 'support', support)

    @property
    def vectors(self):
        return np.array([v for v, _ in self.support], dtype=np.int64).reshape(-1, self.d)

    @property
    def probs(self):
        return np.array([p for _, p in self.support])

    @property
    def radius(self):
        """max over the support of the sup norm."""
        return int(np.abs(self.vectors).max())

    @classmethod
    def named(cls, name):
        try:
            return cls.from_dict(NAMED_WALKS[name])
        except KeyError:
            raise WalkError("unknown walk %r, expected one of %s" % (name, ', '.join(sorted(NAMED_WALKS))))

    @classmethod
    def from_dict(cls, data):
        """Parse ``{"d": 1, "support": [{"v": [1], "p": "1/2"}, ...]}`` or a walk name."""
        if isinstance(data, str):
            return cls.named(data)
        try:
            d = data['d']
            entries = [(tuple(entry['v']), Fraction(entry['p'])) for entry in data['support']]
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
            raise WalkError("malformed walk description: %s" % e)
        rational = not any(isinstance(entry['p'], float) for entry in data['support'])
        if rational and isinstance(d, int) and all(len(v) == d for v, _ in entries):
            total = sum(p for _, p in entries)
            if total != 1:
                raise WalkError("probabilities sum to %s, not 1" % total)
            for i in range(d):
                if sum(p * Fraction(v[i]) for v, p in entries) != 0:
                    raise WalkError("walk has nonzero mean in coordinate %d" % i)
        return cls(d=d, support=tuple((v, float(p)) for v, p in entries))

    def to_dict(self):
        return {'d': self.d, 'support': [{'v': list(v), 'p': p} for v, p in self.support]}


@dataclass(frozen=True)
class ConvolutionTable:
    """p(x, n) on the box |x|_inf <= n R, stored with the origin at index ``offset``."""
    n: int
    values: np.ndarray
    offset: int

    def __getitem__(self, x):
        idx = np.atleast_1d(np.asarray(x, dtype=np.int64)) + self.offset
        if np.any(idx < 0) or np.any(idx >= self.values.shape[0]):
            return 0.0
        return float(self.values[tuple(idx)])

    def total(self):
        return float(self.values.sum())

    def items(self):
        """(point, probability) pairs with positive probability."""
        for idx in zip(*np.nonzero(self.values)):
            yield tuple(int(i) - self.offset for i in idx), float(self.values[idx])


def advance(spec, table):
    """One more step of the walk: p(., n+1) from p(., n)."""
    R = spec.radius
    old = table.values
    size = old.shape[0]
    new = np.zeros((size + 2 * R,) * spec.d, dtype=old.dtype)
    for v, p in spec.support:
        window = tuple(slice(R + c, R + c + size) for c in v)
        if old.dtype == bool:
            new[window] |= old
        else:
            new[window] += p * old
    return ConvolutionTable(n=table.n + 1, values=new, offset=table.offset + R)


def origin_table(spec, dtype=float):
    return ConvolutionTable(n=0, values=np.ones((1,) * spec.d, dtype=dtype), offset=0)


def check_table_size(spec, n, cap=TABLE_CAP):
    entries = (2 * n * spec.radius + 1) ** spec.d
    if entries > cap:
        raise ResourceError("n=%d needs %d table entries, over the cap of %d" % (n, entries, cap))


def convolve_n(spec, n, cap=TABLE_CAP):
    """
    Exact n-fold convolution p(., n) by stepping the walk n times.

    Raises ResourceError when the (2 n R + 1)^d table exceeds ``cap`` entries.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer, got %r" % (n,))
    check_table_size(spec, n, cap)
    table = origin_table(spec)
    for _ in range(int(n)):
        table = advance(spec, table)
    return table


def _crop(table, radius):
    if table.offset <= radius:
        return table
    cut = table.offset - radius
    window = (slice(cut, cut + 2 * radius + 1),) * table.values.ndim
    return ConvolutionTable(n=table.n, values=table.values[window], offset=radius)


@dataclass(frozen=True)
class WalkAnalysis:
    """Period r, residue classes and covariance form Q of a walk."""
    spec: WalkSpec
    r: int
    class_weights: tuple
    Q: np.ndarray
    Q_inv: np.ndarray
    det_Q: float

    def class_of(self, x):
        """j with x in R_j, i.e. p(x, n) > 0 only for n = j (mod r)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        return int(np.dot(x, self.class_weights)) % self.r

    def norm2(self, x):
        """||x||^2 = <Q^{-1} x, x>."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(x @ self.Q_inv @ x)


def analyze(spec, n_period=N_PERIOD):
    """
    Period, residue classes and covariance of ``spec``.

    Reachability is tracked on boolean tables for ``n_period`` steps. Paths
    that matter for returns to the origin or for the irreducibility box never
    leave a box of half-width about ``n_period / 2`` radii, so tables are cropped
    to that box.
    """
    R = spec.radius
    box = IRREDUCIBILITY_BOX * R
    keep = (n_period // 2 + IRREDUCIBILITY_BOX + 1) * R
    reach = origin_table(spec, dtype=bool)
    returns = []
    first_hit = np.full((2 * box + 1,) * spec.d, -1, dtype=np.int64)
    for n in range(1, n_period + 1):
        reach = _crop(advance(spec, reach), keep)
        if reach[(0,) * spec.d]:
            returns.append(n)
        window = (slice(reach.offset - min(box, reach.offset), reach.offset + min(box, reach.offset) + 1),)
        hit = reach.values[window * spec.d]
        pad = box - min(box, reach.offset)
        if pad:
            hit = np.pad(hit, pad)
        first_hit[(first_hit < 0) & hit] = n
    if not returns:
        raise PeriodError("period undetermined: no return to the origin within %d steps" % n_period)
    r = reduce(math.gcd, returns)
    if np.any(first_hit < 0):
        missed = np.argwhere(first_hit < 0)[0] - box
        raise ReducibleWalkError("reducible walk: %s is not reached within %d steps" % (tuple(missed), n_period))
    origin = (box,) * spec.d
    first_hit[origin] = 0
    weights = []
    for i in range(spec.d):
        e = list(origin)
        e[i] += 1
        weights.append(int(first_hit[tuple(e)]) % r)
    vectors, probs = spec.vectors.astype(float), spec.probs
    Q = (vectors * probs[:, None]).T @ vectors
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise WalkError("covariance form is not positive definite; the walk lives on a sublattice")
    analysis = WalkAnalysis(spec=spec, r=r, class_weights=tuple(weights), Q=Q,
                            Q_inv=np.linalg.inv(Q), det_Q=float(np.linalg.det(Q)))
    logger.debug('analyze: d=%d r=%d class weights %s det Q %.6g', spec.d, r, weights, analysis.det_Q)
    return analysis


def _phases(spec, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1:] != (spec.d,):
        raise DomainError("theta must have trailing dimension %d" % spec.d)
    return theta, [(theta @ np.asarray(v, dtype=float), p) for v, p in spec.support]


def char_fn(spec, theta):
    """Phi(theta) = sum_v p(v) exp(i <v, theta>), vectorised over leading axes of ``theta``."""
    theta, phases = _phases(spec, theta)
    out = np.zeros(theta.shape[:-1], dtype=complex)
    for phase, p in phases:
        out += p * np.exp(1j * phase)
    return out if out.ndim else complex(out)


def one_minus_char_fn(spec, theta):
    """1 - Phi(theta), accurate near theta = 0."""
    theta, phases = _phases(spec, theta)
    re = np.zeros(theta.shape[:-1])
    im = np.zeros(theta.shape[:-1])
    for phase, p in phases:
        re += 2 * p * np.sin(0.5 * phase) ** 2
        im -= p * np.sin(phase)
    out = re + 1j * im
    return out if out.ndim else complex(out)


def lclt_estimate(analysis, x, n, smoothed=False):
    """
    Main term of the local limit theorem,

        r (2 pi n)^{-d/2} (det Q)^{-1/2} exp(-||x||^2 / (2n))

    when n = class_of(x) (mod r) and 0 otherwise. With ``smoothed`` the class
    condition is dropped and r times the main term is returned for every n,
    matching p(x, n) + ... + p(x, n + r - 1).
    """
    if n < 1:
        raise DomainError("n must be positive")
    d = analysis.spec.d
    norm2 = analysis.norm2(x)
    if math.sqrt(norm2) > n ** (2.0 / 3.0):
        raise RegimeError("||x|| = %.6g exceeds n^(2/3) = %.6g" % (math.sqrt(norm2), n ** (2.0 / 3.0)))
    main = (2 * math.pi * n) ** (-d / 2) / math.sqrt(analysis.det_Q) * math.exp(-norm2 / (2 * n))
    if smoothed:
        return analysis.r * main
    if n % analysis.r != analysis.class_of(x):
        return 0.0
    return analysis.r * main
