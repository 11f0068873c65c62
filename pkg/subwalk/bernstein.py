"""
Bernstein functions psi with psi(0) = 0, psi(1) = 1, their holomorphic
extension to the right half-plane and the coefficients c(psi, k) of the
discrete subordinator they generate.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import fft as sp_fft
from scipy.special import gamma, gammaln
from scipy.stats import poisson

from .errors import DomainError, RangeError, ResourceError

logger = logging.getLogger('subwalk')

DEFAULT_TAIL_EPS = 1e-9
MAX_COEFFICIENTS = 10 ** 7
MAX_TRANSFORM_COEFFICIENTS = 2 ** 22

GRID_T_MIN = 1e-8
GRID_T_MAX = 50.0
GRID_SIZE = 400

BISECTION_LOWER = 1e-16
BISECTION_STEPS = 200

# rows of the evaluation matrix for quadrature families
_CHUNK = 2 ** 14


class Family(Enum):
    STABLE = 'stable'
    STABLE_LOG = 'stable_log'
    LEVY_QUADRATURE = 'levy_quadrature'


def _check_alpha(alpha):
    if alpha is None or not (0 < alpha < 2):
        raise DomainError("alpha must lie in (0,2)")


@dataclass(frozen=True)
class BernsteinSpec:
    """A normalised Bernstein function.

    ``stable`` is x^(alpha/2); ``stable_log`` is x^(alpha/2) log(e + 1/x)^(-beta)
    divided by its value at 1; ``levy_quadrature`` is a + b x + sum_i w_i (1 - exp(-x t_i))
    divided by its value at 1. ``alpha`` is optional only for quadrature families that
    are not regularly varying (a pure drift, for instance).
    """
    family: Family
    alpha: float = None
    beta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    nodes: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, 'family', family)
        if self.a != 0:
            raise DomainError("psi(0) = 0 requires a = 0, got a=%r" % self.a)
        if family is Family.LEVY_QUADRATURE:
            if self.alpha is not None:
                _check_alpha(self.alpha)
            nodes = np.asarray(self.nodes, dtype=float)
            weights = np.asarray(self.weights, dtype=float)
            if nodes.shape != weights.shape or nodes.ndim != 1:
                raise DomainError("nodes and weights must be 1-D sequences of equal length")
            if np.any(nodes <= 0) or np.any(weights < 0) or self.b < 0:
                raise DomainError("Levy nodes must be positive, weights and drift nonnegative")
            object.__setattr__(self, 'nodes', tuple(nodes.tolist()))
            object.__setattr__(self, 'weights', tuple(weights.tolist()))
            object.__setattr__(self, '_t', nodes)
            object.__setattr__(self, '_w', weights)
            raw = self.b + float(np.sum(-weights * np.expm1(-nodes)))
            if not raw > 0:
                raise DomainError("a Levy triple with psi(1) = 0 cannot be normalised")
            object.__setattr__(self, '_norm', raw)
        else:
            _check_alpha(self.alpha)
            if self.b != 0 or self.nodes or self.weights:
                raise DomainError("%s functions take no drift or Levy nodes" % family.value)
            if family is Family.STABLE_LOG:
                if self.beta < 0:
                    raise DomainError("beta must be nonnegative")
                object.__setattr__(self, '_norm', math.log(math.e + 1.0) ** (-self.beta))
            else:
                object.__setattr__(self, '_norm', 1.0)

    @property
    def index(self):
        """Regular-variation index alpha/2 of psi at zero."""
        if self.alpha is None:
            raise DomainError("%s function carries no stability index" % self.family.value)
        return self.alpha / 2

    @classmethod
    def stable(cls, alpha):
        return cls(Family.STABLE, alpha=float(alpha))

    @classmethod
    def stable_log(cls, alpha, beta):
        return cls(Family.STABLE_LOG, alpha=float(alpha), beta=float(beta))

    @classmethod
    def levy_quadrature(cls, nodes, weights, a=0.0, b=0.0, alpha=None):
        return cls(Family.LEVY_QUADRATURE, alpha=alpha, a=float(a), b=float(b),
                   nodes=tuple(nodes), weights=tuple(weights))

    @classmethod
    def from_levy_density(cls, density, alpha, t_min=GRID_T_MIN, t_max=GRID_T_MAX, size=GRID_SIZE):
        nodes, weights, drift = levy_grid(density, alpha, t_min=t_min, t_max=t_max, size=size)
        return cls.levy_quadrature(nodes, weights, b=drift, alpha=alpha)

    @classmethod
    def stable_quadrature(cls, alpha, t_min=GRID_T_MIN, t_max=GRID_T_MAX, size=GRID_SIZE):
        """Quadrature family approximating x^(alpha/2) through its Levy density."""
        _check_alpha(alpha)
        return cls.from_levy_density(stable_levy_density(alpha), alpha, t_min=t_min, t_max=t_max, size=size)

    def to_dict(self):
        out = {'family': self.family.value}
        if self.family is Family.LEVY_QUADRATURE:
            out.update(nodes=list(self.nodes), weights=list(self.weights), a=self.a, b=self.b)
            if self.alpha is not None:
                out['alpha'] = self.alpha
        else:
            out['alpha'] = self.alpha
            if self.family is Family.STABLE_LOG:
                out['beta'] = self.beta
        return out

    @classmethod
    def from_dict(cls, data):
        """
        Build from the JSON object form.

        ``{"family": "levy_quadrature", "alpha": a}`` without nodes builds the
        quadrature of the stable Levy density; ``t_min``, ``t_max`` and ``size``
        then tune the grid.
        """
        data = dict(data)
        try:
            family = Family(data.pop('family', 'stable'))
        except ValueError:
            raise DomainError("unknown family, expected one of %s"
                              % ', '.join(f.value for f in Family))
        allowed = {
            Family.STABLE: {'alpha'},
            Family.STABLE_LOG: {'alpha', 'beta'},
            Family.LEVY_QUADRATURE: {'alpha', 'nodes', 'weights', 'a', 'b', 't_min', 't_max', 'size'},
        }[family]
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise DomainError("unknown keys for %s: %s" % (family.value, ', '.join(unknown)))
        if family is Family.STABLE:
            return cls.stable(_number(data, 'alpha'))
        if family is Family.STABLE_LOG:
            return cls.stable_log(_number(data, 'alpha'), _number(data, 'beta', 0.0))
        alpha = data.get('alpha')
        if 'nodes' not in data and 'weights' not in data and data.get('b', 0) == 0:
            return cls.stable_quadrature(_number(data, 'alpha'),
                                         t_min=float(data.get('t_min', GRID_T_MIN)),
                                         t_max=float(data.get('t_max', GRID_T_MAX)),
                                         size=int(data.get('size', GRID_SIZE)))
        return cls.levy_quadrature(data.get('nodes', ()), data.get('weights', ()),
                                   a=float(data.get('a', 0.0)), b=float(data.get('b', 0.0)),
                                   alpha=None if alpha is None else float(alpha))


def _number(data, key, default=None):
    value = data.get(key, default)
    if value is None:
        raise DomainError("%s is required" % key)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DomainError("%s must be a number, got %r" % (key, value))


@dataclass(frozen=True)
class CoeffTable:
    """Truncated law of one subordinator step: ``c[k]`` is c(psi, k), ``c[0]`` is 0."""
    c: np.ndarray
    tail_mass: float
    K: int
    spec: BernsteinSpec

    @property
    def values(self):
        return self.c[1:]


def stable_levy_density(alpha):
    """Levy density of x^(alpha/2): (alpha/2)/Gamma(1 - alpha/2) t^(-1-alpha/2)."""
    h = alpha / 2
    const = h / gamma(1 - h)
    return lambda t: const * np.asarray(t, dtype=float) ** (-1 - h)


def levy_grid(density, alpha, t_min=GRID_T_MIN, t_max=GRID_T_MAX, size=GRID_SIZE):
    """
    Discretise a Levy density on a geometric node grid.

    Parameters
    ----------
    density : callable
        Levy density of nu, vectorised over numpy arrays.
    alpha : float
        Stability index; the density is taken to behave like t^(-1-alpha/2)
        below ``t_min`` and above ``t_max``.
    t_min, t_max, size : float, float, int
        Geometric grid t_i = t_min * rho^i with ``size`` nodes ending at ``t_max``.

    Returns
    -------
    nodes, weights, drift
        Trapezoidal weights in log t with the Euler-Maclaurin end terms; the
        mass below ``t_min`` enters as a drift and the mass above ``t_max`` as
        an atom on the last node.
    """
    _check_alpha(alpha)
    if not (0 < t_min < t_max) or size < 2:
        raise DomainError("grid needs 0 < t_min < t_max and at least two nodes")
    h = alpha / 2
    step = math.log(t_max / t_min) / (size - 1)
    nodes = t_min * np.exp(step * np.arange(size))
    nodes[-1] = t_max
    log_density = nodes * density(nodes)
    weights = step * log_density
    weights[0] *= 0.5
    weights[-1] *= 0.5
    em = step ** 2 / 12
    drift = nodes[0] * log_density[0] * (1 / (1 - h) + em * (1 - h))
    weights[-1] += log_density[-1] * (1 / h + em * h)
    logger.debug('Levy grid: %d nodes, step %.4g, drift %.3g, tail atom %.3g',
                 size, step, drift, weights[-1])
    return nodes, weights, drift


def _cpow(z, p):
    out = np.zeros_like(z)
    nz = z != 0
    out[nz] = np.exp(p * np.log(z[nz]))
    return out


def _cexpm1(z):
    """exp(z) - 1 for complex z without cancellation near 0."""
    x, y = z.real, z.imag
    s = np.sin(0.5 * y)
    return np.expm1(x) * np.cos(y) - 2 * s * s + 1j * np.exp(x) * np.sin(y)


def _levy_sum(spec, z, kernel):
    t, w = spec._t, spec._w
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=flat.dtype)
    for start in range(0, flat.size, _CHUNK):
        block = flat[start:start + _CHUNK]
        out[start:start + _CHUNK] = spec.b * block - kernel(-np.multiply.outer(block, t)) @ w
    return out.reshape(z.shape)


def eval_psi(spec, x):
    """psi(x) for x >= 0; scalars in, scalars out."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("psi is defined on x >= 0")
    if spec.family is Family.STABLE:
        out = xa ** spec.index
    elif spec.family is Family.STABLE_LOG:
        with np.errstate(divide='ignore'):
            out = xa ** spec.index * np.log(np.e + 1.0 / xa) ** (-spec.beta) / spec._norm
    else:
        out = _levy_sum(spec, xa, np.expm1) / spec._norm
    return out if out.ndim else float(out)


def eval_psi_complex(spec, z):
    """Holomorphic extension of psi to Re z >= 0 on the principal branch."""
    za = np.asarray(z, dtype=complex)
    if np.any(za.real < 0):
        raise DomainError("psi extends holomorphically only to Re z >= 0")
    if spec.family is Family.STABLE:
        out = _cpow(za, spec.index)
    elif spec.family is Family.STABLE_LOG:
        out = np.zeros_like(za)
        nz = za != 0
        log_term = np.log(np.log(np.e + 1.0 / za[nz]))
        out[nz] = _cpow(za[nz], spec.index) * np.exp(-spec.beta * log_term) / spec._norm
    else:
        out = _levy_sum(spec, za, _cexpm1) / spec._norm
    return out if out.ndim else complex(out)


def stable_survival(alpha, k):
    """P(R > k) for the stable family, Gamma(k+1-alpha/2) / (Gamma(1-alpha/2) Gamma(k+1))."""
    h = alpha / 2
    k = np.asarray(k, dtype=float)
    return np.exp(gammaln(k + 1 - h) - gammaln(1 - h) - gammaln(k + 1))


def default_truncation(spec, eps=DEFAULT_TAIL_EPS, cap=MAX_COEFFICIENTS):
    """Smallest K with tail mass below ``eps``, capped at ``cap``."""
    if spec.family is Family.STABLE:
        if stable_survival(spec.alpha, cap) >= eps:
            logger.debug('stable tail at the cap K=%d is %.3g >= %.3g; using the cap',
                         cap, stable_survival(spec.alpha, cap), eps)
            return cap
        lo, hi = 1, cap
        while lo < hi:
            mid = (lo + hi) // 2
            if stable_survival(spec.alpha, mid) < eps:
                hi = mid
            else:
                lo = mid + 1
        return lo
    if spec.family is Family.STABLE_LOG:
        cap = min(cap, MAX_TRANSFORM_COEFFICIENTS)
    K = 64
    while K < cap:
        if coefficients(spec, K).tail_mass < eps:
            return K
        K *= 2
    return cap


def coefficients(spec, K=None):
    """
    Coefficients c(psi, k), k = 1..K, of the subordinator generated by ``spec``.

    The stable family uses the recurrence c(k+1) = c(k) (k - alpha/2) / (k + 1)
    from c(1) = alpha/2; quadrature families sum Poisson weights over the Levy
    nodes; ``stable_log`` reads the Taylor coefficients of 1 - psi(1 - z) off
    an FFT on a circle of radius rho < 1.
    """
    if K is None:
        K = default_truncation(spec)
    K = int(K)
    if K < 1:
        raise DomainError("K must be a positive integer")
    if K > MAX_COEFFICIENTS:
        raise ResourceError("K=%d exceeds the coefficient cap %d" % (K, MAX_COEFFICIENTS))
    c = np.zeros(K + 1)
    if spec.family is Family.STABLE:
        h = spec.index
        c[1] = h
        if K > 1:
            k = np.arange(1, K, dtype=float)
            c[2:] = h * np.cumprod((k - h) / (k + 1))
    elif spec.family is Family.STABLE_LOG:
        c = _transform_coefficients(spec, K)
    else:
        c = _poisson_coefficients(spec, K)
    tail = max(0.0, 1.0 - float(np.sum(c)))
    logger.debug('coefficients: family=%s K=%d tail_mass=%.3g', spec.family.value, K, tail)
    c.setflags(write=False)
    return CoeffTable(c=c, tail_mass=tail, K=K, spec=spec)


def _poisson_coefficients(spec, K):
    c = np.zeros(K + 1)
    c[1] = spec.b / spec._norm
    t, w = spec._t, spec._w / spec._norm
    if t.size == 0:
        return c
    # Poisson(t_max) has no mass left far beyond t_max
    t_top = float(t.max())
    k_eff = min(K, int(math.ceil(t_top + 40 * math.sqrt(t_top) + 64)))
    for start in range(1, k_eff + 1, _CHUNK):
        k = np.arange(start, min(k_eff, start + _CHUNK - 1) + 1)
        c[k] += poisson.pmf(k[:, None], t[None, :]) @ w
    return c


def _transform_coefficients(spec, K):
    if K > MAX_TRANSFORM_COEFFICIENTS:
        raise ResourceError("K=%d exceeds the transform coefficient cap %d"
                            % (K, MAX_TRANSFORM_COEFFICIENTS))
    size = 1 << int(math.ceil(math.log2(4 * (K + 1))))
    rho = 10.0 ** (-1.0 / K)
    z = rho * np.exp(2j * np.pi * np.arange(size) / size)
    values = 1.0 - eval_psi_complex(spec, 1.0 - z)
    coef = sp_fft.fft(values)[:K + 1].real / size
    c = coef * rho ** (-np.arange(K + 1, dtype=float))
    c[0] = 0.0
    low = c.min()
    if low < -1e-12:
        logger.warning('transform coefficients: round-off down to %.3g clamped at 0', low)
    return np.clip(c, 0.0, None)


def inverse_psi(spec, y, x_max=1.0):
    """
    x with psi(x) = y, by bisection on a geometric scale.

    The bracket starts at [1e-16, x_max] and is widened downwards only when
    psi(1e-16) already exceeds ``y``.
    """
    y = float(y)
    y_max = eval_psi(spec, x_max)
    if not (0 < y <= y_max):
        raise RangeError("inverse_psi needs 0 < y <= psi(x_max) = %r, got %r" % (y_max, y))
    lo, hi = BISECTION_LOWER, float(x_max)
    while eval_psi(spec, lo) >= y and lo > 1e-300:
        lo *= 1e-8
    for _ in range(BISECTION_STEPS):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        if eval_psi(spec, mid) < y:
            lo = mid
        else:
            hi = mid
    if abs(eval_psi(spec, lo) - y) < abs(eval_psi(spec, hi) - y):
        return lo
    return hi


def spatial_scale(spec, n):
    """s(n) = psi^{-1}(1/n)^{-1/2}, the spatial scale of n subordinated steps."""
    return inverse_psi(spec, 1.0 / n) ** -0.5
