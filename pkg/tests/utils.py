import json
import math

import numpy as np
from scipy.special import binom


def write_suite(path, suites, config=None):
    """Writes a suite file holding ``config`` and the list ``suites``
    """
    document = {'config': config or {}, 'suites': suites}
    with open(str(path), 'w') as f:
        json.dump(document, f)
    return path


def binomial_coefficients(alpha, K):
    """(-1)^(k+1) binom(alpha/2, k) for k = 1..K, the series of 1 - (1 - z)^(alpha/2)
    """
    k = np.arange(1, K + 1)
    return (-1.0) ** (k + 1) * binom(alpha / 2, k)


def cauchy_density(x, scale):
    return scale / (math.pi * (scale ** 2 + x ** 2))


def periodize(table, M):
    """Folds a 1-d ConvolutionTable onto Z / M Z, origin at index 0
    """
    out = np.zeros(M)
    for (x,), value in table.items():
        out[x % M] += value
    return out
