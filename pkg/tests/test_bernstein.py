import math

import numpy as np
import pytest
from numpy.polynomial import polynomial

from subwalk.bernstein import (BernsteinSpec, Family, MAX_COEFFICIENTS, coefficients, default_truncation,
                               eval_psi, eval_psi_complex, inverse_psi, spatial_scale, stable_survival)
from subwalk.errors import DomainError, RangeError

from utils import binomial_coefficients


FAMILIES = {
    'stable': BernsteinSpec.stable(1.0),
    'stable_log': BernsteinSpec.stable_log(1.0, 1.0),
    'levy_quadrature': BernsteinSpec.stable_quadrature(1.0),
}


@pytest.fixture(params=sorted(FAMILIES))
def psi(request):
    return FAMILIES[request.param]


def test_stable_values():
    assert eval_psi(BernsteinSpec.stable(1.0), 4.0) == pytest.approx(2.0, abs=1e-15)
    assert eval_psi(BernsteinSpec.stable(1.2), 1.0) == 1.0
    assert eval_psi(BernsteinSpec.stable(0.8), 0.0) == 0.0
    x = np.linspace(0, 10, 11)
    assert np.array_equal(eval_psi(BernsteinSpec.stable(1.5), x), x ** 0.75)


def test_normalisation(psi):
    assert eval_psi(psi, 0.0) == 0.0
    assert abs(eval_psi(psi, 1.0) - 1.0) <= 1e-12


def test_concave_and_increasing(psi):
    values = eval_psi(psi, np.linspace(0, 10, 201))
    first = np.diff(values)
    assert np.all(first >= -1e-10)
    assert np.all(np.diff(first) <= 1e-10)


def test_increment_bound(psi):
    rng = np.random.default_rng(20)
    u = rng.uniform(0, 5, 200)
    u[u == 0] = 1e-3
    z = rng.uniform(0, 10, 200)
    lhs = np.abs(eval_psi(psi, u * (1 + z)) - eval_psi(psi, u))
    assert np.all(lhs <= z * eval_psi(psi, u) + 1e-12)


def test_complex_extension():
    spec = BernsteinSpec.stable(1.0)
    assert eval_psi_complex(spec, 1j) == pytest.approx(complex(math.sqrt(0.5), math.sqrt(0.5)), abs=1e-12)
    assert eval_psi_complex(spec, 1.0) == pytest.approx(1.0, abs=1e-15)
    quadrature = FAMILIES['levy_quadrature']
    assert abs(eval_psi_complex(quadrature, 2 + 0j) - math.sqrt(2)) <= 1e-6


def test_complex_agrees_on_real_axis(psi):
    x = np.linspace(0, 10, 41)
    assert np.allclose(eval_psi_complex(psi, x.astype(complex)).real, eval_psi(psi, x), rtol=0, atol=1e-12)
    assert np.all(np.abs(eval_psi_complex(psi, x.astype(complex)).imag) <= 1e-12)


def test_domain_errors(psi):
    with pytest.raises(DomainError):
        eval_psi(psi, -1.0)
    with pytest.raises(DomainError):
        eval_psi_complex(psi, -0.5 + 1j)


def test_alpha_out_of_range():
    with pytest.raises(DomainError) as excinfo:
        BernsteinSpec.stable(2.5)
    assert 'alpha must lie in (0,2)' in str(excinfo.value)
    with pytest.raises(DomainError):
        BernsteinSpec.stable_log(0.0, 1.0)


def test_killing_term_rejected():
    with pytest.raises(DomainError):
        BernsteinSpec.levy_quadrature([1.0], [1.0], a=0.5)


def test_stable_coefficients():
    table = coefficients(BernsteinSpec.stable(1.0), 4)
    assert np.allclose(table.values, [1 / 2, 1 / 8, 1 / 16, 5 / 128], rtol=0, atol=1e-15)
    assert table.tail_mass == pytest.approx(0.2734375, abs=1e-15)
    assert table.c[0] == 0


@pytest.mark.parametrize('alpha', [0.5, 1.0, 1.5])
def test_stable_coefficients_match_binomial_series(alpha):
    table = coefficients(BernsteinSpec.stable(alpha), 200)
    assert np.allclose(table.values, binomial_coefficients(alpha, 200), rtol=1e-10, atol=0)


@pytest.mark.parametrize('alpha', [0.5, 1.0, 1.5])
def test_stable_tail_mass(alpha):
    table = coefficients(BernsteinSpec.stable(alpha), 10 ** 6)
    assert np.all(table.c >= 0)
    assert abs(table.tail_mass - stable_survival(alpha, 10 ** 6)) <= 1e-10


def test_tail_mass_nonincreasing(psi):
    tails = [coefficients(psi, K).tail_mass for K in (8, 64, 512)]
    assert tails[0] >= tails[1] >= tails[2]


def test_quadrature_coefficients_match_closed_form():
    table = coefficients(FAMILIES['levy_quadrature'], 4)
    assert np.allclose(table.values, [1 / 2, 1 / 8, 1 / 16, 5 / 128], rtol=0, atol=1e-6)


def test_transform_coefficients_without_log_factor():
    log_free = BernsteinSpec.stable_log(1.2, 0.0)
    assert np.allclose(coefficients(log_free, 64).values,
                       coefficients(BernsteinSpec.stable(1.2), 64).values, rtol=0, atol=1e-10)


def test_coefficients_are_read_only(psi):
    table = coefficients(psi, 16)
    with pytest.raises(ValueError):
        table.c[1] = 0.0


def test_generating_function_identity(psi):
    table = coefficients(psi, 1024)
    rng = np.random.default_rng(3)
    z = rng.uniform(0, 1, 50) * np.exp(1j * rng.uniform(-math.pi, math.pi, 50))
    series = polynomial.polyval(z, table.c)
    exact = 1.0 - eval_psi_complex(psi, 1.0 - z)
    assert np.all(np.abs(exact - series) <= table.tail_mass + 1e-8)


def test_default_truncation():
    assert default_truncation(BernsteinSpec.stable(1.0)) == MAX_COEFFICIENTS
    K = default_truncation(BernsteinSpec.stable(1.0), eps=1e-2)
    assert stable_survival(1.0, K) < 1e-2 <= stable_survival(1.0, K - 1)


def test_inverse_psi():
    assert inverse_psi(BernsteinSpec.stable(1.0), 0.01) == pytest.approx(1e-4, rel=1e-12)
    assert inverse_psi(BernsteinSpec.stable(1.5), 1.0) == pytest.approx(1.0, rel=1e-12)
    spec = FAMILIES['stable_log']
    x = inverse_psi(spec, 1e-3)
    assert abs(eval_psi(spec, x) - 1e-3) <= 1e-12 * 1e-3


@pytest.mark.parametrize('name', ['stable', 'stable_log'])
def test_inverse_round_trip(name):
    spec = FAMILIES[name]
    for x in np.geomspace(1e-8, 1, 17):
        assert inverse_psi(spec, eval_psi(spec, x)) == pytest.approx(x, rel=1e-10)


def test_inverse_psi_range():
    spec = BernsteinSpec.stable(1.0)
    with pytest.raises(RangeError):
        inverse_psi(spec, 0.0)
    with pytest.raises(RangeError):
        inverse_psi(spec, 2.0)


def test_spatial_scale():
    assert spatial_scale(BernsteinSpec.stable(1.0), 100) == pytest.approx(100.0, rel=1e-10)


def test_json_round_trip(psi):
    assert BernsteinSpec.from_dict(psi.to_dict()) == psi


def test_from_dict():
    spec = BernsteinSpec.from_dict({'family': 'stable', 'alpha': 1.0})
    assert spec.family is Family.STABLE
    quadrature = BernsteinSpec.from_dict({'family': 'levy_quadrature', 'alpha': 1.0})
    assert quadrature == FAMILIES['levy_quadrature']
    with pytest.raises(DomainError):
        BernsteinSpec.from_dict({'family': 'stable', 'alpha': 1.0, 'beta': 2.0})
    with pytest.raises(DomainError):
        BernsteinSpec.from_dict({'family': 'gamma'})


def test_pure_drift():
    spec = BernsteinSpec.levy_quadrature([], [], b=1.0)
    assert eval_psi(spec, 3.0) == pytest.approx(3.0)
    table = coefficients(spec, 4)
    assert list(table.values) == [1.0, 0.0, 0.0, 0.0]
    assert table.tail_mass == 0.0
