import math

import numpy as np
import pytest

from subwalk.errors import DomainError, PeriodError, ReducibleWalkError, RegimeError, ResourceError, WalkError
from subwalk.walk import WalkSpec, analyze, char_fn, convolve_n, lclt_estimate, one_minus_char_fn


def _walk(support):
    return WalkSpec.from_dict({'d': 1, 'support': [{'v': [v], 'p': p} for v, p in support]})


def test_named_walks():
    walk = WalkSpec.named('simple-2d')
    assert walk.d == 2
    assert walk.radius == 1
    assert sorted(walk.probs) == [0.25] * 4
    with pytest.raises(WalkError):
        WalkSpec.named('simple-9d')


def test_rejects_drift():
    with pytest.raises(WalkError):
        _walk([(1, '1/2'), (0, '1/2')])


def test_rejects_missing_mass():
    with pytest.raises(WalkError):
        _walk([(1, '1/3'), (-1, '1/3')])


def test_rejects_repeated_vectors():
    with pytest.raises(WalkError):
        WalkSpec(d=1, support=(((1,), 0.25), ((1,), 0.25), ((-1,), 0.5)))


def test_float_probabilities():
    walk = WalkSpec.from_dict({'d': 1, 'support': [{'v': [2], 'p': 1 / 6}, {'v': [-1], 'p': 1 / 3},
                                                   {'v': [0], 'p': 1 - 1 / 6 - 1 / 3}]})
    assert WalkSpec.from_dict(walk.to_dict()) == walk


def test_analyze_simple():
    analysis = analyze(WalkSpec.named('simple-1d'))
    assert analysis.r == 2
    assert np.allclose(analysis.Q, [[1.0]])
    assert analysis.class_of(3) == 1
    assert analysis.class_of(-4) == 0

    analysis = analyze(WalkSpec.named('simple-2d'))
    assert analysis.r == 2
    assert np.allclose(analysis.Q, 0.5 * np.eye(2))
    assert analysis.det_Q == pytest.approx(0.25)
    assert analysis.class_of((1, 0)) == 1
    assert analysis.class_of((1, 1)) == 0


def test_analyze_lazy():
    analysis = analyze(WalkSpec.named('lazy-1d'))
    assert analysis.r == 1
    assert np.allclose(analysis.Q, [[0.5]])


def test_period_three():
    analysis = analyze(_walk([(2, '1/3'), (-1, '2/3')]))
    assert analysis.r == 3
    assert np.allclose(analysis.Q, [[2.0]])
    assert analysis.class_of(1) == 2
    assert analysis.class_of(2) == 1


def test_reducible_walk():
    with pytest.raises(ReducibleWalkError):
        analyze(_walk([(2, '1/2'), (-2, '1/2')]))


def test_period_undetermined():
    with pytest.raises(PeriodError):
        analyze(_walk([(10, '1/11'), (-1, '10/11')]), n_period=8)


def test_convolve_two_steps():
    table = convolve_n(WalkSpec.named('simple-1d'), 2)
    assert table[0] == pytest.approx(0.5)
    assert table[2] == pytest.approx(0.25)
    assert table[-2] == pytest.approx(0.25)
    assert table[1] == 0.0
    assert table[7] == 0.0
    assert table.total() == pytest.approx(1.0, abs=1e-15)


def test_convolve_2d_symmetry():
    table = convolve_n(WalkSpec.named('simple-2d'), 9)
    values = table.values
    assert np.allclose(values, values[::-1, ::-1], rtol=0, atol=1e-15)
    assert np.allclose(values, values.T, rtol=0, atol=1e-15)
    assert table.total() == pytest.approx(1.0, abs=1e-14)


def test_convolve_limits():
    with pytest.raises(ResourceError):
        convolve_n(WalkSpec.named('simple-2d'), 100, cap=1000)
    with pytest.raises(DomainError):
        convolve_n(WalkSpec.named('simple-1d'), 0)


def test_char_fn():
    walk = WalkSpec.named('simple-1d')
    theta = np.linspace(-math.pi, math.pi, 13)[:, None]
    assert np.allclose(char_fn(walk, theta), np.cos(theta[:, 0]))
    assert np.allclose(one_minus_char_fn(walk, theta), 1 - np.cos(theta[:, 0]))
    assert char_fn(walk, [0.0]) == 1.0
    with pytest.raises(DomainError):
        char_fn(walk, [0.0, 1.0])


def test_char_fn_small_angles():
    walk = WalkSpec.named('simple-3d')
    gap = one_minus_char_fn(walk, [1e-9, 0.0, 0.0])
    assert gap.real == pytest.approx(1e-18 / 6, rel=1e-10)


def test_lclt_main_term():
    walk = WalkSpec.named('simple-1d')
    analysis = analyze(walk)
    n = 5000
    table = convolve_n(walk, n)
    for x in (0, 10, 50):
        assert lclt_estimate(analysis, x, n) == pytest.approx(table[x], rel=1e-3)
    assert lclt_estimate(analysis, 1, n) == 0.0
    following = convolve_n(walk, n + 1)
    for x in (0, 1, 10, 51):
        window = table[x] + following[x]
        assert lclt_estimate(analysis, x, n, smoothed=True) == pytest.approx(window, rel=1e-3)


def test_lclt_regime():
    analysis = analyze(WalkSpec.named('simple-1d'))
    with pytest.raises(RegimeError):
        lclt_estimate(analysis, 1000, 5000)


@pytest.mark.parametrize('m', [100, 1000, 5000])
def test_return_probability(m):
    table = convolve_n(WalkSpec.named('simple-1d'), 2 * m)
    deviation = 1 - table[0] * math.sqrt(math.pi * m)
    # 1 - 1 / (8 m) + O(m^-2)
    assert 1 / (10 * m) <= deviation <= 3 / m
