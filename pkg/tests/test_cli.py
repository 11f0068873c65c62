import json
import os

import pandas as pd
import pytest

from subwalk.cli import (EXIT_FAIL, EXIT_PASS, EXIT_USAGE, RunConfig, config_from_dict, main, parse_config, run,
                         run_suite)
from subwalk.errors import ConfigError
from subwalk.walk import WalkSpec


def _summary(capsys):
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_parse_config_defaults():
    config = parse_config('{}')
    assert config.walk == WalkSpec.named('simple-1d')
    assert config.psi.alpha == 1.0
    assert config.seed == 0
    assert config.route == 'both'
    assert config.convention == 'effective'
    assert config.tolerance('tail') == 0.15
    assert config.tolerance('onsite') == 0.05


def test_parse_config_rational_probabilities():
    config = parse_config(json.dumps({
        'walk': {'d': 1, 'support': [{'v': [2], 'p': '1/6'}, {'v': [-1], 'p': '1/3'}, {'v': [0], 'p': '1/2'}]},
        'psi': {'family': 'stable_log', 'alpha': 1.2, 'beta': 0.5},
        'x': {'radius': 2},
        'tolerances': {'tail': 0.2},
    }))
    assert sorted(config.walk.probs) == pytest.approx([1 / 6, 1 / 3, 1 / 2])
    assert config.x == ((-2,), (-1,), (0,), (1,), (2,))
    assert config.tolerance('tail') == 0.2


def test_parse_config_errors():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('{"psi": {"family": "stable", "alpha": 2.5}}')
    assert excinfo.value.field == 'psi.alpha'
    assert 'alpha must lie in (0,2)' in str(excinfo.value)
    with pytest.raises(ConfigError) as excinfo:
        parse_config('{"alpah": 1.0}')
    assert excinfo.value.field == 'alpah'
    with pytest.raises(ConfigError):
        parse_config('{"walk": {"d": 1, "support": [{"v": [1], "p": "1/2"}, {"v": [0], "p": "1/2"}]}}')
    with pytest.raises(ConfigError):
        parse_config('{"tolerances": {"tail": -1}}')
    with pytest.raises(ConfigError):
        parse_config('{"n": 1.5}')
    with pytest.raises(ConfigError):
        parse_config('not json')


def test_two_dimensional_points():
    config = config_from_dict({'walk': 'simple-2d', 'x': ['1;0', [0, 2]]})
    assert config.x == ((1, 0), (0, 2))
    assert config_from_dict({'walk': 'simple-2d', 'x': [3, 4]}).x == ((3, 4),)
    with pytest.raises(ConfigError):
        config_from_dict({'walk': 'simple-2d', 'x': ['1;2;3']})


def test_config_round_trip():
    config = config_from_dict({'walk': 'simple-2d', 'n': [5, 10], 'x': [[1, 0]], 'seed': 3,
                               'tolerances': {'doa': 0.02}})
    assert config_from_dict(config.to_dict()) == config
    assert json.loads(json.dumps(config.to_dict()))['n'] == [5, 10]


def test_coeffs_command(tmpdir, capsys):
    status = main(['coeffs', '--alpha', '1', '--k', '4', '--out', str(tmpdir)])
    assert status == EXIT_PASS
    frame = pd.read_csv(os.path.join(str(tmpdir), 'coeffs.csv'))
    assert list(frame.columns) == ['k', 'c']
    assert list(frame['k']) == [1, 2, 3, 4]
    assert list(frame['c']) == pytest.approx([1 / 2, 1 / 8, 1 / 16, 5 / 128], abs=1e-15)
    summary = _summary(capsys)
    assert summary['status'] == 0
    assert summary['tail_mass'] == pytest.approx(0.2734375)


def test_tau_command(tmpdir, capsys):
    status = main(['tau', '--alpha', '1', '--k', '4096', '--n', '1', '--t', '100', '--out', str(tmpdir)])
    assert status == EXIT_PASS
    tail = pd.read_csv(os.path.join(str(tmpdir), 'tau_tail.csv'))
    assert list(tail.columns) == ['t', 'empirical_tail', 'predictor', 'ratio']
    assert tail['ratio'].iloc[0] == pytest.approx(1.0, abs=0.01)
    assert os.path.exists(os.path.join(str(tmpdir), 'tau.csv'))


def test_kernel_command(tmpdir, capsys):
    status = main(['kernel', '--n', '5', '--x', '0', '3', '--out', str(tmpdir)])
    assert status == EXIT_PASS
    frame = pd.read_csv(os.path.join(str(tmpdir), 'kernel.csv'), dtype={'x': str})
    assert sorted(set(frame['route'])) == ['exact', 'fourier']
    assert list(frame['x']) == ['0', '3', '0', '3']
    summary = _summary(capsys)
    assert summary['agree'] is True


def test_constants_command(tmpdir, capsys):
    assert main(['constants', '--walk', 'simple-1d', '--alpha', '1', '--out', str(tmpdir)]) == EXIT_PASS
    summary = _summary(capsys)
    assert summary['const_C'] == pytest.approx(2 ** 0.5 / 3.141592653589793)
    assert summary['period'] == 2


def test_simulate_is_deterministic(tmpdir):
    first, second = tmpdir.mkdir('first'), tmpdir.mkdir('second')
    for out in (first, second):
        assert main(['simulate', '--n', '10', '--t', '0.5', '1', '--replicas', '20', '--seed', '7',
                     '--k', '4096', '--out', str(out)]) == EXIT_PASS
    assert first.join('simulate.csv').read_binary() == second.join('simulate.csv').read_binary()
    frame = pd.read_csv(str(first.join('simulate.csv')))
    assert len(frame) == 40


def test_verify_command(tmpdir, capsys):
    status = main(['verify', 'doa', '--alpha', '1', '--out', str(tmpdir)])
    assert status == EXIT_PASS
    summary = _summary(capsys)
    assert summary['theorem'] == 'doa'
    assert summary['tolerance'] == 0.01
    assert os.path.exists(os.path.join(str(tmpdir), 'verify_doa.csv'))

    status = main(['verify', 'doa', '--alpha', '1', '--tolerance', '1e-9', '--out', str(tmpdir)])
    assert status == EXIT_FAIL
    assert _summary(capsys)['pass'] is False


def test_usage_errors(tmpdir, capsys):
    assert main(['coeffs', '--alpha', '2.5', '--out', str(tmpdir)]) == EXIT_USAGE
    summary = _summary(capsys)
    assert summary['status'] == EXIT_USAGE
    assert 'psi.alpha' in summary['error']
    assert main(['kernel', '--walk', 'simple-9d', '--out', str(tmpdir)]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(['verify', 'nonsense'])


def test_config_file(tmpdir, capsys):
    path = tmpdir.join('run.json')
    path.write(json.dumps({'psi': {'family': 'stable', 'alpha': 1.5}, 'k': 8}))
    assert main(['coeffs', '--config', str(path), '--k', '16', '--out', str(tmpdir)]) == EXIT_PASS
    frame = pd.read_csv(os.path.join(str(tmpdir), 'coeffs.csv'))
    assert len(frame) == 16
    assert frame['c'].iloc[0] == pytest.approx(0.75)


def test_run_returns_summary(tmpdir):
    config = config_from_dict({'out': str(tmpdir), 'n': [100, 10000]})
    status, summary = run(config, 'verify', 'scaling')
    assert status == EXIT_PASS
    assert summary['pass'] is True
    with pytest.raises(ConfigError):
        run(config, 'plot')
    with pytest.raises(ConfigError):
        run_suite(config, 'nonsense')


def test_run_config_tolerance_defaults():
    config = RunConfig(tolerances={'ratio': 0.5})
    assert config.tolerance('ratio') == 0.5
    assert config.tolerance('polya') == 0.15
