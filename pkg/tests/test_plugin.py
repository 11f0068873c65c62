import os
import textwrap

from subwalk.plugin import *

from utils import write_suite

pytest_plugins = "pytester"


FAST_SUITES = [
    {'suite': 'doa'},
    {'suite': 'scaling', 'n': [100, 10000]},
    {'suite': 'flt', 'replicas': 1000, 'n': 50},
]


def _write(testdir, suites, config=None, name='checks.subwalk.json'):
    return write_suite(os.path.join(str(testdir.tmpdir), name), suites, config)


def test_get_tolerances():
    file_contents = textwrap.dedent("""
        [Section1]
        suite: tail
        tolerance: 0.2

        suite: doa
        tolerance: 1e-3

        [Section2 (overwrites tail)]
        suite: tail
        tolerance: 0.1
        """)

    tolerances = get_tolerances(file_contents)
    assert tolerances == [('tail', '0.2'),
                          ('doa', '1e-3'),
                          ('tail', '0.1'),
                         ]


def test_collection(testdir):
    _write(testdir, FAST_SUITES)

    items, recorder = testdir.inline_genitems('--subwalk')

    assert [item.name for item in items] == ['doa 1', 'scaling 2', 'flt 3']
    assert [item.suite for item in items] == ['doa', 'scaling', 'flt']


def test_not_collected_without_flag(testdir):
    _write(testdir, FAST_SUITES)

    items, recorder = testdir.inline_genitems()

    assert len(items) == 0


def test_suite_filter(testdir):
    _write(testdir, FAST_SUITES + [{'suite': 'doa', 'name': 'second doa'}])

    items, recorder = testdir.inline_genitems('--subwalk', '--subwalk-suite', 'doa')

    assert [item.name for item in items] == ['doa 1', 'second doa']


def test_passing_suites(testdir):
    _write(testdir, FAST_SUITES[:2])

    result = testdir.runpytest_subprocess('--subwalk', '-v')

    result.assert_outcomes(passed=2)
    assert result.ret == 0


def test_skipped_suites(testdir):
    _write(testdir, [{'suite': 'doa', 'skip': True}] + FAST_SUITES[2:])

    result = testdir.runpytest_subprocess('--subwalk', '--subwalk-skip-mc')

    result.assert_outcomes(skipped=2)


def test_failing_tolerance(testdir):
    _write(testdir, [{'suite': 'doa', 'tolerances': {'doa': 1e-9}}])

    result = testdir.runpytest_subprocess('--subwalk', '-p', 'no:cacheprovider', '--color=no')

    result.assert_outcomes(failed=1)
    result.stdout.fnmatch_lines(['*Verification suite failed*', '*Suite doa: worst ratio*'])
    assert result.ret == 1


def test_invalid_suite_configuration(testdir):
    _write(testdir, [{'suite': 'doa', 'nope': 1}])

    result = testdir.runpytest_subprocess('--subwalk', '--color=no')

    result.assert_outcomes(failed=1)
    result.stdout.fnmatch_lines(['*Invalid suite configuration*', '*nope: unknown key*'])


def test_tolerance_file(testdir):
    _write(testdir, [{'suite': 'doa'}])
    testdir.makefile('.cfg', tolerances=textwrap.dedent("""
        [Strict]
        suite: doa
        tolerance: 1e-9
        """))

    result = testdir.runpytest_subprocess('--subwalk', '--subwalk-tolerances', 'tolerances.cfg')

    result.assert_outcomes(failed=1)


def test_deprecated_tolerances_option(testdir):
    _write(testdir, [{'suite': 'doa'}])
    testdir.makefile('.cfg', tolerances=textwrap.dedent("""
        [Loose]
        suite: doa
        tolerance: 0.5
        """))

    result = testdir.runpytest_subprocess('--subwalk', '--tolerances', 'tolerances.cfg')

    result.assert_outcomes(passed=1)


def test_conflicting_tolerance_options(testdir):
    _write(testdir, [{'suite': 'doa'}])
    testdir.makefile('.cfg', tolerances="[Loose]\nsuite: doa\ntolerance: 0.5\n")

    result = testdir.runpytest_subprocess('--subwalk', '--tolerances', 'tolerances.cfg',
                                          '--subwalk-tolerances', 'tolerances.cfg')

    assert result.ret != 0
    assert 'were both supplied' in result.stdout.str() + result.stderr.str()


def test_monte_carlo_options_conflict(testdir):
    _write(testdir, FAST_SUITES)

    result = testdir.runpytest_subprocess('--subwalk', '--subwalk-suite', 'flt', '--subwalk-skip-mc')

    assert result.ret != 0
    assert 'mutually exclusive' in result.stdout.str() + result.stderr.str()


def test_reports_written(testdir):
    _write(testdir, [{'suite': 'scaling', 'name': 'scaling small', 'n': [10000]}],
           config={'psi': {'family': 'stable', 'alpha': 1.5}})

    result = testdir.runpytest_subprocess('--subwalk', '--subwalk-out', 'reports')

    result.assert_outcomes(passed=1)
    assert os.path.exists(os.path.join(str(testdir.tmpdir), 'reports', 'verify_scaling_small.csv'))


def test_seed_option_reaches_suites(testdir):
    _write(testdir, FAST_SUITES[2:], config={'seed': 1})

    items, recorder = testdir.inline_genitems('--subwalk', '--subwalk-seed', '5', '--subwalk-threads', '2')

    config = items[0].build_config()
    assert config.seed == 5
    assert config.threads == 2
    assert config.n == (50,)
