"""
pytest plugin collecting verification suites from ``*.subwalk.json`` files.

Each file holds a shared run configuration and a list of suites; every suite
becomes one test item that passes when its report is within tolerance.
"""

import json
import logging
import re
import time
import warnings

import pytest

from .cli import SUITES, config_from_dict, run_suite
from .errors import ConfigError, VerificationFailure
from .output import write_csv

logger = logging.getLogger('subwalk')

MONTE_CARLO_SUITES = ('flt',)


# define colours for pretty outputs
class bcolors:
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'


class nocolors:
    HEADER = ''
    OKBLUE = ''
    OKGREEN = ''
    WARNING = ''
    FAIL = ''
    ENDC = ''


def pytest_addoption(parser):
    """
    Adds the --subwalk option flag for py.test.

    Suite files are only collected when --subwalk is present; the remaining
    options tune how they run.
    """
    group = parser.getgroup("subwalk", "Subordinated random walk verification")

    group.addoption('--subwalk', action='store_true',
                    help="Collect *.subwalk.json files and run their verification suites")

    group.addoption('--subwalk-tolerances',
                    help='File with suite/tolerance pairs overriding the '
                         'tolerances of the suite files. This option only works '
                         'when the --subwalk flag is passed to py.test')

    group.addoption('--subwalk-seed', action='store', type=int, default=None,
                    help='Seed for Monte Carlo suites, overriding the suite files.')

    group.addoption('--subwalk-threads', action='store', type=int, default=None,
                    help='Maximum number of worker threads per suite.')

    group.addoption('--subwalk-out', action='store', default=None,
                    help='Directory receiving the CSV report of every suite.')

    group.addoption('--subwalk-suite', action='append', default=[], choices=SUITES,
                    help='Only run the named suite; may be given several times.')

    group.addoption('--subwalk-skip-mc', action='store_true',
                    help='Skip Monte Carlo suites.')

    group.addoption('--tolerances',
                    help='(deprecated) Alias of --subwalk-tolerances')


def pytest_configure(config):
    if config.option.tolerances:
        warnings.warn("--tolerances has been renamed to --subwalk-tolerances", DeprecationWarning)
        if config.option.subwalk_tolerances:
            raise ValueError("--tolerances and --subwalk-tolerances were both supplied.")
        config.option.subwalk_tolerances = config.option.tolerances
    if config.option.subwalk:
        wanted = set(config.option.subwalk_suite)
        if config.option.subwalk_skip_mc and wanted & set(MONTE_CARLO_SUITES):
            raise ValueError("--subwalk-suite %s and --subwalk-skip-mc are mutually exclusive."
                             % ', '.join(sorted(wanted & set(MONTE_CARLO_SUITES))))


def pytest_collect_file(file_path, parent):
    """
    Collect verification suite files using the specified pytest hook
    """
    opt = parent.config.option
    if opt.subwalk and file_path.name.endswith('.subwalk.json'):
        return SuiteFile.from_parent(parent, path=file_path)


def get_tolerances(string):
    """
    *Arguments*

    string:  str

        String containing suite-tolerance pairs as would be read
        from a tolerance config file.

    *Returns*

    A list of (suite, tolerance) pairs.
    """
    return re.findall('^suite: (.*)$\n^tolerance: (.*)$',
                      string,
                      flags=re.MULTILINE)


class SuiteFile(pytest.File):
    """
    A collector associated with one suite file; yields one item per suite.
    """

    def load_tolerances(self):
        fname = self.config.option.subwalk_tolerances
        if fname is None:
            return {}
        with open(fname, 'r') as f:
            pairs = get_tolerances(f.read())
        tolerances = {}
        for suite, value in pairs:
            suite = suite.strip()
            if suite not in SUITES:
                raise ConfigError('tolerances.%s' % suite, "unknown suite in %s" % fname)
            tolerances[suite] = float(value)
        return tolerances

    def collect(self):
        with open(str(self.path), 'r') as f:
            document = json.load(f)
        base = dict(document.get('config', {}))
        option = self.config.option
        tolerances = dict(base.get('tolerances', {}))
        tolerances.update(self.load_tolerances())
        if tolerances:
            base['tolerances'] = tolerances
        if option.subwalk_seed is not None:
            base['seed'] = option.subwalk_seed
        if option.subwalk_threads is not None:
            base['threads'] = option.subwalk_threads
        wanted = set(option.subwalk_suite)
        for number, entry in enumerate(document.get('suites', []), 1):
            suite = entry.get('suite')
            if wanted and suite not in wanted:
                continue
            name = entry.get('name', '%s %d' % (suite, number))
            yield SuiteItem.from_parent(self, name=name, entry=entry, base=base)


class SuiteItem(pytest.Item):
    def __init__(self, name, parent, entry, base):
        super(SuiteItem, self).__init__(name, parent)
        self.entry = dict(entry)
        self.suite = self.entry.pop('suite', None)
        self.skip = bool(self.entry.pop('skip', False))
        self.entry.pop('name', None)
        self.base = base
        self.report = None
        # Disable colors if we have been explicitly asked to
        self.colors = bcolors if self.config.option.color != 'no' else nocolors

    def build_config(self):
        if self.suite not in SUITES:
            raise ConfigError('suite', "unknown suite %r" % (self.suite,))
        data = dict(self.base)
        entry = dict(self.entry)
        tolerances = dict(data.get('tolerances', {}))
        tolerances.update(entry.pop('tolerances', {}))
        data.update(entry)
        if tolerances:
            data['tolerances'] = tolerances
        return config_from_dict(data)

    def runtest(self):
        if self.skip:
            pytest.skip("suite marked skip")
        if self.config.option.subwalk_skip_mc and self.suite in MONTE_CARLO_SUITES:
            pytest.skip("Monte Carlo suites skipped (--subwalk-skip-mc)")
        config = self.build_config()
        started = time.time()
        self.report = run_suite(config, self.suite)
        logger.debug('suite %s finished in %.2fs', self.name, time.time() - started)
        if self.config.option.subwalk_out:
            write_csv(self.report.table, self.config.option.subwalk_out,
                      'verify_%s.csv' % re.sub(r'\W+', '_', self.name))
        if not self.report.passed:
            raise VerificationFailure(self.suite, "worst ratio %.6g outside tolerance %.6g"
                                      % (self.report.worst_ratio, self.report.tolerance), self.report)

    def repr_failure(self, excinfo):
        """ called when self.runtest() raises an exception. """
        exc = excinfo.value
        cc = self.colors
        if isinstance(exc, VerificationFailure):
            msg_items = [cc.FAIL + "Verification suite failed" + cc.ENDC]
            formatstring = (
                cc.OKBLUE + "Suite %s: %s\n\n" +
                "Report:\n" + cc.ENDC + "%s\n")
            table = exc.report.table.to_string(index=False) if exc.report is not None else ''
            msg_items.append(formatstring % (exc.suite, str(exc), table))
            return "\n".join(msg_items)
        elif isinstance(exc, ConfigError):
            return cc.FAIL + "Invalid suite configuration" + cc.ENDC + "\n" + str(exc)
        else:
            return "subwalk plugin exception: %s" % str(exc)

    def reportinfo(self):
        return self.path, 0, "%s::%s" % (self.path.name, self.name)
