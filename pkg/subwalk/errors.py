"""
Exception hierarchy shared by the library, the command line and the pytest plugin.
"""


class SubwalkError(Exception):
    """ base class for every error raised by subwalk. """


class DomainError(SubwalkError, ValueError):
    """ an argument lies outside the domain of an operation. """


class RangeError(DomainError):
    pass


class RegimeError(DomainError):
    pass


class WalkError(DomainError):
    pass


class PeriodError(WalkError):
    pass


class ReducibleWalkError(WalkError):
    pass


class ResourceError(SubwalkError):
    pass


class NumericError(SubwalkError, ArithmeticError):
    """ a numerical routine failed; ``diagnostics`` says where and why. """
    def __init__(self, msg, diagnostics=None, *args, **kwargs):
        super(NumericError, self).__init__(msg, *args, **kwargs)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        msg = super(NumericError, self).__str__()
        if not self.diagnostics:
            return msg
        details = ', '.join('%s=%r' % item for item in sorted(self.diagnostics.items()))
        return '%s (%s)' % (msg, details)


class ConfigError(SubwalkError, ValueError):
    """ custom exception for schema violations, naming the offending field. """
    def __init__(self, field, msg, *args, **kwargs):
        self.field = field
        super(ConfigError, self).__init__('%s: %s' % (field, msg), *args, **kwargs)


class VerificationFailure(SubwalkError):
    """ raised when a verification suite misses its tolerance. """
    def __init__(self, suite, msg, report=None, *args, **kwargs):
        self.suite = suite
        super(VerificationFailure, self).__init__(msg, *args, **kwargs)
        self.report = report
