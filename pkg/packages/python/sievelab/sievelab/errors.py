class SievelabError(Exception):
    """Base class for every error raised by sievelab.

    `exit_code` is what the command line returns when the error escapes a
    subcommand; `partial_report` holds rows computed before the failure.
    """

    exit_code = 1
    partial_report = None


class InvalidParameterError(SievelabError, ValueError):
    exit_code = 1


class InvalidTruncationError(InvalidParameterError):
    pass


class ConfigError(SievelabError):
    exit_code = 1


class ConditionViolatedError(SievelabError):
    """A model condition required by a closed form does not hold (D_pq != 0)."""

    exit_code = 2


class IntegrationQualityError(SievelabError):
    exit_code = 3


class UnderResolvedError(SievelabError):
    """The Fock truncation cannot represent the requested state or operator."""

    exit_code = 3


class TruncatedSpectrumError(SievelabError):
    exit_code = 2


class ReportIOError(SievelabError, OSError):
    exit_code = 4
