"""
Exception hierarchy shared by every factcurve module.

Each top-level family maps onto one process exit code of the command line:
0 success, 1 usage/config, 2 data error, 3 partial pipeline failure.
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class FactCurveError(Exception):
    """Base class for all errors raised by factcurve."""

    exit_code = EXIT_DATA


class ConfigError(FactCurveError):
    """Missing or invalid configuration, flags or credentials."""

    exit_code = EXIT_CONFIG


class DataError(FactCurveError):
    """Input data that violates a precondition or cannot be parsed."""

    exit_code = EXIT_DATA


class PositionDomainError(DataError, ValueError):
    """A position, index or fraction outside its mathematical domain."""


class CorpusFormatError(DataError):
    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}:{line_number}: " if line_number is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class ReferentialIntegrityError(DataError):
    def __init__(self, claim_id, message):
        self.claim_id = claim_id
        super().__init__(f"claim {claim_id}: {message}")


class EmptyCorpusError(DataError):
    pass


class EmptyTextError(DataError, ValueError):
    pass


class EmptyIndexError(DataError):
    pass


class MismatchedClaimSetError(DataError):
    pass


class UnparseableResponseError(DataError):
    def __init__(self, message, raw_text):
        self.raw_text = raw_text
        super().__init__(f"{message}: {raw_text!r}")


class MissingSeparatorError(UnparseableResponseError):
    pass


class EmptyQaError(UnparseableResponseError):
    pass


class DegenerateEstimateError(DataError):
    pass


class NonConvergenceError(DataError):
    pass


class GatewayError(FactCurveError):
    """Failures while talking to a model provider or its replay cache."""

    exit_code = EXIT_PARTIAL


class CacheMissError(GatewayError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"Replay cache miss for key {key}")


class ProviderUnreachableError(GatewayError):
    pass


class RateLimitedError(GatewayError):
    pass


class MalformedPayloadError(GatewayError):
    pass


class PartialFailureError(FactCurveError):
    exit_code = EXIT_PARTIAL
