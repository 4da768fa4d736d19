"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: validation problems exit 1,
parse/scoring problems exit 2, network problems exit 3 and a missing
semantic backend (when one was required) exits 4.
"""


class HsbrError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HsbrError):
    """Bad input, configuration or precondition violation."""


class PackagesParseError(HsbrError):
    """A package index stanza could not be parsed."""


class ScanError(HsbrError):
    """The repository file tree could not be scanned."""


class ScoringError(HsbrError):
    """A metric could not be normalized or aggregated."""


class CalibrationError(HsbrError):
    """Corpus statistics could not be computed or loaded."""


class UndefinedExpectationError(HsbrError):
    """Expectation requested for an empty histogram."""


class UndefinedCorrelationError(HsbrError):
    """Correlation requested where a variable has zero variance."""


class FixtureError(HsbrError):
    """A snapshot fixture directory is missing or corrupt."""


class ForgeError(HsbrError):
    """Base class for forge (repository host) API failures."""


class RepoNotFoundError(ForgeError):
    """The requested repository does not exist on the forge."""


class RateLimitedError(ForgeError):
    """The forge rejected the request due to rate limiting."""

    def __init__(self, message: str, reset_at: float | None = None):
        super().__init__(message)
        self.reset_at = reset_at


class NetworkError(ForgeError):
    """Transport-level failure that persisted through retries."""


class SemanticUnavailableError(HsbrError):
    """The semantic backend failed and cannot provide verdicts."""
