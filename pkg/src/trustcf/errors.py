"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: configuration problems,
I/O failures, and data-integrity violations are separate classes.
"""


class TrustCFError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TrustCFError):
    """Invalid run configuration: bad flag value, unknown method, bad manifest key."""


class ParseError(TrustCFError):
    """Malformed dataset line. Carries the file path and 1-based line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class RatingRangeError(TrustCFError):
    """A rating value falls outside the declared rating-scale bounds."""


class IntegrityError(TrustCFError):
    """Dataset or store violates a structural invariant.

    Covers duplicate (user, item) ratings, duplicate or self-referential
    trust statements, expected-count mismatches, and stale trust stores.
    """


class UndefinedMeanError(TrustCFError):
    """Requested a mean for a user with no ratings (or of an empty matrix)."""


class NoUsableWeights(TrustCFError):
    """Weight fusion degenerated: every normalization denominator is zero."""
