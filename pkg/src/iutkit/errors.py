"""Exception hierarchy shared across the toolkit.

Validation findings are data (see model.ValidationReport); exceptions here are
reserved for conditions that stop an operation outright.
"""


class IutError(Exception):
    """Base class for all toolkit errors."""


# --- document / schema ---------------------------------------------------


class MalformedDocument(IutError):
    """Input text is not syntactically valid in the interchange format."""


class SchemaViolation(IutError):
    """Document or tree is missing a required field or breaks a hard rule."""


# --- edit algebra --------------------------------------------------------


class DanglingEdit(IutError):
    """An edit names an entity, attribute, or relation that does not exist."""


class ConflictingEdit(IutError):
    """An edit would create a duplicate entity name."""


# --- backend gateway -----------------------------------------------------


class BackendError(IutError):
    """Base class for gateway failures."""


class TransportError(BackendError):
    """Network, timeout, or file-level failure after retries were exhausted."""


class AuthError(BackendError):
    """Credential rejected; never retried."""


class RateLimitedError(BackendError):
    """Backend rate limit hit and retries exhausted."""


class BackendProtocolError(BackendError):
    """Backend answered, but the response does not match the expected shape."""


class EmptyPrompt(IutError):
    """Image generation was asked to render an empty prompt."""


# --- pipeline ------------------------------------------------------------


class ExtractionFailed(IutError):
    """Initial state extraction failed (wraps backend or parse errors)."""


class EmptyResponse(IutError):
    """No non-empty prompt could be recovered from a model response."""


class CriterionCount(IutError):
    """Criterion generation did not yield exactly three valid questions."""

    def __init__(self, message: str, raw: list[str] | None = None):
        super().__init__(message)
        self.raw = raw or []


class EmptyDimension(IutError):
    """Aggregation over an empty criterion set."""


class UnassignedCriterion(IutError):
    """A criterion reached scoring without a dimension label."""


class EmptyDataset(IutError):
    """Benchmark dataset contains no items."""
