"""Error types shared across the platform.

Every error carries a stable machine-readable ``code`` so the HTTP layer can
map it onto exactly one wire-level error, plus a ``retryable`` flag for
transient failures (a dead model endpoint must surface as retryable, never as
a silent human win).
"""

from __future__ import annotations


class PlatformError(Exception):
    """Base class for every recoverable platform error."""

    code = "platform_error"
    retryable = False

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class NotEligible(PlatformError):
    code = "not_eligible"


class NotQualified(PlatformError):
    code = "not_qualified"


class NoPassagesLeft(PlatformError):
    code = "no_passages_left"


class SpanOutOfBounds(PlatformError):
    code = "span_out_of_bounds"


class HitClosed(PlatformError):
    code = "hit_closed"


class ReviewOfForeignHit(PlatformError):
    code = "review_of_foreign_hit"


class SelfValidation(PlatformError):
    code = "self_validation"


class DuplicateValidation(PlatformError):
    code = "duplicate_validation"


class InsufficientValidations(PlatformError):
    code = "insufficient_validations"


class IncompleteTraining(PlatformError):
    code = "incomplete_training"


class UnknownEntity(PlatformError):
    code = "unknown_entity"


class IllegalTransition(PlatformError):
    code = "illegal_transition"


class RemoteUnavailable(PlatformError):
    code = "remote_unavailable"
    retryable = True


class MalformedResponse(PlatformError):
    code = "malformed_response"


class MalformedJson(PlatformError):
    code = "malformed_json"


class OffsetMismatch(PlatformError):
    code = "offset_mismatch"

    def __init__(self, message: str, qa_id: str | None = None):
        super().__init__(message)
        self.qa_id = qa_id


class UnvalidatedDevTest(PlatformError):
    code = "unvalidated_dev_test"


class MissingPredictions(PlatformError):
    code = "missing_predictions"

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


class NoValidations(PlatformError):
    code = "no_validations"


class EmptyDataset(PlatformError):
    code = "empty_dataset"


class UnknownLabel(PlatformError):
    code = "unknown_label"


class TooManyLabels(PlatformError):
    code = "too_many_labels"


class CorruptEventLog(PlatformError):
    code = "corrupt_event_log"

    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq


class BindFailure(PlatformError):
    code = "bind_failure"


class ConfigError(PlatformError):
    code = "config_error"
