"""Domain errors. Every error type carries exactly one API error code."""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base for all domain errors; `code` keys the HTTP error envelope."""

    code = "internal"
    http_status = 500
    retryable = False

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class NotFoundError(WorkbenchError):
    code = "not_found"
    http_status = 404


class UnauthorizedError(WorkbenchError):
    code = "unauthorized"
    http_status = 401


class InvalidInputError(WorkbenchError):
    code = "invalid_input"
    http_status = 400


class MalformedXmlError(WorkbenchError):
    """XML rejected by the parser; message includes the reported position."""

    code = "malformed_xml"
    http_status = 422


class EmptyDocumentError(WorkbenchError):
    """Document parsed cleanly but contains no body paragraphs."""

    code = "empty_document"
    http_status = 422


class DegenerateVectorError(WorkbenchError):
    """Zero-norm vector where a direction is required (cosine)."""

    code = "degenerate_vector"
    http_status = 400


class ProviderMismatchError(WorkbenchError):
    """Vectors from different providers/models cannot be compared."""

    code = "provider_mismatch"
    http_status = 409


class DimensionMismatchError(WorkbenchError):
    code = "dimension_mismatch"
    http_status = 400


class EmptyRetrievalError(WorkbenchError):
    """All four ensembles of a retrieval are empty."""

    code = "empty_retrieval"
    http_status = 400


class DegenerateRetrievalError(WorkbenchError):
    """Retrieval embedding has zero norm (exactly cancelling ensembles)."""

    code = "degenerate_retrieval"
    http_status = 400


class EmptyCategoryError(WorkbenchError):
    """Dataset export found categories with no labeled examples."""

    code = "empty_category"
    http_status = 400

    def __init__(self, message: str, empty_categories: list[str] | None = None):
        super().__init__(message)
        self.empty_categories = empty_categories or []


class ProviderError(WorkbenchError):
    """Transport-level provider failure. Retryable; names the failed inputs."""

    code = "provider_error"
    http_status = 502
    retryable = True

    def __init__(self, message: str, failed_indices: list[int] | None = None):
        super().__init__(message)
        self.failed_indices = failed_indices or []


class StoreError(WorkbenchError):
    code = "store_error"
    http_status = 500


class CorruptStoreError(StoreError):
    """A persisted file failed to parse; message names the file."""

    code = "corrupt_store"


class UnsupportedVersionError(StoreError):
    """Workspace written by a newer schema than this build supports."""

    code = "unsupported_version"


class WorkspaceLockedError(StoreError):
    """Another writer holds the workspace lock."""

    code = "workspace_locked"
    http_status = 409
