"""Domain error hierarchy shared by the service, the HTTP API, and the CLI.

Every error carries a stable machine-readable ``code`` (the same strings the
API returns in error bodies) and an optional ``details`` mapping with context
such as the offending field or entity id.
"""

from __future__ import annotations

from typing import Any


class DomainError(Exception):
    """Base class for all expected, user-visible failures."""

    default_code = "error"

    def __init__(
        self,
        message: str,
        *,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.code = code or self.default_code
        self.details = details or {}


class ValidationError(DomainError):
    """Malformed or rule-violating input; ``field`` names the violated field."""

    default_code = "validation"

    def __init__(
        self,
        message: str,
        *,
        field: str | None = None,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = dict(details or {})
        if field is not None:
            details.setdefault("field", field)
        super().__init__(message, code=code, details=details)
        self.field = field


class AuthorizationError(DomainError):
    """Caller lacks the required role or does not own the target entity."""

    default_code = "authorization"

    def __init__(
        self,
        message: str,
        *,
        code: str | None = None,
        details: dict[str, Any] | None = None,
        http_status: int = 403,
    ) -> None:
        super().__init__(message, code=code, details=details)
        self.http_status = http_status


class NotFoundError(DomainError):
    default_code = "not-found"


class ConflictError(DomainError):
    default_code = "conflict"


class StateError(DomainError):
    """Operation is illegal in the entity's current lifecycle state."""

    default_code = "state"


class StaleVersionError(ConflictError):
    """Optimistic-concurrency failure; the write may be retried after a re-read."""

    default_code = "stale-version"
