"""Crowd-built product profiles: independent investigation, structured
merging, and side-by-side comparison with ranking polls."""

from .api import create_app
from .errors import (
    AuthorizationError,
    ConflictError,
    DomainError,
    NotFoundError,
    StaleVersionError,
    StateError,
    ValidationError,
)
from .model import Role
from .service import Service

__all__ = [
    "AuthorizationError",
    "ConflictError",
    "DomainError",
    "NotFoundError",
    "Role",
    "Service",
    "StaleVersionError",
    "StateError",
    "ValidationError",
    "create_app",
]

__version__ = "1.0.0"
