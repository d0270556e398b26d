"""Core domain types: pure data with constructor-enforced invariants.

No storage and no transport here. Aggregates that evolve during a workflow
(templates, claims, drafts) are plain mutable dataclasses; point-in-time
values (users, evidence, asset references) are frozen.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import urlparse

from .errors import StateError, ValidationError


class Role(str, Enum):
    CROWD_WORKER = "crowd_worker"
    ADMIN = "admin"
    STUDENT = "student"


class ValueKind(str, Enum):
    CHOICE = "choice"
    FREE_TEXT = "free_text"
    NUMERIC = "numeric"
    BOOLEAN = "boolean"


class Multiplicity(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class FeatureOrigin(str, Enum):
    BUILTIN = "builtin"
    CUSTOM = "custom"


class TemplateStatus(str, Enum):
    OPEN = "open"
    MERGED = "merged"


class DraftStatus(str, Enum):
    IN_PROGRESS = "in_progress"
    SUBMITTED = "submitted"


class SourceKind(str, Enum):
    PACKAGING = "packaging"
    WEB_PAGE = "web_page"
    PROMO_VIDEO = "promo_video"
    ADVERTISEMENT = "advertisement"
    APP_UI = "app_ui"
    TERMS_AND_CONDITIONS = "terms_and_conditions"
    LEAFLET = "leaflet"
    OTHER = "other"


def canonical_key(display_name: str) -> str:
    """Derive a feature's catalogue key: lowercase, whitespace runs -> single hyphens.

    Idempotent: the output contains no whitespace and no uppercase, so
    re-canonicalizing is a no-op.
    """
    return "-".join(display_name.strip().lower().split())


def normalize_value(value: str) -> str:
    """Comparison form of a claimed value: trimmed and case-insensitive."""
    return value.strip().casefold()


def canonical_template_name(name: str) -> str:
    """Case-insensitive uniqueness key for product template names."""
    return " ".join(name.split()).casefold()


@dataclass(frozen=True)
class UserRef:
    id: str
    display_name: str
    roles: frozenset[Role]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("user id must be non-empty", field="id")
        if not self.display_name.strip():
            raise ValidationError("user display_name must be non-empty", field="display_name")
        object.__setattr__(self, "roles", frozenset(Role(r) for r in self.roles))
        if not self.roles:
            raise ValidationError("a user holds at least one role", field="roles")

    def has_role(self, role: Role) -> bool:
        return role in self.roles


@dataclass
class ProductTemplate:
    """Admin-seeded shell (name, description, brand) that drafts target."""

    id: str
    name: str
    description: str
    brand: str
    created_by: str
    status: TemplateStatus = TemplateStatus.OPEN

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("template id must be non-empty", field="id")
        if not self.name.strip():
            raise ValidationError("template name must be non-empty", field="name")
        self.status = TemplateStatus(self.status)

    @property
    def canonical_name(self) -> str:
        return canonical_template_name(self.name)

    def mark_merged(self) -> None:
        # open -> merged is the only legal transition, and it never reverses.
        if self.status is not TemplateStatus.OPEN:
            raise StateError(f"template {self.id} is already merged")
        self.status = TemplateStatus.MERGED


@dataclass(frozen=True)
class FeatureDefinition:
    key: str
    display_name: str
    value_kind: ValueKind
    multiplicity: Multiplicity
    choices: tuple[str, ...] | None = None
    origin: FeatureOrigin = FeatureOrigin.BUILTIN
    created_by: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))
        object.__setattr__(self, "multiplicity", Multiplicity(self.multiplicity))
        object.__setattr__(self, "origin", FeatureOrigin(self.origin))
        if self.choices is not None:
            object.__setattr__(self, "choices", tuple(self.choices))
        if not self.key:
            raise ValidationError("feature key must be non-empty", field="key")
        if self.key != canonical_key(self.display_name):
            raise ValidationError(
                f"feature key {self.key!r} is not the canonical form of {self.display_name!r}",
                field="key",
            )
        if self.value_kind is ValueKind.CHOICE:
            if not self.choices:
                raise ValidationError("choice features need at least one choice", field="choices")
            seen: set[str] = set()
            for choice in self.choices:
                if not choice.strip():
                    raise ValidationError("choices must be non-empty", field="choices")
                norm = normalize_value(choice)
                if norm in seen:
                    raise ValidationError(f"duplicate choice {choice!r}", field="choices")
                seen.add(norm)
        elif self.choices:
            raise ValidationError(
                f"{self.value_kind.value} features do not take choices", field="choices"
            )
        if self.origin is FeatureOrigin.CUSTOM and not self.created_by:
            raise ValidationError("custom features record their creator", field="created_by")
        if self.origin is FeatureOrigin.BUILTIN and self.created_by:
            raise ValidationError("builtin features have no creator", field="created_by")

    @classmethod
    def define(
        cls,
        display_name: str,
        value_kind: ValueKind | str,
        multiplicity: Multiplicity | str,
        choices: list[str] | tuple[str, ...] | None = None,
        origin: FeatureOrigin | str = FeatureOrigin.BUILTIN,
        created_by: str | None = None,
    ) -> FeatureDefinition:
        """Build a definition with the key derived from the display name."""
        return cls(
            key=canonical_key(display_name),
            display_name=display_name.strip(),
            value_kind=ValueKind(value_kind),
            multiplicity=Multiplicity(multiplicity),
            choices=tuple(choices) if choices else None,
            origin=FeatureOrigin(origin),
            created_by=created_by,
        )


def validate_claim_value(definition: FeatureDefinition, raw: str) -> str:
    """Check *raw* against the definition's value kind and return the stored form.

    Choice values are matched case-insensitively and stored with the
    catalogue's spelling; booleans are stored lowercase; numeric and free-text
    values are stored trimmed as given.
    """
    text = raw.strip()
    if not text:
        raise ValidationError(
            f"value for {definition.key} must be non-empty",
            field="value",
            code="value-validation",
        )
    kind = definition.value_kind
    if kind is ValueKind.CHOICE:
        norm = normalize_value(text)
        for choice in definition.choices or ():
            if normalize_value(choice) == norm:
                return choice
        raise ValidationError(
            f"{text!r} is not one of the choices for {definition.key}",
            field="value",
            code="value-validation",
            details={"choices": list(definition.choices or ())},
        )
    if kind is ValueKind.NUMERIC:
        try:
            number = float(text)
        except ValueError:
            raise ValidationError(
                f"{text!r} is not a number (feature {definition.key} is numeric)",
                field="value",
                code="value-validation",
            ) from None
        if not math.isfinite(number):
            raise ValidationError(
                f"{text!r} is not a finite number", field="value", code="value-validation"
            )
        return text
    if kind is ValueKind.BOOLEAN:
        lowered = text.casefold()
        if lowered not in ("true", "false"):
            raise ValidationError(
                f"{text!r} is not true/false (feature {definition.key} is boolean)",
                field="value",
                code="value-validation",
            )
        return lowered
    return text


@dataclass(frozen=True)
class DocumentPage:
    """Locator pointing at one page of an uploaded or referenced document."""

    page: int
    variant = "document_page"

    def __post_init__(self) -> None:
        if isinstance(self.page, bool) or not isinstance(self.page, int) or self.page < 1:
            raise ValidationError(
                "document page must be an integer >= 1", field="page", code="locator-validation"
            )


@dataclass(frozen=True)
class VideoTimestamp:
    """Locator pointing at a time offset (seconds) inside a video."""

    seconds: float
    variant = "video_timestamp"

    def __post_init__(self) -> None:
        if isinstance(self.seconds, bool) or not isinstance(self.seconds, (int, float)):
            raise ValidationError(
                "video timestamp must be a number", field="seconds", code="locator-validation"
            )
        if not math.isfinite(float(self.seconds)) or self.seconds < 0:
            raise ValidationError(
                "video timestamp must be >= 0 seconds", field="seconds", code="locator-validation"
            )


@dataclass(frozen=True)
class ExternalUrl:
    """Locator pointing at an absolute web address."""

    link: str
    variant = "url"

    def __post_init__(self) -> None:
        parsed = urlparse(self.link)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValidationError(
                f"{self.link!r} is not an absolute http(s) address",
                field="link",
                code="locator-validation",
            )


@dataclass(frozen=True)
class TextQuote:
    """Locator carrying a verbatim quote from the source."""

    quote: str
    variant = "text_quote"

    def __post_init__(self) -> None:
        if not self.quote.strip():
            raise ValidationError(
                "quote must be non-empty", field="quote", code="locator-validation"
            )


EvidenceLocator = DocumentPage | VideoTimestamp | ExternalUrl | TextQuote

LOCATOR_TYPES: dict[str, type] = {
    DocumentPage.variant: DocumentPage,
    VideoTimestamp.variant: VideoTimestamp,
    ExternalUrl.variant: ExternalUrl,
    TextQuote.variant: TextQuote,
}


@dataclass(frozen=True)
class AssetRef:
    """Content-addressed reference to stored bytes; identical bytes, identical ref."""

    content_hash: str
    media_type: str
    size_bytes: int

    def __post_init__(self) -> None:
        digest = self.content_hash
        if len(digest) != 64 or any(c not in "0123456789abcdef" for c in digest):
            raise ValidationError(
                "content_hash must be a lowercase sha-256 hex digest",
                field="content_hash",
            )
        if not self.media_type:
            raise ValidationError("media_type must be non-empty", field="media_type")
        if not isinstance(self.size_bytes, int) or self.size_bytes < 0:
            raise ValidationError("size_bytes must be >= 0", field="size_bytes")

    @classmethod
    def from_bytes(cls, data: bytes, media_type: str) -> AssetRef:
        return cls(
            content_hash=hashlib.sha256(data).hexdigest(),
            media_type=media_type,
            size_bytes=len(data),
        )


@dataclass(frozen=True)
class Evidence:
    id: str
    source_kind: SourceKind
    locator: EvidenceLocator
    asset: AssetRef | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("evidence id must be non-empty", field="id")
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))
        if type(self.locator) not in LOCATOR_TYPES.values():
            raise ValidationError(
                "locator must be exactly one locator variant",
                field="locator",
                code="locator-validation",
            )
        # A bare timestamp into a promo video is unverifiable: the video must
        # be uploaded, or the evidence should use a url locator instead.
        if (
            self.source_kind is SourceKind.PROMO_VIDEO
            and isinstance(self.locator, VideoTimestamp)
            and self.asset is None
        ):
            raise ValidationError(
                "promo video evidence with a timestamp needs an uploaded asset "
                "(or use a url locator for an external link)",
                field="asset",
            )


@dataclass
class FeatureClaim:
    """One worker's assertion that a product has a feature value."""

    id: str
    feature_key: str
    value: str
    author: str
    draft_id: str
    evidence: list[Evidence] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("claim id must be non-empty", field="id")
        if not self.feature_key or self.feature_key != canonical_key(self.feature_key):
            raise ValidationError(
                f"feature_key {self.feature_key!r} is not in canonical form",
                field="feature_key",
            )
        if not self.value.strip():
            raise ValidationError("claim value must be non-empty", field="value")

    @property
    def normalized_value(self) -> str:
        return normalize_value(self.value)


@dataclass
class DraftProfile:
    """One worker's independent profile of one product (stage 1 output)."""

    id: str
    template_id: str
    worker: str
    status: DraftStatus = DraftStatus.IN_PROGRESS
    claims: list[FeatureClaim] = field(default_factory=list)
    version: int = 1

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("draft id must be non-empty", field="id")
        self.status = DraftStatus(self.status)

    def find_claim(self, claim_id: str) -> FeatureClaim | None:
        for claim in self.claims:
            if claim.id == claim_id:
                return claim
        return None

    def has_claim(self, feature_key: str, normalized: str) -> bool:
        return any(
            c.feature_key == feature_key and c.normalized_value == normalized
            for c in self.claims
        )
