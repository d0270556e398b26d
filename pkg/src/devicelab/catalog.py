"""Feature catalogue and product templates: the admin-side seeding step.

The catalogue is the shared dictionary of feature definitions both workers
and admins draw from. Builtin definitions ship with the service; custom ones
are added by workers during investigation and are never silently replaced.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Callable, Iterable

from .errors import AuthorizationError, ConflictError, NotFoundError, ValidationError
from .model import (
    FeatureDefinition,
    FeatureOrigin,
    Multiplicity,
    ProductTemplate,
    Role,
    UserRef,
    ValueKind,
    canonical_key,
    canonical_template_name,
)

if TYPE_CHECKING:
    from .state import State


class FeatureCatalog:
    """Keyed feature definitions with add-only semantics."""

    def __init__(self, definitions: Iterable[FeatureDefinition] = ()) -> None:
        self._definitions: dict[str, FeatureDefinition] = {}
        for definition in definitions:
            self.define(definition)

    def __contains__(self, key: str) -> bool:
        return key in self._definitions

    def __len__(self) -> int:
        return len(self._definitions)

    def define(self, definition: FeatureDefinition) -> FeatureDefinition:
        existing = self._definitions.get(definition.key)
        if existing is not None:
            raise ConflictError(
                f"feature {definition.key!r} already exists "
                f"({existing.origin.value}: {existing.display_name})",
                code="duplicate-key",
                details={
                    "key": existing.key,
                    "display_name": existing.display_name,
                    "origin": existing.origin.value,
                },
            )
        self._definitions[definition.key] = definition
        return definition

    def get(self, key: str) -> FeatureDefinition:
        try:
            return self._definitions[key]
        except KeyError:
            raise NotFoundError(
                f"unknown feature {key!r}", code="unknown-feature", details={"key": key}
            ) from None

    def list(self, origin: FeatureOrigin | None = None) -> list[FeatureDefinition]:
        definitions = self._definitions.values()
        if origin is not None:
            definitions = (d for d in definitions if d.origin is origin)
        return sorted(definitions, key=lambda d: d.key)

    def keys(self) -> list[str]:
        return sorted(self._definitions)


def builtin_definitions() -> list[FeatureDefinition]:
    """The seed catalogue installed on first run."""
    define = FeatureDefinition.define
    return [
        define("Battery Life", ValueKind.NUMERIC, Multiplicity.SINGLE),
        define("Camera", ValueKind.BOOLEAN, Multiplicity.SINGLE),
        define("Companion App", ValueKind.FREE_TEXT, Multiplicity.SINGLE),
        define(
            "Connectivity",
            ValueKind.CHOICE,
            Multiplicity.MULTI,
            choices=["Bluetooth 4.0", "Wi-Fi", "NFC", "Zigbee"],
        ),
        define(
            "Data Storage Location",
            ValueKind.CHOICE,
            Multiplicity.SINGLE,
            choices=["on-device", "cloud", "hybrid"],
        ),
        define(
            "Display",
            ValueKind.CHOICE,
            Multiplicity.SINGLE,
            choices=["OLED", "LCD", "e-ink", "none"],
        ),
        define(
            "Firmware Update Method",
            ValueKind.CHOICE,
            Multiplicity.SINGLE,
            choices=["over-the-air", "companion-app", "usb"],
        ),
        define("Microphone", ValueKind.BOOLEAN, Multiplicity.SINGLE),
        define("Price", ValueKind.NUMERIC, Multiplicity.SINGLE),
        define(
            "Sensors",
            ValueKind.CHOICE,
            Multiplicity.MULTI,
            choices=[
                "accelerometer",
                "heart-rate",
                "GPS",
                "temperature",
                "pressure",
                "camera",
                "microphone",
            ],
        ),
        define("Voice Control", ValueKind.BOOLEAN, Multiplicity.SINGLE),
        define("Water Resistance", ValueKind.BOOLEAN, Multiplicity.SINGLE),
    ]


SENSORS_FEATURE_KEY = "sensors"


def require_role(actor: UserRef, role: Role) -> None:
    if not actor.has_role(role):
        raise AuthorizationError(
            f"{actor.display_name} lacks the {role.value} role",
            details={"required_role": role.value},
        )


def create_product_template(
    state: State,
    name: str,
    description: str,
    brand: str,
    actor: UserRef,
    new_id: Callable[[str], str],
) -> ProductTemplate:
    """Create an open template, visible to all crowd workers."""
    require_role(actor, Role.ADMIN)
    template = ProductTemplate(
        id=new_id("tpl"),
        name=name.strip(),
        description=description,
        brand=brand,
        created_by=actor.id,
    )
    wanted = template.canonical_name
    for existing in state.templates.values():
        if existing.canonical_name == wanted:
            raise ConflictError(
                f"a template named {existing.name!r} already exists",
                code="duplicate-name",
                details={"template_id": existing.id, "name": existing.name},
            )
    state.templates[template.id] = template
    return template


def define_builtin_feature(
    state: State,
    display_name: str,
    value_kind: ValueKind | str,
    choices: list[str] | None,
    multiplicity: Multiplicity | str,
    actor: UserRef,
) -> FeatureDefinition:
    require_role(actor, Role.ADMIN)
    definition = FeatureDefinition.define(
        display_name, value_kind, multiplicity, choices=choices, origin=FeatureOrigin.BUILTIN
    )
    return state.features.define(definition)


def create_custom_feature(
    state: State,
    display_name: str,
    value_kind: ValueKind | str,
    multiplicity: Multiplicity | str,
    actor: UserRef,
) -> FeatureDefinition:
    """Worker-defined feature, immediately claimable by everyone.

    Custom features carry no prebuilt choice list, so the choice kind is not
    available here; the duplicate-key error names the existing definition so
    the worker can reuse it instead.
    """
    require_role(actor, Role.CROWD_WORKER)
    if ValueKind(value_kind) is ValueKind.CHOICE:
        raise ValidationError(
            "custom features cannot define prebuilt choices; use free_text, "
            "numeric, or boolean",
            field="value_kind",
        )
    definition = FeatureDefinition.define(
        display_name,
        value_kind,
        multiplicity,
        origin=FeatureOrigin.CUSTOM,
        created_by=actor.id,
    )
    return state.features.define(definition)


def list_features(state: State, origin: FeatureOrigin | str | None = None) -> list[FeatureDefinition]:
    parsed = FeatureOrigin(origin) if origin is not None else None
    return state.features.list(parsed)


def list_templates(state: State) -> list[ProductTemplate]:
    return sorted(state.templates.values(), key=lambda t: t.id)


def find_template_by_name(state: State, name: str) -> ProductTemplate | None:
    wanted = canonical_template_name(name)
    for template in state.templates.values():
        if template.canonical_name == wanted:
            return template
    return None


__all__ = [
    "FeatureCatalog",
    "SENSORS_FEATURE_KEY",
    "builtin_definitions",
    "canonical_key",
    "create_custom_feature",
    "create_product_template",
    "define_builtin_feature",
    "find_template_by_name",
    "list_features",
    "list_templates",
    "require_role",
]
