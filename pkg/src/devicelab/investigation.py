"""Stage 1: workers independently build evidence-backed draft profiles.

Drafts are private to their worker until the merge stage; every mutation
checks ownership and the draft's optimistic version counter, and a submitted
draft is immutable.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Callable

from .errors import (
    AuthorizationError,
    ConflictError,
    StaleVersionError,
    StateError,
    ValidationError,
)
from .model import (
    AssetRef,
    DraftProfile,
    DraftStatus,
    Evidence,
    EvidenceLocator,
    FeatureClaim,
    Role,
    SourceKind,
    TemplateStatus,
    UserRef,
    validate_claim_value,
)
from .catalog import require_role

if TYPE_CHECKING:
    from .state import State


def _checked_draft(
    state: State,
    draft_id: str,
    actor: UserRef,
    expected_version: int | None,
) -> DraftProfile:
    """Resolve a draft the actor may mutate right now."""
    draft = state.draft(draft_id)
    if draft.worker != actor.id:
        raise AuthorizationError(
            "draft belongs to another worker",
            code="ownership",
            details={"draft_id": draft.id},
        )
    if draft.status is not DraftStatus.IN_PROGRESS:
        raise StateError(
            f"draft {draft.id} is already submitted", details={"draft_id": draft.id}
        )
    if expected_version is not None and expected_version != draft.version:
        raise StaleVersionError(
            f"draft {draft.id} changed underneath you; re-read and retry",
            details={"expected": expected_version, "actual": draft.version},
        )
    return draft


def open_draft(
    state: State, template_id: str, actor: UserRef, new_id: Callable[[str], str]
) -> DraftProfile:
    require_role(actor, Role.CROWD_WORKER)
    template = state.template(template_id)
    if template.status is TemplateStatus.MERGED:
        raise StateError(
            f"template {template.name!r} is already merged",
            details={"template_id": template.id},
        )
    for draft in state.drafts.values():
        if draft.template_id == template_id and draft.worker == actor.id:
            raise ConflictError(
                f"you already have a draft for {template.name!r}",
                details={"draft_id": draft.id},
            )
    draft = DraftProfile(id=new_id("drf"), template_id=template_id, worker=actor.id)
    state.drafts[draft.id] = draft
    return draft


def add_claim(
    state: State,
    draft_id: str,
    feature_key: str,
    value: str,
    actor: UserRef,
    new_id: Callable[[str], str],
    expected_version: int | None = None,
) -> FeatureClaim:
    draft = _checked_draft(state, draft_id, actor, expected_version)
    definition = state.features.get(feature_key)
    stored = validate_claim_value(definition, value)
    claim = FeatureClaim(
        id=new_id("clm"),
        feature_key=definition.key,
        value=stored,
        author=actor.id,
        draft_id=draft.id,
    )
    if draft.has_claim(claim.feature_key, claim.normalized_value):
        raise ConflictError(
            f"this draft already claims {claim.feature_key} = {stored}",
            code="duplicate-claim",
            details={"feature_key": claim.feature_key, "value": stored},
        )
    draft.claims.append(claim)
    state.claim_index[claim.id] = draft.id
    draft.version += 1
    return claim


def attach_evidence(
    state: State,
    claim_id: str,
    source_kind: SourceKind | str,
    locator: EvidenceLocator,
    actor: UserRef,
    new_id: Callable[[str], str],
    asset: AssetRef | None = None,
    note: str = "",
    expected_version: int | None = None,
) -> Evidence:
    """Append one evidence item to a claim, order preserved.

    Asset bytes are stored by the service before this runs; only the
    content-addressed reference lands on the evidence.
    """
    containing_draft, claim = state.claim(claim_id)
    draft = _checked_draft(state, containing_draft.id, actor, expected_version)
    evidence = Evidence(
        id=new_id("evd"),
        source_kind=SourceKind(source_kind),
        locator=locator,
        asset=asset,
        note=note,
    )
    claim.evidence.append(evidence)
    draft.version += 1
    return evidence


def submit_draft(
    state: State,
    draft_id: str,
    actor: UserRef,
    expected_version: int | None = None,
) -> DraftProfile:
    draft = _checked_draft(state, draft_id, actor, expected_version)
    if not draft.claims:
        raise ValidationError(
            "a draft needs at least one claim before submission",
            code="empty-draft",
            details={"draft_id": draft.id},
        )
    unevidenced = [c.id for c in draft.claims if not c.evidence]
    if unevidenced:
        names = ", ".join(
            f"{c.feature_key}={c.value}" for c in draft.claims if c.id in set(unevidenced)
        )
        raise ValidationError(
            f"every claim needs evidence before submission; missing on: {names}",
            code="missing-evidence",
            details={"claims": unevidenced},
        )
    draft.status = DraftStatus.SUBMITTED
    draft.version += 1
    return draft
