"""Stage 2: partition claims into pre-merged and competing groups, record the
team's one-by-one decisions, and finalize a consolidated master profile.

The partitioning rule: claims are grouped by exact (canonical feature key,
normalized value). A group claimed by a single author is non-competing and
pre-merged by default (removable); a group shared by two or more authors
competes, and the team must pick the evidence worth keeping.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .catalog import FeatureCatalog, require_role
from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    StaleVersionError,
    StateError,
    ValidationError,
)
from .model import (
    DraftProfile,
    DraftStatus,
    Evidence,
    FeatureClaim,
    Multiplicity,
    Role,
    TemplateStatus,
    UserRef,
    normalize_value,
)

if TYPE_CHECKING:
    from .state import State


class Classification(str, Enum):
    PREMERGED = "premerged"
    COMPETING = "competing"


class DecisionAction(str, Enum):
    KEEP = "keep"
    REMOVE = "remove"
    SELECT_EVIDENCE = "select_evidence"


class SessionStatus(str, Enum):
    OPEN = "open"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class ClaimGroup:
    """All claims asserting one (feature, value) pair, across drafts."""

    group_id: str
    feature_key: str
    value: str
    claims: tuple[FeatureClaim, ...]
    classification: Classification

    def __post_init__(self) -> None:
        if not self.claims:
            raise ValidationError("a claim group is never empty", field="claims")
        authors = {c.author for c in self.claims}
        if len(authors) != len(self.claims):
            raise ValidationError(
                "claim groups hold at most one claim per author", field="claims"
            )
        expected = (
            Classification.PREMERGED if len(self.claims) == 1 else Classification.COMPETING
        )
        if self.classification is not expected:
            raise ValidationError(
                f"group of {len(self.claims)} claims must be {expected.value}",
                field="classification",
            )
        norm = normalize_value(self.value)
        for claim in self.claims:
            if claim.feature_key != self.feature_key or claim.normalized_value != norm:
                raise ValidationError(
                    "all claims in a group agree on (feature_key, value)", field="claims"
                )

    @property
    def authors(self) -> tuple[str, ...]:
        return tuple(sorted({c.author for c in self.claims}))

    def all_evidence(self) -> list[Evidence]:
        """Union of the members' evidence, in deterministic claim order."""
        return [ev for claim in self.claims for ev in claim.evidence]

    def evidence_ids(self) -> set[str]:
        return {ev.id for ev in self.all_evidence()}


@dataclass(frozen=True)
class MergeDecision:
    group_id: str
    action: DecisionAction
    decided_by: str
    decided_at: str
    chosen_evidence: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "action", DecisionAction(self.action))
        object.__setattr__(self, "chosen_evidence", tuple(self.chosen_evidence))


@dataclass
class MergeSession:
    id: str
    template_id: str
    participants: frozenset[str]
    source_drafts: frozenset[str]
    groups: list[ClaimGroup]
    decisions: dict[str, MergeDecision] = field(default_factory=dict)
    decision_log: list[MergeDecision] = field(default_factory=list)
    status: SessionStatus = SessionStatus.OPEN
    version: int = 1

    def group(self, group_id: str) -> ClaimGroup:
        for group in self.groups:
            if group.group_id == group_id:
                return group
        raise NotFoundError(
            f"unknown group {group_id!r} in session {self.id}",
            details={"group_id": group_id},
        )

    def undecided_competing(self) -> list[str]:
        return [
            g.group_id
            for g in self.groups
            if g.classification is Classification.COMPETING and g.group_id not in self.decisions
        ]


@dataclass(frozen=True)
class MasterEntry:
    feature_key: str
    value: str
    evidence: tuple[Evidence, ...]
    authors: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValidationError(
                "every master entry carries at least one evidence item", field="evidence"
            )
        if not self.authors:
            raise ValidationError("every master entry traces to an author", field="authors")


@dataclass(frozen=True)
class Provenance:
    session_id: str
    decisions: tuple[MergeDecision, ...]


@dataclass(frozen=True)
class MasterProfile:
    template_id: str
    entries: tuple[MasterEntry, ...]
    provenance: Provenance


def group_id_for(feature_key: str, value: str) -> str:
    """Deterministic id for the (feature, value) group, stable across runs."""
    digest = hashlib.sha256(
        f"{feature_key}\n{normalize_value(value)}".encode("utf-8")
    ).hexdigest()
    return f"grp-{digest[:16]}"


def partition_claims(drafts: Iterable[DraftProfile]) -> list[ClaimGroup]:
    """Pure function: bucket every claim by (feature key, normalized value).

    Output is fully deterministic regardless of input order: groups sort by
    (feature_key, normalized value); claims within a group sort by (author,
    claim id); the displayed spelling is the first author's.
    """
    drafts = list(drafts)
    if not drafts:
        raise ValidationError("partitioning needs at least one draft", field="drafts")
    templates = {d.template_id for d in drafts}
    if len(templates) > 1:
        raise ValidationError(
            "all drafts in a merge come from one template",
            code="mixed-template",
            details={"templates": sorted(templates)},
        )
    for draft in drafts:
        if draft.status is not DraftStatus.SUBMITTED:
            raise ValidationError(
                f"draft {draft.id} is not submitted", field="drafts"
            )

    buckets: dict[tuple[str, str], list[FeatureClaim]] = {}
    for draft in drafts:
        for claim in draft.claims:
            buckets.setdefault((claim.feature_key, claim.normalized_value), []).append(claim)

    groups = []
    for (feature_key, _norm), claims in sorted(buckets.items()):
        ordered = tuple(sorted(claims, key=lambda c: (c.author, c.id)))
        display = ordered[0].value
        groups.append(
            ClaimGroup(
                group_id=group_id_for(feature_key, display),
                feature_key=feature_key,
                value=display,
                claims=ordered,
                classification=(
                    Classification.PREMERGED if len(ordered) == 1 else Classification.COMPETING
                ),
            )
        )
    return groups


def open_merge_session(
    state: State,
    template_id: str,
    participants: Sequence[str],
    actor: UserRef,
    new_id: Callable[[str], str],
    now: Callable[[], str],
) -> MergeSession:
    require_role(actor, Role.ADMIN)
    template = state.template(template_id)
    if template.status is TemplateStatus.MERGED:
        raise StateError(
            f"template {template.name!r} is already merged",
            code="template-already-merged",
            details={"template_id": template.id},
        )
    existing = state.open_session_for(template_id)
    if existing is not None:
        raise ConflictError(
            f"a merge session is already open for {template.name!r}",
            details={"session_id": existing.id},
        )
    if not participants:
        raise ValidationError("a merge session needs participants", field="participants")
    for participant in participants:
        state.user(participant)
    drafts = state.submitted_drafts_for(template_id)
    if len(drafts) < 2:
        raise StateError(
            f"merging needs at least 2 submitted drafts, found {len(drafts)}",
            code="too-few-drafts",
            details={"submitted": len(drafts)},
        )

    session = MergeSession(
        id=new_id("ses"),
        template_id=template_id,
        participants=frozenset(participants),
        source_drafts=frozenset(d.id for d in drafts),
        groups=partition_claims(drafts),
    )
    # Non-competing groups start merged-in; the keep is recorded so it can be
    # revisited (flipped to remove) and so the audit log is complete.
    opened_at = now()
    for group in session.groups:
        if group.classification is Classification.PREMERGED:
            decision = MergeDecision(
                group_id=group.group_id,
                action=DecisionAction.KEEP,
                decided_by=actor.id,
                decided_at=opened_at,
            )
            session.decisions[group.group_id] = decision
            session.decision_log.append(decision)
    state.sessions[session.id] = session
    return session


_LEGAL_ACTIONS = {
    Classification.PREMERGED: (DecisionAction.KEEP, DecisionAction.REMOVE),
    Classification.COMPETING: (DecisionAction.SELECT_EVIDENCE,),
}


def decide_group(
    state: State,
    session_id: str,
    group_id: str,
    action: DecisionAction | str,
    actor: UserRef,
    now: Callable[[], str],
    chosen_evidence: Sequence[str] | None = None,
    expected_version: int | None = None,
) -> MergeSession:
    """Record (or overwrite) the team's decision for one group.

    The decisions map reflects the latest word; the log underneath only ever
    appends.
    """
    session = state.session(session_id)
    if session.status is not SessionStatus.OPEN:
        raise StateError(
            f"session {session.id} is finalized",
            code="closed-session",
            details={"session_id": session.id},
        )
    if actor.id not in session.participants:
        raise AuthorizationError(
            f"{actor.display_name} is not a participant in this merge",
            code="non-participant",
            details={"session_id": session.id},
        )
    if expected_version is not None and expected_version != session.version:
        raise StaleVersionError(
            "the session changed underneath you; re-read and retry",
            details={"expected": expected_version, "actual": session.version},
        )
    group = session.group(group_id)
    action = DecisionAction(action)
    if action not in _LEGAL_ACTIONS[group.classification]:
        raise ValidationError(
            f"{action.value} is not legal for a {group.classification.value} group",
            code="illegal-action",
            details={"group_id": group_id, "classification": group.classification.value},
        )

    chosen: tuple[str, ...] = ()
    if action is DecisionAction.SELECT_EVIDENCE:
        chosen = tuple(chosen_evidence or ())
        if not chosen:
            raise ValidationError(
                "select_evidence needs a non-empty evidence subset",
                code="illegal-action",
                details={"group_id": group_id},
            )
        known = group.evidence_ids()
        missing = [ev for ev in chosen if ev not in known]
        if missing:
            raise NotFoundError(
                f"evidence not in this group: {', '.join(missing)}",
                code="unknown-evidence",
                details={"evidence_ids": missing},
            )

    decision = MergeDecision(
        group_id=group_id,
        action=action,
        decided_by=actor.id,
        decided_at=now(),
        chosen_evidence=chosen,
    )
    session.decisions[group_id] = decision
    session.decision_log.append(decision)
    session.version += 1
    return session


def master_from_session(session: MergeSession, features: FeatureCatalog) -> MasterProfile:
    """Build the consolidated profile from a fully-decided session.

    Raises single-value-conflict when a single-valued feature would end up
    with two surviving values; the team must remove down to one first.
    """
    entries: list[MasterEntry] = []
    surviving_by_key: dict[str, list[str]] = {}
    for group in session.groups:
        decision = session.decisions[group.group_id]
        if decision.action is DecisionAction.REMOVE:
            continue
        if decision.action is DecisionAction.SELECT_EVIDENCE:
            chosen = set(decision.chosen_evidence)
            evidence = tuple(ev for ev in group.all_evidence() if ev.id in chosen)
        else:
            evidence = tuple(group.all_evidence())
        entries.append(
            MasterEntry(
                feature_key=group.feature_key,
                value=group.value,
                evidence=evidence,
                authors=group.authors,
            )
        )
        surviving_by_key.setdefault(group.feature_key, []).append(group.value)

    for feature_key, values in sorted(surviving_by_key.items()):
        if len(values) < 2:
            continue
        if features.get(feature_key).multiplicity is Multiplicity.SINGLE:
            raise StateError(
                f"{feature_key} is single-valued but {len(values)} values survive "
                f"({', '.join(values)}); remove down to one",
                code="single-value-conflict",
                details={"feature_key": feature_key, "values": values},
            )

    return MasterProfile(
        template_id=session.template_id,
        entries=tuple(entries),
        provenance=Provenance(session_id=session.id, decisions=tuple(session.decision_log)),
    )


def finalize_master(state: State, session_id: str, actor: UserRef) -> MasterProfile:
    require_role(actor, Role.ADMIN)
    session = state.session(session_id)
    if session.status is not SessionStatus.OPEN:
        raise StateError(
            f"session {session.id} is finalized",
            code="closed-session",
            details={"session_id": session.id},
        )
    undecided = session.undecided_competing()
    if undecided:
        labels = [
            f"{g.feature_key}={g.value}" for g in session.groups if g.group_id in set(undecided)
        ]
        raise StateError(
            f"competing groups still undecided: {', '.join(labels)}",
            code="undecided-groups",
            details={"groups": undecided},
        )
    master = master_from_session(session, state.features)
    template = state.template(session.template_id)
    template.mark_merged()
    session.status = SessionStatus.FINALIZED
    session.version += 1
    state.masters[master.template_id] = master
    return master
