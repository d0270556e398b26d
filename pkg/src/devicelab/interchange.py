"""The interchange document: a canonical JSON snapshot of the catalogue that
round-trips byte-identically (export, import, export again yields the same
text), plus the private on-disk envelope that additionally carries sessions,
polls, and token hashes.

Canonical form: sorted object keys, two-space indent, UTF-8 text, trailing
newline, and all lists in a deterministic order (ids ascending; claims and
evidence keep their meaningful insertion order).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import ValidationError
from .merge import (
    DecisionAction,
    MasterEntry,
    MasterProfile,
    MergeDecision,
    MergeSession,
    Provenance,
    SessionStatus,
    partition_claims,
)
from .comparison import Poll, Ranking
from .model import (
    AssetRef,
    DraftProfile,
    DraftStatus,
    Evidence,
    EvidenceLocator,
    FeatureClaim,
    FeatureDefinition,
    LOCATOR_TYPES,
    ProductTemplate,
    TemplateStatus,
    UserRef,
)
from .state import State

FORMAT_VERSION = 1
ENVELOPE_VERSION = 1


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- encoding


def _encode_user(user: UserRef) -> dict:
    return {
        "id": user.id,
        "display_name": user.display_name,
        "roles": sorted(role.value for role in user.roles),
    }


def _encode_feature(feature: FeatureDefinition) -> dict:
    return {
        "key": feature.key,
        "display_name": feature.display_name,
        "value_kind": feature.value_kind.value,
        "multiplicity": feature.multiplicity.value,
        "choices": list(feature.choices) if feature.choices is not None else None,
        "origin": feature.origin.value,
        "created_by": feature.created_by,
    }


def _encode_template(template: ProductTemplate) -> dict:
    return {
        "id": template.id,
        "name": template.name,
        "description": template.description,
        "brand": template.brand,
        "created_by": template.created_by,
        "status": template.status.value,
    }


def _encode_locator(locator: EvidenceLocator) -> dict:
    encoded: dict[str, Any] = {"type": locator.variant}
    for name in locator.__dataclass_fields__:
        encoded[name] = getattr(locator, name)
    return encoded


def _encode_asset_ref(asset: AssetRef) -> dict:
    return {
        "content_hash": asset.content_hash,
        "media_type": asset.media_type,
        "size_bytes": asset.size_bytes,
    }


def _encode_evidence(evidence: Evidence) -> dict:
    return {
        "id": evidence.id,
        "source_kind": evidence.source_kind.value,
        "locator": _encode_locator(evidence.locator),
        "asset": _encode_asset_ref(evidence.asset) if evidence.asset else None,
        "note": evidence.note,
    }


def _encode_claim(claim: FeatureClaim) -> dict:
    return {
        "id": claim.id,
        "feature_key": claim.feature_key,
        "value": claim.value,
        "author": claim.author,
        "evidence": [_encode_evidence(ev) for ev in claim.evidence],
    }


def _encode_draft(draft: DraftProfile) -> dict:
    return {
        "id": draft.id,
        "template_id": draft.template_id,
        "worker": draft.worker,
        "status": draft.status.value,
        "version": draft.version,
        "claims": [_encode_claim(claim) for claim in draft.claims],
    }


def _encode_decision(decision: MergeDecision) -> dict:
    return {
        "group_id": decision.group_id,
        "action": decision.action.value,
        "decided_by": decision.decided_by,
        "decided_at": decision.decided_at,
        "chosen_evidence": list(decision.chosen_evidence),
    }


def _encode_master(master: MasterProfile) -> dict:
    return {
        "template_id": master.template_id,
        "entries": [
            {
                "feature_key": entry.feature_key,
                "value": entry.value,
                "evidence": [_encode_evidence(ev) for ev in entry.evidence],
                "authors": list(entry.authors),
            }
            for entry in master.entries
        ],
        "provenance": {
            "session_id": master.provenance.session_id,
            "decisions": [_encode_decision(d) for d in master.provenance.decisions],
        },
    }


def _encode_ranking(ranking: Ranking) -> dict:
    return {
        "poll_id": ranking.poll_id,
        "student": ranking.student,
        "criterion": ranking.criterion,
        "ordered_products": list(ranking.ordered_products),
        "submitted_at": ranking.submitted_at,
    }


def catalogue_document(state: State) -> dict:
    """The complete public snapshot, every list deterministically ordered."""
    rankings = [
        state.rankings[poll_id][student]
        for poll_id in sorted(state.rankings)
        for student in sorted(state.rankings[poll_id])
    ]
    return {
        "format_version": FORMAT_VERSION,
        "users": [_encode_user(state.users[uid]) for uid in sorted(state.users)],
        "features": [_encode_feature(f) for f in state.features.list()],
        "templates": [_encode_template(state.templates[tid]) for tid in sorted(state.templates)],
        "drafts": [_encode_draft(state.drafts[did]) for did in sorted(state.drafts)],
        "masters": [_encode_master(state.masters[tid]) for tid in sorted(state.masters)],
        "rankings": [_encode_ranking(r) for r in rankings],
        "asset_manifest": [
            _encode_asset_ref(state.assets[h]) for h in sorted(state.assets)
        ],
    }


# ---------------------------------------------------------------- decoding


def _fail(message: str) -> ValidationError:
    return ValidationError(message, code="validation")


def _require(payload: Any, key: str, kind: type, where: str) -> Any:
    if not isinstance(payload, dict):
        raise _fail(f"{where} must be an object")
    if key not in payload:
        raise _fail(f"{where} is missing {key!r}")
    value = payload[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _fail(f"{where}.{key} must be a number")
        return value
    if kind is int and isinstance(value, bool):
        raise _fail(f"{where}.{key} must be an integer")
    if not isinstance(value, kind):
        raise _fail(f"{where}.{key} must be {kind.__name__}")
    return value


def _decode_locator(payload: Any, where: str) -> EvidenceLocator:
    variant = _require(payload, "type", str, where)
    locator_type = LOCATOR_TYPES.get(variant)
    if locator_type is None:
        raise _fail(f"{where} has unknown locator type {variant!r}")
    fields = {
        name: payload.get(name) for name in locator_type.__dataclass_fields__
    }
    missing = [name for name, value in fields.items() if value is None]
    if missing:
        raise _fail(f"{where} is missing {missing[0]!r}")
    return locator_type(**fields)


def _decode_asset_ref(payload: Any, where: str) -> AssetRef:
    return AssetRef(
        content_hash=_require(payload, "content_hash", str, where),
        media_type=_require(payload, "media_type", str, where),
        size_bytes=_require(payload, "size_bytes", int, where),
    )


def _decode_evidence(payload: Any, where: str) -> Evidence:
    asset = payload.get("asset") if isinstance(payload, dict) else None
    return Evidence(
        id=_require(payload, "id", str, where),
        source_kind=_require(payload, "source_kind", str, where),
        locator=_decode_locator(_require(payload, "locator", dict, where), f"{where}.locator"),
        asset=_decode_asset_ref(asset, f"{where}.asset") if asset is not None else None,
        note=str(payload.get("note", "")),
    )


def _decode_decision(payload: Any, where: str) -> MergeDecision:
    chosen = payload.get("chosen_evidence", []) if isinstance(payload, dict) else []
    if not isinstance(chosen, list):
        raise _fail(f"{where}.chosen_evidence must be a list")
    return MergeDecision(
        group_id=_require(payload, "group_id", str, where),
        action=DecisionAction(_require(payload, "action", str, where)),
        decided_by=_require(payload, "decided_by", str, where),
        decided_at=_require(payload, "decided_at", str, where),
        chosen_evidence=tuple(str(ev) for ev in chosen),
    )


@dataclass
class DecodedCatalogue:
    """A validated document, materialized into domain objects."""

    users: dict[str, UserRef] = field(default_factory=dict)
    features: list[FeatureDefinition] = field(default_factory=list)
    templates: dict[str, ProductTemplate] = field(default_factory=dict)
    drafts: dict[str, DraftProfile] = field(default_factory=dict)
    masters: dict[str, MasterProfile] = field(default_factory=dict)
    polls: dict[str, Poll] = field(default_factory=dict)
    rankings: dict[str, dict[str, Ranking]] = field(default_factory=dict)
    manifest: dict[str, AssetRef] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        return {
            "users": len(self.users),
            "features": len(self.features),
            "templates": len(self.templates),
            "drafts": len(self.drafts),
            "masters": len(self.masters),
            "rankings": sum(len(by_student) for by_student in self.rankings.values()),
            "assets": len(self.manifest),
        }


def decode_catalogue(doc: Any) -> DecodedCatalogue:
    """Validate and materialize a document; the first violation aborts."""
    if not isinstance(doc, dict):
        raise _fail("document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported format_version {version!r}, expected {FORMAT_VERSION}",
            code="version-mismatch",
            details={"found": version, "expected": FORMAT_VERSION},
        )
    for key in ("users", "features", "templates", "drafts", "masters", "rankings", "asset_manifest"):
        if not isinstance(doc.get(key), list):
            raise _fail(f"document.{key} must be a list")

    out = DecodedCatalogue()

    for i, payload in enumerate(doc["users"]):
        where = f"users[{i}]"
        user = UserRef(
            id=_require(payload, "id", str, where),
            display_name=_require(payload, "display_name", str, where),
            roles=frozenset(_require(payload, "roles", list, where)),
        )
        if user.id in out.users:
            raise _fail(f"duplicate user id {user.id!r}")
        out.users[user.id] = user

    for i, payload in enumerate(doc["asset_manifest"]):
        asset = _decode_asset_ref(payload, f"asset_manifest[{i}]")
        if asset.content_hash in out.manifest:
            raise _fail(f"duplicate asset {asset.content_hash!r}")
        out.manifest[asset.content_hash] = asset

    seen_keys: set[str] = set()
    for i, payload in enumerate(doc["features"]):
        where = f"features[{i}]"
        choices = payload.get("choices") if isinstance(payload, dict) else None
        feature = FeatureDefinition(
            key=_require(payload, "key", str, where),
            display_name=_require(payload, "display_name", str, where),
            value_kind=_require(payload, "value_kind", str, where),
            multiplicity=_require(payload, "multiplicity", str, where),
            choices=tuple(choices) if choices is not None else None,
            origin=_require(payload, "origin", str, where),
            created_by=payload.get("created_by"),
        )
        if feature.key in seen_keys:
            raise _fail(f"duplicate feature key {feature.key!r}")
        seen_keys.add(feature.key)
        if feature.created_by is not None and feature.created_by not in out.users:
            raise _fail(f"{where} creator {feature.created_by!r} is not a document user")
        out.features.append(feature)

    for i, payload in enumerate(doc["templates"]):
        where = f"templates[{i}]"
        template = ProductTemplate(
            id=_require(payload, "id", str, where),
            name=_require(payload, "name", str, where),
            description=str(payload.get("description", "")),
            brand=str(payload.get("brand", "")),
            created_by=_require(payload, "created_by", str, where),
            status=_require(payload, "status", str, where),
        )
        if template.id in out.templates:
            raise _fail(f"duplicate template id {template.id!r}")
        if template.created_by not in out.users:
            raise _fail(f"{where} creator {template.created_by!r} is not a document user")
        duplicate = next(
            (t for t in out.templates.values() if t.canonical_name == template.canonical_name),
            None,
        )
        if duplicate is not None:
            raise _fail(f"templates {duplicate.id!r} and {template.id!r} share a name")
        out.templates[template.id] = template

    claim_ids: set[str] = set()
    evidence_ids: set[str] = set()
    for i, payload in enumerate(doc["drafts"]):
        where = f"drafts[{i}]"
        draft = DraftProfile(
            id=_require(payload, "id", str, where),
            template_id=_require(payload, "template_id", str, where),
            worker=_require(payload, "worker", str, where),
            status=_require(payload, "status", str, where),
            version=_require(payload, "version", int, where),
        )
        if draft.id in out.drafts:
            raise _fail(f"duplicate draft id {draft.id!r}")
        if draft.template_id not in out.templates:
            raise _fail(f"{where} references unknown template {draft.template_id!r}")
        if draft.worker not in out.users:
            raise _fail(f"{where} worker {draft.worker!r} is not a document user")
        seen_pairs: set[tuple[str, str]] = set()
        for j, claim_payload in enumerate(_require(payload, "claims", list, where)):
            claim_where = f"{where}.claims[{j}]"
            claim = FeatureClaim(
                id=_require(claim_payload, "id", str, claim_where),
                feature_key=_require(claim_payload, "feature_key", str, claim_where),
                value=_require(claim_payload, "value", str, claim_where),
                author=_require(claim_payload, "author", str, claim_where),
                draft_id=draft.id,
            )
            if claim.id in claim_ids:
                raise _fail(f"duplicate claim id {claim.id!r}")
            claim_ids.add(claim.id)
            if claim.author not in out.users:
                raise _fail(f"{claim_where} author {claim.author!r} is not a document user")
            if claim.feature_key not in seen_keys:
                raise _fail(f"{claim_where} references unknown feature {claim.feature_key!r}")
            pair = (claim.feature_key, claim.normalized_value)
            if pair in seen_pairs:
                raise _fail(f"{claim_where} repeats {claim.feature_key}={claim.value}")
            seen_pairs.add(pair)
            for k, ev_payload in enumerate(_require(claim_payload, "evidence", list, claim_where)):
                evidence = _decode_evidence(ev_payload, f"{claim_where}.evidence[{k}]")
                if evidence.id in evidence_ids:
                    raise _fail(f"duplicate evidence id {evidence.id!r}")
                evidence_ids.add(evidence.id)
                if evidence.asset and evidence.asset.content_hash not in out.manifest:
                    raise _fail(
                        f"{claim_where} evidence {evidence.id!r} references asset "
                        f"{evidence.asset.content_hash!r} missing from the manifest"
                    )
                claim.evidence.append(evidence)
            if draft.status is DraftStatus.SUBMITTED and not claim.evidence:
                raise _fail(
                    f"{claim_where}: submitted drafts carry evidence on every claim"
                )
            draft.claims.append(claim)
        if draft.status is DraftStatus.SUBMITTED and not draft.claims:
            raise _fail(f"{where} is submitted but has no claims")
        out.drafts[draft.id] = draft

    for i, payload in enumerate(doc["masters"]):
        where = f"masters[{i}]"
        template_id = _require(payload, "template_id", str, where)
        if template_id not in out.templates:
            raise _fail(f"{where} references unknown template {template_id!r}")
        if template_id in out.masters:
            raise _fail(f"duplicate master for template {template_id!r}")
        if out.templates[template_id].status is not TemplateStatus.MERGED:
            raise _fail(f"{where}: template {template_id!r} is not marked merged")
        entries = []
        for j, entry_payload in enumerate(_require(payload, "entries", list, where)):
            entry_where = f"{where}.entries[{j}]"
            authors = _require(entry_payload, "authors", list, entry_where)
            for author in authors:
                if author not in out.users:
                    raise _fail(f"{entry_where} author {author!r} is not a document user")
            evidence = []
            for k, ev_payload in enumerate(
                _require(entry_payload, "evidence", list, entry_where)
            ):
                item = _decode_evidence(ev_payload, f"{entry_where}.evidence[{k}]")
                if item.asset and item.asset.content_hash not in out.manifest:
                    raise _fail(
                        f"{entry_where} evidence {item.id!r} references asset "
                        f"{item.asset.content_hash!r} missing from the manifest"
                    )
                evidence.append(item)
            entries.append(
                MasterEntry(
                    feature_key=_require(entry_payload, "feature_key", str, entry_where),
                    value=_require(entry_payload, "value", str, entry_where),
                    evidence=tuple(evidence),
                    authors=tuple(str(a) for a in authors),
                )
            )
        provenance_payload = _require(payload, "provenance", dict, where)
        decisions = tuple(
            _decode_decision(d, f"{where}.provenance.decisions[{j}]")
            for j, d in enumerate(
                _require(provenance_payload, "decisions", list, f"{where}.provenance")
            )
        )
        for decision in decisions:
            if decision.decided_by not in out.users:
                raise _fail(
                    f"{where} decision by {decision.decided_by!r} who is not a document user"
                )
        out.masters[template_id] = MasterProfile(
            template_id=template_id,
            entries=tuple(entries),
            provenance=Provenance(
                session_id=_require(provenance_payload, "session_id", str, f"{where}.provenance"),
                decisions=decisions,
            ),
        )

    for i, payload in enumerate(doc["rankings"]):
        where = f"rankings[{i}]"
        ranking = Ranking(
            poll_id=_require(payload, "poll_id", str, where),
            student=_require(payload, "student", str, where),
            criterion=_require(payload, "criterion", str, where),
            ordered_products=tuple(
                str(p) for p in _require(payload, "ordered_products", list, where)
            ),
            submitted_at=_require(payload, "submitted_at", str, where),
        )
        if ranking.student not in out.users:
            raise _fail(f"{where} student {ranking.student!r} is not a document user")
        for product in ranking.ordered_products:
            if product not in out.templates:
                raise _fail(f"{where} ranks unknown product {product!r}")
        if len(set(ranking.ordered_products)) != len(ranking.ordered_products):
            raise _fail(f"{where} repeats a product")
        poll = out.polls.get(ranking.poll_id)
        if poll is None:
            # The document carries no poll objects; the first ballot fixes
            # each poll's criterion and product set, later ballots must agree.
            poll = Poll(
                id=ranking.poll_id,
                criterion=ranking.criterion,
                product_ids=tuple(sorted(ranking.ordered_products)),
            )
            out.polls[ranking.poll_id] = poll
        if ranking.criterion != poll.criterion:
            raise _fail(f"{where} disagrees with the poll's criterion")
        if tuple(sorted(ranking.ordered_products)) != poll.product_ids:
            raise _fail(f"{where} is not a permutation of the poll's product set")
        by_student = out.rankings.setdefault(ranking.poll_id, {})
        if ranking.student in by_student:
            raise _fail(
                f"{where}: student {ranking.student!r} appears twice in poll "
                f"{ranking.poll_id!r}"
            )
        by_student[ranking.student] = ranking

    return out


def state_from_catalogue(decoded: DecodedCatalogue) -> State:
    state = State()
    state.users = dict(decoded.users)
    for feature in decoded.features:
        state.features.define(feature)
    state.templates = dict(decoded.templates)
    state.drafts = dict(decoded.drafts)
    for draft in state.drafts.values():
        for claim in draft.claims:
            state.claim_index[claim.id] = draft.id
    state.masters = dict(decoded.masters)
    state.polls = dict(decoded.polls)
    state.rankings = {
        poll_id: dict(by_student) for poll_id, by_student in decoded.rankings.items()
    }
    state.assets = dict(decoded.manifest)
    return state


# ----------------------------------------------------------- disk envelope


def _encode_session(session: MergeSession) -> dict:
    return {
        "id": session.id,
        "template_id": session.template_id,
        "participants": sorted(session.participants),
        "source_drafts": sorted(session.source_drafts),
        "status": session.status.value,
        "version": session.version,
        "decision_log": [_encode_decision(d) for d in session.decision_log],
    }


def _encode_poll(poll: Poll) -> dict:
    return {
        "id": poll.id,
        "criterion": poll.criterion,
        "product_ids": list(poll.product_ids),
    }


def encode_state(state: State) -> dict:
    """Private persistence envelope; a superset of the interchange document."""
    return {
        "envelope_version": ENVELOPE_VERSION,
        "catalogue": catalogue_document(state),
        "sessions": [_encode_session(state.sessions[sid]) for sid in sorted(state.sessions)],
        "polls": [_encode_poll(state.polls[pid]) for pid in sorted(state.polls)],
        "tokens": dict(sorted(state.tokens.items())),
    }


def decode_state(envelope: Any) -> State:
    if not isinstance(envelope, dict):
        raise _fail("state envelope must be a JSON object")
    version = envelope.get("envelope_version")
    if version != ENVELOPE_VERSION:
        raise ValidationError(
            f"unsupported envelope_version {version!r}, expected {ENVELOPE_VERSION}",
            code="version-mismatch",
            details={"found": version, "expected": ENVELOPE_VERSION},
        )
    state = state_from_catalogue(decode_catalogue(envelope.get("catalogue")))

    # Envelope polls override the rankings-derived reconstruction: they also
    # carry polls that exist but have no ballots yet.
    for i, payload in enumerate(envelope.get("polls", [])):
        where = f"polls[{i}]"
        poll = Poll(
            id=_require(payload, "id", str, where),
            criterion=_require(payload, "criterion", str, where),
            product_ids=tuple(
                str(p) for p in _require(payload, "product_ids", list, where)
            ),
        )
        state.polls[poll.id] = poll

    for i, payload in enumerate(envelope.get("sessions", [])):
        where = f"sessions[{i}]"
        source_drafts = [
            str(d) for d in _require(payload, "source_drafts", list, where)
        ]
        for draft_id in source_drafts:
            if draft_id not in state.drafts:
                raise _fail(f"{where} references unknown draft {draft_id!r}")
        session = MergeSession(
            id=_require(payload, "id", str, where),
            template_id=_require(payload, "template_id", str, where),
            participants=frozenset(
                str(p) for p in _require(payload, "participants", list, where)
            ),
            source_drafts=frozenset(source_drafts),
            groups=partition_claims(state.drafts[d] for d in source_drafts),
            status=SessionStatus(_require(payload, "status", str, where)),
            version=_require(payload, "version", int, where),
        )
        for decision in (
            _decode_decision(d, f"{where}.decision_log[{j}]")
            for j, d in enumerate(_require(payload, "decision_log", list, where))
        ):
            session.decision_log.append(decision)
            session.decisions[decision.group_id] = decision
        state.sessions[session.id] = session

    tokens = envelope.get("tokens", {})
    if not isinstance(tokens, dict):
        raise _fail("tokens must be an object")
    state.tokens = {str(k): str(v) for k, v in tokens.items()}
    return state
