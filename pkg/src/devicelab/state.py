"""In-memory state shared by every operation module.

One ``State`` instance is owned by the service; operation modules receive it
as their first argument and mutate it under the service's write lock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .catalog import FeatureCatalog
from .errors import NotFoundError
from .model import AssetRef, DraftProfile, FeatureClaim, ProductTemplate, UserRef

if TYPE_CHECKING:
    from .comparison import Poll, Ranking
    from .merge import MasterProfile, MergeSession


@dataclass
class State:
    users: dict[str, UserRef] = field(default_factory=dict)
    features: FeatureCatalog = field(default_factory=FeatureCatalog)
    templates: dict[str, ProductTemplate] = field(default_factory=dict)
    drafts: dict[str, DraftProfile] = field(default_factory=dict)
    claim_index: dict[str, str] = field(default_factory=dict)  # claim id -> draft id
    sessions: dict[str, "MergeSession"] = field(default_factory=dict)
    masters: dict[str, "MasterProfile"] = field(default_factory=dict)  # template id ->
    polls: dict[str, "Poll"] = field(default_factory=dict)
    rankings: dict[str, dict[str, "Ranking"]] = field(default_factory=dict)  # poll -> student ->
    assets: dict[str, AssetRef] = field(default_factory=dict)  # content hash ->
    tokens: dict[str, str] = field(default_factory=dict)  # sha256(token) -> user id

    def user(self, user_id: str) -> UserRef:
        try:
            return self.users[user_id]
        except KeyError:
            raise NotFoundError(
                f"unknown user {user_id!r}", details={"user_id": user_id}
            ) from None

    def template(self, template_id: str) -> ProductTemplate:
        try:
            return self.templates[template_id]
        except KeyError:
            raise NotFoundError(
                f"unknown template {template_id!r}", details={"template_id": template_id}
            ) from None

    def draft(self, draft_id: str) -> DraftProfile:
        try:
            return self.drafts[draft_id]
        except KeyError:
            raise NotFoundError(
                f"unknown draft {draft_id!r}", details={"draft_id": draft_id}
            ) from None

    def claim(self, claim_id: str) -> tuple[DraftProfile, FeatureClaim]:
        draft_id = self.claim_index.get(claim_id)
        if draft_id is not None:
            draft = self.drafts.get(draft_id)
            if draft is not None:
                claim = draft.find_claim(claim_id)
                if claim is not None:
                    return draft, claim
        raise NotFoundError(f"unknown claim {claim_id!r}", details={"claim_id": claim_id})

    def session(self, session_id: str) -> "MergeSession":
        try:
            return self.sessions[session_id]
        except KeyError:
            raise NotFoundError(
                f"unknown merge session {session_id!r}", details={"session_id": session_id}
            ) from None

    def master(self, template_id: str) -> "MasterProfile":
        try:
            return self.masters[template_id]
        except KeyError:
            raise NotFoundError(
                f"no master profile for template {template_id!r}",
                details={"template_id": template_id},
            ) from None

    def submitted_drafts_for(self, template_id: str) -> list[DraftProfile]:
        from .model import DraftStatus

        return sorted(
            (
                d
                for d in self.drafts.values()
                if d.template_id == template_id and d.status is DraftStatus.SUBMITTED
            ),
            key=lambda d: d.id,
        )

    def open_session_for(self, template_id: str) -> "MergeSession | None":
        from .merge import SessionStatus

        for session in self.sessions.values():
            if session.template_id == template_id and session.status is SessionStatus.OPEN:
                return session
        return None
