"""Shared factories for driving the domain ops in tests."""

from __future__ import annotations

from devicelab import investigation
from devicelab.catalog import builtin_definitions, create_product_template
from devicelab.model import DraftProfile, ExternalUrl, Role, UserRef
from devicelab.state import State

ALL_ROLES = (Role.CROWD_WORKER, Role.ADMIN, Role.STUDENT)


class CountingIds:
    """Deterministic id factory: <prefix>-0001, <prefix>-0002, ..."""

    def __init__(self) -> None:
        self.counter = 0

    def __call__(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}-{self.counter:04d}"


def fixed_clock() -> str:
    return "2024-05-01T12:00:00+00:00"


def make_user(user_id: str, *roles: Role) -> UserRef:
    return UserRef(
        id=user_id,
        display_name=user_id.replace("-", " ").title(),
        roles=frozenset(roles or (Role.CROWD_WORKER,)),
    )


def seeded_state(*users: UserRef) -> State:
    state = State()
    for definition in builtin_definitions():
        state.features.define(definition)
    for user in users:
        state.users[user.id] = user
    return state


def url_locator(suffix: str = "source") -> ExternalUrl:
    return ExternalUrl(link=f"https://example.com/{suffix}")


def make_template(state: State, admin: UserRef, new_id, name: str = "Fitbit"):
    return create_product_template(state, name, "", "", admin, new_id)


def submitted_draft(
    state: State,
    template_id: str,
    worker: UserRef,
    claims: list[tuple[str, str]],
    new_id,
) -> DraftProfile:
    """Open a draft, claim each (key, value) with one url evidence, submit."""
    draft = investigation.open_draft(state, template_id, worker, new_id)
    for feature_key, value in claims:
        claim = investigation.add_claim(
            state, draft.id, feature_key, value, worker, new_id
        )
        investigation.attach_evidence(
            state, claim.id, "web_page", url_locator(claim.id), worker, new_id
        )
    return investigation.submit_draft(state, draft.id, worker)
