"""The service facade: one object owning the state, its lock, the asset
store, and the persistence file.

Every mutation runs as a transaction: the state is snapshotted, the
operation applied, and the result persisted; any failure restores the
snapshot, so a half-applied mutation is never observable. Asset bytes are
content-addressed and append-only, so a rolled-back upload leaves at worst
an unreferenced blob, never a dangling reference.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import secrets
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence
from uuid import uuid4

from . import catalog, comparison, investigation, merge
from .assets import AssetStore, MAX_ASSET_MB_DEFAULT, check_asset_policy
from .catalog import builtin_definitions, require_role
from .comparison import ComparisonMatrix, ConsensusRanking, Poll, ProductDiff, Ranking
from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    ValidationError,
)
from .interchange import (
    DecodedCatalogue,
    canonical_json,
    catalogue_document,
    decode_catalogue,
    decode_state,
    encode_state,
    state_from_catalogue,
)
from .merge import MasterProfile, MergeSession
from .model import (
    AssetRef,
    DraftProfile,
    Evidence,
    EvidenceLocator,
    FeatureDefinition,
    FeatureOrigin,
    LOCATOR_TYPES,
    ProductTemplate,
    Role,
    UserRef,
)
from .state import State

STATE_FILENAME = "state.json"
ASSETS_DIRNAME = "assets"


def default_id_factory(prefix: str) -> str:
    return f"{prefix}-{uuid4().hex[:12]}"


def default_clock() -> str:
    return datetime.now(timezone.utc).isoformat()


def locator_from_payload(payload: Mapping[str, Any]) -> EvidenceLocator:
    """Build a locator from {"type": ..., <fields>}; errors carry the
    locator-validation code so callers can surface them as bad input."""
    if not isinstance(payload, Mapping):
        raise ValidationError(
            "locator must be an object", field="locator", code="locator-validation"
        )
    variant = payload.get("type")
    locator_type = LOCATOR_TYPES.get(variant)
    if locator_type is None:
        known = ", ".join(sorted(LOCATOR_TYPES))
        raise ValidationError(
            f"unknown locator type {variant!r} (one of: {known})",
            field="locator",
            code="locator-validation",
        )
    kwargs = {}
    for name in locator_type.__dataclass_fields__:
        if payload.get(name) is None:
            raise ValidationError(
                f"locator {variant} needs {name!r}",
                field="locator",
                code="locator-validation",
            )
        kwargs[name] = payload[name]
    return locator_type(**kwargs)


def _token_hash(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".write-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Service:
    """All operations behind one lock; pass data_dir=None for in-memory use."""

    def __init__(
        self,
        data_dir: str | Path | None = None,
        *,
        max_asset_mb: int = MAX_ASSET_MB_DEFAULT,
        seed: bool = False,
        clock: Callable[[], str] | None = None,
        id_factory: Callable[[str], str] | None = None,
    ) -> None:
        self._lock = threading.RLock()
        self._now = clock or default_clock
        self._new_id = id_factory or default_id_factory
        self._max_asset_bytes = max_asset_mb * 1024 * 1024
        self._seed = seed

        self._data_dir = Path(data_dir) if data_dir is not None else None
        if self._data_dir is not None:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            self._assets = AssetStore(self._data_dir / ASSETS_DIRNAME)
            state_path = self._data_dir / STATE_FILENAME
            if state_path.is_file():
                self._state = decode_state(json.loads(state_path.read_text("utf-8")))
            else:
                self._state = State()
        else:
            self._assets = AssetStore()
            self._state = State()

        if seed:
            self.ensure_builtin_catalog()

    # ------------------------------------------------------------ plumbing

    def _persist(self) -> None:
        if self._data_dir is not None:
            _atomic_write_text(
                self._data_dir / STATE_FILENAME, canonical_json(encode_state(self._state))
            )

    def _mutate(self, apply: Callable[[State], Any]) -> Any:
        with self._lock:
            snapshot = copy.deepcopy(self._state)
            try:
                result = apply(self._state)
                self._persist()
                return result
            except BaseException:
                self._state = snapshot
                raise

    def ensure_builtin_catalog(self) -> int:
        """Add any missing builtin features; returns how many were added."""

        def apply(state: State) -> int:
            return self._ensure_builtins(state)

        return self._mutate(apply)

    @staticmethod
    def _ensure_builtins(state: State) -> int:
        added = 0
        for definition in builtin_definitions():
            if definition.key not in state.features:
                state.features.define(definition)
                added += 1
        return added

    # ------------------------------------------------------------ identity

    def issue_token(self, display_name: str, roles: Iterable[Role | str]) -> tuple[str, UserRef]:
        """Create (or extend) the named user and mint a fresh bearer token."""
        role_set = frozenset(Role(r) for r in roles)
        if not role_set:
            raise ValidationError(
                "at least one role is required", field="roles", code="empty-roles"
            )
        name = display_name.strip()
        if not name:
            raise ValidationError("display name must be non-empty", field="display_name")

        def apply(state: State) -> tuple[str, UserRef]:
            existing = next(
                (u for u in state.users.values() if u.display_name == name), None
            )
            if existing is None:
                user = UserRef(id=self._new_id("usr"), display_name=name, roles=role_set)
            else:
                user = UserRef(
                    id=existing.id, display_name=name, roles=existing.roles | role_set
                )
            state.users[user.id] = user
            token = secrets.token_urlsafe(24)
            state.tokens[_token_hash(token)] = user.id
            return token, user

        return self._mutate(apply)

    def resolve_token(self, token: str | None) -> UserRef:
        with self._lock:
            user_id = self._state.tokens.get(_token_hash(token)) if token else None
            user = self._state.users.get(user_id) if user_id else None
            if user is None:
                raise AuthorizationError(
                    "missing or invalid bearer token", http_status=401
                )
            return user

    def get_user(self, user_id: str) -> UserRef:
        with self._lock:
            return self._state.user(user_id)

    # ------------------------------------------------------------- catalog

    def create_template(
        self, name: str, description: str, brand: str, actor: UserRef
    ) -> ProductTemplate:
        return copy.deepcopy(
            self._mutate(
                lambda state: catalog.create_product_template(
                    state, name, description, brand, actor, self._new_id
                )
            )
        )

    def list_templates(self, actor: UserRef) -> list[ProductTemplate]:
        with self._lock:
            return copy.deepcopy(catalog.list_templates(self._state))

    def define_feature(
        self,
        display_name: str,
        value_kind: str,
        multiplicity: str,
        actor: UserRef,
        choices: Sequence[str] | None = None,
        origin: FeatureOrigin | str = FeatureOrigin.BUILTIN,
    ) -> FeatureDefinition:
        origin = FeatureOrigin(origin)
        if origin is FeatureOrigin.BUILTIN:
            return self._mutate(
                lambda state: catalog.define_builtin_feature(
                    state, display_name, value_kind, choices, multiplicity, actor
                )
            )
        if choices is not None:
            raise ValidationError(
                "custom features do not take choices", field="choices"
            )
        return self._mutate(
            lambda state: catalog.create_custom_feature(
                state, display_name, value_kind, multiplicity, actor
            )
        )

    def list_features(
        self, actor: UserRef, origin: FeatureOrigin | str | None = None
    ) -> list[FeatureDefinition]:
        with self._lock:
            return catalog.list_features(self._state, origin)

    # ------------------------------------------------------- investigation

    def open_draft(self, template_id: str, actor: UserRef) -> DraftProfile:
        return copy.deepcopy(
            self._mutate(
                lambda state: investigation.open_draft(state, template_id, actor, self._new_id)
            )
        )

    def get_draft(self, draft_id: str, actor: UserRef) -> DraftProfile:
        with self._lock:
            draft = self._state.draft(draft_id)
            if draft.worker != actor.id:
                raise AuthorizationError(
                    "drafts are visible to their owner only",
                    code="ownership",
                    details={"draft_id": draft_id},
                )
            return copy.deepcopy(draft)

    def list_drafts(self, actor: UserRef) -> list[DraftProfile]:
        require_role(actor, Role.CROWD_WORKER)
        with self._lock:
            own = [d for d in self._state.drafts.values() if d.worker == actor.id]
            return copy.deepcopy(sorted(own, key=lambda d: d.id))

    def add_claim(
        self,
        draft_id: str,
        feature_key: str,
        value: str,
        actor: UserRef,
        expected_version: int | None = None,
    ) -> DraftProfile:
        def apply(state: State) -> DraftProfile:
            investigation.add_claim(
                state, draft_id, feature_key, value, actor, self._new_id, expected_version
            )
            return state.draft(draft_id)

        return copy.deepcopy(self._mutate(apply))

    def attach_evidence(
        self,
        claim_id: str,
        source_kind: str,
        locator: Mapping[str, Any] | EvidenceLocator,
        actor: UserRef,
        *,
        asset_bytes: bytes | None = None,
        asset_media_type: str | None = None,
        asset_hash: str | None = None,
        note: str = "",
        expected_version: int | None = None,
    ) -> Evidence:
        if not isinstance(locator, tuple(LOCATOR_TYPES.values())):
            locator = locator_from_payload(locator)
        if asset_bytes is not None and asset_hash is not None:
            raise ValidationError(
                "pass uploaded bytes or an existing asset hash, not both", field="asset"
            )

        def apply(state: State) -> Evidence:
            asset: AssetRef | None = None
            if asset_bytes is not None:
                if not asset_media_type:
                    raise ValidationError(
                        "uploaded asset bytes need a media_type", field="asset"
                    )
                asset = self._store_asset(state, asset_bytes, asset_media_type)
            elif asset_hash is not None:
                if asset_hash not in state.assets:
                    raise NotFoundError(
                        f"no asset with hash {asset_hash}",
                        details={"content_hash": asset_hash},
                    )
                asset = state.assets[asset_hash]
            return investigation.attach_evidence(
                state,
                claim_id,
                source_kind,
                locator,
                actor,
                self._new_id,
                asset=asset,
                note=note,
                expected_version=expected_version,
            )

        return self._mutate(apply)

    def submit_draft(
        self, draft_id: str, actor: UserRef, expected_version: int | None = None
    ) -> DraftProfile:
        return copy.deepcopy(
            self._mutate(
                lambda state: investigation.submit_draft(
                    state, draft_id, actor, expected_version
                )
            )
        )

    # --------------------------------------------------------------- merge

    def open_merge_session(
        self, template_id: str, participants: Sequence[str], actor: UserRef
    ) -> MergeSession:
        return copy.deepcopy(
            self._mutate(
                lambda state: merge.open_merge_session(
                    state, template_id, participants, actor, self._new_id, self._now
                )
            )
        )

    def get_session(self, session_id: str, actor: UserRef) -> MergeSession:
        with self._lock:
            return copy.deepcopy(self._state.session(session_id))

    def decide(
        self,
        session_id: str,
        group_id: str,
        action: str,
        actor: UserRef,
        chosen_evidence: Sequence[str] | None = None,
        expected_version: int | None = None,
    ) -> MergeSession:
        return copy.deepcopy(
            self._mutate(
                lambda state: merge.decide_group(
                    state,
                    session_id,
                    group_id,
                    action,
                    actor,
                    self._now,
                    chosen_evidence=chosen_evidence,
                    expected_version=expected_version,
                )
            )
        )

    def finalize(self, session_id: str, actor: UserRef) -> MasterProfile:
        return self._mutate(lambda state: merge.finalize_master(state, session_id, actor))

    def get_master(self, template_id: str) -> MasterProfile:
        with self._lock:
            return self._state.master(template_id)

    # ---------------------------------------------------------- comparison

    def compare(self, product_ids: Sequence[str], actor: UserRef) -> ComparisonMatrix:
        with self._lock:
            return comparison.build_matrix(self._state, product_ids, actor)

    def diff(self, product_a: str, product_b: str, actor: UserRef) -> ProductDiff:
        with self._lock:
            return comparison.diff_products(self._state, product_a, product_b, actor)

    def prompts(self, product_ids: Sequence[str], actor: UserRef):
        with self._lock:
            matrix = comparison.build_matrix(self._state, product_ids, actor)
            return comparison.generate_prompts(matrix)

    def matrix_csv(self, product_ids: Sequence[str], actor: UserRef) -> str:
        with self._lock:
            matrix = comparison.build_matrix(self._state, product_ids, actor)
            return comparison.matrix_to_csv(matrix)

    def submit_ranking(
        self,
        poll_id: str,
        ordered_products: Sequence[str],
        actor: UserRef,
        criterion: str | None = None,
    ) -> Ranking:
        return self._mutate(
            lambda state: comparison.submit_ranking(
                state, poll_id, ordered_products, actor, self._now, criterion
            )
        )

    def consensus(self, poll_id: str, actor: UserRef) -> ConsensusRanking:
        require_role(actor, Role.STUDENT)
        with self._lock:
            return comparison.aggregate_rankings(self._state, poll_id)

    def get_poll(self, poll_id: str) -> Poll | None:
        with self._lock:
            return self._state.polls.get(poll_id)

    # -------------------------------------------------------------- assets

    def _store_asset(self, state: State, data: bytes, media_type: str) -> AssetRef:
        check_asset_policy(data, media_type, self._max_asset_bytes)
        ref = AssetRef.from_bytes(data, media_type.strip())
        self._assets.put(data)
        # First declaration wins: identical bytes keep their original type.
        return state.assets.setdefault(ref.content_hash, ref)

    def store_asset(self, data: bytes, media_type: str, actor: UserRef) -> AssetRef:
        require_role(actor, Role.CROWD_WORKER)
        return self._mutate(lambda state: self._store_asset(state, data, media_type))

    def fetch_asset(self, content_hash: str) -> tuple[bytes, AssetRef]:
        with self._lock:
            if content_hash not in self._state.assets:
                raise NotFoundError(
                    f"no asset with hash {content_hash}",
                    details={"content_hash": content_hash},
                )
            ref = self._state.assets[content_hash]
            return self._assets.get(content_hash), ref

    def asset_bytes(self, content_hash: str) -> bytes:
        return self.fetch_asset(content_hash)[0]

    # --------------------------------------------------------- interchange

    def export_document(self) -> dict:
        with self._lock:
            return catalogue_document(self._state)

    def export_text(self) -> str:
        return canonical_json(self.export_document())

    def import_document(
        self,
        doc: Any,
        mode: str = "replace",
        assets: Mapping[str, bytes] | None = None,
    ) -> dict[str, int]:
        if mode not in ("replace", "fail_on_conflict"):
            raise ValidationError(
                f"mode must be replace or fail_on_conflict, not {mode!r}", field="mode"
            )
        decoded = decode_catalogue(doc)
        bundle = dict(assets or {})
        for content_hash, data in bundle.items():
            actual = hashlib.sha256(data).hexdigest()
            if actual != content_hash:
                raise ValidationError(
                    f"asset bundle entry {content_hash} hashes to {actual}",
                    code="validation",
                )

        def apply(state: State) -> dict[str, int]:
            for content_hash in decoded.manifest:
                if content_hash not in bundle and content_hash not in self._assets:
                    raise ValidationError(
                        f"manifest asset {content_hash} has no bytes available",
                        code="validation",
                    )
            if mode == "replace":
                self._apply_replace(decoded)
            else:
                self._apply_merge(state, decoded)
            for data in bundle.values():
                self._assets.put(data)
            return decoded.counts()

        return self._mutate(apply)

    def _apply_replace(self, decoded: DecodedCatalogue) -> None:
        old_tokens = self._state.tokens
        state = state_from_catalogue(decoded)
        # Bearer tokens survive a replace when their user does, so the
        # operator who imported does not saw off the branch they sit on.
        state.tokens = {h: uid for h, uid in old_tokens.items() if uid in state.users}
        if self._seed:
            self._ensure_builtins(state)
        self._state = state

    def _apply_merge(self, state: State, decoded: DecodedCatalogue) -> None:
        def collide(kind: str, value: str) -> ConflictError:
            return ConflictError(
                f"{kind} {value!r} already exists", details={"id": value}
            )

        for user_id in decoded.users:
            if user_id in state.users:
                raise collide("user", user_id)
        for feature in decoded.features:
            if feature.key in state.features:
                raise collide("feature", feature.key)
        names = {t.canonical_name: t.id for t in state.templates.values()}
        for template in decoded.templates.values():
            if template.id in state.templates:
                raise collide("template", template.id)
            if template.canonical_name in names:
                raise collide("template name", template.name)
        for draft in decoded.drafts.values():
            if draft.id in state.drafts:
                raise collide("draft", draft.id)
            for claim in draft.claims:
                if claim.id in state.claim_index:
                    raise collide("claim", claim.id)
        for template_id in decoded.masters:
            if template_id in state.masters:
                raise collide("master", template_id)
        for poll_id in decoded.polls:
            if poll_id in state.polls:
                raise collide("poll", poll_id)

        state.users.update(decoded.users)
        for feature in decoded.features:
            state.features.define(feature)
        state.templates.update(decoded.templates)
        for draft in decoded.drafts.values():
            state.drafts[draft.id] = draft
            for claim in draft.claims:
                state.claim_index[claim.id] = draft.id
        state.masters.update(decoded.masters)
        state.polls.update(decoded.polls)
        for poll_id, by_student in decoded.rankings.items():
            state.rankings.setdefault(poll_id, {}).update(by_student)
        for content_hash, ref in decoded.manifest.items():
            state.assets.setdefault(content_hash, ref)
