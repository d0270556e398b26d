"""HTTP surface: a thin FastAPI layer over the service.

Handlers translate wire payloads to service calls and domain objects back to
JSON; no domain rules live here beyond per-endpoint role gates. Errors
always serialize as {code, message, details} with a status derived from the
stable error code.
"""

from __future__ import annotations

import base64
import binascii
from typing import Any, Literal

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .catalog import require_role
from .comparison import ComparisonMatrix, ConsensusRanking, DiscussionPrompt, ProductDiff, Ranking
from .errors import AuthorizationError, DomainError, ValidationError
from .interchange import (
    _encode_claim,
    _encode_decision,
    _encode_draft,
    _encode_evidence,
    _encode_feature,
    _encode_master,
    _encode_ranking,
    _encode_template,
)
from .merge import MergeSession
from .model import Role, UserRef
from .service import Service

_STATUS_BY_CODE = {
    "validation": 400,
    "value-validation": 400,
    "locator-validation": 400,
    "illegal-action": 400,
    "incomplete-permutation": 400,
    "empty-draft": 400,
    "missing-evidence": 400,
    "too-few-products": 400,
    "version-mismatch": 400,
    "mixed-template": 400,
    "empty-roles": 400,
    "authorization": 403,
    "ownership": 403,
    "non-participant": 403,
    "not-found": 404,
    "unknown-feature": 404,
    "unknown-evidence": 404,
    "unknown-product": 404,
    "no-rankings": 404,
    "conflict": 409,
    "duplicate-name": 409,
    "duplicate-key": 409,
    "duplicate-claim": 409,
    "stale-version": 409,
    "too-few-drafts": 409,
    "template-already-merged": 409,
    "state": 409,
    "closed-session": 409,
    "undecided-groups": 409,
    "single-value-conflict": 409,
    "unmerged-product": 409,
    "oversize-asset": 413,
    "unsupported-media": 415,
    "corrupt-asset": 500,
}


class TemplateBody(BaseModel):
    name: str
    description: str = ""
    brand: str = ""


class FeatureBody(BaseModel):
    display_name: str
    value_kind: str
    multiplicity: str
    origin: Literal["builtin", "custom"]
    choices: list[str] | None = None


class DraftBody(BaseModel):
    template_id: str


class ClaimBody(BaseModel):
    feature_key: str
    value: str
    expected_version: int | None = None


class EvidenceAssetBody(BaseModel):
    bytes_base64: str | None = None
    media_type: str | None = None
    content_hash: str | None = None


class EvidenceBody(BaseModel):
    source_kind: str
    locator: dict[str, Any]
    note: str = ""
    asset: EvidenceAssetBody | None = None
    expected_version: int | None = None


class SubmitBody(BaseModel):
    expected_version: int | None = None


class SessionBody(BaseModel):
    template_id: str
    participants: list[str] = Field(default_factory=list)


class DecisionBody(BaseModel):
    group_id: str
    action: str
    chosen_evidence: list[str] | None = None
    expected_version: int | None = None


class RankingBody(BaseModel):
    ordered_products: list[str]
    criterion: str | None = None


class ImportBody(BaseModel):
    document: dict[str, Any]
    mode: Literal["replace", "fail_on_conflict"] = "replace"
    assets: dict[str, str] = Field(default_factory=dict)


def _encode_session(session: MergeSession) -> dict:
    return {
        "id": session.id,
        "template_id": session.template_id,
        "participants": sorted(session.participants),
        "source_drafts": sorted(session.source_drafts),
        "status": session.status.value,
        "version": session.version,
        "groups": [
            {
                "group_id": group.group_id,
                "feature_key": group.feature_key,
                "value": group.value,
                "classification": group.classification.value,
                "authors": list(group.authors),
                "claims": [
                    {**_encode_claim(claim), "draft_id": claim.draft_id}
                    for claim in group.claims
                ],
            }
            for group in session.groups
        ],
        "decisions": {
            group_id: _encode_decision(decision)
            for group_id, decision in sorted(session.decisions.items())
        },
        "decision_log": [_encode_decision(d) for d in session.decision_log],
    }


def _encode_matrix(matrix: ComparisonMatrix) -> dict:
    cells: dict[str, dict[str, Any]] = {}
    for key in matrix.feature_keys:
        cells[key] = {}
        for product in matrix.products:
            cell = matrix.cell(key, product.id)
            cells[key][product.id] = (
                None
                if cell is None
                else [{"value": cv.value, "evidence_count": cv.evidence_count} for cv in cell]
            )
    return {
        "products": [{"id": p.id, "name": p.name} for p in matrix.products],
        "feature_keys": list(matrix.feature_keys),
        "cells": cells,
    }


def _encode_diff(diff: ProductDiff) -> dict:
    return {
        "product_a": diff.product_a,
        "product_b": diff.product_b,
        "only_in_a": list(diff.only_in_a),
        "only_in_b": list(diff.only_in_b),
        "differing": [
            {
                "feature_key": entry.feature_key,
                "values_a": list(entry.values_a),
                "values_b": list(entry.values_b),
            }
            for entry in diff.differing
        ],
    }


def _encode_prompt(prompt: DiscussionPrompt) -> dict:
    return {
        "kind": prompt.kind.value,
        "feature_key": prompt.feature_key,
        "product_ids": list(prompt.product_ids),
        "text": prompt.text,
    }


def _encode_consensus(consensus: ConsensusRanking) -> dict:
    return {
        "poll_id": consensus.poll_id,
        "criterion": consensus.criterion,
        "scores": dict(sorted(consensus.scores.items())),
        "ordering": list(consensus.ordering),
        "voter_count": consensus.voter_count,
    }


def _split_csv(values: list[str] | None) -> list[str]:
    out: list[str] = []
    for chunk in values or []:
        out.extend(part for part in (p.strip() for p in chunk.split(",")) if part)
    return out


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="devicelab", docs_url=None, redoc_url=None)

    def authenticated(request: Request) -> UserRef:
        header = request.headers.get("authorization") or ""
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token.strip():
            raise AuthorizationError("missing or invalid bearer token", http_status=401)
        return service.resolve_token(token.strip())

    @app.exception_handler(DomainError)
    async def domain_error(_request: Request, exc: DomainError) -> JSONResponse:
        status = getattr(exc, "http_status", None) or _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": exc.message, "details": exc.details},
        )

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_request: Request, exc: RequestValidationError) -> JSONResponse:
        errors = [
            {"loc": [str(p) for p in e.get("loc", ())], "msg": str(e.get("msg", ""))}
            for e in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content={
                "code": "validation",
                "message": "invalid request",
                "details": {"errors": errors},
            },
        )

    # ------------------------------------------------------------- catalog

    @app.post("/templates", status_code=201)
    def create_template(body: TemplateBody, user: UserRef = Depends(authenticated)) -> dict:
        template = service.create_template(body.name, body.description, body.brand, user)
        return _encode_template(template)

    @app.get("/templates")
    def list_templates(user: UserRef = Depends(authenticated)) -> list[dict]:
        return [_encode_template(t) for t in service.list_templates(user)]

    @app.post("/features", status_code=201)
    def define_feature(body: FeatureBody, user: UserRef = Depends(authenticated)) -> dict:
        feature = service.define_feature(
            body.display_name,
            body.value_kind,
            body.multiplicity,
            user,
            choices=body.choices,
            origin=body.origin,
        )
        return _encode_feature(feature)

    @app.get("/features")
    def list_features(
        origin: str | None = None, user: UserRef = Depends(authenticated)
    ) -> list[dict]:
        return [_encode_feature(f) for f in service.list_features(user, origin)]

    # ------------------------------------------------------- investigation

    @app.post("/drafts", status_code=201)
    def open_draft(body: DraftBody, user: UserRef = Depends(authenticated)) -> dict:
        return _encode_draft(service.open_draft(body.template_id, user))

    @app.get("/drafts")
    def list_drafts(user: UserRef = Depends(authenticated)) -> list[dict]:
        return [_encode_draft(d) for d in service.list_drafts(user)]

    @app.get("/drafts/{draft_id}")
    def get_draft(draft_id: str, user: UserRef = Depends(authenticated)) -> dict:
        return _encode_draft(service.get_draft(draft_id, user))

    @app.post("/drafts/{draft_id}/claims", status_code=201)
    def add_claim(
        draft_id: str, body: ClaimBody, user: UserRef = Depends(authenticated)
    ) -> dict:
        draft = service.add_claim(
            draft_id, body.feature_key, body.value, user, body.expected_version
        )
        return _encode_draft(draft)

    @app.post("/claims/{claim_id}/evidence", status_code=201)
    def attach_evidence(
        claim_id: str, body: EvidenceBody, user: UserRef = Depends(authenticated)
    ) -> dict:
        asset_bytes = None
        media_type = None
        asset_hash = None
        if body.asset is not None:
            if body.asset.bytes_base64 is not None:
                try:
                    asset_bytes = base64.b64decode(body.asset.bytes_base64, validate=True)
                except (binascii.Error, ValueError):
                    raise ValidationError(
                        "asset bytes_base64 is not valid base64", field="asset"
                    ) from None
                media_type = body.asset.media_type
            asset_hash = body.asset.content_hash
        evidence = service.attach_evidence(
            claim_id,
            body.source_kind,
            body.locator,
            user,
            asset_bytes=asset_bytes,
            asset_media_type=media_type,
            asset_hash=asset_hash,
            note=body.note,
            expected_version=body.expected_version,
        )
        return _encode_evidence(evidence)

    @app.post("/drafts/{draft_id}/submit")
    def submit_draft(
        draft_id: str, body: SubmitBody | None = None, user: UserRef = Depends(authenticated)
    ) -> dict:
        expected = body.expected_version if body else None
        return _encode_draft(service.submit_draft(draft_id, user, expected))

    # --------------------------------------------------------------- merge

    @app.post("/merge-sessions", status_code=201)
    def open_merge_session(
        body: SessionBody, user: UserRef = Depends(authenticated)
    ) -> dict:
        session = service.open_merge_session(body.template_id, body.participants, user)
        return _encode_session(session)

    @app.get("/merge-sessions/{session_id}")
    def get_session(session_id: str, user: UserRef = Depends(authenticated)) -> dict:
        return _encode_session(service.get_session(session_id, user))

    @app.post("/merge-sessions/{session_id}/decisions")
    def decide(
        session_id: str, body: DecisionBody, user: UserRef = Depends(authenticated)
    ) -> dict:
        session = service.decide(
            session_id,
            body.group_id,
            body.action,
            user,
            chosen_evidence=body.chosen_evidence,
            expected_version=body.expected_version,
        )
        return _encode_session(session)

    @app.post("/merge-sessions/{session_id}/finalize")
    def finalize(session_id: str, user: UserRef = Depends(authenticated)) -> dict:
        return _encode_master(service.finalize(session_id, user))

    # ---------------------------------------------------------- comparison

    @app.get("/compare")
    def compare(
        products: list[str] | None = Query(None),
        format: str | None = None,
        user: UserRef = Depends(authenticated),
    ) -> Response:
        ids = _split_csv(products)
        if format == "csv":
            return Response(content=service.matrix_csv(ids, user), media_type="text/csv")
        return JSONResponse(content=_encode_matrix(service.compare(ids, user)))

    @app.get("/compare/diff")
    def compare_diff(
        a: str, b: str, user: UserRef = Depends(authenticated)
    ) -> dict:
        return _encode_diff(service.diff(a, b, user))

    @app.get("/compare/prompts")
    def compare_prompts(
        products: list[str] | None = Query(None),
        user: UserRef = Depends(authenticated),
    ) -> list[dict]:
        return [_encode_prompt(p) for p in service.prompts(_split_csv(products), user)]

    @app.post("/polls/{poll_id}/rankings", status_code=201)
    def submit_ranking(
        poll_id: str, body: RankingBody, user: UserRef = Depends(authenticated)
    ) -> dict:
        ranking = service.submit_ranking(poll_id, body.ordered_products, user, body.criterion)
        return _encode_ranking(ranking)

    @app.get("/polls/{poll_id}/consensus")
    def consensus(poll_id: str, user: UserRef = Depends(authenticated)) -> dict:
        return _encode_consensus(service.consensus(poll_id, user))

    # --------------------------------------------------- assets, interchange

    @app.post("/assets", status_code=201)
    async def store_asset(request: Request, user: UserRef = Depends(authenticated)) -> dict:
        data = await request.body()
        media_type = request.headers.get("content-type", "")
        ref = service.store_asset(data, media_type, user)
        return {
            "content_hash": ref.content_hash,
            "media_type": ref.media_type,
            "size_bytes": ref.size_bytes,
        }

    @app.get("/assets/{content_hash}")
    def fetch_asset(content_hash: str, user: UserRef = Depends(authenticated)) -> Response:
        data, ref = service.fetch_asset(content_hash)
        return Response(content=data, media_type=ref.media_type)

    @app.get("/export")
    def export_catalogue(user: UserRef = Depends(authenticated)) -> Response:
        require_role(user, Role.ADMIN)
        return Response(content=service.export_text(), media_type="application/json")

    @app.post("/import")
    def import_catalogue(body: ImportBody, user: UserRef = Depends(authenticated)) -> dict:
        require_role(user, Role.ADMIN)
        assets: dict[str, bytes] = {}
        for content_hash, encoded in body.assets.items():
            try:
                assets[content_hash] = base64.b64decode(encoded, validate=True)
            except (binascii.Error, ValueError):
                raise ValidationError(
                    f"asset bundle entry {content_hash} is not valid base64"
                ) from None
        return service.import_document(body.document, body.mode, assets)

    return app
