from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest

from devicelab import fixtures, investigation, merge
from devicelab.catalog import create_custom_feature, create_product_template
from devicelab.comparison import Poll, submit_ranking
from devicelab.errors import ValidationError
from devicelab.interchange import (
    canonical_json,
    catalogue_document,
    decode_catalogue,
    decode_state,
    encode_state,
    state_from_catalogue,
)
from devicelab.model import AssetRef, DocumentPage, Role, TextQuote

from helpers import CountingIds, fixed_clock, make_user, seeded_state

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "fixtures" / "six-devices.json"


def rich_state():
    """A state that exercises every document section: custom features,
    asset-backed evidence, two merges, ballots, an unvoted poll, tokens."""
    admin = make_user("adm", Role.ADMIN)
    w1 = make_user("wrk-a", Role.CROWD_WORKER, Role.STUDENT)
    w2 = make_user("wrk-b", Role.CROWD_WORKER, Role.STUDENT)
    state = seeded_state(admin, w1, w2)
    ids = CountingIds()
    create_custom_feature(state, "Pairing Mode", "free_text", "single", w1)

    fitbit = create_product_template(state, "Fitbit", "Wrist tracker", "Fitbit Inc", admin, ids)
    echo = create_product_template(state, "Echo Dot", "Smart speaker", "Amazon", admin, ids)
    aura = create_product_template(state, "Aura Frame", "Photo frame", "Aura", admin, ids)

    draft1 = investigation.open_draft(state, fitbit.id, w1, ids)
    claimed = investigation.add_claim(
        state, draft1.id, "connectivity", "Bluetooth 4.0", w1, ids
    )
    snapshot = AssetRef.from_bytes(b"page capture bytes", "image/png")
    state.assets[snapshot.content_hash] = snapshot
    investigation.attach_evidence(
        state, claimed.id, "web_page", DocumentPage(page=2), w1, ids,
        asset=snapshot, note="spec sheet, approx ±0.5°",
    )
    paired = investigation.add_claim(state, draft1.id, "pairing-mode", "NFC tap", w1, ids)
    investigation.attach_evidence(
        state, paired.id, "packaging", TextQuote(quote="tap to pair"), w1, ids
    )
    investigation.submit_draft(state, draft1.id, w1)

    draft2 = investigation.open_draft(state, fitbit.id, w2, ids)
    for key, value in [("connectivity", "bluetooth 4.0"), ("connectivity", "Wi-Fi")]:
        claim = investigation.add_claim(state, draft2.id, key, value, w2, ids)
        investigation.attach_evidence(
            state, claim.id, "web_page", TextQuote(quote=f"supports {value}"), w2, ids
        )
    investigation.submit_draft(state, draft2.id, w2)

    session = merge.open_merge_session(
        state, fitbit.id, [admin.id, w1.id, w2.id], admin, ids, fixed_clock
    )
    for group_id in session.undecided_competing():
        group = session.group(group_id)
        merge.decide_group(
            state, session.id, group_id, "select_evidence", admin, fixed_clock,
            chosen_evidence=[group.claims[0].evidence[0].id],
        )
    merge.finalize_master(state, session.id, admin)

    for worker in (w1, w2):
        draft = investigation.open_draft(state, echo.id, worker, ids)
        claim = investigation.add_claim(state, draft.id, "microphone", "true", worker, ids)
        investigation.attach_evidence(
            state, claim.id, "advertisement", TextQuote(quote="just ask Alexa"), worker, ids
        )
        investigation.submit_draft(state, draft.id, worker)
    echo_session = merge.open_merge_session(
        state, echo.id, [admin.id, w1.id, w2.id], admin, ids, fixed_clock
    )
    for group_id in echo_session.undecided_competing():
        group = echo_session.group(group_id)
        merge.decide_group(
            state, echo_session.id, group_id, "select_evidence", admin, fixed_clock,
            chosen_evidence=sorted(group.evidence_ids()),
        )
    merge.finalize_master(state, echo_session.id, admin)

    # One in-progress draft stays behind: legal, exported as-is.
    lingering = investigation.open_draft(state, aura.id, w1, ids)
    investigation.add_claim(state, lingering.id, "price", "199", w1, ids)

    submit_ranking(state, "privacy-risk", [fitbit.id, echo.id], w1, fixed_clock)
    submit_ranking(state, "privacy-risk", [echo.id, fitbit.id], w2, fixed_clock)
    state.polls["battery-anxiety"] = Poll(
        id="battery-anxiety", criterion="battery drain", product_ids=(fitbit.id,)
    )
    state.tokens["a" * 64] = admin.id
    return state


def test_canonical_json_is_stable_and_readable():
    text = canonical_json({"b": 1, "a": [2, 1], "u": "±0.5°"})
    assert text == '{\n  "a": [\n    2,\n    1\n  ],\n  "b": 1,\n  "u": "±0.5°"\n}\n'
    assert canonical_json({"a": [2, 1], "u": "±0.5°", "b": 1}) == text


def test_document_round_trips_byte_identically():
    state = rich_state()
    doc = catalogue_document(state)
    rebuilt = state_from_catalogue(decode_catalogue(doc))
    assert catalogue_document(rebuilt) == doc
    assert canonical_json(catalogue_document(rebuilt)) == canonical_json(doc)
    # And again, from the rebuilt state: the cycle is a fixed point.
    third = state_from_catalogue(decode_catalogue(catalogue_document(rebuilt)))
    assert canonical_json(catalogue_document(third)) == canonical_json(doc)


def test_document_lists_are_deterministically_ordered():
    state = rich_state()
    doc = catalogue_document(state)
    assert [u["id"] for u in doc["users"]] == sorted(u["id"] for u in doc["users"])
    assert [f["key"] for f in doc["features"]] == sorted(f["key"] for f in doc["features"])
    assert [t["id"] for t in doc["templates"]] == sorted(t["id"] for t in doc["templates"])
    assert [d["id"] for d in doc["drafts"]] == sorted(d["id"] for d in doc["drafts"])
    assert [m["template_id"] for m in doc["masters"]] == sorted(
        m["template_id"] for m in doc["masters"]
    )
    pairs = [(r["poll_id"], r["student"]) for r in doc["rankings"]]
    assert pairs == sorted(pairs)


def test_decoded_counts_match_the_state():
    decoded = decode_catalogue(catalogue_document(rich_state()))
    assert decoded.counts() == {
        "users": 3,
        "features": 13,
        "templates": 3,
        "drafts": 5,
        "masters": 2,
        "rankings": 2,
        "assets": 1,
    }


def broken_copy(mutate):
    doc = catalogue_document(rich_state())
    mutate(doc)
    return doc


def test_decode_rejects_unknown_format_version():
    doc = broken_copy(lambda d: d.update(format_version=2))
    with pytest.raises(ValidationError) as exc:
        decode_catalogue(doc)
    assert exc.value.code == "version-mismatch"
    with pytest.raises(ValidationError):
        decode_catalogue("not an object")
    with pytest.raises(ValidationError):
        decode_catalogue({"format_version": 1, "users": "nope"})


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["users"].append(dict(d["users"][0])), "duplicate user id"),
        (lambda d: d["templates"].append(dict(d["templates"][0])), "duplicate template id"),
        (
            lambda d: d["templates"][1].update(name=d["templates"][0]["name"].upper()),
            "share a name",
        ),
        (lambda d: d["drafts"][0].update(template_id="tpl-ghost"), "unknown template"),
        (lambda d: d["drafts"][0].update(worker="ghost"), "not a document user"),
        (
            lambda d: d["drafts"][0]["claims"][0].update(feature_key="ghost-key"),
            "unknown feature",
        ),
        (
            lambda d: d["drafts"][1]["claims"][0].update(id=d["drafts"][0]["claims"][0]["id"]),
            "duplicate claim id",
        ),
        (
            lambda d: d["drafts"][0]["claims"][0].update(evidence=[]),
            "evidence on every claim",
        ),
        (lambda d: d["asset_manifest"].clear(), "missing from the manifest"),
        (lambda d: d["masters"].append(dict(d["masters"][0])), "duplicate master"),
        (lambda d: d["rankings"].append(dict(d["rankings"][0])), "appears twice"),
        (
            lambda d: d["rankings"][1].update(
                ordered_products=d["rankings"][1]["ordered_products"][:1]
            ),
            "permutation",
        ),
        (
            lambda d: d["rankings"][1].update(criterion="something else"),
            "criterion",
        ),
        (lambda d: d["rankings"][0].update(student="ghost"), "not a document user"),
    ],
)
def test_decode_rejects_inconsistent_documents(mutate, fragment):
    doc = broken_copy(mutate)
    with pytest.raises(ValidationError) as exc:
        decode_catalogue(doc)
    assert fragment in exc.value.message


def test_decode_rejects_master_for_an_open_template():
    def mutate(doc):
        merged_id = doc["masters"][0]["template_id"]
        for template in doc["templates"]:
            if template["id"] == merged_id:
                template["status"] = "open"

    with pytest.raises(ValidationError) as exc:
        decode_catalogue(broken_copy(mutate))
    assert "not marked merged" in exc.value.message


def test_envelope_round_trips_sessions_polls_and_tokens():
    state = rich_state()
    envelope = encode_state(state)
    restored = decode_state(copy.deepcopy(envelope))
    assert encode_state(restored) == envelope

    assert set(restored.sessions) == set(state.sessions)
    for session_id, original in state.sessions.items():
        rebuilt = restored.sessions[session_id]
        assert rebuilt.status == original.status
        assert rebuilt.version == original.version
        assert rebuilt.participants == original.participants
        assert rebuilt.source_drafts == original.source_drafts
        # Groups are recomputed from the drafts, decisions replayed from the log.
        assert [g.group_id for g in rebuilt.groups] == [g.group_id for g in original.groups]
        assert rebuilt.decisions == original.decisions
        assert rebuilt.decision_log == original.decision_log
    assert restored.polls == state.polls  # including the ballot-less poll
    assert restored.tokens == state.tokens
    assert restored.rankings == state.rankings


def test_envelope_rejects_bad_versions_and_references():
    state = rich_state()
    envelope = encode_state(state)
    wrong = copy.deepcopy(envelope)
    wrong["envelope_version"] = 99
    with pytest.raises(ValidationError) as exc:
        decode_state(wrong)
    assert exc.value.code == "version-mismatch"

    dangling = copy.deepcopy(envelope)
    dangling["sessions"][0]["source_drafts"] = ["drf-ghost"]
    with pytest.raises(ValidationError):
        decode_state(dangling)

    bad_tokens = copy.deepcopy(envelope)
    bad_tokens["tokens"] = ["not", "a", "map"]
    with pytest.raises(ValidationError):
        decode_state(bad_tokens)


def test_checked_in_fixture_matches_the_builder():
    # The committed document is exactly what the builder produces today.
    assert FIXTURE_PATH.read_text(encoding="utf-8") == canonical_json(
        fixtures.seed_document()
    )
    decoded = decode_catalogue(json.loads(FIXTURE_PATH.read_text(encoding="utf-8")))
    assert decoded.counts()["templates"] == 6
    assert decoded.counts()["masters"] == 6
    assert sorted(t.name for t in decoded.templates.values()) == sorted(
        fixtures.SEED_DEVICE_NAMES
    )
