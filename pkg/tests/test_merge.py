from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devicelab import investigation, merge
from devicelab.errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    StaleVersionError,
    StateError,
    ValidationError,
)
from devicelab.merge import (
    ClaimGroup,
    Classification,
    DecisionAction,
    SessionStatus,
    group_id_for,
    partition_claims,
)
from devicelab.model import DraftProfile, DraftStatus, FeatureClaim, Role, normalize_value

from helpers import (
    CountingIds,
    fixed_clock,
    make_template,
    make_user,
    seeded_state,
    submitted_draft,
)


def draft_of(worker: str, *claims: tuple[str, str], template: str = "tpl-1") -> DraftProfile:
    built = [
        FeatureClaim(
            id=f"clm-{worker}-{i}",
            feature_key=key,
            value=value,
            author=worker,
            draft_id=f"drf-{worker}",
        )
        for i, (key, value) in enumerate(claims)
    ]
    return DraftProfile(
        id=f"drf-{worker}",
        template_id=template,
        worker=worker,
        status=DraftStatus.SUBMITTED,
        claims=built,
    )


def test_partition_walkthrough_two_against_one():
    drafts = [
        draft_of("w1", ("connectivity", "Bluetooth")),
        draft_of("w2", ("connectivity", "Bluetooth")),
        draft_of("w3", ("connectivity", "Wi-Fi")),
    ]
    groups = partition_claims(drafts)
    assert [(g.feature_key, g.value, g.classification) for g in groups] == [
        ("connectivity", "Bluetooth", Classification.COMPETING),
        ("connectivity", "Wi-Fi", Classification.PREMERGED),
    ]
    assert groups[0].authors == ("w1", "w2")
    assert groups[1].authors == ("w3",)


def test_partition_single_draft_is_all_premerged():
    groups = partition_claims([draft_of("w1", ("camera", "true"), ("price", "129"))])
    assert len(groups) == 2
    assert all(g.classification is Classification.PREMERGED for g in groups)


def test_partition_normalizes_values_and_keeps_first_spelling():
    drafts = [
        draft_of("w2", ("companion-app", "fitbit APP ")),
        draft_of("w1", ("companion-app", "Fitbit App")),
    ]
    groups = partition_claims(drafts)
    assert len(groups) == 1
    group = groups[0]
    assert group.classification is Classification.COMPETING
    # Display spelling comes from the first claim in (author, id) order.
    assert group.value == "Fitbit App"
    assert group.group_id == group_id_for("companion-app", "fitbit app")


def test_partition_rejects_mixed_or_unsubmitted_input():
    with pytest.raises(ValidationError):
        partition_claims([])
    with pytest.raises(ValidationError) as exc:
        partition_claims(
            [
                draft_of("w1", ("camera", "true"), template="tpl-1"),
                draft_of("w2", ("camera", "true"), template="tpl-2"),
            ]
        )
    assert exc.value.code == "mixed-template"
    in_progress = draft_of("w1", ("camera", "true"))
    in_progress.status = DraftStatus.IN_PROGRESS
    with pytest.raises(ValidationError):
        partition_claims([in_progress])


def test_group_ids_depend_only_on_key_and_normalized_value():
    assert group_id_for("connectivity", "Wi-Fi") == group_id_for("connectivity", " wi-fi ")
    assert group_id_for("connectivity", "Wi-Fi") != group_id_for("sensors", "Wi-Fi")
    assert group_id_for("connectivity", "Wi-Fi").startswith("grp-")


def test_claim_group_rejects_malformed_membership():
    claim = FeatureClaim(
        id="c1", feature_key="camera", value="true", author="w1", draft_id="d1"
    )
    twin = FeatureClaim(
        id="c2", feature_key="camera", value="TRUE", author="w1", draft_id="d2"
    )
    other_value = FeatureClaim(
        id="c3", feature_key="camera", value="false", author="w2", draft_id="d3"
    )
    with pytest.raises(ValidationError):
        ClaimGroup(
            group_id="g", feature_key="camera", value="true", claims=(),
            classification=Classification.PREMERGED,
        )
    with pytest.raises(ValidationError):  # one claim per author
        ClaimGroup(
            group_id="g", feature_key="camera", value="true", claims=(claim, twin),
            classification=Classification.COMPETING,
        )
    with pytest.raises(ValidationError):  # classification must match author count
        ClaimGroup(
            group_id="g", feature_key="camera", value="true", claims=(claim,),
            classification=Classification.COMPETING,
        )
    with pytest.raises(ValidationError):  # members must agree on the value
        ClaimGroup(
            group_id="g", feature_key="camera", value="true", claims=(claim, other_value),
            classification=Classification.COMPETING,
        )


FEATURES = ("alpha", "beta", "gamma", "delta")
VALUES = ("Red", "red ", "Blue", "green")


@st.composite
def random_drafts(draw):
    drafts = []
    for worker in ("w1", "w2", "w3"):
        pairs = draw(
            st.lists(
                st.tuples(st.sampled_from(FEATURES), st.sampled_from(VALUES)),
                max_size=6,
            )
        )
        seen: set[tuple[str, str]] = set()
        claims = []
        for key, value in pairs:
            if (key, normalize_value(value)) in seen:
                continue
            seen.add((key, normalize_value(value)))
            claims.append((key, value))
        if claims:
            drafts.append(draft_of(worker, *claims))
    if not drafts:
        drafts.append(draft_of("w1", ("alpha", "Red")))
    return drafts


@given(random_drafts(), st.randoms())
@settings(max_examples=200)
def test_partition_matches_brute_force_oracle(drafts, rng):
    # Oracle: bucket every claim by (key, normalized value), classify by
    # distinct author count.
    oracle: dict[tuple[str, str], list] = {}
    for draft in drafts:
        for claim in draft.claims:
            oracle.setdefault((claim.feature_key, claim.normalized_value), []).append(claim)

    groups = partition_claims(drafts)
    assert {(g.feature_key, normalize_value(g.value)) for g in groups} == set(oracle)
    for group in groups:
        bucket = oracle[(group.feature_key, normalize_value(group.value))]
        assert {c.id for c in group.claims} == {c.id for c in bucket}
        expected = (
            Classification.PREMERGED
            if len({c.author for c in bucket}) == 1
            else Classification.COMPETING
        )
        assert group.classification is expected

    # Determinism: input order never changes the output, ids included.
    shuffled = list(drafts)
    rng.shuffle(shuffled)
    assert partition_claims(shuffled) == groups


def merge_world():
    admin = make_user("adm", Role.ADMIN)
    workers = tuple(make_user(f"wrk-{s}", Role.CROWD_WORKER) for s in "abc")
    state = seeded_state(admin, *workers)
    ids = CountingIds()
    template = make_template(state, admin, ids)
    return state, template, workers, admin, ids


def open_walkthrough_session(state, template, workers, admin, ids):
    w1, w2, w3 = workers
    submitted_draft(state, template.id, w1, [("connectivity", "Bluetooth 4.0")], ids)
    submitted_draft(state, template.id, w2, [("connectivity", "bluetooth 4.0")], ids)
    submitted_draft(state, template.id, w3, [("connectivity", "Wi-Fi")], ids)
    return merge.open_merge_session(
        state, template.id, [admin.id, w1.id, w2.id, w3.id], admin, ids, fixed_clock
    )


def test_open_session_partitions_and_premerges():
    state, template, workers, admin, ids = merge_world()
    session = open_walkthrough_session(state, template, workers, admin, ids)
    assert session.status is SessionStatus.OPEN
    assert len(session.groups) == 2
    competing, premerged = session.groups
    assert competing.classification is Classification.COMPETING
    assert competing.value == "Bluetooth 4.0"  # catalogue spelling, both drafts
    assert premerged.classification is Classification.PREMERGED
    # The premerged group starts with a recorded keep; competing ones wait.
    assert session.decisions[premerged.group_id].action is DecisionAction.KEEP
    assert session.undecided_competing() == [competing.group_id]
    assert len(session.decision_log) == 1


def test_open_session_gates():
    state, template, workers, admin, ids = merge_world()
    w1, w2, _ = workers
    with pytest.raises(StateError) as exc:
        merge.open_merge_session(state, template.id, [admin.id], admin, ids, fixed_clock)
    assert exc.value.code == "too-few-drafts"
    submitted_draft(state, template.id, w1, [("camera", "true")], ids)
    with pytest.raises(StateError):
        merge.open_merge_session(state, template.id, [admin.id], admin, ids, fixed_clock)
    submitted_draft(state, template.id, w2, [("camera", "true")], ids)
    with pytest.raises(AuthorizationError):
        merge.open_merge_session(state, template.id, [w1.id], w1, ids, fixed_clock)
    with pytest.raises(ValidationError):
        merge.open_merge_session(state, template.id, [], admin, ids, fixed_clock)
    with pytest.raises(NotFoundError):
        merge.open_merge_session(state, template.id, ["ghost"], admin, ids, fixed_clock)
    session = merge.open_merge_session(
        state, template.id, [admin.id, w1.id, w2.id], admin, ids, fixed_clock
    )
    # Only one session may be open per template at a time.
    with pytest.raises(ConflictError) as exc2:
        merge.open_merge_session(state, template.id, [admin.id], admin, ids, fixed_clock)
    assert exc2.value.details == {"session_id": session.id}


def test_decide_competing_group_end_to_end():
    state, template, workers, admin, ids = merge_world()
    session = open_walkthrough_session(state, template, workers, admin, ids)
    competing = session.groups[0]
    chosen = competing.claims[0].evidence[0].id

    with pytest.raises(ValidationError) as exc:
        merge.decide_group(
            state, session.id, competing.group_id, "keep", admin, fixed_clock
        )
    assert exc.value.code == "illegal-action"
    with pytest.raises(ValidationError):
        merge.decide_group(
            state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
            chosen_evidence=[],
        )
    with pytest.raises(NotFoundError) as exc2:
        merge.decide_group(
            state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
            chosen_evidence=[chosen, "evd-nope"],
        )
    assert exc2.value.code == "unknown-evidence"

    merge.decide_group(
        state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
        chosen_evidence=[chosen], expected_version=1,
    )
    assert session.decisions[competing.group_id].chosen_evidence == (chosen,)
    assert session.undecided_competing() == []
    assert session.version == 2


def test_decide_requires_open_session_and_participant():
    state, template, workers, admin, ids = merge_world()
    session = open_walkthrough_session(state, template, workers, admin, ids)
    competing, premerged = session.groups
    outsider = make_user("out", Role.ADMIN)
    state.users[outsider.id] = outsider
    with pytest.raises(AuthorizationError) as exc:
        merge.decide_group(
            state, session.id, premerged.group_id, "remove", outsider, fixed_clock
        )
    assert exc.value.code == "non-participant"
    with pytest.raises(StaleVersionError):
        merge.decide_group(
            state, session.id, premerged.group_id, "remove", admin, fixed_clock,
            expected_version=99,
        )
    with pytest.raises(NotFoundError):
        merge.decide_group(state, session.id, "grp-nope", "remove", admin, fixed_clock)

    chosen = [competing.claims[0].evidence[0].id]
    merge.decide_group(
        state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
        chosen_evidence=chosen,
    )
    merge.finalize_master(state, session.id, admin)
    with pytest.raises(StateError) as exc2:
        merge.decide_group(
            state, session.id, premerged.group_id, "remove", admin, fixed_clock
        )
    assert exc2.value.code == "closed-session"


def test_decisions_overwrite_but_the_log_only_appends():
    state, template, workers, admin, ids = merge_world()
    session = open_walkthrough_session(state, template, workers, admin, ids)
    premerged = session.groups[1]
    log_before = len(session.decision_log)
    merge.decide_group(state, session.id, premerged.group_id, "remove", admin, fixed_clock)
    merge.decide_group(state, session.id, premerged.group_id, "keep", admin, fixed_clock)
    assert session.decisions[premerged.group_id].action is DecisionAction.KEEP
    assert len(session.decision_log) == log_before + 2
    actions = [d.action for d in session.decision_log if d.group_id == premerged.group_id]
    assert actions == [DecisionAction.KEEP, DecisionAction.REMOVE, DecisionAction.KEEP]


def test_finalize_builds_master_with_both_connectivity_values():
    state, template, workers, admin, ids = merge_world()
    w1 = workers[0]
    session = open_walkthrough_session(state, template, workers, admin, ids)
    competing, premerged = session.groups
    w1_claim = next(c for c in competing.claims if c.author == w1.id)
    chosen = w1_claim.evidence[0].id

    with pytest.raises(StateError) as exc:
        merge.finalize_master(state, session.id, admin)
    assert exc.value.code == "undecided-groups"
    assert exc.value.details["groups"] == [competing.group_id]
    assert "connectivity=Bluetooth 4.0" in exc.value.message

    merge.decide_group(
        state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
        chosen_evidence=[chosen],
    )
    master = merge.finalize_master(state, session.id, admin)

    # The multi-valued feature keeps both surviving values.
    assert [(e.feature_key, e.value) for e in master.entries] == [
        ("connectivity", "Bluetooth 4.0"),
        ("connectivity", "Wi-Fi"),
    ]
    bluetooth, wifi = master.entries
    assert [e.id for e in bluetooth.evidence] == [chosen]
    assert bluetooth.authors == (workers[0].id, workers[1].id)
    assert {e.id for e in wifi.evidence} == premerged.evidence_ids()
    assert wifi.authors == (workers[2].id,)
    assert master.provenance.session_id == session.id
    assert list(master.provenance.decisions) == session.decision_log

    assert session.status is SessionStatus.FINALIZED
    assert state.template(template.id).status.value == "merged"
    assert state.master(template.id) == master
    with pytest.raises(StateError):
        merge.finalize_master(state, session.id, admin)
    with pytest.raises(AuthorizationError):
        merge.finalize_master(state, session.id, workers[0])


def test_removed_groups_are_excluded_from_the_master():
    state, template, workers, admin, ids = merge_world()
    session = open_walkthrough_session(state, template, workers, admin, ids)
    competing, premerged = session.groups
    merge.decide_group(
        state, session.id, competing.group_id, "select_evidence", admin, fixed_clock,
        chosen_evidence=sorted(competing.evidence_ids()),
    )
    merge.decide_group(state, session.id, premerged.group_id, "remove", admin, fixed_clock)
    master = merge.finalize_master(state, session.id, admin)
    assert [(e.feature_key, e.value) for e in master.entries] == [
        ("connectivity", "Bluetooth 4.0")
    ]
    # select_evidence with the full set keeps the union, in claim order.
    assert [e.id for e in master.entries[0].evidence] == [
        e.id for e in competing.all_evidence()
    ]


def test_finalize_rejects_two_survivors_on_a_single_valued_feature():
    state, template, workers, admin, ids = merge_world()
    w1, w2, _ = workers
    submitted_draft(state, template.id, w1, [("display", "OLED")], ids)
    submitted_draft(state, template.id, w2, [("display", "LCD")], ids)
    session = merge.open_merge_session(
        state, template.id, [admin.id, w1.id, w2.id], admin, ids, fixed_clock
    )
    # Both groups are premerged (one author each) and implicitly kept.
    with pytest.raises(StateError) as exc:
        merge.finalize_master(state, session.id, admin)
    assert exc.value.code == "single-value-conflict"
    assert exc.value.details["feature_key"] == "display"
    assert sorted(exc.value.details["values"]) == ["LCD", "OLED"]
    assert session.status is SessionStatus.OPEN  # failed finalize changes nothing

    lcd = next(g for g in session.groups if g.value == "LCD")
    merge.decide_group(state, session.id, lcd.group_id, "remove", admin, fixed_clock)
    master = merge.finalize_master(state, session.id, admin)
    assert [(e.feature_key, e.value) for e in master.entries] == [("display", "OLED")]


def test_master_entries_trace_back_to_source_claims():
    state, template, workers, admin, ids = merge_world()
    w1, w2, _ = workers
    submitted_draft(
        state, template.id, w1,
        [("connectivity", "Wi-Fi"), ("camera", "true"), ("price", "129")], ids,
    )
    submitted_draft(
        state, template.id, w2,
        [("connectivity", "Wi-Fi"), ("battery-life", "72")], ids,
    )
    session = merge.open_merge_session(
        state, template.id, [admin.id, w1.id, w2.id], admin, ids, fixed_clock
    )
    for group_id in session.undecided_competing():
        group = session.group(group_id)
        merge.decide_group(
            state, session.id, group_id, "select_evidence", admin, fixed_clock,
            chosen_evidence=[group.claims[0].evidence[0].id],
        )
    master = merge.finalize_master(state, session.id, admin)

    source_claims = [
        claim
        for draft in state.drafts.values()
        if draft.id in session.source_drafts
        for claim in draft.claims
    ]
    for entry in master.entries:
        matching = [
            c
            for c in source_claims
            if c.feature_key == entry.feature_key
            and c.normalized_value == normalize_value(entry.value)
        ]
        assert matching, "every master entry originates in a source draft"
        group_evidence = {ev.id for c in matching for ev in c.evidence}
        assert {ev.id for ev in entry.evidence} <= group_evidence
        assert entry.evidence, "every master entry carries evidence"
        assert set(entry.authors) == {c.author for c in matching}
    # Audit trail: at least one logged decision per competing group.
    competing = [g for g in session.groups if g.classification is Classification.COMPETING]
    assert len(session.decision_log) >= len(competing)
