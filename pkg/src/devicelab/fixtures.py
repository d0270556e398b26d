"""Builds the shipped six-device seed document by driving the real service
end to end: two learners draft each device independently, an admin merges,
and the masters land fully evidence-backed by construction.

Device names are real products; the claimed values are plausible seed data,
not verified product facts. Run `python -m devicelab.fixtures` to rewrite
fixtures/six-devices.json.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .interchange import canonical_json
from .merge import Classification, DecisionAction
from .model import Role, normalize_value
from .service import Service

FIXTURE_TIMESTAMP = "2024-01-01T00:00:00+00:00"

# Per device: name, brand, description, one claim list per learner, and
# decision overrides keyed by (feature_key, normalized value). Competing
# groups default to selecting all evidence; "first" keeps only the first
# evidence item, "remove" drops a pre-merged group.
_Claim = tuple[str, str, list[tuple[str, dict, str]]]

SEED_DEVICES: list[dict] = [
    {
        "name": "Amazon Echo",
        "brand": "Amazon",
        "description": "Smart speaker with a voice assistant",
        "drafts": [
            [
                ("connectivity", "Wi-Fi", [
                    ("web_page", {"type": "url", "link": "https://example.com/echo-specs"}, "spec sheet"),
                ]),
                ("microphone", "true", [
                    ("packaging", {"type": "text_quote", "quote": "Far-field microphone array"}, ""),
                ]),
                ("voice-control", "true", [
                    ("promo_video", {"type": "url", "link": "https://example.com/echo-video"}, "assistant demo"),
                ]),
                ("price", "99.99", [
                    ("web_page", {"type": "url", "link": "https://example.com/echo-store"}, ""),
                ]),
            ],
            [
                ("connectivity", "wi-fi", [
                    ("advertisement", {"type": "url", "link": "https://example.com/echo-ad"}, ""),
                ]),
                ("connectivity", "Bluetooth 4.0", [
                    ("packaging", {"type": "text_quote", "quote": "Bluetooth audio streaming"}, ""),
                ]),
                ("microphone", "true", [
                    ("web_page", {"type": "url", "link": "https://example.com/echo-support"}, ""),
                ]),
                ("data-storage-location", "cloud", [
                    ("terms_and_conditions", {"type": "document_page", "page": 12}, "voice recordings retained"),
                ]),
            ],
        ],
        "overrides": {("connectivity", "wi-fi"): "first"},
    },
    {
        "name": "Beddit",
        "brand": "Beddit",
        "description": "Under-mattress sleep monitor",
        "drafts": [
            [
                ("sensors", "pressure", [
                    ("web_page", {"type": "url", "link": "https://example.com/beddit"}, "measures movement in bed"),
                ]),
                ("sensors", "heart-rate", [
                    ("app_ui", {"type": "text_quote", "quote": "Sleep time heart rate"}, ""),
                ]),
                ("companion-app", "Beddit Sleep Monitor", [
                    ("app_ui", {"type": "text_quote", "quote": "Pair with the Beddit Sleep Monitor app"}, ""),
                ]),
            ],
            [
                ("sensors", "pressure", [
                    ("leaflet", {"type": "document_page", "page": 2}, ""),
                ]),
                ("data-storage-location", "cloud", [
                    ("terms_and_conditions", {"type": "document_page", "page": 4}, ""),
                ]),
                ("price", "149.95", [
                    ("web_page", {"type": "url", "link": "https://example.com/beddit-shop"}, ""),
                ]),
            ],
        ],
        "overrides": {},
    },
    {
        "name": "Fitbit",
        "brand": "Fitbit",
        "description": "Wrist-worn fitness tracker",
        "drafts": [
            [
                ("connectivity", "Bluetooth 4.0", [
                    ("packaging", {"type": "text_quote", "quote": "Syncs over Bluetooth 4.0"}, ""),
                ]),
                ("sensors", "heart-rate", [
                    ("web_page", {"type": "url", "link": "https://example.com/fitbit-specs"}, ""),
                ]),
                ("water-resistance", "true", [
                    ("promo_video", {"type": "url", "link": "https://example.com/fitbit-swim"}, "swim demo"),
                ]),
                ("display", "OLED", [
                    ("web_page", {"type": "url", "link": "https://example.com/fitbit-specs"}, ""),
                ]),
            ],
            [
                ("connectivity", "bluetooth 4.0", [
                    ("web_page", {"type": "url", "link": "https://example.com/fitbit-support"}, ""),
                ]),
                ("sensors", "accelerometer", [
                    ("leaflet", {"type": "document_page", "page": 1}, "step counting"),
                ]),
                ("battery-life", "120", [
                    ("packaging", {"type": "text_quote", "quote": "Up to 5 days of battery"}, "hours"),
                ]),
            ],
        ],
        "overrides": {},
    },
    {
        "name": "Google Home",
        "brand": "Google",
        "description": "Smart speaker with a voice assistant",
        "drafts": [
            [
                ("voice-control", "true", [
                    ("promo_video", {"type": "url", "link": "https://example.com/home-video"}, ""),
                ]),
                ("microphone", "true", [
                    ("packaging", {"type": "text_quote", "quote": "Dual microphones"}, ""),
                ]),
                ("price", "99", [
                    ("web_page", {"type": "url", "link": "https://example.com/home-store"}, ""),
                ]),
            ],
            [
                ("voice-control", "true", [
                    ("web_page", {"type": "url", "link": "https://example.com/home-support"}, ""),
                ]),
                ("price", "129", [
                    ("advertisement", {"type": "url", "link": "https://example.com/home-ad"}, "bundle price"),
                ]),
                ("connectivity", "Wi-Fi", [
                    ("packaging", {"type": "text_quote", "quote": "Requires Wi-Fi"}, ""),
                ]),
            ],
        ],
        # Two learners found two different prices; price is single-valued,
        # so the merge keeps 99 and drops 129.
        "overrides": {("price", "129"): "remove"},
    },
    {
        "name": "June Oven",
        "brand": "June",
        "description": "Countertop smart oven",
        "drafts": [
            [
                ("sensors", "camera", [
                    ("promo_video", {"type": "url", "link": "https://example.com/june-video"}, "food recognition demo"),
                ]),
                ("camera", "true", [
                    ("web_page", {"type": "url", "link": "https://example.com/june"}, ""),
                ]),
                ("sensors", "temperature", [
                    ("web_page", {"type": "url", "link": "https://example.com/june-specs"}, "core probe"),
                ]),
            ],
            [
                ("sensors", "camera", [
                    ("web_page", {"type": "url", "link": "https://example.com/june-review"}, ""),
                ]),
                ("voice-control", "false", [
                    ("app_ui", {"type": "text_quote", "quote": "No voice assistant support"}, ""),
                ]),
                ("price", "599", [
                    ("web_page", {"type": "url", "link": "https://example.com/june-shop"}, ""),
                ]),
            ],
        ],
        "overrides": {},
    },
    {
        "name": "Oral-B Smart toothbrush",
        "brand": "Oral-B",
        "description": "Connected electric toothbrush",
        "drafts": [
            [
                ("connectivity", "Bluetooth 4.0", [
                    ("packaging", {"type": "text_quote", "quote": "Connects with Bluetooth"}, ""),
                ]),
                ("companion-app", "Oral-B App", [
                    ("app_ui", {"type": "text_quote", "quote": "Pair in the Oral-B App"}, ""),
                ]),
                ("water-resistance", "true", [
                    ("leaflet", {"type": "document_page", "page": 3}, "rinse under running water"),
                ]),
            ],
            [
                ("connectivity", "Bluetooth 4.0", [
                    ("web_page", {"type": "url", "link": "https://example.com/oralb"}, ""),
                ]),
                ("battery-life", "28", [
                    ("web_page", {"type": "url", "link": "https://example.com/oralb-specs"}, ""),
                ]),
                ("sensors", "accelerometer", [
                    ("web_page", {"type": "url", "link": "https://example.com/oralb-tech"}, "position detection"),
                ]),
            ],
        ],
        "overrides": {},
    },
]

SEED_DEVICE_NAMES = [device["name"] for device in SEED_DEVICES]


class _CountingIds:
    def __init__(self) -> None:
        self.counter = 0

    def __call__(self, prefix: str) -> str:
        self.counter += 1
        return f"fx-{prefix}-{self.counter:04d}"


def build_seed_service() -> Service:
    """Drive a fresh in-memory service through the full six-device scenario."""
    service = Service(
        seed=True,
        clock=lambda: FIXTURE_TIMESTAMP,
        id_factory=_CountingIds(),
    )
    all_roles = [Role.CROWD_WORKER, Role.ADMIN, Role.STUDENT]
    _, admin = service.issue_token("Seed Admin", all_roles)
    _, learner_one = service.issue_token("Learner One", all_roles)
    _, learner_two = service.issue_token("Learner Two", all_roles)
    learners = [learner_one, learner_two]

    for device in SEED_DEVICES:
        template = service.create_template(
            device["name"], device["description"], device["brand"], admin
        )
        for learner, claims in zip(learners, device["drafts"]):
            draft = service.open_draft(template.id, learner)
            for feature_key, value, evidence_items in claims:
                draft = service.add_claim(draft.id, feature_key, value, learner)
                claim_id = draft.claims[-1].id
                for source_kind, locator, note in evidence_items:
                    service.attach_evidence(
                        claim_id, source_kind, locator, learner, note=note
                    )
            service.submit_draft(draft.id, learner)

        session = service.open_merge_session(
            template.id, [admin.id, learner_one.id, learner_two.id], admin
        )
        for group in session.groups:
            override = device["overrides"].get(
                (group.feature_key, normalize_value(group.value))
            )
            if group.classification is Classification.COMPETING:
                evidence_ids = [ev.id for ev in group.all_evidence()]
                chosen = evidence_ids[:1] if override == "first" else evidence_ids
                service.decide(
                    session.id,
                    group.group_id,
                    DecisionAction.SELECT_EVIDENCE,
                    admin,
                    chosen_evidence=chosen,
                )
            elif override == "remove":
                service.decide(session.id, group.group_id, DecisionAction.REMOVE, admin)
        service.finalize(session.id, admin)

    return service


def seed_document() -> dict:
    return build_seed_service().export_document()


def write_seed_document(path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(canonical_json(seed_document()), "utf-8")
    return target


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "fixtures/six-devices.json"
    print(f"wrote {write_seed_document(out)}")
