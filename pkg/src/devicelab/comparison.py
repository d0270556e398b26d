"""Stage 3: side-by-side matrices over merged profiles, per-pair diffs,
templated discussion prompts, and privacy-risk ranking polls with Borda
consensus.

Everything here is a pure read over finalized masters except ranking
submission, which is last-write-wins per (poll, student).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, Mapping, Sequence

from .catalog import SENSORS_FEATURE_KEY, require_role
from .errors import NotFoundError, StateError, ValidationError
from .model import Role, TemplateStatus, UserRef, normalize_value

if TYPE_CHECKING:
    from .state import State


@dataclass(frozen=True)
class MatrixProduct:
    id: str
    name: str


@dataclass(frozen=True)
class CellValue:
    value: str
    evidence_count: int


Cell = tuple[CellValue, ...]


@dataclass(frozen=True)
class ComparisonMatrix:
    """Products as columns, features as rows; None cells mean unknown.

    Unknown is not "no": a missing claim says nothing about the product.
    """

    products: tuple[MatrixProduct, ...]
    feature_keys: tuple[str, ...]
    cells: Mapping[tuple[str, str], Cell | None]

    def cell(self, feature_key: str, product_id: str) -> Cell | None:
        return self.cells[(feature_key, product_id)]


class PromptKind(str, Enum):
    WHY_PRESENT = "why_present"
    CROSS_PRODUCT_CONTRAST = "cross_product_contrast"
    ABSENCE = "absence"


@dataclass(frozen=True)
class DiscussionPrompt:
    kind: PromptKind
    feature_key: str
    product_ids: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class DiffEntry:
    feature_key: str
    values_a: tuple[str, ...]
    values_b: tuple[str, ...]


@dataclass(frozen=True)
class ProductDiff:
    product_a: str
    product_b: str
    only_in_a: tuple[str, ...]
    only_in_b: tuple[str, ...]
    differing: tuple[DiffEntry, ...]


@dataclass(frozen=True)
class Poll:
    id: str
    criterion: str
    product_ids: tuple[str, ...]


@dataclass(frozen=True)
class Ranking:
    poll_id: str
    student: str
    criterion: str
    ordered_products: tuple[str, ...]
    submitted_at: str


@dataclass(frozen=True)
class ConsensusRanking:
    poll_id: str
    criterion: str
    scores: Mapping[str, int]
    ordering: tuple[str, ...]
    voter_count: int


def _resolve_products(state: State, product_ids: Sequence[str]) -> list[MatrixProduct]:
    if len(set(product_ids)) != len(product_ids):
        raise ValidationError(
            "a product appears twice in the selection", field="products"
        )
    unmerged = []
    products = []
    for product_id in product_ids:
        template = state.template(product_id)
        if template.status is not TemplateStatus.MERGED or product_id not in state.masters:
            unmerged.append(template.name)
        products.append(MatrixProduct(id=template.id, name=template.name))
    if unmerged:
        raise StateError(
            f"no merged profile yet for: {', '.join(unmerged)}",
            code="unmerged-product",
            details={"products": unmerged},
        )
    return products


def build_matrix(
    state: State, product_ids: Sequence[str], actor: UserRef
) -> ComparisonMatrix:
    """Cross-product matrix; column order follows the caller's selection."""
    require_role(actor, Role.STUDENT)
    if len(product_ids) < 2:
        raise ValidationError(
            "comparing needs at least 2 products",
            code="too-few-products",
            details={"selected": len(product_ids)},
        )
    products = _resolve_products(state, product_ids)

    keys: set[str] = set()
    for product in products:
        keys.update(entry.feature_key for entry in state.masters[product.id].entries)
    feature_keys = tuple(sorted(keys))

    cells: dict[tuple[str, str], Cell | None] = {}
    for product in products:
        by_key: dict[str, list[CellValue]] = {}
        for entry in state.masters[product.id].entries:
            by_key.setdefault(entry.feature_key, []).append(
                CellValue(value=entry.value, evidence_count=len(entry.evidence))
            )
        for key in feature_keys:
            values = by_key.get(key)
            cells[(key, product.id)] = tuple(values) if values else None

    return ComparisonMatrix(
        products=tuple(products), feature_keys=feature_keys, cells=cells
    )


def diff_products(state: State, product_a: str, product_b: str, actor: UserRef) -> ProductDiff:
    require_role(actor, Role.STUDENT)
    resolved = _resolve_products(state, [product_a, product_b])
    values_by_key: list[dict[str, list[str]]] = []
    for product in resolved:
        by_key: dict[str, list[str]] = {}
        for entry in state.masters[product.id].entries:
            by_key.setdefault(entry.feature_key, []).append(entry.value)
        values_by_key.append(by_key)
    in_a, in_b = values_by_key

    only_in_a = tuple(sorted(set(in_a) - set(in_b)))
    only_in_b = tuple(sorted(set(in_b) - set(in_a)))
    differing = []
    for key in sorted(set(in_a) & set(in_b)):
        norm_a = [normalize_value(v) for v in in_a[key]]
        norm_b = [normalize_value(v) for v in in_b[key]]
        if norm_a != norm_b:
            differing.append(
                DiffEntry(
                    feature_key=key,
                    values_a=tuple(in_a[key]),
                    values_b=tuple(in_b[key]),
                )
            )
    return ProductDiff(
        product_a=product_a,
        product_b=product_b,
        only_in_a=only_in_a,
        only_in_b=only_in_b,
        differing=tuple(differing),
    )


def _article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


_KIND_ORDER = {
    PromptKind.WHY_PRESENT: 0,
    PromptKind.CROSS_PRODUCT_CONTRAST: 1,
    PromptKind.ABSENCE: 2,
}


def generate_prompts(matrix: ComparisonMatrix) -> list[DiscussionPrompt]:
    """Templated questions to seed discussion, pure function of the matrix.

    Per feature key: a why_present prompt for each value in a sensor cell,
    then one contrast prompt when known values differ across products, then
    one absence prompt when known and unknown cells coexist.
    """
    prompts: list[DiscussionPrompt] = []

    for key in matrix.feature_keys:
        known = [
            (product, matrix.cell(key, product.id))
            for product in matrix.products
            if matrix.cell(key, product.id) is not None
        ]
        unknown = [
            product for product in matrix.products if matrix.cell(key, product.id) is None
        ]

        if key == SENSORS_FEATURE_KEY:
            for product, cell in known:
                assert cell is not None
                for cell_value in cell:
                    value = cell_value.value
                    prompts.append(
                        DiscussionPrompt(
                            kind=PromptKind.WHY_PRESENT,
                            feature_key=key,
                            product_ids=(product.id,),
                            text=f"Why does {product.name} integrate {_article(value)} {value}?",
                        )
                    )

        if len(known) >= 2:
            value_sets = {
                tuple(sorted(normalize_value(cv.value) for cv in cell))
                for _, cell in known
                if cell is not None
            }
            if len(value_sets) > 1:
                parts = "; ".join(
                    f"{product.name} lists {', '.join(cv.value for cv in cell)}"
                    for product, cell in known
                    if cell is not None
                )
                prompts.append(
                    DiscussionPrompt(
                        kind=PromptKind.CROSS_PRODUCT_CONTRAST,
                        feature_key=key,
                        product_ids=tuple(product.id for product, _ in known),
                        text=f"{key} differs across products: {parts}. "
                        "What explains the difference?",
                    )
                )

        if known and unknown:
            names = ", ".join(product.name for product in unknown)
            prompts.append(
                DiscussionPrompt(
                    kind=PromptKind.ABSENCE,
                    feature_key=key,
                    product_ids=tuple(product.id for product in unknown),
                    text=f"No {key} information was found for {names}. "
                    "Is the feature absent, or is the information just missing?",
                )
            )

    product_order = {product.id: i for i, product in enumerate(matrix.products)}
    prompts.sort(
        key=lambda p: (
            p.feature_key,
            _KIND_ORDER[p.kind],
            tuple(product_order[pid] for pid in p.product_ids),
        )
    )
    return prompts


def submit_ranking(
    state: State,
    poll_id: str,
    ordered_products: Sequence[str],
    actor: UserRef,
    now: Callable[[], str],
    criterion: str | None = None,
) -> Ranking:
    """Store one student's ballot; resubmitting replaces the earlier one.

    The first ballot creates the poll and freezes its product set to every
    template merged so far.
    """
    require_role(actor, Role.STUDENT)
    poll = state.polls.get(poll_id)
    if poll is None:
        merged = tuple(
            sorted(t.id for t in state.templates.values() if t.status is TemplateStatus.MERGED)
        )
        poll = Poll(id=poll_id, criterion=criterion or poll_id, product_ids=merged)
        state.polls[poll_id] = poll

    expected = set(poll.product_ids)
    submitted = list(ordered_products)
    strangers = sorted(set(submitted) - expected)
    if strangers:
        raise NotFoundError(
            f"not in this poll: {', '.join(strangers)}",
            code="unknown-product",
            details={"products": strangers},
        )
    if len(submitted) != len(set(submitted)) or set(submitted) != expected:
        raise ValidationError(
            f"ranking must list each of the {len(expected)} poll products exactly once",
            code="incomplete-permutation",
            details={"expected": sorted(expected), "submitted": submitted},
        )

    ranking = Ranking(
        poll_id=poll_id,
        student=actor.id,
        criterion=poll.criterion,
        ordered_products=tuple(submitted),
        submitted_at=now(),
    )
    state.rankings.setdefault(poll_id, {})[actor.id] = ranking
    return ranking


def borda_scores(ballots: Sequence[Sequence[str]]) -> dict[str, int]:
    """Position i in an n-item ballot earns n-1-i points (first place tops)."""
    scores: dict[str, int] = {}
    for ballot in ballots:
        n = len(ballot)
        for i, product in enumerate(ballot):
            scores[product] = scores.get(product, 0) + (n - 1 - i)
    return scores


def aggregate_rankings(state: State, poll_id: str) -> ConsensusRanking:
    """Borda consensus over all ballots; ties broken by product name."""
    poll = state.polls.get(poll_id)
    rankings = state.rankings.get(poll_id, {})
    if poll is None or not rankings:
        raise NotFoundError(
            f"no rankings submitted for poll {poll_id!r}",
            code="no-rankings",
            details={"poll_id": poll_id},
        )
    ballots = [r.ordered_products for r in rankings.values()]
    scores = borda_scores(ballots)
    for product in poll.product_ids:
        scores.setdefault(product, 0)
    ordering = tuple(
        sorted(scores, key=lambda pid: (-scores[pid], state.template(pid).name))
    )
    return ConsensusRanking(
        poll_id=poll_id,
        criterion=poll.criterion,
        scores=scores,
        ordering=ordering,
        voter_count=len(rankings),
    )


def matrix_to_csv(matrix: ComparisonMatrix) -> str:
    """Products as columns, features as rows, '; '-joined values, '?' unknown."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["feature", *(product.name for product in matrix.products)])
    for key in matrix.feature_keys:
        row = [key]
        for product in matrix.products:
            cell = matrix.cell(key, product.id)
            row.append("?" if cell is None else "; ".join(cv.value for cv in cell))
        writer.writerow(row)
    return out.getvalue()
