"""Consistency scoring: criterion generation, judging, aggregation.

Scores live on [0,1]. A criterion's confidence is exactly the yes-coordinate
of its judge pair; dimension scores are plain means of confidences; ties in
the judge pair resolve to "no" (an uncertain judge should not award credit).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import ImageRef
from .dimensions import UNASSIGNED, classify_by_rules
from .errors import (
    CriterionCount,
    EmptyDimension,
    IutError,
    UnassignedCriterion,
)
from .gateway import DIMENSIONS, Backend, JudgePair
from .model import ImageUnderstandingTree, normalize_name

GRADE_DIMENSIONS = (
    "Text Quality",
    "Image Relevance",
    "Cross-modal Consistency",
    "Task Completion",
    "Innovation",
    "Harmful Content",
)


@dataclass(frozen=True)
class Criterion:
    text: str
    dimension: str = UNASSIGNED
    origin: str = "generated"

    def __post_init__(self) -> None:
        if not is_valid_criterion(self.text):
            raise ValueError(f"criterion must be a non-empty question: {self.text!r}")


def is_valid_criterion(text: str) -> bool:
    return bool(text.strip()) and text.strip().endswith("?")


@dataclass(frozen=True)
class ScoredCriterion:
    criterion: Criterion
    pair: JudgePair

    @property
    def judgment(self) -> bool:
        # Tie resolves to no: fail-closed.
        return self.pair.p_yes > self.pair.p_no

    @property
    def confidence(self) -> float:
        return self.pair.p_yes


@dataclass(frozen=True)
class LabeledSample:
    criterion_text: str
    image_ids: tuple[str, ...]
    label: int
    grades: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError("label must be binary")
        for name in self.grades:
            if name not in GRADE_DIMENSIONS:
                raise ValueError(f"unknown grade dimension: {name!r}")


def load_labeled_samples(path: str | Path) -> list[LabeledSample]:
    """Read one labeled record per line: criterion, image ids, label, grades."""
    samples = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        samples.append(
            LabeledSample(
                criterion_text=raw["criterion"],
                image_ids=tuple(raw.get("images", [])),
                label=int(raw["label"]),
                grades={k: float(v) for k, v in raw.get("grades", {}).items()},
            )
        )
    return samples


@dataclass(frozen=True)
class ConsistencyTriplet:
    style: float | None = None
    logic: float | None = None
    entity: float | None = None
    counts: dict[str, int] = field(default_factory=dict, compare=False)

    def get(self, dimension: str) -> float | None:
        return {"style": self.style, "logic": self.logic, "entity": self.entity}[dimension]

    def as_dict(self) -> dict:
        return {"style": self.style, "logic": self.logic, "entity": self.entity, "counts": dict(self.counts)}


class NegativeWeight(IutError):
    pass


@dataclass(frozen=True)
class CompositeWeights:
    alpha: float = 1 / 3
    beta: float = 1 / 3
    lam: float = 1 / 3

    def __post_init__(self) -> None:
        for value in (self.alpha, self.beta, self.lam):
            if not math.isfinite(value) or value < 0:
                raise NegativeWeight(f"weights must be finite and non-negative, got {value}")


# --- operations ----------------------------------------------------------


def generate_criteria(question: str, input_image: ImageRef | None, response_text: str, generator: Backend) -> list[Criterion]:
    """Exactly three validated binary questions from the generator backend."""
    raw = generator.generate_criteria_raw(question, input_image, response_text)
    valid = [text.strip() for text in raw if is_valid_criterion(text)]
    if len(valid) != 3:
        raise CriterionCount(f"expected 3 valid criteria, got {len(valid)}", raw=list(raw))
    return [Criterion(text) for text in valid]


def classify_dimension(criterion: Criterion, classifier: Backend | None = None) -> str:
    if classifier is not None:
        return classifier.classify_dimension_raw(criterion.text)
    return classify_by_rules(criterion.text)


def judge(criterion: Criterion, input_image: ImageRef | None, generated_image: ImageRef | None, judge_backend: Backend) -> ScoredCriterion:
    images = [ref for ref in (input_image, generated_image) if ref is not None]
    pair = judge_backend.judge_yes_no(criterion.text, images)
    return ScoredCriterion(criterion, pair)


def criterion_accuracy(scored: ScoredCriterion, label: LabeledSample) -> int:
    return int(scored.judgment == bool(label.label))


def aggregate_dimension(scored: list[ScoredCriterion]) -> float:
    if not scored:
        raise EmptyDimension("cannot aggregate an empty criterion set")
    return sum(s.confidence for s in scored) / len(scored)


def score_triplet(scored: list[ScoredCriterion]) -> ConsistencyTriplet:
    buckets: dict[str, list[ScoredCriterion]] = {d: [] for d in DIMENSIONS}
    for item in scored:
        dim = item.criterion.dimension
        if dim not in buckets:
            raise UnassignedCriterion(f"criterion has no dimension: {item.criterion.text!r}")
        buckets[dim].append(item)
    values = {d: (aggregate_dimension(items) if items else None) for d, items in buckets.items()}
    return ConsistencyTriplet(
        style=values["style"],
        logic=values["logic"],
        entity=values["entity"],
        counts={d: len(items) for d, items in buckets.items()},
    )


def composite_score(clip: float, dino: float, iut_align: float, weights: CompositeWeights | None = None) -> float:
    w = weights or CompositeWeights()
    return w.alpha * clip + w.beta * dino + w.lam * iut_align


def _f1(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    overlap = len(a & b)
    if overlap == 0:
        return 0.0
    precision = overlap / len(b)
    recall = overlap / len(a)
    return 2 * precision * recall / (precision + recall)


def iut_alignment(a: ImageUnderstandingTree, b: ImageUnderstandingTree) -> float:
    """Mean of entity-name, relation-triple, and feature key-value F1 scores.

    Exact match after normalization; an empty-vs-empty component counts as 1.
    Symmetric in its arguments.
    """
    entities_a = {normalize_name(e.name) for e in a.objects}
    entities_b = {normalize_name(e.name) for e in b.objects}
    rel = lambda t: {(normalize_name(r.subject), " ".join(r.predicate.split()).casefold(), normalize_name(r.object)) for r in t.relationships}
    feats = lambda t: {(k.strip().casefold(), " ".join(str(v).split()).casefold()) for k, v in t.global_features.items()}
    components = (
        _f1(entities_a, entities_b),
        _f1(rel(a), rel(b)),
        _f1(feats(a), feats(b)),
    )
    return sum(components) / 3


def agreement_rate(predictions: list[bool], labels: list[int]) -> float:
    """Percentage of predictions matching binary labels."""
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if not predictions:
        raise ValueError("cannot compute agreement over an empty set")
    hits = sum(int(p == bool(y)) for p, y in zip(predictions, labels))
    return 100.0 * hits / len(predictions)
