import json
import math
import random
from statistics import fmean

import pytest

from iutkit.dimensions import UNASSIGNED, classify_by_rules
from iutkit.errors import CriterionCount, EmptyDimension, UnassignedCriterion
from iutkit.evaluation import (
    CompositeWeights,
    ConsistencyTriplet,
    Criterion,
    LabeledSample,
    NegativeWeight,
    ScoredCriterion,
    agreement_rate,
    aggregate_dimension,
    classify_dimension,
    composite_score,
    criterion_accuracy,
    generate_criteria,
    is_valid_criterion,
    iut_alignment,
    judge,
    load_labeled_samples,
    score_triplet,
)
from iutkit.gateway import JudgePair, softmax_pair
from iutkit.mock_backend import CAT_MAT_INSTRUCTION, MockBackend
from iutkit.model import Entity, EntityKind, ImageUnderstandingTree, Relation

from conftest import mutate_tree, random_tree


def scored(text: str, p_yes: float, dimension: str = "style") -> ScoredCriterion:
    return ScoredCriterion(Criterion(text, dimension), JudgePair(p_yes, 1 - p_yes))


class TestCriterion:
    def test_must_be_question(self):
        assert is_valid_criterion("Is the sky blue?")
        assert not is_valid_criterion("The sky is blue.")
        assert not is_valid_criterion("   ")
        with pytest.raises(ValueError):
            Criterion("not a question")

    def test_judgment_tie_is_no(self):
        assert not scored("Tied?", 0.5).judgment
        assert scored("Leaning?", 0.500001).judgment
        assert not scored("Doubt?", 0.499999).judgment

    def test_confidence_is_yes_probability(self):
        assert scored("Sure?", 0.73).confidence == 0.73


class TestGenerateAndClassify:
    def test_cat_mat_criteria(self, store):
        backend = MockBackend(store=store)
        criteria = generate_criteria(CAT_MAT_INSTRUCTION, None, "resp", backend)
        assert [c.text for c in criteria] == [
            "Is the cat sleeping?",
            "Is the mat red?",
            "Is the cat positioned on the mat?",
        ]

    def test_wrong_count_raises_with_raw(self, store):
        backend = MockBackend(store=store, criteria_fixtures={"two": ["Is A?", "Is B?"]})
        with pytest.raises(CriterionCount) as exc:
            generate_criteria("two", None, "r", backend)
        assert exc.value.raw == ["Is A?", "Is B?"]

    def test_invalid_lines_dropped_then_counted(self, store):
        backend = MockBackend(
            store=store,
            criteria_fixtures={"noisy": ["Is A?", "not a question", "Is B?", "Is C?"]},
        )
        criteria = generate_criteria("noisy", None, "r", backend)
        assert [c.text for c in criteria] == ["Is A?", "Is B?", "Is C?"]

    def test_classify_uses_backend_when_given(self, store):
        backend = MockBackend(store=store)
        assert classify_dimension(Criterion("Is the mat red?"), backend) == "style"

    def test_classify_rule_fallback(self):
        assert classify_dimension(Criterion("Is the overall art style consistent?")) == "style"
        assert classify_dimension(Criterion("Is the cat on the left of the mat?")) == "logic"
        assert classify_dimension(Criterion("Does the dog have brown fur?")) == "entity"
        assert classify_dimension(Criterion("Is it Tuesday?")) == UNASSIGNED

    def test_rule_ing_verb_goes_to_logic(self):
        assert classify_by_rules("Is the man running?") == "logic"
        # known non-action -ing words stay out of the logic bucket
        assert classify_by_rules("Is the lighting warm?") == "style"


class TestAggregation:
    def test_mean_oracle_random_sets(self):
        rng = random.Random(13)
        for _ in range(10_000):
            values = [rng.random() for _ in range(rng.randint(1, 8))]
            items = [scored(f"Q{i}?", v) for i, v in enumerate(values)]
            assert abs(aggregate_dimension(items) - fmean(values)) < 1e-12

    def test_empty_dimension_raises(self):
        with pytest.raises(EmptyDimension):
            aggregate_dimension([])

    def test_triplet_absent_dimension_is_none(self):
        triplet = score_triplet([scored("Red?", 0.9, "style"), scored("On?", 0.6, "logic")])
        assert triplet.entity is None
        assert triplet.style == pytest.approx(0.9)
        assert triplet.counts == {"style": 1, "logic": 1, "entity": 0}

    def test_triplet_unassigned_rejected(self):
        with pytest.raises(UnassignedCriterion):
            score_triplet([scored("Hmm?", 0.5, UNASSIGNED)])

    def test_judgment_invariant_under_logit_rescaling(self):
        rng = random.Random(21)
        for _ in range(500):
            yes, no = rng.uniform(-5, 5), rng.uniform(-5, 5)
            scale = rng.uniform(0.1, 10)
            a = ScoredCriterion(Criterion("Q?"), softmax_pair(yes, no))
            b = ScoredCriterion(Criterion("Q?"), softmax_pair(yes * scale, no * scale))
            assert a.judgment == b.judgment


class TestComposite:
    def test_default_weights_equal_thirds(self):
        assert composite_score(0.9, 0.6, 0.3) == pytest.approx((0.9 + 0.6 + 0.3) / 3)

    def test_linearity(self):
        rng = random.Random(31)
        w = CompositeWeights(0.5, 0.3, 0.2)
        for _ in range(200):
            c1, d1, i1 = rng.random(), rng.random(), rng.random()
            c2, d2, i2 = rng.random(), rng.random(), rng.random()
            t = rng.random()
            mixed = composite_score(
                t * c1 + (1 - t) * c2, t * d1 + (1 - t) * d2, t * i1 + (1 - t) * i2, w
            )
            expected = t * composite_score(c1, d1, i1, w) + (1 - t) * composite_score(c2, d2, i2, w)
            assert abs(mixed - expected) < 1e-12

    def test_projection_weights(self):
        assert composite_score(0.77, 0.1, 0.2, CompositeWeights(1, 0, 0)) == pytest.approx(0.77)
        assert composite_score(0.1, 0.2, 0.55, CompositeWeights(0, 0, 1)) == pytest.approx(0.55)

    def test_invalid_weights(self):
        with pytest.raises(NegativeWeight):
            CompositeWeights(-0.1, 0.5, 0.6)
        with pytest.raises(NegativeWeight):
            CompositeWeights(math.nan, 0.5, 0.5)


class TestAlignment:
    def tree(self, entities, relations=(), features=None):
        feats = {"style": "photo", "lighting": "soft"}
        feats.update(features or {})
        return ImageUnderstandingTree(
            "d", feats,
            objects=tuple(Entity(n, EntityKind.OTHER) for n in entities),
            relationships=tuple(Relation(*r) for r in relations),
        )

    def test_identity_is_one(self):
        rng = random.Random(17)
        for _ in range(100):
            tree = random_tree(rng)
            assert iut_alignment(tree, tree) == 1.0

    def test_symmetry(self):
        rng = random.Random(19)
        for _ in range(200):
            a = random_tree(rng)
            b = mutate_tree(rng, a)
            assert iut_alignment(a, b) == pytest.approx(iut_alignment(b, a), abs=1e-12)

    def test_disjoint_entities_and_features(self):
        a = self.tree(["cat"], features={"style": "photo", "lighting": "soft"})
        b = ImageUnderstandingTree("d", {"style": "ink", "lighting": "hard"}, objects=(Entity("dog"),))
        assert iut_alignment(a, b) == pytest.approx(1 / 3)  # only empty-vs-empty relations match

    def test_hand_computed_f1(self):
        # entities: {cat, mat} vs {cat, dog, mat} -> F1 = 2*2/(2+3) = 0.8
        # relations: {(cat,on,mat)} vs {} -> 0; features identical -> 1
        a = self.tree(["cat", "mat"], [("cat", "on", "mat")])
        b = self.tree(["cat", "dog", "mat"])
        assert iut_alignment(a, b) == pytest.approx((0.8 + 0.0 + 1.0) / 3)

    def test_normalization_insensitive(self):
        a = self.tree(["Red Cat"])
        b = self.tree(["red   cat"])
        assert iut_alignment(a, b) == 1.0


class TestAgreement:
    def test_brute_force_oracle(self):
        rng = random.Random(23)
        for _ in range(1000):
            n = rng.randint(1, 20)
            preds = [rng.random() < 0.5 for _ in range(n)]
            labels = [rng.randint(0, 1) for _ in range(n)]
            expected = 100.0 * sum(1 for p, y in zip(preds, labels) if p == bool(y)) / n
            assert agreement_rate(preds, labels) == pytest.approx(expected, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            agreement_rate([True], [1, 0])
        with pytest.raises(ValueError):
            agreement_rate([], [])

    def test_criterion_accuracy(self):
        sample = LabeledSample("Is it red?", (), 1)
        assert criterion_accuracy(scored("Is it red?", 0.9), sample) == 1
        assert criterion_accuracy(scored("Is it red?", 0.2), sample) == 0


class TestLabeledSamples:
    def test_load_jsonl(self, tmp_path):
        path = tmp_path / "labels.jsonl"
        rows = [
            {"criterion": "Is A?", "images": ["x"], "label": 1, "grades": {"Text Quality": 4.0}},
            {"criterion": "Is B?", "label": 0},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n\n", "utf-8")
        samples = load_labeled_samples(path)
        assert len(samples) == 2
        assert samples[0].grades == {"Text Quality": 4.0}
        assert samples[1].image_ids == ()

    def test_invalid_rows(self):
        with pytest.raises(ValueError):
            LabeledSample("Is A?", (), 2)
        with pytest.raises(ValueError):
            LabeledSample("Is A?", (), 1, grades={"Vibes": 3.0})


class TestJudgeEndToEnd:
    def test_cat_mat_triplet_values(self, store):
        backend = MockBackend(store=store)
        image = backend.seed_image("cat-mat-photo")
        criteria = generate_criteria(CAT_MAT_INSTRUCTION, image, "r", backend)
        scored_items = []
        for criterion in criteria:
            dim = classify_dimension(criterion, backend)
            scored_items.append(judge(Criterion(criterion.text, dim), image, None, backend))
        triplet = score_triplet(scored_items)
        assert triplet.style == pytest.approx(softmax_pair(1.0, 0.0).p_yes)
        assert triplet.logic == pytest.approx(softmax_pair(0.5, 0.0).p_yes)
        assert triplet.entity == pytest.approx(softmax_pair(2.0, 0.0).p_yes)
        assert triplet.counts == {"style": 1, "logic": 1, "entity": 1}
