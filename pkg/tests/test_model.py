import json
import random
from importlib import resources

import pytest

from iutkit.errors import MalformedDocument, SchemaViolation
from iutkit.model import (
    Entity,
    EntityKind,
    ImageUnderstandingTree,
    Relation,
    canonicalize,
    minimal_tree,
    normalize_name,
    parse_iut,
    parse_relation,
    resolve_endpoint,
    validate_iut,
)

from conftest import random_tree


def fixture_text(name: str) -> str:
    return resources.files("iutkit.data").joinpath(name).read_text("utf-8")


class TestParse:
    def test_graduation_document(self):
        tree = parse_iut(fixture_text("graduation.json"))
        names = tree.entity_names()
        assert "woman wearing glasses" in names
        assert "graduate in cap and gown" in names
        surfaces = [r.render() for r in tree.relationships]
        assert "woman standing next to graduate" in surfaces

    def test_minimal_document(self):
        tree = parse_iut(json.dumps({
            "global_description": "d",
            "global_features": {"style": "s", "lighting": "l"},
        }))
        assert tree.objects == ()
        assert tree.relationships == ()

    def test_scrambled_key_order_equal(self):
        doc = json.loads(fixture_text("flowers.json"))
        scrambled = json.dumps(dict(reversed(list(doc.items()))))
        assert parse_iut(scrambled) == parse_iut(json.dumps(doc))

    def test_syntax_error(self):
        with pytest.raises(MalformedDocument):
            parse_iut("{not json")

    def test_missing_required_field(self):
        with pytest.raises(SchemaViolation):
            parse_iut(json.dumps({"global_features": {}}))

    def test_unknown_top_level_keys_preserved(self):
        doc = json.loads(fixture_text("flowers.json"))
        doc["camera"] = {"fov": 35}
        tree = parse_iut(json.dumps(doc))
        assert tree.extras == {"camera": {"fov": 35}}
        assert parse_iut(canonicalize(tree)) == tree

    def test_attribute_keys_normalized(self):
        tree = parse_iut(json.dumps({
            "global_description": "d",
            "global_features": {"style": "s", "lighting": "l"},
            "objects": [{"name": "cat", "type": "animal", "Fur Color": "gray"}],
        }))
        assert tree.objects[0].attributes == {"fur_color": "gray"}


class TestCanonicalize:
    def test_repeat_is_byte_stable(self):
        tree = parse_iut(fixture_text("flowers.json"))
        assert canonicalize(tree) == canonicalize(tree)

    def test_scrambled_duplicates_identical_bytes(self):
        doc = json.loads(fixture_text("graduation.json"))
        scrambled = json.dumps(dict(reversed(list(doc.items()))))
        assert canonicalize(parse_iut(scrambled)) == canonicalize(parse_iut(json.dumps(doc)))

    def test_round_trip_identity(self):
        tree = parse_iut(fixture_text("graduation.json"))
        assert parse_iut(canonicalize(tree)) == tree

    def test_invalid_tree_rejected(self):
        bad = ImageUnderstandingTree("d", {"style": "s"})  # no lighting
        with pytest.raises(SchemaViolation):
            canonicalize(bad)

    def test_random_trees_round_trip(self):
        rng = random.Random(7)
        for _ in range(200):
            tree = random_tree(rng)
            text = canonicalize(tree)
            again = parse_iut(text)
            assert again == tree
            assert canonicalize(again) == text


class TestValidate:
    def test_graduation_clean(self):
        report = validate_iut(parse_iut(fixture_text("graduation.json")))
        assert report.errors == ()
        assert report.warnings == ()

    def test_missing_style_feature(self):
        tree = ImageUnderstandingTree("d", {"lighting": "l"})
        report = validate_iut(tree)
        assert [i.code for i in report.errors] == ["MissingRequiredFeature"]
        assert "style" in report.errors[0].message

    def test_unresolved_relation_endpoint_warns(self):
        tree = ImageUnderstandingTree(
            "d", {"style": "s", "lighting": "l"},
            objects=(Entity("cat", EntityKind.ANIMAL),),
            relationships=(Relation("dog", "chasing", "cat"),),
        )
        report = validate_iut(tree)
        assert report.errors == ()
        assert [i.code for i in report.warnings] == ["UnresolvedRelationEndpoint"]

    def test_duplicate_entity_names(self):
        tree = ImageUnderstandingTree(
            "d", {"style": "s", "lighting": "l"},
            objects=(Entity("Cat"), Entity("  cat ")),
        )
        assert any(i.code == "DuplicateEntityName" for i in validate_iut(tree).errors)


class TestRelationParsing:
    NAMES = ["woman wearing glasses", "graduate in cap and gown", "man"]

    def test_prefix_and_best_effort(self):
        rel = parse_relation("woman standing next to graduate", self.NAMES)
        assert rel.subject == "woman"
        assert rel.predicate == "standing next to"
        assert rel.object == "graduate"
        assert rel.surface_form == "woman standing next to graduate"

    def test_exact_entity_names(self):
        rel = parse_relation("cat sitting on cat tower", ["cat", "cat tower"])
        assert (rel.subject, rel.predicate, rel.object) == ("cat", "sitting on", "cat tower")

    def test_resolve_endpoint(self):
        assert resolve_endpoint("woman", self.NAMES) == "woman wearing glasses"
        assert resolve_endpoint("graduate", self.NAMES) == "graduate in cap and gown"
        assert resolve_endpoint("man", self.NAMES) == "man"
        assert resolve_endpoint("flowers", ["colorful flowers"]) == "colorful flowers"
        assert resolve_endpoint("garden", self.NAMES) is None

    def test_normalize_name(self):
        assert normalize_name("  Red   CAT ") == "red cat"


def test_minimal_tree_is_valid():
    assert validate_iut(minimal_tree()).ok
