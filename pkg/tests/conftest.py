import random
from pathlib import Path

import pytest

from iutkit.artifacts import ArtifactStore
from iutkit.model import Entity, EntityKind, ImageUnderstandingTree, Relation, SymbolicState
from iutkit.session import mock_runtime

ADJECTIVES = ["red", "old", "small", "shiny", "tall", "quiet", "blue", "wooden"]
NOUNS = ["cat", "mat", "tree", "lamp", "robot", "girl", "cloud", "river", "stone", "bird", "chair", "boat"]
PREDICATES = ["on", "under", "beside", "holding", "near", "watching", "facing"]
ATTR_KEYS = ["color", "state", "material", "mood", "size"]
VALUES = ["red", "sleeping", "wood", "calm", "large", "wet", "bright", "soft"]
STYLES = ["photorealistic", "watercolor", "cartoon", "oil painting"]
LIGHTS = ["soft natural light", "harsh noon sun", "candlelight"]
KINDS = list(EntityKind)


def random_tree(rng: random.Random, max_entities: int = 6) -> ImageUnderstandingTree:
    """Valid tree with unique entity nouns; relation endpoints are entity names."""
    nouns = rng.sample(NOUNS, rng.randint(0, max_entities))
    entities = []
    for noun in nouns:
        name = noun if rng.random() < 0.5 else f"{rng.choice(ADJECTIVES)} {noun}"
        attrs = {k: rng.choice(VALUES) for k in rng.sample(ATTR_KEYS, rng.randint(0, 3))}
        entities.append(Entity(name, rng.choice(KINDS), attrs))
    relations = []
    if len(entities) >= 2:
        for _ in range(rng.randint(0, 4)):
            a, b = rng.sample(entities, 2)
            relations.append(Relation(a.name, rng.choice(PREDICATES), b.name))
    features = {"style": rng.choice(STYLES), "lighting": rng.choice(LIGHTS)}
    if rng.random() < 0.4:
        features["mood"] = rng.choice(VALUES)
    return ImageUnderstandingTree(
        global_description=f"a scene with {len(entities)} things",
        global_features=features,
        objects=tuple(entities),
        relationships=tuple(relations),
    )


def mutate_tree(rng: random.Random, tree: ImageUnderstandingTree) -> ImageUnderstandingTree:
    """Random structural edit of a valid tree, staying valid."""
    entities = list(tree.objects)
    relations = list(tree.relationships)
    features = dict(tree.global_features)
    description = tree.global_description

    for _ in range(rng.randint(1, 5)):
        op = rng.randint(0, 7)
        if op == 0 and entities:  # change an attribute
            i = rng.randrange(len(entities))
            attrs = dict(entities[i].attributes)
            attrs[rng.choice(ATTR_KEYS)] = rng.choice(VALUES)
            entities[i] = Entity(entities[i].name, entities[i].kind, attrs)
        elif op == 1 and entities:  # drop an entity and its relations
            victim = entities.pop(rng.randrange(len(entities)))
            relations = [r for r in relations if victim.name not in (r.subject, r.object)]
        elif op == 2:  # add an entity with an unused noun
            used = {e.name.split()[-1] for e in entities}
            free = [n for n in NOUNS if n not in used]
            if free:
                entities.append(Entity(rng.choice(free), rng.choice(KINDS), {}))
        elif op == 3 and len(entities) >= 2:  # add a relation
            a, b = rng.sample(entities, 2)
            relations.append(Relation(a.name, rng.choice(PREDICATES), b.name))
        elif op == 4 and relations:  # drop a relation
            relations.pop(rng.randrange(len(relations)))
        elif op == 5:  # global features
            if rng.random() < 0.5 or "mood" not in features:
                features["mood"] = rng.choice(VALUES)
            else:
                del features["mood"]
        elif op == 6 and len(entities) >= 2:  # reorder
            rng.shuffle(entities)
        elif op == 7:
            description = f"a scene described at step {rng.randint(0, 999)}"
    return ImageUnderstandingTree(description, features, tuple(entities), tuple(relations))


def random_state(rng: random.Random, **kw) -> SymbolicState:
    return SymbolicState(random_tree(rng, **kw))


@pytest.fixture
def store(tmp_path: Path) -> ArtifactStore:
    return ArtifactStore(tmp_path / "artifacts")


@pytest.fixture
def runtime(store):
    return mock_runtime(store)
