"""Image Understanding Tree: types, parsing, validation, canonical serialization.

The interchange format is UTF-8 JSON with the field names
``global_description`` / ``global_features`` / ``objects`` / ``relationships``.
Objects carry ``name`` and ``type`` plus their attributes inline; relationships
are plain strings ("subject predicate object") that we parse into structured
triples against the object list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import MalformedDocument, SchemaViolation

REQUIRED_FEATURES = ("style", "lighting")

_ATTR_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def normalize_name(name: str) -> str:
    """Whitespace-normalized, case-folded form used for entity identity."""
    return " ".join(name.split()).casefold()


def normalize_attr_key(key: str) -> str:
    """Coerce an attribute key toward lowercase snake_case."""
    key = re.sub(r"[^0-9a-zA-Z]+", "_", key.strip()).strip("_").lower()
    return key


class EntityKind(str, Enum):
    PERSON = "person"
    OBJECT = "object"
    ANIMAL = "animal"
    SCENERY = "scenery"
    OTHER = "other"

    @classmethod
    def coerce(cls, value: str) -> "EntityKind":
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True)
class Entity:
    name: str
    kind: EntityKind = EntityKind.OTHER
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise SchemaViolation("entity name must be non-empty")


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str
    # Cached original rendering; excluded from equality because it is
    # derivable from the triple up to whitespace.
    surface_form: str | None = field(default=None, compare=False)

    def render(self) -> str:
        if self.surface_form is not None:
            return self.surface_form
        return " ".join(p for p in (self.subject, self.predicate, self.object) if p)


@dataclass(frozen=True)
class ImageUnderstandingTree:
    global_description: str
    global_features: dict[str, str]
    objects: tuple[Entity, ...] = ()
    relationships: tuple[Relation, ...] = ()
    schema_version: int = 1
    extras: dict[str, Any] = field(default_factory=dict)

    def entity_names(self) -> list[str]:
        return [e.name for e in self.objects]

    def find_entity(self, name: str) -> Entity | None:
        wanted = normalize_name(name)
        for e in self.objects:
            if normalize_name(e.name) == wanted:
                return e
        return None


@dataclass(frozen=True)
class Provenance:
    origin: str  # "extracted" | "updated"
    source_turn_id: str | None = None


@dataclass(frozen=True)
class SymbolicState:
    tree: ImageUnderstandingTree
    turn_index: int = 0
    provenance: Provenance = field(default=Provenance("extracted"), compare=False)

    def __post_init__(self) -> None:
        if self.turn_index < 0:
            raise SchemaViolation("turn_index must be >= 0")


# --- validation ----------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Issue, ...] = ()
    warnings: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def resolve_endpoint(name: str, entities: list[str]) -> str | None:
    """Resolve a relation endpoint against entity names.

    Resolution succeeds on exact normalized equality, or when the endpoint is
    the leading or trailing word sequence of exactly one entity name.
    Returns the matched entity name, or None.
    """
    wanted = normalize_name(name)
    if not wanted:
        return None
    norm = [(e, normalize_name(e).split()) for e in entities]
    words = wanted.split()
    exact = [e for e, toks in norm if " ".join(toks) == wanted]
    if exact:
        return exact[0]
    prefix = [e for e, toks in norm if toks[: len(words)] == words]
    if len(prefix) == 1:
        return prefix[0]
    suffix = [e for e, toks in norm if toks[-len(words):] == words and len(toks) >= len(words)]
    if len(suffix) == 1:
        return suffix[0]
    return None


def validate_iut(tree: ImageUnderstandingTree) -> ValidationReport:
    errors: list[Issue] = []
    warnings: list[Issue] = []

    for key in REQUIRED_FEATURES:
        value = tree.global_features.get(key, "")
        if not str(value).strip():
            errors.append(Issue("MissingRequiredFeature", f"global_features.{key} missing or empty"))

    seen: set[str] = set()
    for entity in tree.objects:
        n = normalize_name(entity.name)
        if n in seen:
            errors.append(Issue("DuplicateEntityName", f"duplicate entity name: {entity.name!r}"))
        seen.add(n)
        for key in entity.attributes:
            if not _ATTR_NAME_RE.match(key):
                errors.append(Issue("BadAttributeName", f"{entity.name!r}: attribute {key!r} is not lowercase snake_case"))

    names = [e.name for e in tree.objects]
    for rel in tree.relationships:
        if not rel.subject.strip() or not rel.object.strip():
            errors.append(Issue("EmptyRelationEndpoint", f"relation {rel.render()!r} has an empty endpoint"))
            continue
        for endpoint in (rel.subject, rel.object):
            if resolve_endpoint(endpoint, names) is None:
                warnings.append(Issue("UnresolvedRelationEndpoint", f"{endpoint!r} in relation {rel.render()!r} matches no entity"))
        if rel.surface_form is not None:
            derived = " ".join(f"{rel.subject} {rel.predicate} {rel.object}".split())
            if " ".join(rel.surface_form.split()) != derived:
                warnings.append(Issue("SurfaceFormMismatch", f"surface form {rel.surface_form!r} does not spell out its triple"))

    return ValidationReport(tuple(errors), tuple(warnings))


# --- relation string parsing --------------------------------------------


def _resolves(tokens: list[str], entities: list[str]) -> bool:
    return bool(tokens) and resolve_endpoint(" ".join(tokens), entities) is not None


def parse_relation(text: str, entities: list[str]) -> Relation:
    """Parse "subject predicate object" using longest entity match from each end.

    Falls back to single first/last token when no entity name matches. The
    original string is kept as surface_form so serialization is lossless.
    """
    tokens = text.split()
    if not tokens:
        raise SchemaViolation("relation string is empty")
    if len(tokens) == 1:
        return Relation(tokens[0], "", tokens[0], surface_form=text)

    subj_len = 1
    for n in range(len(tokens) - 1, 0, -1):
        if _resolves(tokens[:n], entities):
            subj_len = n
            break
    obj_len = 1
    for n in range(len(tokens) - subj_len, 0, -1):
        if _resolves(tokens[-n:], entities):
            obj_len = n
            break
    subject = " ".join(tokens[:subj_len])
    obj = " ".join(tokens[-obj_len:])
    predicate = " ".join(tokens[subj_len:len(tokens) - obj_len])
    return Relation(subject, predicate, obj, surface_form=text)


# --- parse / canonicalize ------------------------------------------------

_STRUCTURAL_KEYS = {"global_description", "global_features", "objects", "relationships", "schema_version"}


def parse_iut(text: str) -> ImageUnderstandingTree:
    """Parse a canonical-or-loose interchange document into a tree."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level value must be an object")
    if "global_description" not in doc:
        raise SchemaViolation("missing required field: global_description")
    if "global_features" not in doc or not isinstance(doc["global_features"], dict):
        raise SchemaViolation("missing required field: global_features")

    features = {str(k): str(v) for k, v in doc["global_features"].items()}

    objects: list[Entity] = []
    for raw in doc.get("objects", []) or []:
        if not isinstance(raw, dict) or "name" not in raw:
            raise SchemaViolation(f"object entry must carry a name: {raw!r}")
        attrs: dict[str, str] = {}
        for key, value in raw.items():
            if key in ("name", "type"):
                continue
            norm = normalize_attr_key(str(key))
            if not _ATTR_NAME_RE.match(norm):
                raise SchemaViolation(f"attribute key {key!r} cannot be normalized to snake_case")
            attrs[norm] = str(value)
        objects.append(Entity(str(raw["name"]), EntityKind.coerce(raw.get("type", "other")), attrs))

    names = [e.name for e in objects]
    relationships: list[Relation] = []
    for raw in doc.get("relationships", []) or []:
        if not str(raw).strip():
            continue
        relationships.append(parse_relation(str(raw), names))

    version = doc.get("schema_version", 1)
    if not isinstance(version, int) or version < 1:
        raise SchemaViolation(f"schema_version must be a positive integer, got {version!r}")

    extras = {k: v for k, v in doc.items() if k not in _STRUCTURAL_KEYS}
    return ImageUnderstandingTree(
        global_description=str(doc["global_description"]),
        global_features=features,
        objects=tuple(objects),
        relationships=tuple(relationships),
        schema_version=version,
        extras=extras,
    )


def tree_to_document(tree: ImageUnderstandingTree) -> dict[str, Any]:
    doc: dict[str, Any] = dict(tree.extras)
    doc["global_description"] = tree.global_description
    doc["global_features"] = dict(tree.global_features)
    doc["objects"] = [{"name": e.name, "type": e.kind.value, **e.attributes} for e in tree.objects]
    doc["relationships"] = [r.render() for r in tree.relationships]
    if tree.schema_version != 1:
        doc["schema_version"] = tree.schema_version
    return doc


def canonicalize(tree: ImageUnderstandingTree) -> str:
    """Byte-stable serialization: sorted keys, compact separators, UTF-8.

    Arrays keep stored order. Raises SchemaViolation when the tree has hard
    validation errors.
    """
    report = validate_iut(tree)
    if not report.ok:
        raise SchemaViolation("; ".join(i.message for i in report.errors))
    return json.dumps(tree_to_document(tree), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def minimal_tree(description: str = "an empty scene") -> ImageUnderstandingTree:
    """Smallest valid tree; used as the default extraction fixture."""
    return ImageUnderstandingTree(
        global_description=description,
        global_features={"style": "photorealistic", "lighting": "natural light"},
    )


def with_tree(state: SymbolicState, tree: ImageUnderstandingTree, *, advance: bool, source_turn_id: str | None = None) -> SymbolicState:
    """Produce the successor state holding ``tree``."""
    return replace(
        state,
        tree=tree,
        turn_index=state.turn_index + (1 if advance else 0),
        provenance=Provenance("updated", source_turn_id),
    )
