"""Edit scripts over symbolic states: diff, apply, and the line format.

Scripts are ordered and order-sensitive. apply_edits is transactional at the
call level: it either returns a fresh successor state or raises, leaving the
input untouched (all types are immutable values).

Line interchange format, one edit per line, verb first:

    SET <entity>.<attr> = <value>
    ADD ENTITY <name> TYPE <kind>
    DEL ENTITY <name>
    ADD REL <subject> | <predicate> | <object>
    DEL REL <subject> | <predicate> | <object>
    SET GLOBAL <key> = <value>
    DEL ATTR <entity>.<attr>
    DEL GLOBAL <key>
    SET DESC = <value>

The last three verbs are extensions needed so that diff_states can express
any valid state transition (feature/attribute removal, description change).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

from .errors import ConflictingEdit, DanglingEdit, MalformedDocument
from .model import (
    Entity,
    EntityKind,
    ImageUnderstandingTree,
    Relation,
    SymbolicState,
    normalize_name,
    with_tree,
)


@dataclass(frozen=True)
class AddEntity:
    entity: Entity


@dataclass(frozen=True)
class RemoveEntity:
    name: str


@dataclass(frozen=True)
class SetAttribute:
    name: str
    key: str
    value: str


@dataclass(frozen=True)
class RemoveAttribute:
    name: str
    key: str


@dataclass(frozen=True)
class AddRelation:
    relation: Relation


@dataclass(frozen=True)
class RemoveRelation:
    relation: Relation


@dataclass(frozen=True)
class SetGlobalFeature:
    key: str
    value: str


@dataclass(frozen=True)
class RemoveGlobalFeature:
    key: str


@dataclass(frozen=True)
class SetDescription:
    value: str


Edit = Union[
    AddEntity,
    RemoveEntity,
    SetAttribute,
    RemoveAttribute,
    AddRelation,
    RemoveRelation,
    SetGlobalFeature,
    RemoveGlobalFeature,
    SetDescription,
]


@dataclass(frozen=True)
class EditScript:
    edits: tuple[Edit, ...] = ()

    def __len__(self) -> int:
        return len(self.edits)

    def __iter__(self):
        return iter(self.edits)

    def __bool__(self) -> bool:
        return bool(self.edits)


# --- apply ---------------------------------------------------------------


def _entity_index(objects: list[Entity], name: str) -> int:
    wanted = normalize_name(name)
    for i, e in enumerate(objects):
        if normalize_name(e.name) == wanted:
            return i
    return -1


def _rel_key(r: Relation) -> tuple[str, str, str]:
    return (normalize_name(r.subject), " ".join(r.predicate.split()).casefold(), normalize_name(r.object))


def apply_edits_to_tree(tree: ImageUnderstandingTree, script: EditScript) -> ImageUnderstandingTree:
    objects = list(tree.objects)
    relationships = list(tree.relationships)
    features = dict(tree.global_features)
    description = tree.global_description

    for edit in script:
        if isinstance(edit, AddEntity):
            if _entity_index(objects, edit.entity.name) >= 0:
                raise ConflictingEdit(f"entity already exists: {edit.entity.name!r}")
            objects.append(edit.entity)
        elif isinstance(edit, RemoveEntity):
            i = _entity_index(objects, edit.name)
            if i < 0:
                raise DanglingEdit(f"cannot remove missing entity {edit.name!r}")
            del objects[i]
        elif isinstance(edit, SetAttribute):
            i = _entity_index(objects, edit.name)
            if i < 0:
                raise DanglingEdit(f"cannot set attribute on missing entity {edit.name!r}")
            attrs = dict(objects[i].attributes)
            attrs[edit.key] = edit.value
            objects[i] = replace(objects[i], attributes=attrs)
        elif isinstance(edit, RemoveAttribute):
            i = _entity_index(objects, edit.name)
            if i < 0 or edit.key not in objects[i].attributes:
                raise DanglingEdit(f"cannot remove attribute {edit.name!r}.{edit.key}")
            attrs = dict(objects[i].attributes)
            del attrs[edit.key]
            objects[i] = replace(objects[i], attributes=attrs)
        elif isinstance(edit, AddRelation):
            relationships.append(edit.relation)
        elif isinstance(edit, RemoveRelation):
            key = _rel_key(edit.relation)
            for i, rel in enumerate(relationships):
                if _rel_key(rel) == key:
                    del relationships[i]
                    break
            else:
                raise DanglingEdit(f"cannot remove missing relation {edit.relation.render()!r}")
        elif isinstance(edit, SetGlobalFeature):
            features[edit.key] = edit.value
        elif isinstance(edit, RemoveGlobalFeature):
            if edit.key not in features:
                raise DanglingEdit(f"cannot remove missing global feature {edit.key!r}")
            del features[edit.key]
        elif isinstance(edit, SetDescription):
            description = edit.value
        else:  # pragma: no cover - exhaustive over Edit
            raise TypeError(f"unknown edit: {edit!r}")

    return replace(
        tree,
        global_description=description,
        global_features=features,
        objects=tuple(objects),
        relationships=tuple(relationships),
    )


def apply_edits(state: SymbolicState, script: EditScript, *, source_turn_id: str | None = None) -> SymbolicState:
    """Apply a script, returning a successor with turn_index + 1."""
    tree = apply_edits_to_tree(state.tree, script)
    return with_tree(state, tree, advance=True, source_turn_id=source_turn_id)


# --- diff ----------------------------------------------------------------


def _survivor_prefix_entities(a: ImageUnderstandingTree, b: ImageUnderstandingTree) -> list[str]:
    """Names (normalized) of b's leading entities that can be kept in place.

    AddEntity appends, so only a prefix of b's order that already appears in a
    in the same relative order (with unchanged kind) can survive; everything
    after the first break is removed and re-added.
    """
    a_order = [normalize_name(e.name) for e in a.objects]
    a_kind = {normalize_name(e.name): e.kind for e in a.objects}
    survivors: list[str] = []
    cursor = 0
    for entity in b.objects:
        n = normalize_name(entity.name)
        if n not in a_kind or a_kind[n] != entity.kind:
            break
        try:
            pos = a_order.index(n, cursor)
        except ValueError:
            break
        survivors.append(n)
        cursor = pos + 1
    return survivors


def diff_states(a: SymbolicState, b: SymbolicState) -> EditScript:
    """Script s such that apply_edits(a, s).tree == b.tree (structural)."""
    ta, tb = a.tree, b.tree
    edits: list[Edit] = []

    survivors = set(_survivor_prefix_entities(ta, tb))

    # Relations: keep the longest prefix of b that is an in-order subsequence
    # of a; remove everything else from a, append the rest of b.
    a_rels = list(ta.relationships)
    kept_rel_idx: list[int] = []
    cursor = 0
    b_rel_split = len(tb.relationships)
    for j, rel in enumerate(tb.relationships):
        pos = next((i for i in range(cursor, len(a_rels)) if a_rels[i] == rel), -1)
        if pos < 0:
            b_rel_split = j
            break
        kept_rel_idx.append(pos)
        cursor = pos + 1
    kept = set(kept_rel_idx)
    removals = [rel for i, rel in enumerate(a_rels) if i not in kept]
    # apply removes the first occurrence matching a value; with duplicate
    # relations that can differ from the occurrence chosen above, so check
    # by simulation and fall back to a full rebuild of the relation list.
    simulated = list(a_rels)
    for rel in removals:
        key = _rel_key(rel)
        simulated.remove(next(r for r in simulated if _rel_key(r) == key))
    simulated.extend(tb.relationships[b_rel_split:])
    if simulated != list(tb.relationships):
        removals = list(a_rels)
        b_rel_split = 0
    edits.extend(RemoveRelation(rel) for rel in removals)

    # Entities removed (or re-added to fix order/kind).
    for entity in ta.objects:
        if normalize_name(entity.name) not in survivors:
            edits.append(RemoveEntity(entity.name))
    for entity in tb.objects:
        if normalize_name(entity.name) not in survivors:
            edits.append(AddEntity(entity))

    # Attribute deltas on survivors.
    for entity in tb.objects:
        n = normalize_name(entity.name)
        if n not in survivors:
            continue
        old = next(e for e in ta.objects if normalize_name(e.name) == n)
        for key in old.attributes:
            if key not in entity.attributes:
                edits.append(RemoveAttribute(entity.name, key))
        for key, value in entity.attributes.items():
            if old.attributes.get(key) != value:
                edits.append(SetAttribute(entity.name, key, value))

    for rel in tb.relationships[b_rel_split:]:
        edits.append(AddRelation(rel))

    for key in ta.global_features:
        if key not in tb.global_features:
            edits.append(RemoveGlobalFeature(key))
    for key, value in tb.global_features.items():
        if ta.global_features.get(key) != value:
            edits.append(SetGlobalFeature(key, value))

    if ta.global_description != tb.global_description:
        edits.append(SetDescription(tb.global_description))

    return EditScript(tuple(edits))


# --- line interchange format --------------------------------------------


def format_edit(edit: Edit) -> str:
    if isinstance(edit, SetAttribute):
        return f"SET {edit.name}.{edit.key} = {edit.value}"
    if isinstance(edit, AddEntity):
        line = f"ADD ENTITY {edit.entity.name} TYPE {edit.entity.kind.value}"
        # Attributes of a new entity ride along as SET lines when formatting
        # a whole script; a bare AddEntity line carries none.
        return line
    if isinstance(edit, RemoveEntity):
        return f"DEL ENTITY {edit.name}"
    if isinstance(edit, AddRelation):
        r = edit.relation
        return f"ADD REL {r.subject} | {r.predicate} | {r.object}"
    if isinstance(edit, RemoveRelation):
        r = edit.relation
        return f"DEL REL {r.subject} | {r.predicate} | {r.object}"
    if isinstance(edit, SetGlobalFeature):
        return f"SET GLOBAL {edit.key} = {edit.value}"
    if isinstance(edit, RemoveAttribute):
        return f"DEL ATTR {edit.name}.{edit.key}"
    if isinstance(edit, RemoveGlobalFeature):
        return f"DEL GLOBAL {edit.key}"
    if isinstance(edit, SetDescription):
        return f"SET DESC = {edit.value}"
    raise TypeError(f"unknown edit: {edit!r}")


def format_edit_script(script: EditScript) -> str:
    lines: list[str] = []
    for edit in script:
        lines.append(format_edit(edit))
        if isinstance(edit, AddEntity):
            for key, value in edit.entity.attributes.items():
                lines.append(f"SET {edit.entity.name}.{key} = {value}")
    return "\n".join(lines)


def _split_dotted(target: str, line: str) -> tuple[str, str]:
    if "." not in target:
        raise MalformedDocument(f"expected <entity>.<attr> in line: {line!r}")
    name, key = target.rsplit(".", 1)
    if not name.strip() or not key.strip():
        raise MalformedDocument(f"expected <entity>.<attr> in line: {line!r}")
    return name.strip(), key.strip()


def parse_edit_line(line: str) -> Edit:
    text = line.strip()
    upper = text.upper()
    if upper.startswith("SET GLOBAL "):
        body = text[len("SET GLOBAL "):]
        key, sep, value = body.partition("=")
        if not sep:
            raise MalformedDocument(f"missing '=' in line: {line!r}")
        return SetGlobalFeature(key.strip(), value.strip())
    if upper.startswith("SET DESC"):
        _, sep, value = text.partition("=")
        if not sep:
            raise MalformedDocument(f"missing '=' in line: {line!r}")
        return SetDescription(value.strip())
    if upper.startswith("SET "):
        body = text[len("SET "):]
        target, sep, value = body.partition("=")
        if not sep:
            raise MalformedDocument(f"missing '=' in line: {line!r}")
        name, key = _split_dotted(target.strip(), line)
        return SetAttribute(name, key, value.strip())
    if upper.startswith("ADD ENTITY "):
        body = text[len("ADD ENTITY "):]
        name, marker, kind = body.rpartition(" TYPE ")
        if not marker:
            name, kind = body, "other"
        return AddEntity(Entity(name.strip(), EntityKind.coerce(kind)))
    if upper.startswith("DEL ENTITY "):
        return RemoveEntity(text[len("DEL ENTITY "):].strip())
    if upper.startswith(("ADD REL ", "DEL REL ")):
        parts = [p.strip() for p in text[len("ADD REL "):].split("|")]
        if len(parts) != 3:
            raise MalformedDocument(f"relation line needs 3 '|' fields: {line!r}")
        rel = Relation(parts[0], parts[1], parts[2])
        return AddRelation(rel) if upper.startswith("ADD") else RemoveRelation(rel)
    if upper.startswith("DEL ATTR "):
        name, key = _split_dotted(text[len("DEL ATTR "):].strip(), line)
        return RemoveAttribute(name, key)
    if upper.startswith("DEL GLOBAL "):
        return RemoveGlobalFeature(text[len("DEL GLOBAL "):].strip())
    raise MalformedDocument(f"unrecognized edit line: {line!r}")


def parse_edit_script(text: str) -> EditScript:
    edits = [parse_edit_line(line) for line in text.splitlines() if line.strip()]
    return EditScript(tuple(edits))
