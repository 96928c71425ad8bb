"""Session state lifecycle: extraction, backend-driven updates, rule fallback.

Updates are transactional: any failure leaves the caller holding the input
state unchanged. A successful update advances turn_index by exactly one, and
with a deterministic updater the result is a pure function of
(instruction, state) regardless of session history.
"""

from __future__ import annotations

import logging
import re
from importlib import resources

from .artifacts import ImageRef
from .edits import EditScript, SetAttribute, apply_edits, parse_edit_script
from .errors import ExtractionFailed, IutError, MalformedDocument, SchemaViolation
from .gateway import Backend
from .model import (
    SymbolicState,
    canonicalize,
    parse_iut,
    resolve_endpoint,
    validate_iut,
)

log = logging.getLogger(__name__)

EXTRACTION_PROMPT = (
    "Describe this image as a JSON scene document with keys global_description, "
    "global_features (including style and lighting), objects (name, type, attributes), "
    "and relationships (subject predicate object strings). Output only the JSON."
)


def _update_template() -> str:
    return resources.files("iutkit.templates").joinpath("state_update.txt").read_text("utf-8")


def build_update_prompt(instruction: str, state: SymbolicState) -> str:
    return _update_template().format(state=canonicalize(state.tree), instruction=instruction)


def init_state(image: ImageRef, extractor: Backend) -> SymbolicState:
    """Extract, parse, and validate the turn-0 state from the first image."""
    try:
        raw = extractor.extract_iut(image, EXTRACTION_PROMPT)
        tree = parse_iut(raw)
    except (IutError, MalformedDocument, SchemaViolation) as exc:
        raise ExtractionFailed(f"state extraction failed: {exc}") from exc
    report = validate_iut(tree)
    if not report.ok:
        raise ExtractionFailed("extracted tree is invalid: " + "; ".join(i.message for i in report.errors))
    return SymbolicState(tree=tree, turn_index=0)


def update_state(
    instruction: str,
    state: SymbolicState,
    updater: Backend,
    *,
    source_turn_id: str | None = None,
) -> tuple[SymbolicState, EditScript]:
    """Ask the updater backend for an edit list and apply it transactionally.

    An empty instruction short-circuits: the input state is returned as-is
    with an empty script and no turn_index change.
    """
    if not instruction.strip():
        return state, EditScript()
    prompt = build_update_prompt(instruction, state)
    response = updater.chat_complete("You are a scene state maintainer.", prompt)
    script = parse_edit_script(response)
    new_state = apply_edits(state, script, source_turn_id=source_turn_id)
    return new_state, script


_MAKE_RE = re.compile(r"^\s*make\s+(?:the\s+)?(.+)$", re.IGNORECASE)


def rule_based_update(instruction: str, state: SymbolicState) -> EditScript:
    """Deterministic offline fallback: "make <entity> <verb-phrase>" sets state.

    Greedily takes the longest leading word sequence that resolves to a known
    entity; the remainder becomes the entity's "state" attribute. Returns an
    empty script when nothing matches.
    """
    m = _MAKE_RE.match(instruction)
    if not m:
        log.warning("rule_based_update: instruction did not match any rule: %r", instruction)
        return EditScript()
    tokens = m.group(1).split()
    names = [e.name for e in state.tree.objects]
    for n in range(len(tokens) - 1, 0, -1):
        candidate = " ".join(tokens[:n])
        resolved = resolve_endpoint(candidate, names)
        if resolved is not None:
            verb_phrase = " ".join(tokens[n:])
            return EditScript((SetAttribute(resolved, "state", verb_phrase),))
    log.warning("rule_based_update: no known entity in %r", instruction)
    return EditScript()
