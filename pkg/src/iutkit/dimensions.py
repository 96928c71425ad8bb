"""Rule-based dimension classification fallback.

The rule table is versioned data (data/dimension_rules.json), not code.
Rules fire in order style -> entity -> logic; a question no rule matches
stays "unassigned".
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

UNASSIGNED = "unassigned"


@lru_cache(maxsize=1)
def load_rules() -> dict:
    text = resources.files("iutkit.data").joinpath("dimension_rules.json").read_text("utf-8")
    return json.loads(text)


def _has_word(text: str, word: str) -> bool:
    return re.search(rf"(?<![a-z0-9]){re.escape(word)}(?![a-z0-9])", text) is not None


def classify_by_rules(criterion: str) -> str:
    """Classify a criterion question into style/logic/entity, or unassigned."""
    rules = load_rules()
    text = criterion.casefold()
    words = re.findall(r"[a-z]+", text)

    for word in rules["style"]["keywords"]:
        if _has_word(text, word):
            return "style"

    entity = rules["entity"]
    if any(_has_word(text, w) for w in entity["keywords"]):
        return "entity"
    # Color adjective applied to a named thing ("Is the mat red?").
    if any(_has_word(text, c) for c in entity["colors"]):
        return "entity"

    logic = rules["logic"]
    if any(_has_word(text, w) for w in logic["keywords"]):
        return "logic"
    if logic.get("ing_verb_rule"):
        exceptions = set(logic.get("ing_exceptions", []))
        if any(w.endswith("ing") and len(w) > 4 and w not in exceptions for w in words):
            return "logic"

    return UNASSIGNED
