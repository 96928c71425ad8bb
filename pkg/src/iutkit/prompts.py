"""Text-to-image prompt construction and model-output parsing.

The instruction templates live in versioned fixture files
(templates/with_iut.txt, templates/without_iut.txt) so wording drift is
diffable. Parsing is deliberately forgiving: models disobey their
instructions, so the splitter truncates instead of failing.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

log = logging.getLogger(__name__)

from .errors import EmptyResponse, SchemaViolation
from .model import SymbolicState, canonicalize

WITH_IUT = "with_iut"
WITHOUT_IUT = "without_iut"
MAX_PROMPTS_WITH_IUT = 2

IMAGE_TAG = "<image>"


@dataclass(frozen=True)
class PromptBundle:
    mode: str
    prompts: tuple[str, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("iutkit.templates").joinpath(f"{name}.txt").read_text("utf-8")


def build_with_iut_request(question: str, state: SymbolicState, answer: str) -> str:
    """Full synthesizer instruction: template + sections carrying the state."""
    tree_text = canonicalize(state.tree)  # raises SchemaViolation on invalid state
    if not answer.strip():
        log.warning("build_with_iut_request: EmptyAnswer")
    parts = [
        _template(WITH_IUT).rstrip("\n"),
        "",
        "###Question:",
        question,
        "###Description of image",
        tree_text,
        "###Answer:",
        answer,
    ]
    return "\n".join(parts)


def build_without_iut_request(answer: str) -> str:
    if not answer.strip():
        log.warning("build_without_iut_request: EmptyAnswer")
    return "\n".join([_template(WITHOUT_IUT).rstrip("\n"), "", answer])


def split_image_prompts(response: str, mode: str = WITHOUT_IUT) -> PromptBundle:
    """Split a synthesizer response on literal <image> separators.

    Total: any input yields a bundle or raises EmptyResponse; with_iut mode
    truncates to 2 prompts.
    """
    warnings: list[str] = []
    if IMAGE_TAG not in response:
        warnings.append("MissingImageTag")
        prompts = [response.strip()] if response.strip() else []
    else:
        prompts = [part.strip() for part in response.split(IMAGE_TAG)]
        prompts = [p for p in prompts if p]
    if not prompts:
        raise EmptyResponse("no non-empty prompt recoverable from response")
    if mode == WITH_IUT and len(prompts) > MAX_PROMPTS_WITH_IUT:
        warnings.append("TooManyPrompts")
        prompts = prompts[:MAX_PROMPTS_WITH_IUT]
    return PromptBundle(mode, tuple(prompts), tuple(warnings))


# Accept both angle-bracket and parenthesis tag variants; non-greedy pairing.
_PAIR_RE = re.compile(r"<image>(.*?)</image>|\(image\)(.*?)\(/image\)", re.DOTALL)
_OPEN_RE = re.compile(r"<image>|\(image\)")


def extract_tagged_segments(answer: str) -> list[str]:
    """Return inner texts of image-tag pairs, in order.

    An unpaired opening tag captures to end-of-text (logged as a warning).
    """
    segments: list[str] = []
    pos = 0
    for match in _PAIR_RE.finditer(answer):
        inner = match.group(1) if match.group(1) is not None else match.group(2)
        segments.append(inner.strip())
        pos = match.end()
    trailing = _OPEN_RE.search(answer, pos)
    if trailing:
        log.warning("extract_tagged_segments: unpaired opening tag")
        tail = answer[trailing.end():].strip()
        if tail:
            segments.append(tail)
    return segments
