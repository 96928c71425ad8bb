"""Deterministic fixture-driven mock backend.

Every operation is a pure function of (operation, config.model, inputs):
defaults are hash-derived, fixtures are explicit, and there is no RNG.
This is the foundation of all offline acceptance tests.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from importlib import resources

from .artifacts import ArtifactStore, ImageRef
from .dimensions import UNASSIGNED, classify_by_rules
from .errors import BackendProtocolError, EmptyPrompt, TransportError
from .gateway import (
    DIMENSIONS,
    SIMILARITY_KINDS,
    Backend,
    BackendConfig,
    JudgePair,
    softmax_pair,
)

CAT_MAT_INSTRUCTION = "Make the cat sleep on the red mat"
CAT_MAT_CRITERIA = [
    "Is the cat sleeping?",
    "Is the mat red?",
    "Is the cat positioned on the mat?",
]
# One criterion per dimension so the cat/mat turn yields singleton scores.
CAT_MAT_CLASSIFY = {
    "Is the cat sleeping?": "entity",
    "Is the mat red?": "style",
    "Is the cat positioned on the mat?": "logic",
    "Is the overall art style consistent?": "style",
}
CAT_MAT_JUDGE_LOGITS = {
    "Is the cat sleeping?": (2.0, 0.0),
    "Is the mat red?": (1.0, 0.0),
    "Is the cat positioned on the mat?": (0.5, 0.0),
}
CAT_MAT_EDITS = "SET cat.state = sleeping\nADD REL cat | on | mat"

CAT_MAT_DOC = json.dumps(
    {
        "global_description": "A cat beside a red mat on a wooden floor.",
        "global_features": {"style": "photorealistic", "lighting": "soft natural light"},
        "objects": [
            {"name": "cat", "type": "animal", "color": "gray"},
            {"name": "mat", "type": "object", "color": "red"},
        ],
        "relationships": [],
    }
)

MINIMAL_DOC = json.dumps(
    {
        "global_description": "a simple scene",
        "global_features": {"style": "photorealistic", "lighting": "natural light"},
        "objects": [],
        "relationships": [],
    }
)

DEFAULT_CRITERIA = [
    "Is the main subject clearly depicted?",
    "Is the scene consistent with the request?",
    "Is the overall composition coherent?",
]


def _fixture_text(name: str) -> str:
    return resources.files("iutkit.data").joinpath(name).read_text("utf-8")


def _hash(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()
    return int(digest[:15], 16)


def solid_png(rgb: tuple[int, int, int], size: int = 16) -> bytes:
    """Minimal deterministic PNG encoder for a solid-color square."""

    def chunk(kind: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data))

    header = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    row = b"\x00" + bytes(rgb) * size
    body = zlib.compress(row * size, 9)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", body) + chunk(b"IEND", b"")


class MockBackend(Backend):
    def __init__(
        self,
        config: BackendConfig | None = None,
        store: ArtifactStore | None = None,
        *,
        extract_fixtures: dict[str, str] | None = None,
        chat_fixtures: dict[str, str] | None = None,
        update_fixtures: dict[str, str] | None = None,
        criteria_fixtures: dict[str, list[str]] | None = None,
        judge_logits: dict[str, tuple[float, float]] | None = None,
        classify_fixtures: dict[str, str] | None = None,
        fail_ops: set[str] | None = None,
    ):
        super().__init__(config or BackendConfig(), store or ArtifactStore())
        self.extract_fixtures = {
            "grad-photo": _fixture_text("graduation.json"),
            "flowers-photo": _fixture_text("flowers.json"),
            "cat-mat-photo": CAT_MAT_DOC,
            **(extract_fixtures or {}),
        }
        self.chat_fixtures = chat_fixtures or {}
        self.update_fixtures = {CAT_MAT_INSTRUCTION: CAT_MAT_EDITS, **(update_fixtures or {})}
        self.criteria_fixtures = {CAT_MAT_INSTRUCTION: CAT_MAT_CRITERIA, **(criteria_fixtures or {})}
        self.judge_logits = {**CAT_MAT_JUDGE_LOGITS, **(judge_logits or {})}
        self.classify_fixtures = {**CAT_MAT_CLASSIFY, **(classify_fixtures or {})}
        self.fail_ops = fail_ops or set()

    def _maybe_fail(self, op: str) -> None:
        if op in self.fail_ops:
            raise TransportError(f"mock fault injection: {op}")

    def seed_image(self, image_id: str) -> ImageRef:
        """Store a placeholder image under a chosen id (test scaffolding)."""
        h = _hash("seed", image_id)
        rgb = (h & 0xFF, (h >> 8) & 0xFF, (h >> 16) & 0xFF)
        return self.store.put(solid_png(rgb), 16, 16, image_id=image_id)

    # --- operations ------------------------------------------------------

    def chat_complete(self, system: str, user: str, images: list[ImageRef] | None = None) -> str:
        self._maybe_fail("chat_complete")
        if user in self.chat_fixtures:
            return self.chat_fixtures[user]
        if "Output only edit commands" in user:
            for instruction, edits in self.update_fixtures.items():
                if instruction in user:
                    return edits
            return ""
        if "###Description of image" in user or "descriptive prompts" in user:
            return "<image>A majestic mountain range at sunrise. <image>A serene lake reflecting the colorful sky"
        return f"mock:{user}"

    def extract_iut(self, image: ImageRef, extraction_prompt: str) -> str:
        self._maybe_fail("extract_iut")
        return self.extract_fixtures.get(image.id, MINIMAL_DOC)

    def generate_image(self, prompt: str) -> ImageRef:
        self._maybe_fail("generate_image")
        if not prompt.strip():
            raise EmptyPrompt("image prompt is empty")
        image_id = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        h = _hash("image", self.config.model, prompt)
        rgb = (h & 0xFF, (h >> 8) & 0xFF, (h >> 16) & 0xFF)
        return self.store.put(solid_png(rgb), 16, 16, image_id=image_id)

    def judge_yes_no(self, question: str, images: list[ImageRef] | None = None) -> JudgePair:
        self._maybe_fail("judge_yes_no")
        if not question.strip():
            raise ValueError("question must be non-empty")
        ids = tuple(ref.id for ref in images or [])
        logits = self.judge_logits.get(question)
        if logits is None:
            h = _hash("judge", self.config.model, question, *ids)
            logits = ((h % 4000) / 1000.0 - 2.0, ((h // 4000) % 4000) / 1000.0 - 2.0)
        if logits[1] is None:  # fixture missing the "no" token score
            raise BackendProtocolError("no token score missing from fixture")
        return softmax_pair(*logits)

    def generate_criteria_raw(self, question: str, input_image: ImageRef | None, response_text: str) -> list[str]:
        self._maybe_fail("generate_criteria_raw")
        for key, criteria in self.criteria_fixtures.items():
            if key in question:
                return list(criteria)
        return list(DEFAULT_CRITERIA)

    def classify_dimension_raw(self, criterion: str) -> str:
        self._maybe_fail("classify_dimension_raw")
        label = self.classify_fixtures.get(criterion)
        if label is None:
            label = classify_by_rules(criterion)
            if label == UNASSIGNED:
                label = "logic"
        if label not in DIMENSIONS:
            raise BackendProtocolError(f"dimension label outside style/logic/entity: {label!r}")
        return label

    def similarity_score(self, a: ImageRef, b: ImageRef, kind: str) -> float:
        self._maybe_fail("similarity_score")
        if kind not in SIMILARITY_KINDS:
            raise ValueError(f"unknown similarity kind: {kind!r}")
        if a.id == b.id:
            return 1.0
        low, high = sorted((a.id, b.id))
        return (_hash("similarity", self.config.model, kind, low, high) % 999983) / 999983.0
