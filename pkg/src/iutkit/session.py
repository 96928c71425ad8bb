"""Multi-turn session pipeline: respond, update state, forge prompts, render.

A session owns an append-only line-delimited log (log.jsonl) from which its
full state can be replayed; image artifacts live in the shared content-hash
store. Turn 0 is the initial extraction turn; later turns run the four-stage
loop and may be scored afterwards.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .artifacts import ArtifactStore, ImageRef
from .edits import EditScript, format_edit_script, parse_edit_script
from .errors import IutError
from .evaluation import (
    ConsistencyTriplet,
    classify_dimension,
    generate_criteria,
    judge,
    score_triplet,
)
from .gateway import Backend, BackendConfig
from .mock_backend import MockBackend
from .model import (
    Provenance,
    SymbolicState,
    canonicalize,
    parse_iut,
)
from .prompts import (
    WITH_IUT,
    WITHOUT_IUT,
    PromptBundle,
    build_with_iut_request,
    build_without_iut_request,
    split_image_prompts,
)
from .state_engine import init_state, update_state

ROLES = ("vlm", "t2i", "extractor", "updater", "criteria", "judge", "classifier")


@dataclass
class Runtime:
    """Backends by role plus the shared store and clock."""

    backends: dict[str, Backend]
    store: ArtifactStore
    clock: Callable[[], float] = time.time

    def __getitem__(self, role: str) -> Backend:
        return self.backends[role]


def mock_runtime(store: ArtifactStore | None = None, *, model: str = "mock-model", **mock_kwargs) -> Runtime:
    store = store or ArtifactStore()
    backend = MockBackend(BackendConfig(model=model), store, **mock_kwargs)
    # Frozen clock keeps every mock artifact byte-deterministic.
    return Runtime({role: backend for role in ROLES}, store, clock=lambda: 0.0)


def build_backend(config: BackendConfig, store: ArtifactStore) -> Backend:
    if config.base_url.startswith("mock"):
        return MockBackend(config, store)
    from .gateway import HttpBackend

    return HttpBackend(config, store)


# --- turn records --------------------------------------------------------


def state_to_dict(state: SymbolicState | None) -> dict | None:
    if state is None:
        return None
    return {
        "tree": canonicalize(state.tree),
        "turn_index": state.turn_index,
        "provenance": {"origin": state.provenance.origin, "source_turn_id": state.provenance.source_turn_id},
    }


def state_from_dict(raw: dict | None) -> SymbolicState | None:
    if raw is None:
        return None
    return SymbolicState(
        tree=parse_iut(raw["tree"]),
        turn_index=raw["turn_index"],
        provenance=Provenance(raw["provenance"]["origin"], raw["provenance"].get("source_turn_id")),
    )


@dataclass
class SessionTurn:
    turn_id: int
    instruction: str
    input_image_id: str | None
    response_text: str = ""
    mode: str = WITH_IUT
    prompt_request: str = ""
    prompts: tuple[str, ...] = ()
    prompt_warnings: tuple[str, ...] = ()
    generated_image_ids: tuple[str, ...] = ()
    state_before: SymbolicState | None = None
    state_after: SymbolicState | None = None
    edits: EditScript = field(default_factory=EditScript)
    triplet: ConsistencyTriplet | None = None
    status: str = "ok"
    failed_stage: str | None = None
    error: str | None = None
    started_at: float = 0.0
    finished_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "instruction": self.instruction,
            "input_image_id": self.input_image_id,
            "response_text": self.response_text,
            "mode": self.mode,
            "prompt_request": self.prompt_request,
            "prompts": list(self.prompts),
            "prompt_warnings": list(self.prompt_warnings),
            "generated_image_ids": list(self.generated_image_ids),
            "state_before": state_to_dict(self.state_before),
            "state_after": state_to_dict(self.state_after),
            "edits": format_edit_script(self.edits),
            "triplet": self.triplet.as_dict() if self.triplet else None,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionTurn":
        triplet = None
        if raw.get("triplet"):
            t = raw["triplet"]
            triplet = ConsistencyTriplet(t.get("style"), t.get("logic"), t.get("entity"), t.get("counts", {}))
        return cls(
            turn_id=raw["turn_id"],
            instruction=raw["instruction"],
            input_image_id=raw.get("input_image_id"),
            response_text=raw.get("response_text", ""),
            mode=raw.get("mode", WITH_IUT),
            prompt_request=raw.get("prompt_request", ""),
            prompts=tuple(raw.get("prompts", [])),
            prompt_warnings=tuple(raw.get("prompt_warnings", [])),
            generated_image_ids=tuple(raw.get("generated_image_ids", [])),
            state_before=state_from_dict(raw.get("state_before")),
            state_after=state_from_dict(raw.get("state_after")),
            edits=parse_edit_script(raw.get("edits", "")),
            triplet=triplet,
            status=raw.get("status", "ok"),
            failed_stage=raw.get("failed_stage"),
            error=raw.get("error"),
            started_at=raw.get("started_at", 0.0),
            finished_at=raw.get("finished_at", 0.0),
        )


# --- session -------------------------------------------------------------


class Session:
    def __init__(self, session_id: str, directory: Path, runtime: Runtime, iut_mode: str = "on"):
        self.id = session_id
        self.directory = Path(directory)
        self.runtime = runtime
        self.iut_mode = iut_mode
        self.turns: list[SessionTurn] = []
        self.state: SymbolicState | None = None

    @property
    def log_path(self) -> Path:
        return self.directory / "log.jsonl"

    def _append(self, record: dict) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def create(cls, directory: Path, image: ImageRef, runtime: Runtime, *, session_id: str | None = None, iut_mode: str = "on") -> "Session":
        """Open a session and run the initial extraction turn."""
        session = cls(session_id or uuid.uuid4().hex[:12], Path(directory), runtime, iut_mode)
        started = runtime.clock()
        state = init_state(image, runtime["extractor"])
        turn = SessionTurn(
            turn_id=0,
            instruction="",
            input_image_id=image.id,
            mode=WITH_IUT if iut_mode == "on" else WITHOUT_IUT,
            state_before=None,
            state_after=state,
            started_at=started,
            finished_at=runtime.clock(),
        )
        session.state = state
        session.turns.append(turn)
        session._append({"type": "meta", "session_id": session.id, "iut_mode": iut_mode})
        session._append({"type": "turn", **turn.to_dict()})
        return session

    @classmethod
    def load(cls, directory: Path, runtime: Runtime) -> "Session":
        directory = Path(directory)
        session = cls(directory.name, directory, runtime)
        for line in (directory / "log.jsonl").read_text("utf-8").splitlines():
            record = json.loads(line)
            if record["type"] == "meta":
                session.id = record["session_id"]
                session.iut_mode = record.get("iut_mode", "on")
            elif record["type"] == "turn":
                turn = SessionTurn.from_dict(record)
                session.turns.append(turn)
                if turn.state_after is not None:
                    session.state = turn.state_after
            elif record["type"] == "eval":
                t = record["triplet"]
                triplet = ConsistencyTriplet(t.get("style"), t.get("logic"), t.get("entity"), t.get("counts", {}))
                session.turns[record["turn_id"]].triplet = triplet
        return session

    # --- the four-stage turn loop ---------------------------------------

    def run_turn(self, instruction: str, image: ImageRef | None = None) -> SessionTurn:
        if not self.turns:
            raise IutError("session has no initial extraction turn; use Session.create")
        runtime = self.runtime
        turn = SessionTurn(
            turn_id=len(self.turns),
            instruction=instruction,
            input_image_id=image.id if image else None,
            mode=WITH_IUT if self.iut_mode == "on" else WITHOUT_IUT,
            state_before=self.state,
            started_at=runtime.clock(),
        )
        stage = "respond"
        try:
            images = [image] if image else []
            turn.response_text = runtime["vlm"].chat_complete(
                "You answer multimodal instructions with a short narrative response.",
                instruction,
                images,
            )

            stage = "update"
            assert self.state is not None
            new_state, script = update_state(instruction, self.state, runtime["updater"], source_turn_id=str(turn.turn_id))
            turn.state_after = new_state
            turn.edits = script
            self.state = new_state

            stage = "forge"
            if self.iut_mode == "on":
                turn.prompt_request = build_with_iut_request(instruction, new_state, turn.response_text)
                mode = WITH_IUT
            else:
                turn.prompt_request = build_without_iut_request(turn.response_text)
                mode = WITHOUT_IUT
            synth = runtime["vlm"].chat_complete("You write image generation prompts.", turn.prompt_request)
            bundle: PromptBundle = split_image_prompts(synth, mode)
            turn.prompts = bundle.prompts
            turn.prompt_warnings = bundle.warnings

            stage = "generate"
            generated = [runtime["t2i"].generate_image(prompt) for prompt in turn.prompts]
            turn.generated_image_ids = tuple(ref.id for ref in generated)
        except IutError as exc:
            turn.status = "failed"
            turn.failed_stage = stage
            turn.error = str(exc)
            if stage in ("respond", "update"):
                # State never advanced; keep the session where it was.
                turn.state_after = None
        turn.finished_at = runtime.clock()
        self.turns.append(turn)
        self._append({"type": "turn", **turn.to_dict()})
        return turn

    def evaluate_turn(self, turn: SessionTurn) -> ConsistencyTriplet:
        """Generate criteria, classify, judge against the first generated image."""
        if not turn.generated_image_ids:
            raise IutError("turn has no generated image to evaluate")
        runtime = self.runtime
        input_ref = runtime.store.get(turn.input_image_id) if turn.input_image_id else None
        generated_ref = runtime.store.get(turn.generated_image_ids[0])
        criteria = generate_criteria(turn.instruction, input_ref, turn.response_text, runtime["criteria"])
        scored = []
        for criterion in criteria:
            labeled = replace(criterion, dimension=classify_dimension(criterion, runtime["classifier"]))
            scored.append(judge(labeled, input_ref, generated_ref, runtime["judge"]))
        triplet = score_triplet(scored)
        turn.triplet = triplet
        self._append({"type": "eval", "turn_id": turn.turn_id, "triplet": triplet.as_dict()})
        return triplet
