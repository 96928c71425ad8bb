"""Uniform interface to external neural backends.

One wire convention (OpenAI-compatible chat + image endpoints) covers every
real backend; model diversity is configuration. A deterministic mock backend
(see mock_backend) implements the same surface for offline tests.
"""

from __future__ import annotations

import base64
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

from .artifacts import ArtifactStore, ImageRef
from .errors import (
    AuthError,
    BackendProtocolError,
    EmptyPrompt,
    RateLimitedError,
    TransportError,
)

SIMILARITY_KINDS = ("clip", "dino")
DIMENSIONS = ("style", "logic", "entity")


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "mock://local"
    model: str = "mock-model"
    auth_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.7
    top_p: float = 0.9

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class JudgePair:
    p_yes: float
    p_no: float

    def __post_init__(self) -> None:
        if self.p_yes < 0 or self.p_no < 0 or abs(self.p_yes + self.p_no - 1.0) > 1e-9:
            raise ValueError(f"({self.p_yes}, {self.p_no}) is not on the unit simplex")


def softmax_pair(logit_yes: float, logit_no: float) -> JudgePair:
    m = max(logit_yes, logit_no)
    ey = math.exp(logit_yes - m)
    en = math.exp(logit_no - m)
    return JudgePair(ey / (ey + en), en / (ey + en))


def with_retries(fn: Callable[[], object], max_retries: int, *, sleep: Callable[[float], None] = time.sleep):
    """Run fn, retrying Transport/RateLimited with exponential backoff.

    Auth and protocol errors are never retried.
    """
    attempts = max_retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except (TransportError, RateLimitedError) as exc:
            last = exc
            if attempt + 1 < attempts:
                sleep(min(2.0 ** attempt, 30.0))
    assert last is not None
    raise last


class Backend(ABC):
    """Gateway surface for every external neural component."""

    def __init__(self, config: BackendConfig, store: ArtifactStore):
        self.config = config
        self.store = store

    @abstractmethod
    def chat_complete(self, system: str, user: str, images: list[ImageRef] | None = None) -> str: ...

    @abstractmethod
    def extract_iut(self, image: ImageRef, extraction_prompt: str) -> str: ...

    @abstractmethod
    def generate_image(self, prompt: str) -> ImageRef: ...

    @abstractmethod
    def judge_yes_no(self, question: str, images: list[ImageRef] | None = None) -> JudgePair: ...

    @abstractmethod
    def generate_criteria_raw(self, question: str, input_image: ImageRef | None, response_text: str) -> list[str]: ...

    @abstractmethod
    def classify_dimension_raw(self, criterion: str) -> str: ...

    @abstractmethod
    def similarity_score(self, a: ImageRef, b: ImageRef, kind: str) -> float: ...


def _check_images(images: list[ImageRef] | None) -> list[ImageRef]:
    images = images or []
    for ref in images:
        if not Path(ref.path).exists():
            raise TransportError(f"image file missing: {ref.path}")
    return images


class HttpBackend(Backend):
    """OpenAI-compatible HTTP client with retry and backoff."""

    def __init__(self, config: BackendConfig, store: ArtifactStore, *, client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep):
        super().__init__(config, store)
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env)
            if not token:
                raise AuthError(f"environment variable {self.config.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        def once() -> dict:
            try:
                resp = self._client.post(self.config.base_url.rstrip("/") + path, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if resp.status_code in (401, 403):
                raise AuthError(f"backend rejected credentials ({resp.status_code})")
            if resp.status_code == 429:
                raise RateLimitedError("backend rate limit")
            if resp.status_code >= 500:
                raise TransportError(f"server error {resp.status_code}")
            if resp.status_code >= 400:
                raise BackendProtocolError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendProtocolError("response is not JSON") from exc

        return with_retries(once, self.config.max_retries, sleep=self._sleep)  # type: ignore[return-value]

    def _messages(self, system: str, user: str, images: list[ImageRef]) -> list[dict]:
        content: list[dict] = [{"type": "text", "text": user}]
        for ref in images:
            data = base64.b64encode(Path(ref.path).read_bytes()).decode()
            content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}})
        return [{"role": "system", "content": system}, {"role": "user", "content": content}]

    def chat_complete(self, system: str, user: str, images: list[ImageRef] | None = None) -> str:
        images = _check_images(images)
        payload = {
            "model": self.config.model,
            "messages": self._messages(system, user, images),
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
        }
        data = self._post("/chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendProtocolError(f"malformed chat response: {data!r}") from exc

    def extract_iut(self, image: ImageRef, extraction_prompt: str) -> str:
        return self.chat_complete("You describe images as structured scene documents.", extraction_prompt, [image])

    def generate_image(self, prompt: str) -> ImageRef:
        if not prompt.strip():
            raise EmptyPrompt("image prompt is empty")
        payload = {"model": self.config.model, "prompt": prompt, "response_format": "b64_json"}
        data = self._post("/images/generations", payload)
        try:
            b64 = data["data"][0]["b64_json"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendProtocolError(f"malformed image response: {data!r}") from exc
        raw = base64.b64decode(b64)
        width = int(data["data"][0].get("width", 1024))
        height = int(data["data"][0].get("height", 1024))
        return self.store.put(raw, width, height)

    def judge_yes_no(self, question: str, images: list[ImageRef] | None = None) -> JudgePair:
        if not question.strip():
            raise ValueError("question must be non-empty")
        images = _check_images(images)
        payload = {
            "model": self.config.model,
            "messages": self._messages("Answer strictly yes or no.", question, images),
            "max_tokens": 1,
            "logprobs": True,
            "top_logprobs": 20,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
        }
        data = self._post("/chat/completions", payload)
        try:
            entries = data["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
            scores: dict[str, float] = {}
            for entry in entries:
                token = entry["token"].strip().lower()
                if token in ("yes", "no") and token not in scores:
                    scores[token] = float(entry["logprob"])
        except (KeyError, IndexError, TypeError):
            # Fallback for endpoints without token scores: degrade to a
            # hard 1/0 judgment from the sampled text.
            text = ""
            try:
                text = data["choices"][0]["message"]["content"].strip().lower()
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendProtocolError(f"malformed judge response: {data!r}") from exc
            if text.startswith("yes"):
                return JudgePair(1.0, 0.0)
            if text.startswith("no"):
                return JudgePair(0.0, 1.0)
            raise BackendProtocolError(f"judge answered neither yes nor no: {text!r}")
        if "yes" not in scores or "no" not in scores:
            raise BackendProtocolError(f"yes/no token scores missing: {scores!r}")
        return softmax_pair(scores["yes"], scores["no"])

    def generate_criteria_raw(self, question: str, input_image: ImageRef | None, response_text: str) -> list[str]:
        prompt = (
            "Generate exactly three binary evaluation questions for the task below, one per line.\n"
            f"Task: {question}\nResponse: {response_text}"
        )
        text = self.chat_complete("You write binary evaluation questions.", prompt, [input_image] if input_image else [])
        return [line.strip() for line in text.splitlines() if line.strip()]

    def classify_dimension_raw(self, criterion: str) -> str:
        if not criterion.strip():
            raise ValueError("criterion must be non-empty")
        label = self.chat_complete(
            "Classify the question as exactly one of: style, logic, entity. Answer with the single word.",
            criterion,
        ).strip().lower()
        if label not in DIMENSIONS:
            raise BackendProtocolError(f"dimension label outside style/logic/entity: {label!r}")
        return label

    def similarity_score(self, a: ImageRef, b: ImageRef, kind: str) -> float:
        if kind not in SIMILARITY_KINDS:
            raise ValueError(f"unknown similarity kind: {kind!r}")
        _check_images([a, b])
        data = self._post("/similarity", {"model": self.config.model, "kind": kind, "a": a.id, "b": b.id})
        try:
            score = float(data["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendProtocolError(f"malformed similarity response: {data!r}") from exc
        return min(1.0, max(0.0, score))
