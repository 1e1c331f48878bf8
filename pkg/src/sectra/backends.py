"""HTTP clients for remote classification, generation and judging.

Wire protocol (JSON over POST):

    /classify  {"text": str}                          -> {"probs": [4 floats]}
    /generate  {"text": str, "params": {...},
                "instruction": str}                   -> {"text": str}
    /judge     {"prompt": str}                        -> {"text": str}
    /embed     {"text": str}                          -> {"vector": [floats]}

Every request carries an ``X-Request-ID`` header that stays fixed across
retries of the same call.
"""

from __future__ import annotations

import logging
import os
import random
import re
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Iterable, Sequence

import httpx
import numpy as np

from .labels import LABELS, SectionLabel

log = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "SECTRA_API_TOKEN"
REQUEST_ID_HEADER = "X-Request-ID"
RETRY_STATUSES = frozenset({408, 425, 429, 500, 502, 503, 504})


class BackendError(RuntimeError):
    pass


class BackendTransportError(BackendError):
    """The backend could not be reached, or kept failing after all retries."""


class BackendProtocolError(BackendError):
    """The backend answered with something that does not match the schema."""


class JudgeParseError(BackendProtocolError):
    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw!r}")
        self.raw = raw


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    token_env: str = DEFAULT_TOKEN_ENV
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base_ms: float = 250.0
    max_concurrency: int = 4

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> BackendConfig:
        if "token" in d or "api_key" in d:
            raise ValueError("tokens are read from the environment; set token_env instead")
        return cls(**d)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GenerationParams:
    min_words: int = 50
    max_words: int = 300
    beams: int = 5
    no_repeat_ngram: int = 2

    def __post_init__(self):
        if not 0 < self.min_words <= self.max_words:
            raise ValueError("need 0 < min_words <= max_words")

    @property
    def instruction(self) -> str:
        return f"Summarize the following scientific paper no more than {self.max_words} words"


class BackendClient:
    """Thread-safe JSON client with retries and a cap on in-flight requests."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None,
                 rng: random.Random | None = None, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()
        self._sleep = sleep
        headers = {}
        token = os.environ.get(config.token_env) if config.token_env else None
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(base_url=config.endpoint.rstrip("/"), headers=headers,
                                  timeout=config.timeout, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _backoff(self, attempt: int) -> float:
        base = self.config.backoff_base_ms / 1000.0 * (2 ** attempt)
        with self._rng_lock:
            return base * (0.5 + 0.5 * self._rng.random())

    def post(self, path: str, payload: dict, request_id: str | None = None) -> dict:
        request_id = request_id or uuid.uuid4().hex
        headers = {REQUEST_ID_HEADER: request_id}
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = self._backoff(attempt - 1)
                log.info("retrying %s (%s) in %.3fs after: %s", path, request_id, delay, last)
                self._sleep(delay)
            try:
                with self._slots:
                    resp = self._http.post(path, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code in RETRY_STATUSES:
                last = BackendTransportError(f"HTTP {resp.status_code} from {path}")
                continue
            if resp.status_code >= 400:
                raise BackendProtocolError(f"HTTP {resp.status_code} from {path}: {resp.text[:200]}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise BackendProtocolError(f"{path} returned non-JSON body") from exc
            if not isinstance(body, dict):
                raise BackendProtocolError(f"{path} returned {type(body).__name__}, expected object")
            return body
        raise BackendTransportError(
            f"{self.config.endpoint}{path} failed after {self.config.max_retries + 1} attempts: {last}"
        )

    def map(self, fn: Callable[[Any], Any], items: Iterable) -> list:
        """Apply ``fn`` concurrently; results come back in input order."""
        items = list(items)
        if len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
            return list(pool.map(fn, items))

    # -- capabilities -------------------------------------------------------

    def classify(self, text: str) -> np.ndarray:
        body = self.post("/classify", {"text": text})
        probs = body.get("probs")
        if (not isinstance(probs, list) or len(probs) != len(LABELS)
                or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs)):
            raise BackendProtocolError(f"/classify: expected 'probs' with {len(LABELS)} numbers, got {probs!r}")
        arr = np.asarray(probs, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-6:
            raise BackendProtocolError(f"/classify: not a probability vector: {probs!r}")
        return arr

    def generate(self, text: str, params: GenerationParams = GenerationParams()) -> str:
        if not text.strip():
            raise ValueError("generation input is empty")
        body = self.post("/generate", {"text": text, "params": asdict(params),
                                       "instruction": params.instruction})
        return _text_field(body, "/generate")

    def judge(self, prompt: str) -> JudgeResult:
        body = self.post("/judge", {"prompt": prompt})
        return parse_judge_response(_text_field(body, "/judge"))

    def embed(self, text: str) -> np.ndarray:
        body = self.post("/embed", {"text": text})
        vec = body.get("vector")
        if not isinstance(vec, list) or not vec:
            raise BackendProtocolError(f"/embed: expected non-empty 'vector', got {vec!r}")
        return np.asarray(vec, dtype=float)


def _text_field(body: dict, path: str) -> str:
    text = body.get("text")
    if not isinstance(text, str):
        raise BackendProtocolError(f"{path}: expected string 'text', got {text!r}")
    return text


def classify_remote(config: BackendConfig, text: str) -> np.ndarray:
    with BackendClient(config) as client:
        return client.classify(text)


def generate_remote(config: BackendConfig, input_text: str,
                    params: GenerationParams = GenerationParams()) -> str:
    with BackendClient(config) as client:
        return client.generate(input_text, params)


def judge_remote(config: BackendConfig, prompt: str) -> JudgeResult:
    with BackendClient(config) as client:
        return client.judge(prompt)


# ---------------------------------------------------------------------------
# Adapters used by the pipeline


class RemoteGenerator:
    """Generation backend with the summarizer's ``(sentences, max_words) -> text`` shape."""

    name = "remote"

    def __init__(self, client: BackendClient, params: GenerationParams = GenerationParams()):
        self.client = client
        self.params = params

    def __call__(self, sentences: Sequence[str], max_words: int) -> str:
        params = GenerationParams(
            min_words=min(self.params.min_words, max_words),
            max_words=max_words,
            beams=self.params.beams,
            no_repeat_ngram=self.params.no_repeat_ngram,
        )
        return self.client.generate(" ".join(sentences), params)


class RemoteClassifier:
    def __init__(self, client: BackendClient):
        self.client = client

    def __call__(self, text: str) -> tuple[SectionLabel, np.ndarray]:
        probs = self.client.classify(text)
        return LABELS[int(np.argmax(probs))], probs


class RemoteEmbedder:
    def __init__(self, client: BackendClient):
        self.client = client

    def embed(self, text: str) -> np.ndarray:
        return self.client.embed(text)


# ---------------------------------------------------------------------------
# LLM judging

JUDGE_ASPECTS = ("informativeness", "coherence", "readability")


@dataclass(frozen=True)
class JudgeCriteria:
    """Score descriptions (1 through 5) for each judged aspect."""

    informativeness: tuple[str, ...] = (
        "The summary includes very little or none of the key information from the human-written abstract.",
        "The summary includes some information but misses the key points from the human-written abstract.",
        "The summary includes around half of the key points from the human-written abstract but lacks critical details.",
        "The summary includes most of the key points from the human-written abstract, with only minor details missing.",
        "The summary includes almost all key points from the human-written abstract with strong detail and accuracy.",
    )
    coherence: tuple[str, ...] = (
        "The summary lacks coherence, with sentences that are disconnected and lack logical flow.",
        "The summary has limited coherence, with noticeable issues in logical flow or organization.",
        "The summary is generally coherent, though it contains minor breaks in flow or organization.",
        "The summary is mostly coherent, with clear logical flow and only occasional minor disruptions in structure or clarity.",
        "The summary is fully coherent, with seamless logical flow and structure, making it easy to understand.",
    )
    readability: tuple[str, ...] = (
        "The language is disjointed, with significant grammar or word usage errors, and difficult to read.",
        "The language contains noticeable grammar or word usage errors, but the overall meaning can still be read.",
        "The language flows generally smooth but contains a few grammatical or word usage errors, it remains readable.",
        "The language reads mostly smooth, with minor grammar or word usage errors, but overall reads well.",
        "The language flows very smooth, with no grammar or word usage errors, and is easy to read.",
    )

    def __post_init__(self):
        for aspect in JUDGE_ASPECTS:
            descs = getattr(self, aspect)
            if len(descs) != 5 or not all(isinstance(d, str) and d.strip() for d in descs):
                raise ValueError(f"{aspect}: need exactly five non-empty score descriptions")


# Criteria blocks appear in this order in the prompt; scores are read back in JUDGE_ASPECTS order.
_PROMPT_ASPECT_ORDER = ("informativeness", "readability", "coherence")

EVALUATION_STEPS = (
    "Read the Human-written summary carefully and assess its key points, clarity, and logical flow as a reference.",
    "Read the generated summary and compare it to the Human-written summary.",
    "Assign a score for each aspect on a scale of 1 to 5, where 1 is the lowest and 5 is the highest based on the Evaluation Criteria.",
    "Your output should only be the score, without additional comments or explanations.",
)


def build_judge_prompt(criteria: JudgeCriteria, human_abstract: str, generated: str) -> str:
    if criteria is None:
        raise ValueError("criteria are required")
    if not human_abstract.strip() or not generated.strip():
        raise ValueError("both summaries must be non-empty")
    lines = [
        "Task Introduction:",
        "You will be given a generated summary and a Human-written summary for a scientific paper. "
        "Your task is to rate the generated summary on three aspects: "
        f"{', '.join(_PROMPT_ASPECT_ORDER)}. The criteria for each aspect are as follows:",
        "",
    ]
    for aspect in _PROMPT_ASPECT_ORDER:
        lines.append(f"Criteria for {aspect}:")
        for score, desc in enumerate(getattr(criteria, aspect), 1):
            lines.append(f"{score}: {desc}")
        lines.append("")
    lines.append("Evaluation Steps:")
    lines.extend(f"{i}. {step}" for i, step in enumerate(EVALUATION_STEPS, 1))
    lines += [
        "",
        "Human-written summary:",
        human_abstract.strip(),
        "",
        "Generated Summary:",
        generated.strip(),
        "",
        "Evaluation Form (scores ONLY):",
    ]
    lines.extend(f"- {aspect.capitalize()}:" for aspect in JUDGE_ASPECTS)
    return "\n".join(lines)


@dataclass(frozen=True)
class JudgeResult:
    informativeness: int
    coherence: int
    readability: int

    def as_dict(self) -> dict:
        return asdict(self)


def parse_judge_response(raw: str) -> JudgeResult:
    """Read the first three integers as informativeness, coherence, readability."""
    found = [int(tok) for tok in re.findall(r"-?\d+", raw)][:3]
    if len(found) < 3:
        raise JudgeParseError("expected three scores", raw)
    if any(not 1 <= s <= 5 for s in found):
        raise JudgeParseError("scores must be integers in 1..5", raw)
    return JudgeResult(*found)
