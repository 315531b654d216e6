"""Validity classifiers and the batching queue in front of them.

Four interchangeable classifiers sit behind one interface: a ground-truth
oracle, a seeded noisy oracle, a text-heuristic baseline, and an HTTP client
speaking the /v1/classify wire protocol. Requests are buffered per pipeline
stage and flushed in batches of at most ``batch_size``.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .render import Snippet

DEFAULT_BATCH_SIZE = 32
CLASSIFIER_URL_ENV = "DISAS_CLASSIFIER_URL"


@dataclass(frozen=True)
class ClassifyRequest:
    snippet: Snippet
    queried: tuple[int, ...]  # parallel to snippet.word_spans
    tag: str

    def __post_init__(self):
        if len(self.queried) != len(self.snippet.word_spans):
            raise ValueError("queried addresses must parallel the word spans")


@dataclass(frozen=True)
class ClassifyResult:
    probabilities: tuple[float, ...]

    def __post_init__(self):
        for p in self.probabilities:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")


def request_for(snippet: Snippet, tag: str) -> ClassifyRequest:
    return ClassifyRequest(
        snippet=snippet,
        queried=tuple(s.address for s in snippet.word_spans),
        tag=tag,
    )


class Classifier(Protocol):
    def classify(self, batch: list[ClassifyRequest]) -> list[ClassifyResult]:
        """One result per request, order preserving."""


class ClassifierTransportError(RuntimeError):
    """A retryable transport failure talking to a remote classifier."""


class GroundTruthClassifier:
    """Answers from the known set of valid instruction start addresses."""

    def __init__(self, truth_starts):
        self.truth = frozenset(truth_starts)

    def classify(self, batch):
        return [
            ClassifyResult(tuple(1.0 if a in self.truth else 0.0
                                 for a in req.queried))
            for req in batch
        ]


class NoisyOracleClassifier:
    """Ground truth with a seeded per-address flip probability.

    With epsilon 0 the output is bit-identical to the plain oracle; otherwise
    flipped-or-not verdicts map to 0.99/0.01 so the decision thresholds still
    bite.
    """

    def __init__(self, truth_starts, epsilon: float, seed: int = 0):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must be within [0, 1]")
        self.truth = frozenset(truth_starts)
        self.epsilon = epsilon
        self.seed = seed

    def _flip(self, address: int) -> bool:
        if self.epsilon == 0.0:
            return False
        digest = hashlib.sha256(
            f"{self.seed}:{address:#x}".encode()).digest()
        draw = int.from_bytes(digest[:8], "big") / float(1 << 64)
        return draw < self.epsilon

    def classify(self, batch):
        out = []
        for req in batch:
            probs = []
            for addr in req.queried:
                valid = (addr in self.truth) ^ self._flip(addr)
                if self.epsilon == 0.0:
                    probs.append(1.0 if valid else 0.0)
                else:
                    probs.append(0.99 if valid else 0.01)
            out.append(ClassifyResult(tuple(probs)))
        return out


# opcodes that rarely appear in ordinary user code; decoding junk tends to
# produce them
_SUSPICIOUS_STEMS = (
    "hlt", "cli", "sti", "in ", "out ", "int1", "int ", "xlat", "cmc",
    "lahf", "sahf", "enter", "icebp", "std", "cld", "clc", "stc", "pushf",
    "popf", "cpuid", "rdtsc", "ud2", "lods", "scas", "stos", "cmps", "movs",
    "repz", "repnz", "rep ", "lock ", "pause", "bswap", "cmpxchg", "xadd",
    "int3",
)


class HeuristicClassifier:
    """Classifier-free smoke path: scores instruction text with cheap signals."""

    BAD_PROB = 0.0
    SUSPICIOUS_PROB = 0.2
    DEFAULT_PROB = 0.8

    def classify(self, batch):
        out = []
        for req in batch:
            probs = []
            for span in req.snippet.word_spans:
                text = req.snippet.text[span.start:span.end]
                if text == "(bad)":
                    probs.append(self.BAD_PROB)
                elif any(text.startswith(s) for s in _SUSPICIOUS_STEMS):
                    probs.append(self.SUSPICIOUS_PROB)
                else:
                    probs.append(self.DEFAULT_PROB)
            out.append(ClassifyResult(tuple(probs)))
        return out


class RemoteClassifier:
    """HTTP client for the /v1/classify wire protocol.

    Request body: {"requests": [{"text": str, "spans": [{"start", "end"}]}]}
    with byte offsets into the UTF-8 text; response arrays are parallel.
    5xx responses and transport errors are retried with exponential backoff.
    """

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0,
                 retries: int = 2, client: httpx.Client | None = None):
        endpoint = endpoint or os.environ.get(CLASSIFIER_URL_ENV)
        if not endpoint:
            raise ValueError(
                f"no classifier endpoint; set {CLASSIFIER_URL_ENV} or pass one")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)

    def classify(self, batch):
        payload = {
            "requests": [
                {
                    "text": req.snippet.text,
                    "spans": [
                        {"start": s.start, "end": s.end}
                        for s in req.snippet.word_spans
                    ],
                }
                for req in batch
            ]
        }
        url = f"{self.endpoint}/v1/classify"
        delay = 0.5
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._client.post(url, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(delay)
                    delay *= 2
                continue
            if response.status_code == 200:
                body = response.json()
                results = body.get("results", [])
                if len(results) != len(batch):
                    raise ClassifierTransportError(
                        f"expected {len(batch)} results, got {len(results)}")
                return [ClassifyResult(tuple(float(p) for p in r["probabilities"]))
                        for r in results]
            if 400 <= response.status_code < 500:
                raise ClassifierTransportError(
                    f"classifier rejected request: HTTP {response.status_code} "
                    f"{response.text[:200]}")
            last_error = ClassifierTransportError(
                f"HTTP {response.status_code}")
            if attempt < self.retries:
                time.sleep(delay)
                delay *= 2
        raise ClassifierTransportError(
            f"classifier unreachable at {url}: {last_error}")


@dataclass
class ClassifyError(RuntimeError):
    tags: list[str]
    cause: Exception

    def __str__(self):
        return f"classification failed for tags {self.tags}: {self.cause}"


class ClassifyQueue:
    """Buffers requests for one classifier + one stage tag.

    Hitting ``batch_size`` buffered requests triggers a flush; continuations
    run in enqueue order with their probabilities. Results are memoized by
    snippet text so re-checks with unchanged context skip the classifier.
    """

    def __init__(self, classifier: Classifier, tag: str,
                 batch_size: int = DEFAULT_BATCH_SIZE,
                 memo: dict | None = None,
                 recorder: Callable[[ClassifyRequest, ClassifyResult], None] | None = None):
        if batch_size < 1:
            raise ValueError("batch size must be >= 1")
        self.classifier = classifier
        self.tag = tag
        self.batch_size = batch_size
        self.memo = memo if memo is not None else {}
        self.recorder = recorder
        self._buffer: list[tuple[ClassifyRequest, Callable]] = []
        self.batch_sizes: list[int] = []  # classify call sizes, for tests

    @property
    def pending(self) -> int:
        return len(self._buffer)

    def _memo_key(self, request: ClassifyRequest):
        digest = hashlib.sha256(request.snippet.text.encode()).hexdigest()
        return digest, request.queried

    def enqueue(self, request: ClassifyRequest,
                continuation: Callable[[tuple[float, ...]], None]) -> None:
        if request.tag != self.tag:
            raise ValueError(f"request tag {request.tag!r} on queue {self.tag!r}")
        cached = self.memo.get(self._memo_key(request))
        if cached is not None:
            continuation(cached)
            return
        self._buffer.append((request, continuation))
        if len(self._buffer) >= self.batch_size:
            self.flush()

    def flush(self) -> None:
        while self._buffer:
            batch = self._buffer[: self.batch_size]
            self._buffer = self._buffer[self.batch_size:]
            requests = [req for req, _ in batch]
            self.batch_sizes.append(len(requests))
            try:
                results = self.classifier.classify(requests)
            except Exception as exc:
                raise ClassifyError([r.tag for r in requests], exc) from exc
            for (request, continuation), result in zip(batch, results):
                if self.recorder is not None:
                    self.recorder(request, result)
                self.memo[self._memo_key(request)] = result.probabilities
                continuation(result.probabilities)
