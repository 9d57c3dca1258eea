"""Uniform client for external model services: generation, embedding, judging.

The gateway is the only module that may open a network connection. Every
operation also works fully offline through two deterministic modes:

* ``stub:<name>`` — named canned behaviors (``echo``, ``context_reader``,
  ``parametric_bias``, ``fixed:<text>``) plus a hashed bag-of-terms embedder.
* ``replay:<path>`` — responses looked up from a recorded transcript by
  request fingerprint.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import DimensionMismatch, GatewayFailure, ReplayMiss
from .records import SCHEMA_VERSION, read_records, require_fields, write_records
from .text import index_terms, stable_u64

logger = logging.getLogger(__name__)

ENV_ENDPOINT = "MODEL_ENDPOINT"
ENV_API_KEY = "MODEL_API_KEY"
ENV_EMBED_ENDPOINT = "EMBED_ENDPOINT"
ENV_MAX_INFLIGHT = "GATEWAY_MAX_INFLIGHT"

DEFAULT_EMBED_DIM = 256

# Versioned prompt assets. Bump the suffix when the wording changes, so
# recorded transcripts stay valid for the version they were captured with.
JUDGE_PROMPT_V1 = (
    "You are grading one short answer against its ground truth.\n"
    "Reply with exactly one word: CORRECT or INCORRECT.\n\n"
    "Question: {question}\n"
    "Ground truth answer: {gold}\n"
    "Predicted answer: {predicted}\n"
    "Verdict:"
)

_CONTEXT_BLOCK_RE = re.compile(r"Reference documents:\n(.*?)\n\nQuestion:", re.S)
_ANSWER_MARKER_RE = re.compile(r"answer=([\w-]+)")
_QUESTION_LINE_RE = re.compile(r"^Question: (.*)$", re.M)


@dataclass
class EmbeddingVector:
    """Fixed-dimension real vector; rejects non-finite components."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        if not np.isfinite(self.values).all():
            raise ValueError("embedding contains non-finite values")

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class GatewayConfig:
    mode: str = "stub:echo"
    endpoint: str | None = None
    credential_env: str = ENV_API_KEY
    timeout: float = 30.0
    max_retries: int = 2
    embed_dim: int = DEFAULT_EMBED_DIM
    backoff_base: float = 0.5
    max_inflight: int | None = None

    @property
    def mode_kind(self) -> str:
        return self.mode.split(":", 1)[0]

    @property
    def mode_arg(self) -> str:
        parts = self.mode.split(":", 1)
        return parts[1] if len(parts) > 1 else ""


class Transcript:
    """Ordered (request fingerprint, response) pairs for record/replay."""

    def __init__(self, entries: list[dict[str, Any]] | None = None):
        self.entries = list(entries or [])
        self._consumed = [False] * len(self.entries)
        self._lock = threading.Lock()

    def append(self, fingerprint: str, task: str, response: Any) -> None:
        self.entries.append({"fingerprint": fingerprint, "task": task, "response": response})
        self._consumed.append(False)

    def replay(self, fingerprint: str) -> Any:
        with self._lock:
            for i, entry in enumerate(self.entries):
                if not self._consumed[i] and entry["fingerprint"] == fingerprint:
                    self._consumed[i] = True
                    return entry["response"]
        raise ReplayMiss(f"no transcript entry for fingerprint {fingerprint[:12]}...")

    def save(self, path: str | Path) -> None:
        write_records(path, ({"schema_version": SCHEMA_VERSION, **e} for e in self.entries))

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        entries = []
        for line_no, record in read_records(path):
            require_fields(record, line_no, "fingerprint", "task", "response")
            entries.append({"fingerprint": record["fingerprint"], "task": record["task"], "response": record["response"]})
        return cls(entries)


def request_fingerprint(body: dict[str, Any]) -> str:
    canonical = json.dumps(body, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@lru_cache(maxsize=65536)
def _term_bucket(term: str, dim: int) -> int:
    return stable_u64("embed-bucket", term) % dim


def hashed_bag_embedding(text: str, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Deterministic unit-normalized hashed bag-of-terms vector.

    Identical texts map to identical vectors; texts with disjoint term sets
    are orthogonal unless their terms collide in the same hash bucket.
    """
    vec = np.zeros(dim, dtype=np.float64)
    for term, count in Counter(index_terms(text)).items():
        vec[_term_bucket(term, dim)] += count
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


def _requests_transport(body: dict[str, Any], endpoint: str, api_key: str, timeout: float) -> dict[str, Any]:
    import requests

    try:
        resp = requests.post(
            endpoint,
            json=body,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
        )
    except requests.Timeout as exc:
        raise TimeoutError(str(exc)) from exc
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from exc
    if resp.status_code != 200:
        raise ValueError(f"unexpected status {resp.status_code}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ValueError(f"non-JSON response: {exc}") from exc


class ModelGateway:
    """Entry point for generate/embed/judge calls.

    ``transport`` may be injected for tests: a callable taking
    ``(request_body, timeout)`` and returning the response body dict.
    """

    def __init__(
        self,
        config: GatewayConfig | None = None,
        transport: Callable[[dict[str, Any], float], dict[str, Any]] | None = None,
        stub_memory: dict[str, str] | None = None,
    ):
        self.config = config or GatewayConfig()
        self._stub_memory = dict(stub_memory or {})
        self._transcript: Transcript | None = None
        kind = self.config.mode_kind
        if kind == "live":
            endpoint = self.config.endpoint or os.environ.get(ENV_ENDPOINT)
            api_key = os.environ.get(self.config.credential_env)
            if transport is None and (not endpoint or not api_key):
                raise ValueError("live mode requires an endpoint and a credential in the environment")
            self._endpoint = endpoint or ""
            self._api_key = api_key or ""
        elif kind == "replay":
            self._transcript = Transcript.load(self.config.mode_arg)
        elif kind != "stub":
            raise ValueError(f"unknown gateway mode {self.config.mode!r}")
        self._transport = transport
        inflight = self.config.max_inflight or int(os.environ.get(ENV_MAX_INFLIGHT, "4"))
        self._inflight = threading.BoundedSemaphore(max(1, inflight))

    # --- public operations -------------------------------------------------

    def generate(self, prompt: str, params: dict[str, Any] | None = None) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        params = {"max_length": 512, "temperature": 0.0, **(params or {})}
        body = {"task": "generate", "prompt": prompt, "params": params}
        output = self._dispatch(body)
        return str(output)

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be non-empty")
        if self.config.mode_kind == "stub":
            return EmbeddingVector(hashed_bag_embedding(text, self.config.embed_dim))
        body = {"task": "embed", "text": text}
        output = self._dispatch(body)
        vector = EmbeddingVector(np.asarray(output, dtype=np.float64))
        if vector.dimension != self.config.embed_dim:
            raise DimensionMismatch(f"embedder returned dimension {vector.dimension}, expected {self.config.embed_dim}")
        return vector

    def judge(self, question: str, gold: str, predicted: str) -> str:
        prompt = JUDGE_PROMPT_V1.format(question=question, gold=gold, predicted=predicted)
        body = {"task": "judge", "prompt": prompt, "params": {}}
        return str(self._dispatch(body))

    # --- dispatch ------------------------------------------------------------

    def _dispatch(self, body: dict[str, Any]) -> Any:
        kind = self.config.mode_kind
        if kind == "stub":
            return self._stub_response(body)
        if kind == "replay":
            assert self._transcript is not None
            return self._transcript.replay(request_fingerprint(body))
        return self._live_call(body)

    def _stub_response(self, body: dict[str, Any]) -> Any:
        name = self.config.mode_arg or "echo"
        prompt = body.get("prompt", body.get("text", ""))
        if name == "echo":
            return prompt
        if name.startswith("fixed:"):
            return name.split(":", 1)[1]
        if name == "context_reader":
            block = _CONTEXT_BLOCK_RE.search(prompt)
            if block:
                marker = _ANSWER_MARKER_RE.search(block.group(1))
                if marker:
                    return marker.group(1)
            return "unknown"
        if name == "parametric_bias":
            questions = _QUESTION_LINE_RE.findall(prompt)
            if questions:
                return self._stub_memory.get(questions[-1].strip(), "unknown")
            return "unknown"
        raise ValueError(f"unknown stub behavior {name!r}")

    def _live_call(self, body: dict[str, Any]) -> Any:
        attempts = 0
        last_kind = "exhausted_retries"
        last_detail = ""
        while True:
            attempts += 1
            try:
                with self._inflight:
                    if self._transport is not None:
                        response = self._transport(body, self.config.timeout)
                    else:
                        endpoint = self._endpoint
                        if body["task"] == "embed":
                            endpoint = os.environ.get(ENV_EMBED_ENDPOINT, endpoint)
                        response = _requests_transport(body, endpoint, self._api_key, self.config.timeout)
                if "output" not in response:
                    raise ValueError("response body missing 'output'")
                return response["output"]
            except TimeoutError as exc:
                last_kind, last_detail = "timeout", str(exc)
            except (ConnectionError, ValueError, KeyError, TypeError) as exc:
                last_kind, last_detail = "protocol", str(exc)
            except Exception as exc:  # unclassified transport failure
                last_kind, last_detail = "exhausted_retries", str(exc)
            if attempts > self.config.max_retries:
                raise GatewayFailure(last_kind, attempts, last_detail)
            delay = self.config.backoff_base * (2 ** (attempts - 1))
            if delay > 0:
                time.sleep(delay)
