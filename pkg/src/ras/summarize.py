"""Qualitative analysis of a result set via a pluggable LLM endpoint.

The prompt is built from result metadata only; image pixels never reach
the language model. Any OpenAI-compatible chat-completion server works,
which covers local 1B-class models as well as hosted ones.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import requests

from .errors import InvalidArgument, UpstreamTimeout, UpstreamUnavailable
from .results import SearchResult

log = logging.getLogger(__name__)

MAX_PROMPT_CHARS = 8000
# individual digest lines are clamped so one pathological title cannot
# crowd out every other result
_TITLE_CAP = 500

SYSTEM_PREAMBLE = (
    "You are a research assistant for a digitized historical image collection. "
    "You receive the ranked results of a visual search, described only by their "
    "catalog metadata."
)
INSTRUCTION = (
    "In a short paragraph, characterize this result set: the major themes, "
    "time periods, formats, subjects, and authors it represents. Note anything "
    "unusual. Do not invent details absent from the metadata."
)


@dataclass(frozen=True)
class AnalysisPrompt:
    """Deterministic rendering of a result set for the LLM."""

    system_preamble: str
    result_digest: tuple[tuple[int, str, str, str, float], ...]
    instruction: str

    def user_text(self) -> str:
        lines = [_digest_line(*row) for row in self.result_digest]
        return "\n".join(lines) + "\n\n" + self.instruction

    def total_chars(self) -> int:
        return len(self.system_preamble) + len(self.user_text())


@dataclass(frozen=True)
class AnalysisResult:
    text: str
    model_id: str
    latency_ms: int


@runtime_checkable
class LlmClient(Protocol):
    model_id: str

    def complete(self, system: str, user: str) -> str: ...


def _digest_line(rank: int, title: str, doc_type: str, collection: str, score: float) -> str:
    title = title if len(title) <= _TITLE_CAP else title[: _TITLE_CAP - 3] + "..."
    return (
        f"{rank}. {title or '(untitled)'} | type: {doc_type or 'unknown'}"
        f" | collection: {collection or 'unknown'} | score: {score:.4f}"
    )


def build_prompt(results: Sequence[SearchResult]) -> AnalysisPrompt:
    """Digest the results in rank order into a bounded prompt.

    When the rendering would exceed MAX_PROMPT_CHARS, lowest-ranked
    results are dropped; the retained digest is always a rank prefix.
    """
    if not results:
        raise InvalidArgument("cannot analyze an empty result set")
    budget = MAX_PROMPT_CHARS - len(SYSTEM_PREAMBLE) - len(INSTRUCTION) - 2
    digest: list[tuple[int, str, str, str, float]] = []
    used = 0
    for r in results:
        row = (r.rank, r.title, r.doc_type, r.collection, float(r.score))
        cost = len(_digest_line(*row)) + (1 if digest else 0)
        if used + cost > budget and digest:
            break
        digest.append(row)
        used += cost
    return AnalysisPrompt(SYSTEM_PREAMBLE, tuple(digest), INSTRUCTION)


def analyze(results: Sequence[SearchResult], llm: LlmClient, *, time_fn=time.perf_counter) -> AnalysisResult:
    """Run the LLM over the digest and return its text verbatim with timing.

    One retry on a transport failure; a timeout and any content are taken
    as-is (no content-based retries, ranking is never touched).
    """
    prompt = build_prompt(results)
    start = time_fn()
    attempts = 0
    while True:
        try:
            text = llm.complete(prompt.system_preamble, prompt.user_text())
            break
        except UpstreamTimeout:
            raise
        except UpstreamUnavailable:
            attempts += 1
            if attempts > 1:
                raise
            log.warning("llm transport failure, retrying once")
    latency_ms = int(round((time_fn() - start) * 1000))
    if not text or not text.strip():
        raise UpstreamUnavailable("llm returned an empty analysis")
    return AnalysisResult(text=text, model_id=llm.model_id, latency_ms=latency_ms)


class OpenAiChatClient:
    """Minimal chat-completions client (OpenAI wire format)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key: str | None = None,
        max_tokens: int = 512,
        temperature: float = 0.2,
        timeout: float = 60.0,
        session=None,
    ):
        base = base_url.rstrip("/")
        self._url = base + "/chat/completions"
        self._models_url = base + "/models"
        self.model_id = model
        self._api_key = api_key
        self._max_tokens = max_tokens
        self._temperature = temperature
        self._timeout = timeout
        self._session = session if session is not None else requests.Session()

    def health(self) -> dict:
        """Cheap reachability probe against the provider's model listing."""
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = self._session.get(self._models_url, headers=headers, timeout=5.0)
            ready = resp.status_code == 200
        except requests.RequestException:
            ready = False
        return {"model_id": self.model_id, "ready": ready}

    def complete(self, system: str, user: str) -> str:
        payload = {
            "model": self.model_id,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "max_tokens": self._max_tokens,
            "temperature": self._temperature,
        }
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = self._session.post(self._url, json=payload, headers=headers, timeout=self._timeout)
        except requests.Timeout as exc:
            raise UpstreamTimeout(f"llm at {self._url} exceeded {self._timeout}s") from exc
        except requests.RequestException as exc:
            raise UpstreamUnavailable(f"llm at {self._url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise UpstreamUnavailable(f"llm returned HTTP {resp.status_code}")
        try:
            return str(resp.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise UpstreamUnavailable("llm response was not in chat-completion shape") from exc
