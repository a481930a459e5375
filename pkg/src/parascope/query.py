"""Question answering over retrieved passages.

A user question plus the top-ranked passages are assembled into a fixed
prompt template and sent to an LLM provider. The answer always carries
the exact passages that were sent, so the UI can cross-reference every
claim, and a model that finds nothing must reply with the refusal
sentinel verbatim. No provider call is ever made with zero passages.
"""

from __future__ import annotations

import abc
import threading
import time
from dataclasses import dataclass

from .errors import InvalidInputError, ProviderError

REFUSAL_SENTINEL = "I cannot answer that."

_PREAMBLE = (
    " You are an assistant for a researcher working at the intersection of"
    " additive manufacturing and machine learning. Your goal is to help the"
    " researcher find and distill significant information in a scientific"
    " paper. To this end, answer the following triple-backtick delimited"
    " query from the researcher:"
)
_INSTRUCTION = (
    " To answer the question, use the following passages from the paper."
    " If there is no information in the passages that answers the question,"
    ' write "I cannot answer that."'
)


@dataclass
class Passage:
    index: int
    paragraph_id: str
    text: str


@dataclass
class Prompt:
    query: str
    passages: list[Passage]
    rendered: str


def create_prompt(
    query: str,
    retrieved: list[str],
    paragraph_ids: list[str] | None = None,
) -> Prompt:
    """Assemble the model input: query section first, then the passages as
    "- Passage {i}: {text}" lines (0-based). Byte-deterministic in its
    inputs."""
    if not query or not query.strip():
        raise InvalidInputError("query must be non-empty")
    if not retrieved:
        raise InvalidInputError("at least one passage is required")
    if paragraph_ids is None:
        paragraph_ids = [""] * len(retrieved)
    if len(paragraph_ids) != len(retrieved):
        raise InvalidInputError("paragraph_ids must match passages one-to-one")

    lines = [f"- Passage {i}: {x}" for i, x in enumerate(retrieved)]
    block = "\n".join(lines)
    rendered = f"{_PREAMBLE}\n    ``` {query} ```\n{_INSTRUCTION}\n {block}\n "
    passages = [
        Passage(index=i, paragraph_id=pid, text=text)
        for i, (pid, text) in enumerate(zip(paragraph_ids, retrieved))
    ]
    return Prompt(query=query, passages=passages, rendered=rendered)


def is_refusal(text: str) -> bool:
    """Sentinel match: exact after trimming, with a tolerant fallback that
    ignores case and a trailing period (providers paraphrase)."""
    trimmed = text.strip()
    if trimmed == REFUSAL_SENTINEL:
        return True
    return trimmed.rstrip(".").casefold() == REFUSAL_SENTINEL.rstrip(".").casefold()


@dataclass
class Answer:
    text: str
    used_passages: list[Passage]
    refused: bool
    provider_id: str
    model_id: str


class LLMProvider(abc.ABC):
    provider_id: str
    model_id: str

    @abc.abstractmethod
    def complete(self, prompt: str) -> str:
        """Return the model's completion for a fully rendered prompt."""


class StubLLMProvider(LLMProvider):
    """Deterministic in-process provider for tests and offline runs.

    With `fixed_response` set it always returns that string; otherwise it
    echoes the first passage's text parsed back out of the prompt. Counts
    calls so tests can assert the no-passage refusal path never reaches
    the provider.
    """

    provider_id = "stub"
    model_id = "stub"

    def __init__(self, fixed_response: str | None = None):
        self.fixed_response = fixed_response
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.fixed_response is not None:
            return self.fixed_response
        marker = "- Passage 0: "
        start = prompt.find(marker)
        if start == -1:
            return REFUSAL_SENTINEL
        end = prompt.find("\n- Passage 1: ", start)
        if end == -1:
            end = prompt.rfind("\n")
        return prompt[start + len(marker) : end].strip()


class RateLimiter:
    """Spaces calls so at most `requests_per_minute` begin per minute."""

    def __init__(self, requests_per_minute: float):
        self._interval = 60.0 / requests_per_minute if requests_per_minute > 0 else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if wait > 0:
            time.sleep(wait)


class RemoteLLMProvider(LLMProvider):
    """HTTP JSON chat provider (see README for the request/response shape).

    Decoding defaults to the most deterministic mode (temperature 0).
    """

    provider_id = "remote"

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        temperature: float = 0.0,
        requests_per_minute: float = 60.0,
        retries: int = 3,
        timeout: float = 60.0,
        limiter: RateLimiter | None = None,
    ):
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key = api_key
        self.temperature = temperature
        self.retries = retries
        self.timeout = timeout
        self.limiter = limiter or RateLimiter(requests_per_minute)
        import requests

        self._session = requests.Session()

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.retries):
            self.limiter.acquire()
            try:
                resp = self._session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except Exception as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(0.5 * 2**attempt)
        raise ProviderError(f"chat completion failed after {self.retries} attempts: {last_error}")


def refusal_answer(provider: LLMProvider) -> Answer:
    """Local refusal issued when retrieval yields nothing; no provider cost."""
    return Answer(
        text=REFUSAL_SENTINEL,
        used_passages=[],
        refused=True,
        provider_id=provider.provider_id,
        model_id=provider.model_id,
    )


def answer_with_passages(
    provider: LLMProvider,
    query: str,
    texts: list[str],
    paragraph_ids: list[str],
) -> Answer:
    """Build the prompt, invoke the provider once, wrap the result."""
    prompt = create_prompt(query, texts, paragraph_ids)
    completion = provider.complete(prompt.rendered)
    return Answer(
        text=completion,
        used_passages=prompt.passages,
        refused=is_refusal(completion),
        provider_id=provider.provider_id,
        model_id=provider.model_id,
    )
