"""LLM backends: a chat-completions HTTP client, a scripted transcript
player for tests, and a deterministic oracle that answers by executing a
designated SQL query on the instance embedded in the prompt."""

from __future__ import annotations

import json
import logging
import threading
import time

import httpx

from .errors import BackendError, SqlDuelError
from .evaluator import evaluate
from .instance_io import load_instance_json
from .prompts import extract_instance_block
from .queries import prepare_candidate

logger = logging.getLogger(__name__)

# Driving-model sampling defaults used throughout the evaluation.
DEFAULT_SAMPLING = {
    "temperature": 0.7,
    "top_p": 0.8,
    "top_k": 20,
    "repetition_penalty": 1.05,
}


class LlmBackend:
    """complete() is total: it returns text or raises BackendError."""

    def complete(self, prompt: str) -> str:
        raise NotImplementedError


class ScriptedBackend(LlmBackend):
    """Replays a fixed transcript; raises once the replies run out."""

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self._index = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            if self._index >= len(self.replies):
                raise BackendError("scripted backend exhausted its replies")
            reply = self.replies[self._index]
            self._index += 1
            return reply


class OracleBackend(LlmBackend):
    """Answers by running a designated SQL query on the prompt's instance.

    Substitutes for the LLM in deterministic tests and benchmarks: with the
    gold query as the designated SQL, its vote is the gold answer on the
    separating instance.
    """

    def __init__(self, sql: str):
        self.sql = sql

    def complete(self, prompt: str) -> str:
        try:
            instance = load_instance_json(extract_instance_block(prompt))
            candidate = prepare_candidate(self.sql)
            answer = evaluate(candidate.ast, instance)
        except (SqlDuelError, ValueError) as exc:
            raise BackendError(f"oracle evaluation failed: {exc}") from exc
        return json.dumps(
            {"tuples_that_answer_question": [list(row) for row in answer.rows]}
        )


class HttpChatBackend(LlmBackend):
    """Chat-completions client with bounded retries and backoff."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        sampling: dict | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.sampling = dict(DEFAULT_SAMPLING if sampling is None else sampling)

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            **self.sampling,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = httpx.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                if response.status_code >= 500:
                    raise BackendError(f"server error {response.status_code}")
                response.raise_for_status()
                return self._content(response.json())
            except (httpx.HTTPError, BackendError, KeyError, ValueError) as exc:
                last_error = exc
                logger.warning(
                    "chat request attempt %d/%d failed: %s",
                    attempt + 1, self.max_retries, exc,
                )
                if attempt + 1 < self.max_retries:
                    time.sleep(min(2.0 ** attempt, 8.0))
        raise BackendError(f"chat request failed after {self.max_retries} attempts: {last_error}")

    @staticmethod
    def _content(body: dict) -> str:
        choice = body["choices"][0]
        if "message" in choice:
            return choice["message"]["content"]
        return choice["text"]
