"""
Chat-completion client with pluggable backends: an OpenAI-compatible HTTP
endpoint, a scripted mock, and a mock that answers with the geometric oracle.
"""
from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx
from pydantic import BaseModel, ConfigDict

from app.core.config import LlmConfig, OracleConfig
from app.core.constants import ENV_API_KEY
from app.core.exceptions import (
    AuthMissingError,
    ContextOverflowError,
    LlmError,
    LlmNetworkError,
    LlmResponseError,
    SceneGptError,
    UnsupportedCategoryError,
)
from app.core.logger import get_logger
from app.models.parsed_response import ParsedResponse
from app.models.prompt_bundle import PromptBundle
from app.models.query import OracleAnswer, QueryCategory, StructuredQuery
from app.models.scene_graph import ObjectNode, SceneGraph
from app.services.query_interpretation_service import interpret_query
from app.services.response_parsing_service import render_response
from app.services.spatial_oracle_service import answer_query_deterministic

logger = get_logger(__name__)


class BackendKind(str, Enum):
    LIVE = "live"
    MOCK = "mock"
    ORACLE = "oracle"


class CompletionRequest(BaseModel):
    """
    What a backend gets: the prompt, plus the scene and the structured
    query for backends that answer without a model.
    """
    model_config = ConfigDict(frozen=True)

    prompt: PromptBundle
    scene: SceneGraph | None = None
    structured_query: StructuredQuery | None = None


class ChatBackend(Protocol):
    name: str
    supports_concurrency: bool

    def complete(self, request: CompletionRequest) -> str: ...


def build_chat_payload(prompt: PromptBundle, cfg: LlmConfig) -> dict[str, Any]:
    return {
        "model": cfg.model_name,
        "messages": [
            {"role": "system", "content": prompt.system_text},
            {"role": "user", "content": prompt.user_text},
        ],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_output_tokens,
    }


class HttpChatBackend:
    """POST {base_url}/chat/completions with a bearer key from the environment."""

    name = BackendKind.LIVE.value
    supports_concurrency = True

    def __init__(
        self,
        cfg: LlmConfig,
        api_key: str | None = None,
        http_client: httpx.Client | None = None,
        environ: Mapping[str, str] | None = None,
    ):
        environ = os.environ if environ is None else environ
        self.api_key = api_key or environ.get(ENV_API_KEY, "").strip()
        if not self.api_key:
            raise AuthMissingError(f"{ENV_API_KEY} is not set")

        self.cfg = cfg
        self.url = f"{cfg.base_url.rstrip('/')}/chat/completions"
        self._owns_client = http_client is None
        self.http_client = http_client or httpx.Client(
            timeout=cfg.timeout,
            limits=httpx.Limits(max_connections=cfg.concurrency),
        )

    def close(self) -> None:
        if self._owns_client:
            self.http_client.close()

    def complete(self, request: CompletionRequest) -> str:
        payload = build_chat_payload(request.prompt, self.cfg)
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}

        try:
            resp = self.http_client.post(self.url, json=payload, headers=headers, timeout=self.cfg.timeout)
        except httpx.TimeoutException as e:
            raise LlmNetworkError(f"request timed out after {self.cfg.timeout}s") from e
        except httpx.TransportError as e:
            raise LlmNetworkError(f"network error: {e}") from e

        if resp.status_code == 413 or (resp.status_code == 400 and "context_length" in resp.text):
            raise ContextOverflowError(f"endpoint rejected prompt length: {resp.text[:200]}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise LlmNetworkError(f"transient endpoint error {resp.status_code}")
        if resp.status_code >= 400:
            raise LlmResponseError(f"endpoint error {resp.status_code}: {resp.text[:200]}")

        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise LlmResponseError("response is not a chat completion") from e
        if not isinstance(content, str):
            raise LlmResponseError("chat completion has no text content")
        return content


class MockRule(BaseModel):
    contains: str
    response: str


class MockScript(BaseModel):
    """
    Canned answers: the first rule whose text occurs in the query wins,
    otherwise responses are returned in order, cycling.
    """
    responses: list[str] = []
    rules: list[MockRule] = []


def load_mock_script(path: str | Path) -> MockScript:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, list):
        data = {"responses": data}
    return MockScript.model_validate(data)


class ScriptedBackend:
    name = BackendKind.MOCK.value
    supports_concurrency = False

    def __init__(self, script: MockScript):
        self.script = script
        self._calls = 0
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        query = request.prompt.user_text.lower()
        for rule in self.script.rules:
            if rule.contains.lower() in query:
                return rule.response

        if not self.script.responses:
            raise LlmResponseError("mock script has no response for this query")
        with self._lock:
            index = self._calls % len(self.script.responses)
            self._calls += 1
        return self.script.responses[index]


_INFERRED_QUERY = {
    QueryCategory.ON_TOP_OF: "Decide whether the {a} is located on top of the {b}.",
    QueryCategory.SIZE_COMPARE: "Compare the sizes of the {a} and the {b} and name the bigger one.",
    QueryCategory.CONTAINMENT: "Decide whether the {a} is large enough to contain the {b}.",
    QueryCategory.RELATIVE_POSITION: "Describe where the {a} is with respect to the {b}.",
}


def _fmt(values: Sequence[float]) -> str:
    return "[" + ", ".join(f"{round(v, 3):g}" for v in values) + "]"


def _explain(answer: OracleAnswer, a: ObjectNode, b: ObjectNode) -> str:
    category = answer.query.category
    ev = answer.evidence
    if category == QueryCategory.ON_TOP_OF:
        overlap = "overlap" if ev["footprints_overlap"] else "do not overlap"
        return (
            f"The bbox_center of the {a.label()} is {_fmt(ev['subject_center'])} and of the "
            f"{b.label()} is {_fmt(ev['object_center'])}. Their footprints in x and y {overlap}, "
            f"and the bottom of the {a.object_tag} is {abs(ev['vertical_gap']):.3g} away from the "
            f"top of the {b.object_tag} in z, which is height."
        )
    if category == QueryCategory.SIZE_COMPARE:
        return (
            f"The bbox_extent of the {a.label()} is {_fmt(ev['subject_extent'])} and of the "
            f"{b.label()} is {_fmt(ev['object_extent'])}, giving volumes of "
            f"{ev['subject_volume']:.3g} and {ev['object_volume']:.3g}."
        )
    if category == QueryCategory.CONTAINMENT:
        return (
            f"Sorted by size, the sides of the {a.label()} are {_fmt(ev['subject_sorted_extent'])} "
            f"and those of the {b.label()} are {_fmt(ev['object_sorted_extent'])}; containment "
            f"needs every side of the inner box to be strictly smaller."
        )
    return (
        f"The bbox_center of the {a.label()} is {_fmt(ev['subject_center'])} and of the "
        f"{b.label()} is {_fmt(ev['object_center'])}. Looking at x, y and z separately the "
        f"offset is {_fmt(ev['delta'])}, a distance of {ev['distance']:.3g}."
    )


def _declined(query: StructuredQuery) -> ParsedResponse:
    return ParsedResponse(
        inferred_query=query.text or f"A {query.category.value} query.",
        relevant_object_ids=(),
        relevance_reason="The scene description contains no objects.",
        final_text="The scene contains no objects that answer the query.",
        explanation="With an empty scene there is nothing to ground an answer to.",
    )


def oracle_backed_mock(
    scene: SceneGraph,
    query: StructuredQuery,
    cfg: OracleConfig | None = None,
) -> str:
    """
    Renders the oracle's answer in the five-step output format, so the whole
    pipeline can run without a network.
    """
    if len(scene) == 0:
        return render_response(_declined(query))

    answer = answer_query_deterministic(scene, query, cfg or OracleConfig())
    if not answer.supported:
        raise UnsupportedCategoryError(query.category.value)

    a = scene.node(query.subject_id)
    b = scene.node(query.object_id)

    final_text = answer.summary
    if answer.verdict is not None:
        final_text = f"{'Yes' if answer.verdict else 'No'}. {answer.summary}"

    resp = ParsedResponse(
        inferred_query=_INFERRED_QUERY[query.category].format(a=a.label(), b=b.label()),
        relevant_object_ids=(a.id, b.id),
        relevance_reason=f"The query names the {a.label()} and the {b.label()}; both are needed to answer it.",
        final_text=final_text,
        final_object_tag=answer.answer_object_tag or "",
        final_object_id=answer.answer_object_id,
        final_verdict=answer.verdict,
        final_relations=answer.relations,
        explanation=_explain(answer, a, b),
    )
    return render_response(resp)


class OracleBackend:
    name = BackendKind.ORACLE.value
    supports_concurrency = False

    def __init__(self, cfg: OracleConfig | None = None):
        self.cfg = cfg or OracleConfig()

    def complete(self, request: CompletionRequest) -> str:
        if request.scene is None:
            raise LlmResponseError("oracle backend needs the scene")
        query = request.structured_query or interpret_query(request.scene, request.prompt.user_text)
        return oracle_backed_mock(request.scene, query, self.cfg)


class LlmClient:
    """
    Sends requests to a backend, retrying network failures with exponential
    backoff. Other errors are raised immediately.
    """

    def __init__(
        self,
        backend: ChatBackend,
        cfg: LlmConfig | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.cfg = cfg or LlmConfig()
        self._sleep = sleep

    def close(self) -> None:
        close = getattr(self.backend, "close", None)
        if close is not None:
            close()

    def complete(self, request: CompletionRequest) -> str:
        attempts = self.cfg.max_retries + 1
        for attempt in range(attempts):
            try:
                return self.backend.complete(request)
            except LlmError as e:
                if not e.retryable or attempt == attempts - 1:
                    raise
                delay = self.cfg.backoff_seconds * 2 ** attempt
                logger.warning(
                    "Attempt %d/%d failed (%s); retrying in %.2fs", attempt + 1, attempts, e, delay,
                )
                self._sleep(delay)
        raise AssertionError("unreachable")

    def complete_many(self, requests: Sequence[CompletionRequest]) -> list[str | SceneGptError]:
        """
        Completes every request, keeping submission order. Failures are
        returned in place of the text instead of aborting the batch.
        """
        def run(request: CompletionRequest) -> str | SceneGptError:
            try:
                return self.complete(request)
            except SceneGptError as e:
                return e

        if not self.backend.supports_concurrency or self.cfg.concurrency == 1:
            return [run(request) for request in requests]
        with ThreadPoolExecutor(max_workers=self.cfg.concurrency) as pool:
            return list(pool.map(run, requests))


def make_backend(
    kind: BackendKind | str,
    llm_cfg: LlmConfig,
    oracle_cfg: OracleConfig | None = None,
    mock_script: MockScript | None = None,
    environ: Mapping[str, str] | None = None,
    http_client: httpx.Client | None = None,
) -> ChatBackend:
    kind = BackendKind(kind)
    if kind == BackendKind.LIVE:
        return HttpChatBackend(llm_cfg, http_client=http_client, environ=environ)
    if kind == BackendKind.MOCK:
        return ScriptedBackend(mock_script or MockScript())
    return OracleBackend(oracle_cfg)
