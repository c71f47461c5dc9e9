"""Provider-agnostic chat and embedding access with usage accounting.

One wire contract (chat-completion shaped requests) with pluggable
providers. The mock provider makes the whole pipeline runnable offline
and deterministically: identical inputs and seed give identical outputs,
so two pipeline runs produce byte-identical artifacts.

Model names are configuration values, never code constants.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass
from random import Random

import numpy as np

from .errors import ConfigError, GatewayError
from .textutils import split_sentences, squash_ws, token_count, tokenize

PURPOSES = frozenset(
    {"variant_gen", "assessment", "rag_answer", "ragas", "pair_judge"})

MOCK_EMBED_DIM = 48


@dataclass(frozen=True)
class ChatRequest:
    model_tag: str
    messages: tuple[dict, ...]  # {"role": ..., "content": ...}
    temperature: float | None = 0.0  # None = provider default
    max_output: int = 1024
    seed: int | None = None

    def prompt_text(self) -> str:
        return "\n".join(m["content"] for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_units: int
    output_units: int
    latency: float


@dataclass(frozen=True)
class CostLedgerEntry:
    purpose: str
    model_tag: str
    input_units: int
    output_units: int
    unit_cost_in: float
    unit_cost_out: float
    wall_seconds: float

    @property
    def cost(self) -> float:
        """Currency cost at the configured per-1000-unit rates."""
        return (self.input_units / 1000.0 * self.unit_cost_in
                + self.output_units / 1000.0 * self.unit_cost_out)


class TransportError(GatewayError):
    """Retryable network-level failure."""


class ProviderRefusal(GatewayError):
    """Non-retryable provider response; carries the raw payload."""

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


def user_message(content: str) -> tuple[dict, ...]:
    return ({"role": "user", "content": content},)


class Gateway:
    """Routes requests to providers, retries transport errors, keeps a ledger.

    ``provider_for`` maps model tags to provider objects; unmapped tags go
    to ``default_provider``. Models with an entry in ``costs`` (per 1000
    units, in/out) are reported in currency; all others in seconds.
    """

    def __init__(self, default_provider=None, provider_for=None, costs=None,
                 max_retries: int = 3, backoff_base: float = 1.0,
                 max_inflight: int = 4, sleep=time.sleep):
        self.default_provider = default_provider
        self.provider_for = dict(provider_for or {})
        self.costs = dict(costs or {})
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._ledger: list[CostLedgerEntry] = []
        self._ledger_lock = threading.Lock()
        self._slots: dict[int, threading.Semaphore] = {}
        self._max_inflight = max_inflight

    def _provider(self, model_tag: str):
        provider = self.provider_for.get(model_tag, self.default_provider)
        if provider is None:
            raise ConfigError(f"no provider configured for model {model_tag!r}")
        return provider

    def _slot(self, provider) -> threading.Semaphore:
        key = id(provider)
        if key not in self._slots:
            self._slots[key] = threading.Semaphore(self._max_inflight)
        return self._slots[key]

    def chat(self, request: ChatRequest, purpose: str) -> ChatResponse:
        if purpose not in PURPOSES:
            raise ConfigError(f"unknown purpose {purpose!r}")
        provider = self._provider(request.model_tag)
        last_error = None
        for attempt in range(self.max_retries):
            try:
                with self._slot(provider):
                    response = provider.chat(request)
                break
            except TransportError as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    self._sleep(self.backoff_base * 2 ** attempt)
        else:
            raise GatewayError(
                f"model {request.model_tag!r} failed after "
                f"{self.max_retries} attempts: {last_error}")

        cost_in, cost_out = self.costs.get(request.model_tag, (0.0, 0.0))
        entry = CostLedgerEntry(
            purpose=purpose, model_tag=request.model_tag,
            input_units=response.input_units, output_units=response.output_units,
            unit_cost_in=cost_in, unit_cost_out=cost_out,
            wall_seconds=response.latency)
        with self._ledger_lock:
            self._ledger.append(entry)
        return response

    def embed(self, model_tag: str, texts) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            return []
        provider = self._provider(model_tag)
        last_error = None
        for attempt in range(self.max_retries):
            try:
                with self._slot(provider):
                    return provider.embed(model_tag, texts)
            except TransportError as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    self._sleep(self.backoff_base * 2 ** attempt)
        raise GatewayError(
            f"embedding model {model_tag!r} failed after "
            f"{self.max_retries} attempts: {last_error}")

    @property
    def ledger(self) -> list[CostLedgerEntry]:
        with self._ledger_lock:
            return list(self._ledger)

    def cost_report(self, purpose: str | None = None) -> dict[str, dict]:
        """Per-model aggregates: currency for costed models, seconds otherwise."""
        return aggregate_cost_report(self.ledger, self.costs, purpose=purpose)


def aggregate_cost_report(entries, costs, purpose: str | None = None) -> dict[str, dict]:
    """Group ledger entries by model: currency when unit costs are
    configured for the model, wall seconds otherwise (the local-model case).
    """
    if purpose is not None:
        entries = [e for e in entries if e.purpose == purpose]
    by_model: dict[str, list[CostLedgerEntry]] = {}
    for e in entries:
        by_model.setdefault(e.model_tag, []).append(e)
    report: dict[str, dict] = {}
    for model_tag in sorted(by_model):
        group = by_model[model_tag]
        n = len(group)
        if model_tag in costs:
            total = sum(e.cost for e in group)
            report[model_tag] = {"count": n, "mean_cost": total / n,
                                 "total_cost": total}
        else:
            total = sum(e.wall_seconds for e in group)
            report[model_tag] = {"count": n, "mean_seconds": total / n,
                                 "total_seconds": total}
    return report


# ----------------------------------------------------------------------
# providers


class MockProvider:
    """Deterministic offline provider.

    Responses are a pure function of the prompt, the model tag, and the
    seed. The chat side recognizes the shipped prompt templates by their
    marker phrases and produces parseable, content-aware output: variant
    lists, graded relevance verdicts, context-proportional answers,
    verbatim sentence extractions, Yes/No verification, generated
    questions, and A/B preferences for the longer answer. Embeddings are
    seeded token-hash vectors, so texts sharing vocabulary embed close
    together.
    """

    def __init__(self, seed: int = 0, embed_dim: int = MOCK_EMBED_DIM):
        self.seed = seed
        self.embed_dim = embed_dim
        self._token_vecs: dict[str, np.ndarray] = {}
        self._cache_lock = threading.Lock()

    # -- chat ----------------------------------------------------------

    def chat(self, request: ChatRequest) -> ChatResponse:
        prompt = request.prompt_text()
        if "Question to rewrite:" in prompt:
            text = self._variants(prompt)
        elif "Rate the candidate" in prompt:
            text = self._assess(prompt, request.model_tag)
        elif "copy out the sentences" in prompt:
            text = self._extract_sentences(prompt)
        elif "standalone factual statements" in prompt:
            text = self._statements(prompt)
        elif "one line per statement" in prompt:
            text = self._verify(prompt)
        elif "questions that the answer" in prompt:
            text = self._questions(prompt)
        elif "Answer A:" in prompt and "Answer B:" in prompt:
            text = self._pair(prompt)
        elif "write a concise answer" in prompt:
            text = self._answer(prompt)
        else:
            text = f"mock:{_digest(prompt)}:{self.seed}"
        return ChatResponse(text=text, input_units=token_count(prompt),
                            output_units=token_count(text), latency=0.0)

    @staticmethod
    def _section(prompt: str, start: str, *ends: str) -> str:
        idx = prompt.find(start)
        if idx < 0:
            return ""
        begin = idx + len(start)
        stop = len(prompt)
        for end in ends:
            pos = prompt.find(end, begin)
            if 0 <= pos < stop:
                stop = pos
        return prompt[begin:stop].strip()

    def _variants(self, prompt: str) -> str:
        question = self._section(prompt, "Question to rewrite:")
        m = re.search(r"in (\d+) different ways", prompt)
        n = int(m.group(1)) if m else 5
        words = question.split() or ["topic"]
        suffixes = ["evidence", "studies", "research", "findings",
                    "analysis", "reports", "data", "review"]
        lines = []
        for i in range(n):
            shift = (i + 1) % len(words)
            rotated = " ".join(words[shift:] + words[:shift])
            lines.append(f"{rotated} {suffixes[i % len(suffixes)]}")
        return "\n".join(lines)

    def _assess(self, prompt: str, model_tag: str) -> str:
        topic = self._section(prompt, "Topic:", "Candidate:")
        item = self._section(prompt, "Candidate:", "Rate the candidate")
        topic_tokens = {t for t in tokenize(topic) if len(t) > 3}
        item_tokens = {t for t in tokenize(item) if len(t) > 3}
        ratio = (len(topic_tokens & item_tokens) / len(topic_tokens)
                 if topic_tokens else 0.0)
        if ratio >= 0.45:
            level = 3
        elif ratio >= 0.25:
            level = 2
        elif ratio >= 0.10:
            level = 1
        else:
            level = 0
        # Per-judge disagreement: occasionally shift by one level.
        rng = Random(f"{self.seed}:assess:{model_tag}:{_digest(topic + item)}")
        if rng.random() < 0.25:
            level = min(3, max(0, level + rng.choice([-1, 1])))
        return (f"The candidate shares a token overlap ratio of {ratio:.2f} "
                f"with the topic.\nFinal score: {level}")

    def _answer(self, prompt: str) -> str:
        context = self._section(prompt, "Material:")
        words = context.split()
        taken = words[5::9][:400]
        if not taken:
            return "No supporting material was provided."
        return "Based on the provided material, " + " ".join(taken) + "."

    def _extract_sentences(self, prompt: str) -> str:
        context = self._section(prompt, "Context:")
        sentences = split_sentences(context)
        chosen = [squash_ws(s) for s in sentences[::2]]
        if not chosen:
            return "Insufficient Information"
        return "\n".join(chosen)

    def _statements(self, prompt: str) -> str:
        answer = self._section(prompt, "Answer:")
        words = answer.split()
        statements = [" ".join(words[i:i + 12])
                      for i in range(0, len(words), 12)][:8]
        return "\n".join(s for s in statements if s)

    def _verify(self, prompt: str) -> str:
        context = self._section(prompt, "Context:", "Statements:")
        statements = re.findall(r"^\d+\.\s*(.+)$",
                                self._section(prompt, "Statements:"), re.M)
        context_tokens = set(tokenize(context))
        lines = []
        for i, statement in enumerate(statements, start=1):
            tokens = tokenize(statement)
            support = (sum(t in context_tokens for t in tokens) / len(tokens)
                       if tokens else 0.0)
            verdict = "Yes" if support >= 0.6 else "No"
            rng = Random(f"{self.seed}:verify:{_digest(statement)}")
            if rng.random() < 0.1:
                verdict = "No"
            lines.append(f"{i}. {verdict}")
        return "\n".join(lines)

    def _questions(self, prompt: str) -> str:
        m = re.search(r"Write (\d+) different questions", prompt)
        n = int(m.group(1)) if m else 5
        answer = self._section(prompt, "Answer:")
        words = answer.split()
        lines = []
        for i in range(n):
            fragment = " ".join(words[i * 3:i * 3 + 6]) or f"point {i + 1}"
            lines.append(f"What does the material report about {fragment}?")
        return "\n".join(lines)

    def _pair(self, prompt: str) -> str:
        a = self._section(prompt, "Answer A:", "Answer B:")
        b = self._section(prompt, "Answer B:", "Reply on the last line")
        winner = "A" if len(a) >= len(b) else "B"
        return (f"Answer {winner} covers the topic in more depth and detail.\n"
                f"Verdict: {winner}")

    # -- embeddings ----------------------------------------------------

    def _token_vec(self, token: str) -> np.ndarray:
        with self._cache_lock:
            vec = self._token_vecs.get(token)
            if vec is None:
                rng = Random(f"{self.seed}:tok:{token}")
                vec = np.array([rng.gauss(0.0, 1.0)
                                for _ in range(self.embed_dim)])
                self._token_vecs[token] = vec
        return vec

    def embed(self, model_tag: str, texts) -> list[np.ndarray]:
        out = []
        for text in texts:
            tokens = tokenize(text)
            if not tokens:
                vec = np.zeros(self.embed_dim)
                vec[0] = 1.0
            else:
                vec = np.sum([self._token_vec(t) for t in tokens], axis=0)
                norm = np.linalg.norm(vec)
                if norm == 0.0:
                    vec = np.zeros(self.embed_dim)
                    vec[0] = 1.0
                else:
                    vec = vec / norm
            out.append(vec)
        return out


class ScriptedProvider(MockProvider):
    """Replays a fixed sequence of chat responses (for tests)."""

    def __init__(self, responses, seed: int = 0):
        super().__init__(seed=seed)
        self._responses = list(responses)

    def chat(self, request: ChatRequest) -> ChatResponse:
        if not self._responses:
            raise GatewayError("scripted provider exhausted")
        item = self._responses.pop(0)
        if isinstance(item, Exception):
            raise item
        prompt = request.prompt_text()
        return ChatResponse(text=item, input_units=token_count(prompt),
                            output_units=token_count(item), latency=0.0)


class HttpChatProvider:
    """Chat-completions style HTTP provider (OpenAI-compatible wire shape).

    API keys come from the environment variable named in the config, never
    from config values themselves.
    """

    def __init__(self, base_url: str, api_key_env: str | None = None,
                 session=None, timeout: float = 60.0):
        import requests

        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        import requests

        started = time.monotonic()
        try:
            resp = self._session.post(f"{self.base_url}{path}", json=payload,
                                      headers=self._headers(),
                                      timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        elapsed = time.monotonic() - started
        if resp.status_code in (429, 500, 502, 503, 504):
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderRefusal(f"HTTP {resp.status_code}", payload=resp.text)
        data = resp.json()
        data["_elapsed"] = elapsed
        return data

    def chat(self, request: ChatRequest) -> ChatResponse:
        payload = {"model": request.model_tag,
                   "messages": list(request.messages),
                   "max_tokens": request.max_output}
        if request.temperature is not None:
            payload["temperature"] = request.temperature
        if request.seed is not None:
            payload["seed"] = request.seed
        data = self._post("/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderRefusal("malformed chat response", payload=data) from None
        usage = data.get("usage", {})
        return ChatResponse(
            text=text,
            input_units=int(usage.get("prompt_tokens", 0)),
            output_units=int(usage.get("completion_tokens", 0)),
            latency=float(data["_elapsed"]))

    def embed(self, model_tag: str, texts) -> list[np.ndarray]:
        data = self._post("/embeddings", {"model": model_tag,
                                          "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda r: r["index"])
            return [np.asarray(r["embedding"], dtype=float) for r in rows]
        except (KeyError, TypeError):
            raise ProviderRefusal("malformed embedding response",
                                  payload=data) from None


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
