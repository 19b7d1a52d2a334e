"""Policy-model abstraction: live chat-completions backend and scripted mock."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from ._http import post_with_retries
from .actions import RenderedPrompt
from .errors import ConfigError, GenerationError, ProtocolError
from .mdp import ActionKind

log = logging.getLogger(__name__)

THINK_CLOSE = "</think>"

DEFAULT_N_CANDIDATES = 3
DEFAULT_TEMPERATURE = 0.8
DEFAULT_MAX_STEP_TOKENS = 1024


@dataclass(frozen=True)
class GenerationRequest:
    rendered: RenderedPrompt
    n_candidates: int = DEFAULT_N_CANDIDATES
    temperature: float = DEFAULT_TEMPERATURE
    max_step_tokens: int = DEFAULT_MAX_STEP_TOKENS
    seed: int = 0

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ConfigError(f"n_candidates must be >= 1, got {self.n_candidates}")
        if self.max_step_tokens < 1:
            raise ConfigError(f"max_step_tokens must be >= 1, got {self.max_step_tokens}")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class Candidate:
    text: str
    backend_meta: str | None = None

    def __post_init__(self):
        if not self.text:
            raise GenerationError("candidate with empty text")


@dataclass(frozen=True)
class StepContext:
    """What the mock needs to key on: which problem, how deep, which kind."""

    problem_id: str
    depth: int
    action_kind: ActionKind


class PolicyBackend(Protocol):
    def generate(self, request: GenerationRequest, ctx: StepContext) -> list[Candidate]: ...

    def complete_text(
        self, system: str, user: str, *, temperature: float, max_tokens: int, seed: int
    ) -> str: ...


def generate_candidates(
    backend: PolicyBackend, request: GenerationRequest, ctx: StepContext
) -> list[Candidate]:
    """Request m candidate continuations; at least one must come back."""
    out = backend.generate(request, ctx)
    if not out:
        raise GenerationError(
            f"backend produced no candidates for {ctx.problem_id} at depth {ctx.depth}"
        )
    if len(out) < request.n_candidates:
        log.warning(
            "backend returned %d/%d candidates for %s at depth %d",
            len(out), request.n_candidates, ctx.problem_id, ctx.depth,
        )
    return out


def _truncate_at_think_close(text: str) -> str:
    idx = text.find(THINK_CLOSE)
    return text if idx < 0 else text[:idx]


# ----------------------------------------------------------------- mock side


@dataclass
class MockScriptBackend:
    """Canned continuations keyed by (problem id, depth, action kind).

    Script shape: {problem_id | "*": {depth | "*": {kind: [texts...]}}}.
    Exact keys win over wildcards; entries cycle to fill m candidates, so the
    output is byte-deterministic regardless of seed or temperature. An
    optional top-level "self_reward" list feeds complete_text.
    """

    script: dict
    self_reward_texts: tuple[str, ...] = ()
    _complete_calls: int = field(default=0, repr=False)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockScriptBackend":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read mock script {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"mock script {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "MockScriptBackend":
        if not isinstance(data, dict):
            raise ConfigError("mock script must be an object")
        script = {k: v for k, v in data.items() if k != "self_reward"}
        ratings = tuple(data.get("self_reward", ()))
        return cls(script=script, self_reward_texts=ratings)

    def _lookup(self, ctx: StepContext) -> list[str]:
        kind = ctx.action_kind.value
        for pid in (ctx.problem_id, "*"):
            by_depth = self.script.get(pid)
            if by_depth is None:
                continue
            for depth in (str(ctx.depth), "*"):
                by_kind = by_depth.get(depth)
                if by_kind is None:
                    continue
                if kind in by_kind:
                    return list(by_kind[kind])
        raise GenerationError(
            f"mock script has no entry for ({ctx.problem_id!r}, depth {ctx.depth}, "
            f"{kind!r})"
        )

    def generate(self, request: GenerationRequest, ctx: StepContext) -> list[Candidate]:
        texts = self._lookup(ctx)
        if not texts:
            raise GenerationError(
                f"mock script entry for ({ctx.problem_id!r}, depth {ctx.depth}, "
                f"{ctx.action_kind.value!r}) is empty"
            )
        return [
            Candidate(text=texts[i % len(texts)]) for i in range(request.n_candidates)
        ]

    def complete_text(self, system, user, *, temperature=0.0, max_tokens=8, seed=0):
        if not self.self_reward_texts:
            return "5"
        text = self.self_reward_texts[self._complete_calls % len(self.self_reward_texts)]
        self._complete_calls += 1
        return text


# ----------------------------------------------------------------- live side


@dataclass
class ChatCompletionsBackend:
    """OpenAI-compatible chat-completions client.

    Wire contract per request: {model, messages, n, temperature, max_tokens,
    seed}; candidates are choices[i].message.content. Auth token comes from
    the environment variable named by api_key_env, when set.
    """

    url: str
    model: str
    api_key_env: str = "POLICY_API_KEY"
    timeout: float = 120.0
    max_retries: int = 3
    backoff: float = 0.25
    transport: httpx.BaseTransport | None = None

    def __post_init__(self):
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            transport=self.transport, timeout=self.timeout, headers=headers
        )

    def close(self):
        self._client.close()

    def _chat(self, system: str, user: str, *, n: int, temperature: float,
              max_tokens: int, seed: int) -> list[str]:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "n": n,
            "temperature": temperature,
            "max_tokens": max_tokens,
            "seed": seed,
        }
        resp = post_with_retries(self._client, self.url, body, self.max_retries, self.backoff)
        try:
            return [choice["message"]["content"] for choice in resp["choices"]]
        except (KeyError, TypeError) as e:
            raise ProtocolError(f"malformed chat response from {self.url}: {e}") from e

    def generate(self, request: GenerationRequest, ctx: StepContext) -> list[Candidate]:
        contents = self._chat(
            request.rendered.system_text,
            request.rendered.user_text,
            n=request.n_candidates,
            temperature=request.temperature,
            max_tokens=request.max_step_tokens,
            seed=request.seed,
        )
        out = []
        for content in contents:
            text = _truncate_at_think_close(content or "").strip()
            if text:
                out.append(Candidate(text=text))
            else:
                log.warning("dropping empty candidate from %s", self.url)
        if not out:
            raise GenerationError(f"all candidates from {self.url} were empty")
        return out

    def complete_text(self, system, user, *, temperature=0.0, max_tokens=8, seed=0):
        contents = self._chat(
            system, user, n=1, temperature=temperature, max_tokens=max_tokens, seed=seed
        )
        return contents[0] if contents else ""
