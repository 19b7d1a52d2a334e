"""Reward backends: PRM endpoint, scripted mock, and LLM self-reward.

Q(s, a) and V(s) are the positive-label probabilities of a two-label
process reward model, obtained by a numerically stable softmax over the
(positive, negative) logits. The step reward is their sum, in [0, 2].
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Protocol

import httpx

from ._http import post_with_retries
from .errors import ConfigError, NumericError, ProtocolError, ScoringError, TransportError
from .mdp import Action, ActionKind, ReasoningState, render_state

log = logging.getLogger(__name__)

DEFAULT_P_Q = "Is this step a correct and useful continuation?"
DEFAULT_P_V = "Is this reasoning state on a correct path?"

PRM_LABELS = ["positive", "negative"]


class RewardBackendKind(Enum):
    PRM_ENDPOINT = "prm_endpoint"
    LLM_SELF = "llm_self"
    SCRIPTED_MOCK = "scripted_mock"


@dataclass(frozen=True)
class RewardScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ScoringError(f"reward value {self.value} outside [0, 1]")


@dataclass(frozen=True)
class LogitPair:
    positive: float
    negative: float

    def __post_init__(self):
        if not (math.isfinite(self.positive) and math.isfinite(self.negative)):
            raise NumericError(
                f"non-finite logits ({self.positive}, {self.negative})"
            )


def softmax_pos(logits: LogitPair) -> RewardScore:
    """exp(pos) / (exp(pos) + exp(neg)), stabilized by subtracting the max."""
    m = max(logits.positive, logits.negative)
    ep = math.exp(logits.positive - m)
    en = math.exp(logits.negative - m)
    return RewardScore(ep / (ep + en))


def step_reward(q: RewardScore, v: RewardScore) -> float:
    """r_t = Q(s_{t-1}, a_t) + V(s_t), in [0, 2]."""
    return q.value + v.value


class LogitBackend(Protocol):
    def logits(self, text: str, *, kind: ActionKind | None = None) -> LogitPair: ...


def score_action(
    backend: LogitBackend, p_q: str, state: ReasoningState, action: Action
) -> RewardScore:
    """Q(s, a): softmax-positive of the backend logits for [p_q, s, a]."""
    text = "\n\n".join([p_q, render_state(state), action.prompt_text])
    return softmax_pos(backend.logits(text, kind=action.kind))


def score_state(backend: LogitBackend, p_v: str, state: ReasoningState) -> RewardScore:
    """V(s): as score_action but action-agnostic."""
    text = "\n\n".join([p_v, render_state(state)])
    return softmax_pos(backend.logits(text, kind=None))


# -------------------------------------------------------------- PRM endpoint


@dataclass
class PrmEndpoint:
    """Two-label PRM service.

    Wire contract: POST {"prompt": <text>, "labels": ["positive", "negative"]}
    to `url`; the response is {"logits": [positive, negative]}.
    """

    url: str
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.25
    transport: httpx.BaseTransport | None = None

    def __post_init__(self):
        self._client = httpx.Client(transport=self.transport, timeout=self.timeout)

    def close(self):
        self._client.close()

    def logits(self, text: str, *, kind: ActionKind | None = None) -> LogitPair:
        body = {"prompt": text, "labels": PRM_LABELS}
        resp = post_with_retries(
            self._client, self.url, body, self.max_retries, self.backoff
        )
        try:
            pair = resp["logits"]
            positive, negative = float(pair[0]), float(pair[1])
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ProtocolError(f"malformed PRM response from {self.url}: {e}") from e
        return LogitPair(positive, negative)


# ------------------------------------------------------------- scripted mock


@dataclass
class ScriptedReward:
    """Deterministic logit source for offline runs.

    Rules are matched first to last; a rule applies when its `when_kind`
    (action kind name) and/or `when_contains` (substring of the scored text)
    conditions all hold. Falls back to `default`.
    """

    default: LogitPair = field(default_factory=lambda: LogitPair(0.0, 0.0))
    rules: tuple[tuple[str | None, str | None, LogitPair], ...] = ()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedReward":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read reward script {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"reward script {path} is not valid JSON: {e}") from e
        return cls.from_dict(data, origin=str(path))

    @classmethod
    def from_dict(cls, data: dict, origin: str = "<dict>") -> "ScriptedReward":
        try:
            default = LogitPair(*map(float, data.get("default", (0.0, 0.0))))
            rules = []
            for rule in data.get("rules", ()):
                pair = LogitPair(*map(float, rule["logits"]))
                rules.append((rule.get("when_kind"), rule.get("when_contains"), pair))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed reward script {origin}: {e}") from e
        return cls(default=default, rules=tuple(rules))

    def logits(self, text: str, *, kind: ActionKind | None = None) -> LogitPair:
        kind_name = kind.value if kind is not None else None
        for when_kind, when_contains, pair in self.rules:
            if when_kind is not None and when_kind != kind_name:
                continue
            if when_contains is not None and when_contains not in text:
                continue
            return pair
        return self.default


# ----------------------------------------------------------- LLM self-reward

_RATING_RE = re.compile(r"\b(10|[0-9])\b")

_SELF_REWARD_QUESTION = (
    "Rate the quality of the latest reasoning step on a scale from 0 to 10. "
    "Reply with a single integer."
)


def llm_self_reward(
    policy_backend: Any,
    state: ReasoningState,
    action: Action | None = None,
    *,
    max_attempts: int = 3,
) -> RewardScore:
    """Use the policy model itself as the reward model.

    Preferred mode: the backend exposes yes/no token likelihoods for a fixed
    verification question; the score is the normalized yes mass. Fallback:
    ask for a 0-10 integer rating and divide by 10.
    """
    context = render_state(state)
    if action is not None:
        context = f"{context}\n\n{action.prompt_text}"

    likelihood_fn = getattr(policy_backend, "yes_no_likelihood", None)
    if callable(likelihood_fn):
        question = DEFAULT_P_Q if action is not None else DEFAULT_P_V
        yes, no = likelihood_fn(question, context)
        total = yes + no
        if total <= 0:
            raise ScoringError("yes/no likelihoods are both zero")
        return RewardScore(yes / total)

    for attempt in range(max_attempts):
        text = policy_backend.complete_text(
            system=_SELF_REWARD_QUESTION, user=context, temperature=0.0,
            max_tokens=8, seed=attempt,
        )
        m = _RATING_RE.search(text)
        if m:
            return RewardScore(int(m.group(1)) / 10.0)
        log.warning("unparseable self-reward rating %r (attempt %d)", text, attempt + 1)
    raise ScoringError(
        f"no parseable 0-10 rating after {max_attempts} attempts"
    )


# ----------------------------------------------------------------- the scorer

_NEUTRAL = 0.5


@dataclass
class Scorer:
    """Uniform Q/V scoring front used by the search engine.

    Wraps either a logit backend (PRM endpoint or scripted mock) or the
    policy backend in self-reward mode. Scoring failures degrade to the
    maximum-entropy neutral value 0.5 and are logged, never fatal.
    """

    backend: Any = None
    self_reward_policy: Any = None
    p_q: str = DEFAULT_P_Q
    p_v: str = DEFAULT_P_V

    def __post_init__(self):
        if (self.backend is None) == (self.self_reward_policy is None):
            raise ConfigError("exactly one of backend/self_reward_policy required")

    def q(self, state: ReasoningState, action: Action) -> RewardScore:
        try:
            if self.backend is not None:
                return score_action(self.backend, self.p_q, state, action)
            return llm_self_reward(self.self_reward_policy, state, action)
        except (ScoringError, TransportError, ProtocolError) as e:
            log.warning("Q scoring failed, substituting neutral 0.5: %s", e)
            return RewardScore(_NEUTRAL)

    def v(self, state: ReasoningState) -> RewardScore:
        try:
            if self.backend is not None:
                return score_state(self.backend, self.p_v, state)
            return llm_self_reward(self.self_reward_policy, state, None)
        except (ScoringError, TransportError, ProtocolError) as e:
            log.warning("V scoring failed, substituting neutral 0.5: %s", e)
            return RewardScore(_NEUTRAL)
