"""Run configuration: JSON file + command-line overrides -> live backends.

Precedence is defaults < config file < explicit overrides. The seed is the
one mandatory field; everything else has a sensible offline default except
the policy, which must be either a real endpoint or a mock script.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .codeexec import MockExecutor, ProcessExecutor
from .errors import ConfigError, ValidationError
from .generate import ChatCompletionsBackend, MockScriptBackend
from .rewards import PrmEndpoint, Scorer, ScriptedReward
from .rules import RULE_NAMES, RuleSet
from .search import SearchConfig

REWARD_MODES = ("prm", "llm", "mock")


@dataclass(frozen=True)
class BackendSettings:
    policy_endpoint: str | None = None
    policy_model: str = "default"
    mock_policy: str | None = None
    reward: str = "mock"
    prm_endpoint: str | None = None
    mock_prm: str | None = None
    timeout: float = 120.0
    max_retries: int = 3
    retry_backoff: float = 0.25

    def __post_init__(self):
        if self.reward not in REWARD_MODES:
            raise ConfigError(f"reward must be one of {REWARD_MODES}, got {self.reward!r}")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be >= 1")
        if self.retry_backoff < 0 or self.timeout <= 0:
            raise ConfigError("timeout must be > 0 and retry_backoff >= 0")


@dataclass(frozen=True)
class SandboxSettings:
    mock_exec: str | None = None
    runner_cmd: tuple[str, ...] = ()
    exec_timeout: float = 10.0

    def __post_init__(self):
        if self.exec_timeout <= 0:
            raise ConfigError("exec_timeout must be > 0")
        if self.mock_exec and self.runner_cmd:
            raise ConfigError("give either mock_exec or runner_cmd, not both")


@dataclass(frozen=True)
class OutputSettings:
    out_dir: str | None = None
    trace_dir: str | None = None
    resume: bool = False


@dataclass(frozen=True)
class RunConfig:
    seed: int
    k: int = 8
    m: int = 3
    d_max: int = 8
    c_uct: float = 1.0
    rules: tuple[str, ...] = RULE_NAMES
    strict_paper_uct: bool = False
    temperature: float = 0.8
    max_step_tokens: int = 1024
    backends: BackendSettings = field(default_factory=BackendSettings)
    sandbox: SandboxSettings = field(default_factory=SandboxSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            seed=self.seed,
            k=self.k,
            m=self.m,
            d_max=self.d_max,
            c_uct=self.c_uct,
            ruleset=RuleSet.from_names(self.rules),
            strict_paper_uct=self.strict_paper_uct,
            temperature=self.temperature,
            max_step_tokens=self.max_step_tokens,
            exec_timeout=self.sandbox.exec_timeout,
        )


def parse_rules(value) -> tuple[str, ...]:
    """Accept 'all', 'none', a comma-joined string, or a list of rule names."""
    if value is None:
        return RULE_NAMES
    if isinstance(value, str):
        if value == "all":
            return RULE_NAMES
        if value == "none":
            return ()
        value = [part.strip() for part in value.split(",") if part.strip()]
    names = tuple(value)
    try:
        RuleSet.from_names(names)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return names


_SECTION_TYPES = {
    "backends": BackendSettings,
    "sandbox": SandboxSettings,
    "output": OutputSettings,
}
_TOP_KEYS = {
    "seed",
    "k",
    "m",
    "d_max",
    "c_uct",
    "rules",
    "strict_paper_uct",
    "temperature",
    "max_step_tokens",
}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r} section: {sorted(unknown)}")
    if "runner_cmd" in data and data["runner_cmd"] is not None:
        data = dict(data, runner_cmd=tuple(data["runner_cmd"]))
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"bad {section!r} section: {e}") from e


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus override pairs.

    Override keys use the flat CLI spelling; None values mean "not given"
    and fall through to the file value or the default.
    """
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        unknown = set(doc) - _TOP_KEYS - set(_SECTION_TYPES)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    sections = {
        name: _build_section(cls, dict(doc.get(name) or {}), name)
        for name, cls in _SECTION_TYPES.items()
    }
    top = {key: doc[key] for key in _TOP_KEYS if key in doc}
    if "rules" in top:
        top["rules"] = parse_rules(top["rules"])

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    section_fields = {
        name: {f.name for f in fields(cls)} for name, cls in _SECTION_TYPES.items()
    }
    for key, value in overrides.items():
        if key in _TOP_KEYS:
            top[key] = parse_rules(value) if key == "rules" else value
            continue
        placed = False
        for name, known in section_fields.items():
            if key in known:
                if key == "runner_cmd":
                    value = tuple(value)
                sections[name] = replace(sections[name], **{key: value})
                placed = True
                break
        if not placed:
            raise ConfigError(f"unknown override {key!r}")

    if "seed" not in top:
        raise ConfigError("seed is required (config file or --seed)")
    if not isinstance(top["seed"], int) or isinstance(top["seed"], bool):
        raise ConfigError(f"seed must be an integer, got {top['seed']!r}")

    try:
        config = RunConfig(
            backends=sections["backends"],
            sandbox=sections["sandbox"],
            output=sections["output"],
            **top,
        )
        config.search_config()  # validate the search parameters eagerly
    except (TypeError, ValidationError) as e:
        raise ConfigError(str(e)) from e
    return config


# ---------------------------------------------------------- backend assembly


def build_policy(config: RunConfig):
    b = config.backends
    if (b.policy_endpoint is None) == (b.mock_policy is None):
        raise ConfigError("exactly one of policy_endpoint / mock_policy is required")
    if b.mock_policy is not None:
        return MockScriptBackend.from_file(b.mock_policy)
    return ChatCompletionsBackend(
        url=b.policy_endpoint,
        model=b.policy_model,
        timeout=b.timeout,
        max_retries=b.max_retries,
        backoff=b.retry_backoff,
    )


def build_scorer(config: RunConfig, policy) -> Scorer:
    b = config.backends
    if b.reward == "prm":
        if b.prm_endpoint is None:
            raise ConfigError("reward mode 'prm' needs prm_endpoint")
        return Scorer(
            backend=PrmEndpoint(
                url=b.prm_endpoint,
                max_retries=b.max_retries,
                backoff=b.retry_backoff,
            )
        )
    if b.reward == "llm":
        return Scorer(self_reward_policy=policy)
    if b.mock_prm is not None:
        return Scorer(backend=ScriptedReward.from_file(b.mock_prm))
    return Scorer(backend=ScriptedReward())


def build_executor(config: RunConfig):
    s = config.sandbox
    if s.mock_exec is not None:
        return MockExecutor.from_file(s.mock_exec)
    if s.runner_cmd:
        return ProcessExecutor(cmd=list(s.runner_cmd))
    return None


def build_all(config: RunConfig):
    """(policy, scorer, executor) ready for the search engine."""
    policy = build_policy(config)
    return policy, build_scorer(config, policy), build_executor(config)
