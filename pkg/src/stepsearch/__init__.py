"""Constrained tree search over stepwise LLM reasoning actions.

Four action kinds (understand, code, reflect, summary) are arranged by a
toggleable rule engine into legal partial orders; a UCT search expands the
best-scored actions and candidate continuations, executes generated code in
a sandbox, and majority-votes the terminal answers. A companion simulator
checks the posterior-concentration story behind the vote empirically.
"""

from __future__ import annotations

from .actions import ActionCatalog, catalog_default, catalog_from_file, render_prompt
from .answers import grade, last_boxed_span, normalize_answer
from .codeexec import (
    ExecutionResult,
    MockExecutor,
    ProcessExecutor,
    extract_code,
    format_feedback,
)
from .config import RunConfig, build_all, load_config
from .errors import (
    AssumptionViolation,
    ConfigError,
    DatasetError,
    RuleConflictError,
    SandboxError,
    ScoringError,
    SearchError,
    StepSearchError,
    TraceError,
    ValidationError,
)
from .evals import (
    DatasetRecord,
    RunReport,
    TraceWriter,
    load_dataset,
    read_trace,
    replay_tree,
    run_benchmark,
    tree_snapshot,
)
from .generate import ChatCompletionsBackend, GenerationRequest, MockScriptBackend
from .mdp import (
    ActionKind,
    AnswerFormat,
    Choice,
    ProblemInstance,
    ReasoningState,
    Step,
    Trajectory,
    init_state,
    render_state,
)
from .rewards import PrmEndpoint, Scorer, ScriptedReward, softmax_pos, step_reward
from .rules import RuleSet, legal_kinds, validate_trajectory
from .search import (
    SearchConfig,
    SearchEngine,
    SearchResult,
    aggregate_answers,
    run_search,
)
from .theory import (
    RedundancyModel,
    ThetaFamily,
    effective_information,
    error_bound,
    hellinger_sq,
    min_sample_size,
    posterior_error,
    run_decay_experiment,
    separation,
)

__version__ = "0.1.0"
