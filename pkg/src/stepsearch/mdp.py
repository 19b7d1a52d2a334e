"""Core data model: problems, actions, steps, states, trajectories.

States are immutable value snapshots; append_step returns a new state and
never touches the old one, so sibling branches in the search tree can share
a common prefix without aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .answers import last_boxed_span, normalize_answer
from .errors import DepthLimitError, StateError, ValidationError

_ALLOWED_CHOICE_LABELS = ("A", "B", "C", "D", "E")


class AnswerFormat(Enum):
    FREE_FORM = "free_form"
    MULTIPLE_CHOICE = "multiple_choice"


class ActionKind(Enum):
    """The four disjoint subsets of the action space."""

    UNDERSTAND = "understand"
    CODE = "code"
    REFLECT = "reflect"
    SUMMARY = "summary"


KIND_ORDER: tuple[ActionKind, ...] = (
    ActionKind.UNDERSTAND,
    ActionKind.CODE,
    ActionKind.REFLECT,
    ActionKind.SUMMARY,
)


@dataclass(frozen=True)
class Choice:
    label: str
    text: str


@dataclass(frozen=True)
class ProblemInstance:
    id: str
    statement: str
    answer_format: AnswerFormat = AnswerFormat.FREE_FORM
    choices: tuple[Choice, ...] | None = None
    gold_answer: str | None = None

    def __post_init__(self):
        if not self.statement.strip():
            raise ValidationError(f"problem {self.id!r} has an empty statement")
        mc = self.answer_format is AnswerFormat.MULTIPLE_CHOICE
        if mc != (self.choices is not None):
            raise ValidationError(
                f"problem {self.id!r}: choices must be present iff multiple_choice"
            )
        if self.choices is not None:
            labels = [c.label for c in self.choices]
            if len(set(labels)) != len(labels):
                raise ValidationError(f"problem {self.id!r}: duplicate choice labels")
            for label in labels:
                if label not in _ALLOWED_CHOICE_LABELS:
                    raise ValidationError(
                        f"problem {self.id!r}: choice label {label!r} not in A..E"
                    )


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    template_id: str
    prompt_text: str

    def __post_init__(self):
        if not self.prompt_text:
            raise ValidationError(f"action {self.template_id!r} has empty prompt_text")


@dataclass(frozen=True)
class Step:
    action: Action
    generated_text: str
    exec_feedback: str | None = None
    step_reward: float | None = None

    def __post_init__(self):
        if not self.generated_text:
            raise ValidationError("step has empty generated_text")


@dataclass(frozen=True)
class ReasoningState:
    problem: ProblemInstance
    steps: tuple[Step, ...] = ()
    d_max: int = 8

    @property
    def depth(self) -> int:
        return len(self.steps)

    @property
    def terminal(self) -> bool:
        return bool(self.steps) and self.steps[-1].action.kind is ActionKind.SUMMARY

    def kinds(self) -> tuple[ActionKind, ...]:
        return tuple(step.action.kind for step in self.steps)


@dataclass(frozen=True)
class Trajectory:
    """One root-to-terminal path: states interleaved with the actions that
    produced them (actions live inside each state's last step)."""

    states: tuple[ReasoningState, ...]
    final_answer: str | None
    terminal_reward: float
    iteration: int = 0
    rule_conflicts: tuple[int, ...] = field(default=())

    def kinds(self) -> tuple[ActionKind, ...]:
        return self.states[-1].kinds() if self.states else ()

    @property
    def answered(self) -> bool:
        return self.final_answer is not None


def init_state(problem: ProblemInstance, d_max: int = 8) -> ReasoningState:
    """The initial state: the bare problem, depth 0, nothing generated yet."""
    if d_max < 2:
        raise ValidationError(f"d_max must be >= 2, got {d_max}")
    return ReasoningState(problem=problem, steps=(), d_max=d_max)


def append_step(
    state: ReasoningState,
    action: Action,
    text: str,
    feedback: str | None = None,
) -> ReasoningState:
    """Apply one transition, returning a new snapshot."""
    if state.terminal:
        raise StateError("cannot append a step to a terminal state")
    if state.depth >= state.d_max:
        raise DepthLimitError(
            f"depth {state.depth} already at d_max={state.d_max}"
        )
    step = Step(action=action, generated_text=text, exec_feedback=feedback)
    return ReasoningState(problem=state.problem, steps=state.steps + (step,), d_max=state.d_max)


def extract_answer(state: ReasoningState) -> str | None:
    """Content of the LAST boxed{...} in the final step's text, normalized."""
    if not state.steps:
        return None
    span = last_boxed_span(state.steps[-1].generated_text)
    if span is None:
        return None
    mc = state.problem.answer_format is AnswerFormat.MULTIPLE_CHOICE
    return normalize_answer(span, multiple_choice=mc)


def render_state(state: ReasoningState) -> str:
    """The textual context fed to models: statement plus one <think> block
    per step (action prompt, generated text, any execution feedback)."""
    parts = [state.problem.statement]
    if state.problem.choices:
        opts = "\n".join(f"{c.label}. {c.text}" for c in state.problem.choices)
        parts.append(opts)
    for step in state.steps:
        body = f"{step.action.prompt_text}\n{step.generated_text}"
        if step.exec_feedback:
            body = f"{body}\n{step.exec_feedback}"
        parts.append(f"<think>{body}</think>")
    return "\n\n".join(parts)
