"""The constrained action catalog and prompt rendering.

Templates are data: the defaults below are compiled in, and a JSON override
file with keys {instruction, understand, reflect, code, summary,
mc_instruction, mc_summary} can replace any subset of them.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import CatalogError, ConfigError
from .mdp import Action, ActionKind, AnswerFormat, ReasoningState, render_state

# ------------------------------------------------------------- default texts

DEFAULT_INSTRUCTION = (
    "Below is a mathematical problem. Please think step by step and solve it. "
    "Enclose each thought process with the <think> and </think> symbols. The "
    "thought process should be as rich and detailed as possible, delving into "
    "every content and detail deeply, rather than just skimming over,\n"
    "After you feel that the thought process is sufficient to solve the "
    "problem, organize your thought process into a complete answer, and write "
    "the final answer in boxed{}."
)

DEFAULT_MC_INSTRUCTION = (
    "You will be given a mathematics problem. Please think through and solve "
    "it step by step. Enclose each thought process with <think> and </think> "
    "tags. Make your thought process as rich and detailed as possible, deeply "
    "considering every content and detail, rather than briefly skimming over "
    "them.\n"
    "Once you believe the thought process is sufficient to solve the problem, "
    "organize your thoughts into a complete answer, and choose the option "
    "from “A”, “B”, “C”, “D”, “E” "
    "that is closest to your answer. Write the final answer in boxed{}."
)

DEFAULT_UNDERSTAND = (
    "We need to think step by step to understand the meaning of the problem",
    "Let's consider if there are any ambiguities in the problem statement",
    "This problem is quite difficult; we should first analyze what knowledge "
    "points it involves, what mathematical formulas and related properties it "
    "utilizes",
)

DEFAULT_CODE = (
    "We can write a piece of code to validate our idea",
    "We can write a piece of code to assist with the calculation",
    "We can write a piece of code to check our calculation results",
)

DEFAULT_REFLECT = (
    "We should step by step check if the above process is reasonable and "
    "correct",
    "There may be errors and inaccuracies in the above questions; we need to "
    "step by step check for any mistakes",
    "We need to combine the above thought process to see if it aligns with "
    "the problem's intention",
    "There are some details in the problem that were not considered clearly; "
    "we need to check them",
)

DEFAULT_SUMMARY = (
    "Based on the above thought process, we have solved this problem. Now, "
    "let's organize our thoughts into a complete answer and write the final "
    "answer in boxed{}. If there are multiple questions, I will answer each "
    "one in turn, separated by commas.",
    "Now, let's compile our thought process into a complete answer and place "
    "the final answer in boxed{}. If there are multiple questions, I will "
    "answer each one in turn, separated by commas.",
)

DEFAULT_MC_SUMMARY = (
    "Based on the above thought process, we have solved this problem. First, "
    "we will recall the problem, then organize our thought process and write "
    "down the final solution, and finally choose the closest answer from "
    "“A”, “B”, “C”, “D”, “E”. "
    "The final answer will be written in boxed{}.",
    "Now, let's first recall the problem. Then, we will organize our thought "
    "process into a complete answer, and finally choose the closest answer "
    "from “A”, “B”, “C”, “D”, “E”. "
    "The final answer will be written in boxed{}.",
)

TEMPLATE_FILE_KEYS = frozenset(
    {"instruction", "understand", "reflect", "code", "summary", "mc_instruction", "mc_summary"}
)

# ------------------------------------------------------------------- catalog


@dataclass(frozen=True)
class RenderedPrompt:
    system_text: str
    user_text: str


@dataclass(frozen=True)
class ActionCatalog:
    """All concrete actions for one run, partitioned by kind, in a fixed order
    (understand block, code block, reflect block, summary block)."""

    actions: tuple[Action, ...]
    instruction_template: str
    summary_variant: AnswerFormat

    def __post_init__(self):
        ids = [a.template_id for a in self.actions]
        if len(set(ids)) != len(ids):
            raise CatalogError("duplicate template_ids in catalog")
        for kind in ActionKind:
            if not any(a.kind is kind for a in self.actions):
                raise CatalogError(f"catalog has no {kind.value} action")
        if not self.instruction_template:
            raise CatalogError("empty instruction template")

    def of_kind(self, kind: ActionKind) -> tuple[Action, ...]:
        return tuple(a for a in self.actions if a.kind is kind)

    def index_of(self, action: Action) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise CatalogError(
                f"action {action.template_id!r} is not in this catalog"
            ) from None

    def __contains__(self, action: Action) -> bool:
        return action in self.actions


def _build_actions(kind: ActionKind, texts) -> list[Action]:
    if not texts:
        raise ConfigError(f"no templates given for kind {kind.value!r}")
    return [
        Action(kind=kind, template_id=f"{kind.value}-{i}", prompt_text=str(t))
        for i, t in enumerate(texts)
    ]


def catalog_from_templates(
    variant: AnswerFormat,
    *,
    instruction: str = DEFAULT_INSTRUCTION,
    understand=DEFAULT_UNDERSTAND,
    code=DEFAULT_CODE,
    reflect=DEFAULT_REFLECT,
    summary=DEFAULT_SUMMARY,
    mc_instruction: str = DEFAULT_MC_INSTRUCTION,
    mc_summary=DEFAULT_MC_SUMMARY,
) -> ActionCatalog:
    mc = variant is AnswerFormat.MULTIPLE_CHOICE
    actions = (
        _build_actions(ActionKind.UNDERSTAND, understand)
        + _build_actions(ActionKind.CODE, code)
        + _build_actions(ActionKind.REFLECT, reflect)
        + _build_actions(ActionKind.SUMMARY, mc_summary if mc else summary)
    )
    return ActionCatalog(
        actions=tuple(actions),
        instruction_template=mc_instruction if mc else instruction,
        summary_variant=variant,
    )


def catalog_default(variant: AnswerFormat = AnswerFormat.FREE_FORM) -> ActionCatalog:
    """The compiled-in default templates for the given answer format."""
    return catalog_from_templates(variant)


def load_templates(path: str | Path) -> dict:
    """Read a template override file; values may be strings or string lists."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read template file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"template file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"template file {path} must hold an object")
    unknown = set(data) - TEMPLATE_FILE_KEYS
    if unknown:
        raise ConfigError(f"unknown template keys: {sorted(unknown)}")
    return data


def catalog_from_file(path: str | Path, variant: AnswerFormat) -> ActionCatalog:
    data = load_templates(path)
    kwargs = {}
    for key in ("instruction", "mc_instruction"):
        if key in data:
            value = data[key]
            if isinstance(value, list):
                value = "\n".join(value)
            kwargs[key] = value
    for key in ("understand", "reflect", "code", "summary", "mc_summary"):
        if key in data:
            value = data[key]
            if isinstance(value, str):
                value = [value]
            kwargs[key] = tuple(value)
    return catalog_from_templates(variant, **kwargs)


# ----------------------------------------------------------------- rendering


def render_prompt(
    catalog: ActionCatalog, state: ReasoningState, action: Action
) -> RenderedPrompt:
    """System text is the run instruction; user text is the rendered state
    context followed by the chosen action's prompt. Pure and deterministic."""
    if action not in catalog:
        raise CatalogError(f"action {action.template_id!r} is not in this catalog")
    user = f"{render_state(state)}\n\n{action.prompt_text}"
    return RenderedPrompt(system_text=catalog.instruction_template, user_text=user)


def sample_action(
    catalog: ActionCatalog, kind: ActionKind, rng: random.Random
) -> Action:
    """Pick one template of the kind uniformly at random with the run RNG."""
    pool = catalog.of_kind(kind)
    return pool[rng.randrange(len(pool))]
