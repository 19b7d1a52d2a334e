"""Partial-order rules over action kinds.

Two basic constraints are always on: the first step must be an understand
action, and the slot at t = d_max-1 admits only summary (so every chain
terminates). Five toggleable rules then filter the kinds available at
0 < t < d_max-1, applied in a fixed order for reproducibility:

  diversity            no two consecutive steps of the same kind
  depth_restriction    from t >= floor(d_max/2), only reflect/code (summary
                       stays admissible so chains can still terminate)
  code_continuity      no two consecutive code steps
  code_enforcement     at t >= floor(d_max/2) with no code step yet, force code
  reflection_necessity while no reflect step has occurred, summary is not
                       admissible, and the slot at t = d_max-2 forces reflect

reflection_necessity blocks summary early (not only forcing at d_max-2) so
that every complete chain, however short, contains a reflect step; that is
what whole-trajectory validation demands.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import RuleConflictError, ValidationError
from .mdp import ActionKind

_U, _C, _R, _S = (
    ActionKind.UNDERSTAND,
    ActionKind.CODE,
    ActionKind.REFLECT,
    ActionKind.SUMMARY,
)

_ALL_KINDS = frozenset(ActionKind)
FALLBACK_KINDS = frozenset({_S})

RULE_NAMES = (
    "diversity",
    "reflection_necessity",
    "depth_restriction",
    "code_continuity",
    "code_enforcement",
)


@dataclass(frozen=True)
class RuleSet:
    diversity: bool = True
    reflection_necessity: bool = True
    depth_restriction: bool = True
    code_continuity: bool = True
    code_enforcement: bool = True

    @classmethod
    def all_on(cls) -> "RuleSet":
        return cls()

    @classmethod
    def none(cls) -> "RuleSet":
        return cls(**{name: False for name in RULE_NAMES})

    @classmethod
    def from_names(cls, names) -> "RuleSet":
        names = set(names)
        unknown = names - set(RULE_NAMES)
        if unknown:
            raise ValidationError(f"unknown rule names: {sorted(unknown)}")
        return cls(**{name: name in names for name in RULE_NAMES})

    def enabled_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self) if getattr(self, f.name))


@dataclass(frozen=True)
class RuleContext:
    t: int
    d_max: int
    history_kinds: tuple[ActionKind, ...]

    def __post_init__(self):
        if self.d_max < 2:
            raise ValidationError(f"d_max must be >= 2, got {self.d_max}")
        if len(self.history_kinds) != self.t:
            raise ValidationError(
                f"history length {len(self.history_kinds)} != t = {self.t}"
            )
        if not 0 <= self.t <= self.d_max:
            raise ValidationError(f"t = {self.t} outside [0, d_max = {self.d_max}]")


@dataclass(frozen=True)
class Violation:
    rule: str
    t: int
    detail: str


def legal_kinds(rules: RuleSet, ctx: RuleContext) -> frozenset[ActionKind]:
    """The set of action kinds admissible at depth ctx.t."""
    if ctx.t >= ctx.d_max:
        raise ValidationError(f"no step slot at t = {ctx.t} with d_max = {ctx.d_max}")
    if ctx.t == 0:
        return frozenset({_U})
    if ctx.t == ctx.d_max - 1:
        return frozenset({_S})

    kinds = set(_ALL_KINDS)
    half = ctx.d_max // 2
    last = ctx.history_kinds[-1]

    if rules.diversity:
        kinds.discard(last)
    if rules.depth_restriction and ctx.t >= half:
        kinds &= {_R, _C, _S}
    if rules.code_continuity and last is _C:
        kinds.discard(_C)
    if rules.code_enforcement and ctx.t >= half and _C not in ctx.history_kinds:
        kinds = {_C}
    if rules.reflection_necessity and _R not in ctx.history_kinds:
        if ctx.t == ctx.d_max - 2:
            kinds = {_R}
        else:
            kinds.discard(_S)

    if not kinds:
        raise RuleConflictError(
            f"rules emptied the legal set at t={ctx.t} (history "
            f"{[k.value for k in ctx.history_kinds]})",
            FALLBACK_KINDS,
        )
    return frozenset(kinds)


def _blame(rules: RuleSet, ctx: RuleContext, kind: ActionKind) -> list[str]:
    """Every rule whose filter excludes `kind` in this context, in rule order."""
    out = []
    if ctx.t == 0:
        if kind is not _U:
            out.append("initialization")
        return out
    if ctx.t == ctx.d_max - 1:
        if kind is not _S:
            out.append("termination")
        return out
    half = ctx.d_max // 2
    last = ctx.history_kinds[-1]
    if rules.diversity and kind is last:
        out.append("diversity")
    if rules.depth_restriction and ctx.t >= half and kind is _U:
        out.append("depth_restriction")
    if rules.code_continuity and last is _C and kind is _C:
        out.append("code_continuity")
    if rules.code_enforcement and ctx.t >= half and _C not in ctx.history_kinds and kind is not _C:
        out.append("code_enforcement")
    if rules.reflection_necessity and _R not in ctx.history_kinds:
        if ctx.t == ctx.d_max - 2 and kind is not _R:
            out.append("reflection_necessity")
        elif ctx.t < ctx.d_max - 2 and kind is _S:
            out.append("reflection_necessity")
    return out


def validate_trajectory(
    rules: RuleSet, kinds: list[ActionKind] | tuple[ActionKind, ...], d_max: int
) -> list[Violation]:
    """Post-hoc check of a whole chain of action kinds.

    Empty result iff every prefix is legal, the chain ends in exactly one
    summary step, and (with reflection_necessity on) a reflect step occurs.
    """
    kinds = tuple(kinds)
    violations: list[Violation] = []

    for t, kind in enumerate(kinds):
        if t >= d_max:
            violations.append(
                Violation("max_depth", t, f"step {t} exceeds d_max = {d_max}")
            )
            continue
        history = kinds[:t]
        if _S in history:
            violations.append(
                Violation("termination", t, "step after a summary (terminal) step")
            )
            continue
        ctx = RuleContext(t=t, d_max=d_max, history_kinds=history)
        try:
            legal = legal_kinds(rules, ctx)
        except RuleConflictError as e:
            legal = e.fallback
        if kind not in legal:
            blamed = _blame(rules, ctx, kind) or ["rule_conflict_fallback"]
            for rule in blamed:
                violations.append(
                    Violation(rule, t, f"{kind.value} not legal at t={t}")
                )

    if not kinds or kinds[-1] is not _S:
        violations.append(
            Violation("termination", max(len(kinds) - 1, 0), "chain does not end in summary")
        )
    if rules.reflection_necessity and kinds and kinds[-1] is _S and _R not in kinds:
        violations.append(
            Violation(
                "reflection_necessity",
                len(kinds) - 1,
                "complete chain contains no reflect step",
            )
        )
    return violations
