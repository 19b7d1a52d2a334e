"""Tree search over reasoning states.

The loop per iteration:

  select     descend from the root by UCT until a node is terminal or still
             has unexpanded legal action kinds
  expand     pick the legal kind with the best Q, generate m candidate
             continuations, keep the one with the best V (code actions run
             in the sandbox first so V sees the execution feedback)
  simulate   keep expanding fresh nodes until a summary step terminates
  backprop   add the suffix return of every node on the path and bump visits

After k iterations the answered trajectories vote; ties go to the highest
terminal reward, then the earliest iteration.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

from .actions import ActionCatalog, catalog_default, render_prompt, sample_action
from .codeexec import execute, extract_code, format_feedback, source_hash
from .errors import (
    AggregationError,
    InternalError,
    RuleConflictError,
    SandboxError,
    SearchError,
    ValidationError,
)
from .generate import GenerationRequest, StepContext, generate_candidates
from .mdp import (
    KIND_ORDER,
    ActionKind,
    ProblemInstance,
    ReasoningState,
    Trajectory,
    append_step,
    extract_answer,
    init_state,
)
from .rules import RuleContext, RuleSet, legal_kinds

# --------------------------------------------------------------------- types


@dataclass
class TreeNode:
    state: ReasoningState
    incoming_action: Any = None
    creation_index: int = 0
    visit_count: int = 0
    total_return: float = 0.0
    q_of_incoming: float = 0.0
    v_of_state: float = 0.0
    children: list["TreeNode"] = field(default_factory=list)

    def mean_return(self) -> float:
        return self.total_return / self.visit_count if self.visit_count else 0.0


@dataclass(frozen=True)
class SearchConfig:
    seed: int
    k: int = 8
    m: int = 3
    d_max: int = 8
    c_uct: float = 1.0
    ruleset: RuleSet = field(default_factory=RuleSet)
    strict_paper_uct: bool = False
    temperature: float = 0.8
    max_step_tokens: int = 1024
    exec_timeout: float = 10.0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.m < 1:
            raise ValidationError(f"m must be >= 1, got {self.m}")
        if self.d_max < 2:
            raise ValidationError(f"d_max must be >= 2, got {self.d_max}")
        if self.c_uct < 0:
            raise ValidationError(f"c_uct must be >= 0, got {self.c_uct}")
        if self.ruleset.reflection_necessity and self.d_max < 3:
            raise ValidationError(
                "reflection_necessity requires d_max >= 3 (no room for a "
                "reflect step before the forced summary)"
            )


@dataclass
class SearchResult:
    trajectories: tuple[Trajectory, ...]
    final_answer: str
    chosen_path: Trajectory
    diagnostics: dict
    root: TreeNode | None = None

    def summary_dict(self) -> dict:
        """Stable serializable view (used by determinism checks and the CLI)."""
        return {
            "final_answer": self.final_answer,
            "chosen_iteration": self.chosen_path.iteration,
            "votes": self.diagnostics.get("votes", {}),
            "trajectories": [
                {
                    "iteration": t.iteration,
                    "kinds": [k.value for k in t.kinds()],
                    "answer": t.final_answer,
                    "terminal_reward": t.terminal_reward,
                    "rule_conflicts": list(t.rule_conflicts),
                }
                for t in self.trajectories
            ],
        }


# ---------------------------------------------------------- pure tree pieces


def uct_value(
    node: TreeNode, parent_visits: int, c: float, *, strict_paper: bool = False
) -> float:
    """Mean return plus the exploration bonus; unvisited nodes are +inf.

    Standard form uses the parent's visit count inside the log; strict-paper
    mode reproduces the printed formula with the node's own count there.
    """
    if node.visit_count == 0:
        return math.inf
    mean = node.total_return / node.visit_count
    log_arg = node.visit_count if strict_paper else max(parent_visits, 1)
    return mean + c * math.sqrt(math.log(log_arg) / node.visit_count)


def select_leaf(
    root: TreeNode,
    c: float,
    is_expandable: Callable[[TreeNode], bool],
    *,
    strict_paper: bool = False,
) -> list[TreeNode]:
    """Descend by argmax UCT; ties go to the earliest-created child."""
    path = [root]
    node = root
    while not node.state.terminal and not is_expandable(node) and node.children:
        best = node.children[0]
        best_value = uct_value(best, node.visit_count, c, strict_paper=strict_paper)
        for child in node.children[1:]:
            value = uct_value(child, node.visit_count, c, strict_paper=strict_paper)
            if value > best_value:
                best, best_value = child, value
        path.append(best)
        node = best
    return path


def backpropagate(path: list[TreeNode], step_rewards: list[float]) -> None:
    """Add each node's suffix return; every node on the path gains a visit.

    The root gains only the visit (it has no incoming action, hence no step
    reward), which keeps parent visit counts defined for UCT.
    """
    if len(step_rewards) != len(path) - 1:
        raise InternalError(
            f"{len(step_rewards)} rewards for a path of {len(path)} nodes"
        )
    suffix = 0.0
    suffixes = [0.0] * len(step_rewards)
    for i in range(len(step_rewards) - 1, -1, -1):
        suffix += step_rewards[i]
        suffixes[i] = suffix
    path[0].visit_count += 1
    for node, node_suffix in zip(path[1:], suffixes):
        node.visit_count += 1
        node.total_return += node_suffix


def aggregate_answers(trajectories: list[Trajectory]) -> tuple[str, Trajectory]:
    """Majority vote over answered trajectories; frequency ties resolved by
    the highest terminal reward, then the lowest iteration index."""
    answered = [(i, t) for i, t in enumerate(trajectories) if t.final_answer is not None]
    if not answered:
        raise AggregationError("no trajectory produced a boxed answer")
    counts = Counter(t.final_answer for _, t in answered)
    top = max(counts.values())
    tied = {answer for answer, n in counts.items() if n == top}
    pool = [(i, t) for i, t in answered if t.final_answer in tied]
    _, best = max(pool, key=lambda item: (item[1].terminal_reward, -item[0]))
    return best.final_answer, best


# -------------------------------------------------------------------- engine


class SearchEngine:
    """Owns one problem's tree plus the backends that grow it.

    Not thread-safe per instance; run problems in parallel with one engine
    each. `trace` is any object with emit(kind, iteration, payload).
    """

    def __init__(
        self,
        config: SearchConfig,
        policy: Any,
        scorer: Any,
        executor: Any = None,
        catalog: ActionCatalog | None = None,
        trace: Any = None,
        run_id: str | None = None,
    ):
        self.config = config
        self.policy = policy
        self.scorer = scorer
        self.executor = executor
        self.catalog_override = catalog
        self.trace = trace
        self.run_id = run_id

    # -- plumbing

    def _emit(self, kind: str, iteration: int, payload: dict) -> None:
        if self.trace is not None:
            self.trace.emit(kind, iteration, payload)

    def _legal(self, state: ReasoningState) -> tuple[frozenset[ActionKind], bool]:
        ctx = RuleContext(
            t=state.depth, d_max=self.config.d_max, history_kinds=state.kinds()
        )
        try:
            return legal_kinds(self.config.ruleset, ctx), False
        except RuleConflictError as e:
            return e.fallback, True

    def _unexpanded_kinds(self, node: TreeNode) -> tuple[ActionKind, ...]:
        legal, _ = self._legal(node.state)
        have = {child.incoming_action.kind for child in node.children}
        return tuple(k for k in KIND_ORDER if k in legal and k not in have)

    def _is_expandable(self, node: TreeNode) -> bool:
        if node.state.terminal:
            return False
        return bool(self._unexpanded_kinds(node))

    # -- the four phases

    def _expand(self, node: TreeNode, iteration: int, phase: str) -> TreeNode:
        state = node.state
        legal, conflict = self._legal(state)
        have = {child.incoming_action.kind for child in node.children}
        pool_kinds = [k for k in KIND_ORDER if k in legal and k not in have]
        if not pool_kinds:
            raise InternalError(f"expand called with no unexpanded kinds at t={state.depth}")
        if conflict:
            self._iteration_conflicts.append(state.depth)

        pool = [sample_action(self._catalog, kind, self._rng) for kind in pool_kinds]
        q_scores = [self.scorer.q(state, action) for action in pool]
        best_q = max(range(len(pool)), key=lambda i: q_scores[i].value)
        action, q = pool[best_q], q_scores[best_q]
        self._emit(
            "score",
            iteration,
            {
                "phase": "action",
                "parent": node.creation_index,
                "t": state.depth,
                "kinds": [k.value for k in pool_kinds],
                "q": [s.value for s in q_scores],
                "chosen_kind": action.kind.value,
                "template_id": action.template_id,
            },
        )

        request = GenerationRequest(
            rendered=render_prompt(self._catalog, state, action),
            n_candidates=self.config.m,
            temperature=self.config.temperature,
            max_step_tokens=self.config.max_step_tokens,
            seed=self._rng.randrange(2**31),
        )
        ctx = StepContext(
            problem_id=state.problem.id, depth=state.depth, action_kind=action.kind
        )
        candidates = generate_candidates(self.policy, request, ctx)

        tentative: list[ReasoningState] = []
        v_scores = []
        for j, candidate in enumerate(candidates):
            feedback = None
            if action.kind is ActionKind.CODE and self.executor is not None:
                feedback = self._run_code(node, candidate.text, iteration, j)
            child_state = append_step(state, action, candidate.text, feedback)
            tentative.append(child_state)
            v_scores.append(self.scorer.v(child_state))
        best_v = max(range(len(tentative)), key=lambda j: v_scores[j].value)
        self._emit(
            "score",
            iteration,
            {
                "phase": "candidates",
                "parent": node.creation_index,
                "t": state.depth,
                "v": [s.value for s in v_scores],
                "chosen": best_v,
            },
        )

        child = TreeNode(
            state=tentative[best_v],
            incoming_action=action,
            creation_index=self._next_index(),
            q_of_incoming=q.value,
            v_of_state=v_scores[best_v].value,
        )
        node.children.append(child)
        self._emit(
            "expand",
            iteration,
            {
                "node": child.creation_index,
                "parent": node.creation_index,
                "kind": action.kind.value,
                "template_id": action.template_id,
                "depth": child.state.depth,
                "q": child.q_of_incoming,
                "v": child.v_of_state,
                "phase": phase,
                "rule_conflict": conflict,
            },
        )
        return child

    def _run_code(
        self, node: TreeNode, text: str, iteration: int, candidate_index: int
    ) -> str | None:
        blocks = extract_code(text)
        if not blocks:
            return None
        session_id = (
            f"{self.run_id}:n{node.creation_index}:t{node.state.depth}:c{candidate_index}"
        )
        session = self.executor.open_session(session_id)
        timeout = self.config.exec_timeout
        try:
            # Candidates never share a namespace: each gets a fresh session
            # that first replays the path's earlier code blocks.
            for step in node.state.steps:
                if step.action.kind is ActionKind.CODE:
                    for prior in extract_code(step.generated_text):
                        execute(session, prior, timeout)
            results = []
            for block in blocks:
                result = execute(session, block, timeout)
                results.append(result)
                self._emit(
                    "execute",
                    iteration,
                    {
                        "parent": node.creation_index,
                        "t": node.state.depth,
                        "candidate": candidate_index,
                        "block": block.block_index,
                        "source_sha": source_hash(block.source)[:12],
                        "ok": result.ok,
                    },
                )
        except SandboxError as e:
            return f"Code execution failed: {e}"
        finally:
            session.close()
        return "\n".join(format_feedback(r) for r in results)

    def _simulate(self, node: TreeNode, iteration: int) -> list[TreeNode]:
        chain = []
        current = node
        first = True
        while not current.state.terminal:
            current = self._expand(
                current, iteration, phase="expansion" if first else "simulation"
            )
            first = False
            chain.append(current)
        return chain

    # -- the loop

    def run(self, problem: ProblemInstance) -> SearchResult:
        cfg = self.config
        if self.run_id is None:
            self.run_id = f"{problem.id}-s{cfg.seed}"
        self._catalog = self.catalog_override or catalog_default(problem.answer_format)
        self._rng = random.Random(_derive_seed(cfg.seed, problem.id))
        self._creation_counter = 0
        root = TreeNode(state=init_state(problem, cfg.d_max), creation_index=0)
        self._creation_counter = 1

        trajectories: list[Trajectory] = []
        for iteration in range(cfg.k):
            self._iteration_conflicts: list[int] = []
            path = select_leaf(
                root, cfg.c_uct, self._is_expandable, strict_paper=cfg.strict_paper_uct
            )
            leaf = path[-1]
            self._emit(
                "select",
                iteration,
                {
                    "path": [n.creation_index for n in path],
                    "leaf_depth": leaf.state.depth,
                    "leaf_terminal": leaf.state.terminal,
                },
            )
            chain = self._simulate(leaf, iteration) if not leaf.state.terminal else []
            full = path + chain
            rewards = [n.q_of_incoming + n.v_of_state for n in full[1:]]
            backpropagate(full, rewards)
            self._emit(
                "backprop",
                iteration,
                {"path": [n.creation_index for n in full], "rewards": rewards},
            )
            terminal_state = full[-1].state
            trajectories.append(
                Trajectory(
                    states=tuple(n.state for n in full),
                    final_answer=extract_answer(terminal_state),
                    terminal_reward=rewards[-1],
                    iteration=iteration,
                    rule_conflicts=tuple(self._iteration_conflicts),
                )
            )

        answered = sum(1 for t in trajectories if t.answered)
        if answered == 0:
            self._emit("aggregate", cfg.k - 1, {"answer": None, "votes": {}})
            raise SearchError(
                f"no answered trajectory in {cfg.k} iterations for {problem.id!r}"
            )
        answer, chosen = aggregate_answers(trajectories)
        votes = dict(sorted(Counter(t.final_answer for t in trajectories if t.answered).items()))
        self._emit(
            "aggregate",
            cfg.k - 1,
            {"votes": votes, "answer": answer, "chosen_iteration": chosen.iteration},
        )
        diagnostics = {
            "iterations": cfg.k,
            "answered": answered,
            "votes": votes,
            "rule_conflicts": sum(len(t.rule_conflicts) for t in trajectories),
            "tree_nodes": self._creation_counter,
        }
        return SearchResult(
            trajectories=tuple(trajectories),
            final_answer=answer,
            chosen_path=chosen,
            diagnostics=diagnostics,
            root=root,
        )

    def _next_index(self) -> int:
        index = self._creation_counter
        self._creation_counter += 1
        return index


def _derive_seed(seed: int, problem_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{problem_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def run_search(
    problem: ProblemInstance,
    config: SearchConfig,
    *,
    policy: Any,
    scorer: Any,
    executor: Any = None,
    catalog: ActionCatalog | None = None,
    trace: Any = None,
) -> SearchResult:
    """One-shot front door over SearchEngine."""
    engine = SearchEngine(
        config, policy, scorer, executor=executor, catalog=catalog, trace=trace
    )
    return engine.run(problem)
