from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepsearch.errors import SearchError, ValidationError
from stepsearch.generate import MockScriptBackend
from stepsearch.mdp import (
    Action,
    ActionKind,
    AnswerFormat,
    ProblemInstance,
    Trajectory,
    init_state,
)
from stepsearch.rewards import Scorer, ScriptedReward
from stepsearch.rules import RuleSet
from stepsearch.search import (
    SearchConfig,
    SearchEngine,
    TreeNode,
    aggregate_answers,
    backpropagate,
    run_search,
    select_leaf,
    uct_value,
)

# ----------------------------------------------------- random-tree machinery


def build_random_tree(rng: random.Random, max_nodes: int = 50):
    """A random tree of visited nodes with designated expandable/terminal leaves."""
    problem = ProblemInstance(id="tree", statement="s")
    root = TreeNode(state=init_state(problem, d_max=30), creation_index=0)
    root.visit_count = rng.randint(1, 30)
    nodes = [root]
    expandable: set[int] = set()
    n_nodes = rng.randint(1, max_nodes)
    while len(nodes) < n_nodes:
        parent = rng.choice(nodes)
        if parent.state.terminal:
            continue
        kind = rng.choice([ActionKind.UNDERSTAND, ActionKind.CODE, ActionKind.REFLECT])
        action = Action(kind=kind, template_id=f"{kind.value}-0", prompt_text="p")
        from stepsearch.mdp import append_step

        child = TreeNode(
            state=append_step(parent.state, action, "text"),
            incoming_action=action,
            creation_index=len(nodes),
            visit_count=rng.randint(0, 20),
            total_return=rng.uniform(0, 40),
        )
        parent.children.append(child)
        nodes.append(child)
    for node in nodes:
        if not node.children and rng.random() < 0.5:
            expandable.add(node.creation_index)
    return root, nodes, expandable


def oracle_select(root, c, expandable, strict):
    """Straight transcription of the UCT descent, kept separate on purpose."""
    path = [root]
    node = root
    while (
        not node.state.terminal
        and node.creation_index not in expandable
        and node.children
    ):
        scored = []
        for idx, child in enumerate(node.children):
            if child.visit_count == 0:
                value = math.inf
            else:
                log_arg = child.visit_count if strict else max(node.visit_count, 1)
                value = child.total_return / child.visit_count + c * math.sqrt(
                    math.log(log_arg) / child.visit_count
                )
            scored.append((value, idx, child))
        best = max(scored, key=lambda s: (s[0], -s[1]))[2]
        path.append(best)
        node = best
    return path


class TestUct:
    def test_unvisited_is_infinite(self):
        node = TreeNode(state=init_state(ProblemInstance(id="p", statement="s"), 4))
        assert uct_value(node, parent_visits=3, c=1.0) == math.inf

    def test_standard_uses_parent_visits(self):
        node = TreeNode(
            state=init_state(ProblemInstance(id="p", statement="s"), 4),
            visit_count=4,
            total_return=2.0,
        )
        expected = 0.5 + 2.0 * math.sqrt(math.log(9) / 4)
        assert uct_value(node, parent_visits=9, c=2.0) == pytest.approx(expected)

    def test_strict_variant_uses_own_visits(self):
        node = TreeNode(
            state=init_state(ProblemInstance(id="p", statement="s"), 4),
            visit_count=4,
            total_return=2.0,
        )
        expected = 0.5 + 1.0 * math.sqrt(math.log(4) / 4)
        assert uct_value(node, parent_visits=999, c=1.0, strict_paper=True) == pytest.approx(expected)

    def test_zero_c_is_pure_exploitation(self):
        node = TreeNode(
            state=init_state(ProblemInstance(id="p", statement="s"), 4),
            visit_count=2,
            total_return=3.0,
        )
        assert uct_value(node, parent_visits=5, c=0.0) == pytest.approx(1.5)

    def test_select_matches_oracle_on_random_trees(self):
        rng = random.Random(2024)
        for trial in range(100):
            root, nodes, expandable = build_random_tree(rng)
            strict = trial % 2 == 1
            c = rng.choice([0.0, 0.5, 1.0, 2.0])
            got = select_leaf(
                root, c, lambda n: n.creation_index in expandable, strict_paper=strict
            )
            want = oracle_select(root, c, expandable, strict)
            assert [n.creation_index for n in got] == [n.creation_index for n in want]


class TestBackpropagate:
    def make_path(self, length):
        problem = ProblemInstance(id="p", statement="s")
        state = init_state(problem, d_max=length + 1)
        path = [TreeNode(state=state, creation_index=0)]
        for i in range(length):
            action = Action(
                kind=ActionKind.REFLECT, template_id=f"reflect-{i}", prompt_text="p"
            )
            from stepsearch.mdp import append_step

            state = append_step(state, action, "x")
            path.append(TreeNode(state=state, creation_index=i + 1))
        return path

    def test_suffix_sums(self):
        path = self.make_path(3)
        backpropagate(path, [1.0, 2.0, 4.0])
        assert [n.visit_count for n in path] == [1, 1, 1, 1]
        assert path[0].total_return == 0.0
        assert [n.total_return for n in path[1:]] == [7.0, 6.0, 4.0]

    def test_accumulates_across_calls(self):
        path = self.make_path(2)
        backpropagate(path, [1.0, 1.0])
        backpropagate(path[:2], [0.5])
        assert path[1].visit_count == 2
        assert path[1].total_return == pytest.approx(2.5)
        assert path[0].visit_count == 2 and path[0].total_return == 0.0

    def test_length_mismatch_rejected(self):
        from stepsearch.errors import InternalError

        with pytest.raises(InternalError):
            backpropagate(self.make_path(2), [1.0])


# ---------------------------------------------------------------- aggregation


def make_trajectory(answer, reward, iteration):
    problem = ProblemInstance(id="p", statement="s")
    state = init_state(problem, d_max=4)
    from stepsearch.mdp import append_step

    action = Action(kind=ActionKind.SUMMARY, template_id="summary-0", prompt_text="p")
    text = f"\\boxed{{{answer}}}" if answer is not None else "no box"
    state = append_step(state, action, text)
    return Trajectory(
        states=(state,),
        final_answer=answer,
        terminal_reward=reward,
        iteration=iteration,
    )


def aggregate_oracle(trajectories):
    answered = [t for t in trajectories if t.final_answer is not None]
    counts = {}
    for t in answered:
        counts[t.final_answer] = counts.get(t.final_answer, 0) + 1
    top = max(counts.values())
    pool = [t for t in answered if counts[t.final_answer] == top]
    best = pool[0]
    for t in pool[1:]:
        if t.terminal_reward > best.terminal_reward or (
            t.terminal_reward == best.terminal_reward and t.iteration < best.iteration
        ):
            best = t
    return best.final_answer, best.iteration


class TestAggregation:
    def test_majority_wins_over_reward(self):
        ts = [
            make_trajectory("4", 1.9, 0),
            make_trajectory("5", 0.3, 1),
            make_trajectory("5", 0.2, 2),
        ]
        answer, chosen = aggregate_answers(ts)
        assert answer == "5" and chosen.iteration == 1

    def test_reward_breaks_frequency_tie(self):
        ts = [make_trajectory("4", 0.5, 0), make_trajectory("5", 1.5, 1)]
        answer, chosen = aggregate_answers(ts)
        assert answer == "5" and chosen.iteration == 1

    def test_iteration_breaks_reward_tie(self):
        ts = [make_trajectory("4", 1.0, 0), make_trajectory("5", 1.0, 1)]
        answer, chosen = aggregate_answers(ts)
        assert answer == "4" and chosen.iteration == 0

    def test_unanswered_excluded(self):
        ts = [make_trajectory(None, 2.0, 0), make_trajectory("7", 0.1, 1)]
        answer, _ = aggregate_answers(ts)
        assert answer == "7"

    def test_all_unanswered_raises(self):
        from stepsearch.errors import AggregationError

        with pytest.raises(AggregationError):
            aggregate_answers([make_trajectory(None, 1.0, 0)])

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["a", "b", None]),
                st.integers(0, 1000),
            ),
            min_size=1,
            max_size=4,
        )
    )
    @settings(max_examples=400)
    def test_matches_brute_force(self, spec):
        if all(answer is None for answer, _ in spec):
            return
        # distinct rewards via the integer rank, scaled into [0, 2]
        ts = [
            make_trajectory(answer, rank / 500.0, i)
            for i, (answer, rank) in enumerate(spec)
        ]
        answer, chosen = aggregate_answers(ts)
        want_answer, want_iter = aggregate_oracle(ts)
        assert (answer, chosen.iteration) == (want_answer, want_iter)


# -------------------------------------------------------------------- engine


SCRIPT = {
    "*": {
        "*": {
            "understand": ["Understanding the question first."],
            "code": ["Trying code.\n```python\nq = 1\n```"],
            "reflect": ["That still holds up."],
            "summary": ["Answer: \\boxed{4}"],
        }
    }
}


def engine_result(seed=3, k=4, d_max=6, script=SCRIPT, **config_kwargs):
    problem = ProblemInstance(id="p1", statement="What is 2+2?")
    config = SearchConfig(seed=seed, k=k, m=2, d_max=d_max, **config_kwargs)
    return run_search(
        problem,
        config,
        policy=MockScriptBackend.from_dict(script),
        scorer=Scorer(backend=ScriptedReward()),
    )


class TestSearchConfig:
    def test_parameter_validation(self):
        with pytest.raises(ValidationError):
            SearchConfig(seed=1, k=0)
        with pytest.raises(ValidationError):
            SearchConfig(seed=1, m=0)
        with pytest.raises(ValidationError):
            SearchConfig(seed=1, c_uct=-0.5)

    def test_reflection_needs_room(self):
        with pytest.raises(ValidationError):
            SearchConfig(seed=1, d_max=2)  # all rules on by default


class TestEngine:
    def test_every_trajectory_is_rule_clean(self):
        from stepsearch.rules import validate_trajectory

        result = engine_result()
        assert len(result.trajectories) == 4
        for t in result.trajectories:
            assert validate_trajectory(RuleSet.all_on(), t.kinds(), 6) == []
            assert t.kinds()[0] is ActionKind.UNDERSTAND
            assert t.kinds()[-1] is ActionKind.SUMMARY

    def test_deterministic_across_runs(self):
        a = engine_result(seed=5)
        b = engine_result(seed=5)
        assert a.summary_dict() == b.summary_dict()

    def test_seed_changes_template_sampling(self):
        results = {}
        for seed in (1, 2, 3, 4, 5):
            result = engine_result(seed=seed)
            ids = tuple(
                step.action.template_id
                for t in result.trajectories
                for step in t.states[-1].steps
            )
            results[seed] = ids
        assert len(set(results.values())) > 1

    def test_answer_and_votes(self):
        result = engine_result()
        assert result.final_answer == "4"
        assert result.diagnostics["votes"] == {"4": 4}
        assert result.diagnostics["answered"] == 4

    def test_no_boxed_answers_raise_search_error(self):
        script = {
            "*": {
                "*": {
                    "understand": ["u"],
                    "code": ["c"],
                    "reflect": ["r"],
                    "summary": ["the summary forgot the box"],
                }
            }
        }
        with pytest.raises(SearchError):
            engine_result(script=script)

    def test_code_feedback_injected_with_executor(self):
        from stepsearch.codeexec import MockExecutor, source_hash

        problem = ProblemInstance(id="p1", statement="What is 2+2?")
        config = SearchConfig(seed=3, k=2, m=2, d_max=6)
        executor = MockExecutor(
            results={
                source_hash("q = 1\n"): {"ok": True, "stdout": "", "bindings": {"q": 1}}
            }
        )
        result = run_search(
            problem,
            config,
            policy=MockScriptBackend.from_dict(SCRIPT),
            scorer=Scorer(backend=ScriptedReward()),
            executor=executor,
        )
        feedback = [
            step.exec_feedback
            for t in result.trajectories
            for step in t.states[-1].steps
            if step.exec_feedback
        ]
        assert feedback
        assert all(
            f == "The running status of existing variables: q = 1" for f in feedback
        )

    def test_without_executor_code_steps_have_no_feedback(self):
        result = engine_result()
        for t in result.trajectories:
            for step in t.states[-1].steps:
                assert step.exec_feedback is None

    def test_multiple_choice_uses_mc_catalog(self):
        from stepsearch.mdp import Choice

        problem = ProblemInstance(
            id="mc1",
            statement="Pick the sum of 2 and 2.",
            answer_format=AnswerFormat.MULTIPLE_CHOICE,
            choices=(Choice("A", "3"), Choice("B", "4")),
        )
        script = {
            "*": {
                "*": {
                    "understand": ["u"],
                    "code": ["c"],
                    "reflect": ["r"],
                    "summary": ["The closest option is \\boxed{b}"],
                }
            }
        }
        config = SearchConfig(seed=1, k=2, m=1, d_max=6)
        result = run_search(
            problem,
            config,
            policy=MockScriptBackend.from_dict(script),
            scorer=Scorer(backend=ScriptedReward()),
        )
        assert result.final_answer == "B"
        # the instruction came from the multiple-choice variant
        from stepsearch.actions import DEFAULT_MC_INSTRUCTION

        assert result.trajectories  # sanity

    def test_rule_conflict_fallback_records_event(self, monkeypatch):
        from stepsearch import search as search_mod
        from stepsearch.errors import RuleConflictError

        real = search_mod.legal_kinds
        target_depth = 2

        def fake_legal(rules, ctx):
            if ctx.t == target_depth:
                raise RuleConflictError("forced for test", frozenset({ActionKind.SUMMARY}))
            return real(rules, ctx)

        monkeypatch.setattr(search_mod, "legal_kinds", fake_legal)
        result = engine_result(k=2)
        assert all(t.rule_conflicts for t in result.trajectories)
        assert all(t.kinds()[target_depth] is ActionKind.SUMMARY for t in result.trajectories)
        assert result.diagnostics["rule_conflicts"] >= 2
