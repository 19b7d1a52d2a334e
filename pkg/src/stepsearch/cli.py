"""Operator entry point: solve one problem, batch-eval, theory sim, inspect.

Exit codes: 0 success, 1 configuration/backend/dataset/trace problems,
2 search completed but produced no answered trajectory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import build_all, load_config
from .errors import ConfigError, InternalError, SearchError, StepSearchError
from .evals import DatasetRecord, TraceWriter, load_dataset, read_trace, run_benchmark
from .mdp import Choice
from .search import SearchEngine
from .theory import ThetaFamily, min_sample_size, run_decay_experiment, separation


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--k", type=int, help="search iterations")
    parser.add_argument("--m", type=int, help="candidates per expansion")
    parser.add_argument("--d-max", type=int, dest="d_max")
    parser.add_argument("--c-uct", type=float, dest="c_uct")
    parser.add_argument("--rules", help="comma list of rule names, or all/none")
    parser.add_argument("--reward", choices=("prm", "llm", "mock"))
    parser.add_argument("--policy-endpoint", dest="policy_endpoint")
    parser.add_argument("--prm-endpoint", dest="prm_endpoint")
    parser.add_argument("--mock-script", dest="mock_script", help="mock policy script JSON")
    parser.add_argument("--mock-prm", dest="mock_prm", help="scripted reward JSON")
    parser.add_argument("--mock-exec", dest="mock_exec", help="scripted executor JSON")
    parser.add_argument(
        "--strict-paper-uct",
        dest="strict_paper_uct",
        action="store_const",
        const=True,
        default=None,
        help="use the printed self-visit UCT log term",
    )
    parser.add_argument("--trace-dir", dest="trace_dir")


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "seed": "seed",
        "k": "k",
        "m": "m",
        "d_max": "d_max",
        "c_uct": "c_uct",
        "rules": "rules",
        "strict_paper_uct": "strict_paper_uct",
        "reward": "reward",
        "policy_endpoint": "policy_endpoint",
        "prm_endpoint": "prm_endpoint",
        "mock_script": "mock_policy",
        "mock_prm": "mock_prm",
        "mock_exec": "mock_exec",
        "trace_dir": "trace_dir",
        "resume": "resume",
        "out": "out_dir",
    }
    return {
        target: getattr(args, attr)
        for attr, target in mapping.items()
        if hasattr(args, attr) and getattr(args, attr) is not None
    }


def _solve_record(args: argparse.Namespace) -> DatasetRecord:
    if (args.problem is None) == (args.problem_file is None):
        raise ConfigError("give exactly one of a problem string or --problem-file")
    if args.problem is not None:
        return DatasetRecord(id=args.problem_id, problem=args.problem, answer="?")
    try:
        obj = json.loads(Path(args.problem_file).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read problem file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"problem file is not valid JSON: {e}") from e
    choices = tuple(
        Choice(label=c["label"], text=c["text"]) for c in obj.get("choices") or ()
    )
    return DatasetRecord(
        id=obj.get("id", args.problem_id),
        problem=obj["problem"],
        answer=obj.get("answer", "?"),
        choices=choices,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    record = _solve_record(args)
    policy, scorer, executor = build_all(config)
    run_id = f"{record.id}-s{config.seed}"
    trace = None
    trace_path = None
    if config.output.trace_dir:
        trace_root = Path(config.output.trace_dir)
        trace_root.mkdir(parents=True, exist_ok=True)
        trace_path = trace_root / f"{run_id}.trace.jsonl"
        trace = TraceWriter(trace_path, run_id)
    try:
        engine = SearchEngine(
            config.search_config(),
            policy=policy,
            scorer=scorer,
            executor=executor,
            trace=trace,
            run_id=run_id,
        )
        result = engine.run(record.instance())
    finally:
        if trace is not None:
            trace.close()
    print(result.final_answer)
    chosen = result.chosen_path
    print(f"iteration: {chosen.iteration}")
    print("kinds: " + " ".join(k.value for k in chosen.kinds()))
    votes = result.diagnostics.get("votes", {})
    print("votes: " + json.dumps(votes, sort_keys=True))
    if trace_path is not None:
        print(f"trace: {trace_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    records = load_dataset(args.dataset)
    policy, scorer, executor = build_all(config)
    out_dir = config.output.out_dir or config.output.trace_dir
    report = run_benchmark(
        records,
        config.search_config(),
        policy=policy,
        scorer=scorer,
        executor=executor,
        out_dir=out_dir,
        resume=config.output.resume,
        max_workers=args.workers,
    )
    print(f"{report.n_correct}/{report.n} = {report.accuracy:.3f}")
    if out_dir:
        print(f"report: {Path(out_dir) / 'report.json'}")
    return 0


def cmd_theory(args: argparse.Namespace) -> int:
    prior_star = args.prior_star
    if not 0 < prior_star < 1:
        raise ConfigError(f"--prior-star must be in (0, 1), got {prior_star}")
    family = ThetaFamily.bernoulli_pair(
        p_other=args.p_other,
        p_star=args.p_star,
        prior=(1.0 - prior_star, prior_star),
    )
    profile = separation(family)  # raises AssumptionViolation when lambda <= 0
    result = run_decay_experiment(
        family,
        n_grid=range(1, args.n_max + 1),
        trials=args.trials,
        redundancy=args.phi,
        seed=args.seed,
        delta=args.delta,
        csv_path=args.out,
    )
    n_min = min_sample_size(profile.lambda_t, args.delta, prior_star)
    print(f"lambda = {profile.lambda_t:.6f}, min sample size = {n_min}")
    print(f"wrote {len(result.n_grid)} rows to {args.out}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    events = read_trace(args.trace)
    kind_of = {0: None}
    conflicts: dict[int, bool] = {}
    lines: dict[int, tuple[list[str], float]] = {}
    aggregate = None
    run_id = events[0]["run_id"]
    for event in events:
        payload = event["payload"]
        if event["kind"] == "expand":
            kind_of[payload["node"]] = payload["kind"]
            if payload.get("rule_conflict"):
                conflicts[event["iter"]] = True
        elif event["kind"] == "backprop":
            kinds = [kind_of.get(idx, "?") for idx in payload["path"][1:]]
            terminal_r = payload["rewards"][-1] if payload["rewards"] else 0.0
            lines[event["iter"]] = (kinds, terminal_r)
        elif event["kind"] == "aggregate":
            aggregate = payload
    print(f"run: {run_id}")
    for iteration in sorted(lines):
        kinds, terminal_r = lines[iteration]
        suffix = "  [rule-conflict]" if conflicts.get(iteration) else ""
        print(f"iter {iteration}: {' '.join(kinds)}  (r_T={terminal_r:.3f}){suffix}")
    if aggregate is not None:
        votes = aggregate.get("votes", {})
        tally = " ".join(f"{a}={c}" for a, c in sorted(votes.items()))
        print(f"votes: {tally}")
        print(f"answer: {aggregate.get('answer')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepsearch",
        description="Constrained tree search over stepwise reasoning actions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a single problem")
    p_solve.add_argument("problem", nargs="?", help="problem statement text")
    p_solve.add_argument("--problem-file", dest="problem_file", help="JSON problem record")
    p_solve.add_argument("--problem-id", dest="problem_id", default="cli")
    _add_config_flags(p_solve)

    p_eval = sub.add_parser("eval", help="run a benchmark dataset")
    p_eval.add_argument("dataset", help="JSONL dataset path")
    p_eval.add_argument("--out", help="output directory for verdicts/report/traces")
    p_eval.add_argument(
        "--resume", action="store_const", const=True, default=None,
        help="skip problems already in verdicts.jsonl",
    )
    p_eval.add_argument("--workers", type=int, default=1)
    _add_config_flags(p_eval)

    p_theory = sub.add_parser("theory", help="posterior-concentration experiment")
    p_theory.add_argument("--p-star", dest="p_star", type=float, default=0.9)
    p_theory.add_argument("--p-other", dest="p_other", type=float, default=0.5)
    p_theory.add_argument("--prior-star", dest="prior_star", type=float, default=0.5)
    p_theory.add_argument("--n-max", dest="n_max", type=int, default=32)
    p_theory.add_argument("--trials", type=int, default=2000)
    p_theory.add_argument("--phi", type=float, default=None)
    p_theory.add_argument("--delta", type=float, default=0.05)
    p_theory.add_argument("--seed", type=int, default=0)
    p_theory.add_argument("--out", default="theory.csv")

    p_inspect = sub.add_parser("inspect", help="summarize a trace file")
    p_inspect.add_argument("trace")

    return parser


_COMMANDS = {
    "solve": cmd_solve,
    "eval": cmd_eval,
    "theory": cmd_theory,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SearchError as e:
        print(f"search failed: {e}", file=sys.stderr)
        return 2
    except InternalError:
        raise  # a bug, not an operator problem: keep the traceback
    except (StepSearchError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
