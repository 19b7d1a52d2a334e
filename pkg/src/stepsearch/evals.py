"""Dataset loading, benchmark driving, trace persistence, and replay.

Traces are JSONL event streams with a monotonically increasing `seq`. They
carry enough of the search dynamics (expand + backprop events) that the tree
shape and visit statistics can be reconstructed without re-running anything;
`replay_tree` and `tree_snapshot` produce the same dictionary so the two can
be compared directly in tests.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .answers import grade, normalize_answer
from .errors import DatasetError, PersistError, TraceError
from .mdp import AnswerFormat, Choice, ProblemInstance
from .search import SearchConfig, SearchEngine

__all__ = [
    "DatasetRecord",
    "load_dataset",
    "TraceWriter",
    "read_trace",
    "replay_tree",
    "tree_snapshot",
    "Verdict",
    "RunReport",
    "run_benchmark",
    "grade",
    "normalize_answer",
]

log = logging.getLogger(__name__)

TRACE_KEYS = {"seq", "run_id", "iter", "kind", "payload"}
_DATASET_KEYS = {"id", "problem", "answer", "choices"}


# ------------------------------------------------------------------ datasets


@dataclass(frozen=True)
class DatasetRecord:
    """One benchmark problem plus its gold answer."""

    id: str
    problem: str
    answer: str
    choices: tuple[Choice, ...] = ()

    @property
    def answer_format(self) -> AnswerFormat:
        return AnswerFormat.MULTIPLE_CHOICE if self.choices else AnswerFormat.FREE_FORM

    def instance(self) -> ProblemInstance:
        return ProblemInstance(
            id=self.id,
            statement=self.problem,
            answer_format=self.answer_format,
            choices=self.choices or None,
        )


def _parse_record(obj, line_no: int) -> DatasetRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"line {line_no}: record is not an object")
    unknown = set(obj) - _DATASET_KEYS
    if unknown:
        raise DatasetError(f"line {line_no}: unknown keys {sorted(unknown)}")
    for key in ("id", "problem", "answer"):
        if not isinstance(obj.get(key), str) or not obj[key].strip():
            raise DatasetError(f"line {line_no}: missing or empty {key!r}")
    choices = []
    for j, raw in enumerate(obj.get("choices") or []):
        if (
            not isinstance(raw, dict)
            or not isinstance(raw.get("label"), str)
            or not isinstance(raw.get("text"), str)
        ):
            raise DatasetError(f"line {line_no}: malformed choice {j}")
        choices.append(Choice(label=raw["label"], text=raw["text"]))
    record = DatasetRecord(
        id=obj["id"],
        problem=obj["problem"],
        answer=obj["answer"],
        choices=tuple(choices),
    )
    try:
        record.instance()  # run the full instance validation up front
    except Exception as e:
        raise DatasetError(f"line {line_no}: {e}") from e
    return record


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Read a JSONL dataset, rejecting the whole file on any bad line."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read dataset {path}: {e}") from e

    records: list[DatasetRecord] = []
    problems: list[str] = []
    seen_ids: dict[str, int] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            problems.append(f"line {line_no}: invalid JSON ({e.msg})")
            continue
        try:
            record = _parse_record(obj, line_no)
        except DatasetError as e:
            problems.append(str(e))
            continue
        if record.id in seen_ids:
            problems.append(
                f"line {line_no}: duplicate id {record.id!r} "
                f"(first seen on line {seen_ids[record.id]})"
            )
            continue
        seen_ids[record.id] = line_no
        records.append(record)
    if problems:
        raise DatasetError(
            f"dataset {path} rejected ({len(problems)} problem(s)): "
            + "; ".join(problems)
        )
    if not records:
        raise DatasetError(f"dataset {path} contains no records")
    return records


# -------------------------------------------------------------------- traces


class TraceWriter:
    """Append-only JSONL event stream for a single run, flushed per event."""

    def __init__(self, path: str | Path, run_id: str):
        self.path = Path(path)
        self.run_id = run_id
        self._seq = 0
        try:
            self._fh = open(self.path, "w")
        except OSError as e:
            raise PersistError(f"cannot open trace {path}: {e}") from e

    def emit(self, kind: str, iteration: int, payload: dict) -> None:
        event = {
            "seq": self._seq,
            "run_id": self.run_id,
            "iter": iteration,
            "kind": kind,
            "payload": payload,
        }
        self._fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._fh.flush()
        self._seq += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_trace(path: str | Path) -> list[dict]:
    """Load and validate a trace file; seq must count up from 0 with no gaps."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e
    events = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceError(f"trace {path} line {line_no}: invalid JSON ({e.msg})") from e
        if not isinstance(event, dict) or set(event) != TRACE_KEYS:
            raise TraceError(f"trace {path} line {line_no}: malformed event keys")
        if event["seq"] != len(events):
            raise TraceError(
                f"trace {path} line {line_no}: seq {event['seq']} "
                f"breaks the 0..N-1 progression"
            )
        events.append(event)
    if not events:
        raise TraceError(f"trace {path} is empty")
    return events


def replay_tree(events: list[dict]) -> dict:
    """Rebuild {nodes, edges, visits, returns} from expand/backprop events."""
    nodes = {0: {"parent": None, "kind": None, "depth": 0}}
    visits: dict[int, int] = {0: 0}
    returns: dict[int, float] = {0: 0.0}
    edges: list[tuple[int, int]] = []
    for event in events:
        payload = event["payload"]
        if event["kind"] == "expand":
            idx = payload["node"]
            if idx in nodes:
                raise TraceError(f"expand event re-creates node {idx}")
            if payload["parent"] not in nodes:
                raise TraceError(f"expand event references unknown parent {payload['parent']}")
            nodes[idx] = {
                "parent": payload["parent"],
                "kind": payload["kind"],
                "depth": payload["depth"],
            }
            visits[idx] = 0
            returns[idx] = 0.0
            edges.append((payload["parent"], idx))
        elif event["kind"] == "backprop":
            path = payload["path"]
            rewards = payload["rewards"]
            for idx in path:
                if idx not in nodes:
                    raise TraceError(f"backprop references unknown node {idx}")
                visits[idx] += 1
            acc = 0.0
            for idx, r in zip(reversed(path[1:]), reversed(rewards)):
                acc += r
                returns[idx] += acc
    return {
        "nodes": nodes,
        "edges": sorted(edges, key=lambda e: e[1]),
        "visits": visits,
        "returns": returns,
    }


def tree_snapshot(root) -> dict:
    """The same dictionary shape as `replay_tree`, read off a live tree."""
    nodes = {}
    visits = {}
    returns = {}
    edges = []
    stack = [(root, None)]
    while stack:
        node, parent_idx = stack.pop()
        idx = node.creation_index
        nodes[idx] = {
            "parent": parent_idx,
            "kind": node.incoming_action.kind.value if node.incoming_action else None,
            "depth": node.state.depth,
        }
        visits[idx] = node.visit_count
        returns[idx] = node.total_return
        if parent_idx is not None:
            edges.append((parent_idx, idx))
        for child in node.children:
            stack.append((child, idx))
    return {
        "nodes": nodes,
        "edges": sorted(edges, key=lambda e: e[1]),
        "visits": visits,
        "returns": returns,
    }


# ----------------------------------------------------------------- benchmark


@dataclass(frozen=True)
class Verdict:
    id: str
    answer: str | None
    gold: str
    correct: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "answer": self.answer,
            "gold": self.gold,
            "correct": self.correct,
            "error": self.error,
        }


@dataclass(frozen=True)
class RunReport:
    verdicts: tuple[Verdict, ...]
    seed: int
    wall_time: float = 0.0

    @property
    def n(self) -> int:
        return len(self.verdicts)

    @property
    def n_correct(self) -> int:
        return sum(v.correct for v in self.verdicts)

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n if self.n else 0.0

    def to_json(self) -> str:
        # wall_time is deliberately left out so repeated runs serialize
        # byte-identically.
        doc = {
            "n": self.n,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "seed": self.seed,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _load_existing_verdicts(path: Path) -> dict[str, Verdict]:
    if not path.exists():
        return {}
    existing = {}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            existing[obj["id"]] = Verdict(
                id=obj["id"],
                answer=obj["answer"],
                gold=obj["gold"],
                correct=obj["correct"],
                error=obj.get("error"),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise PersistError(f"verdicts file {path} line {line_no} is corrupt: {e}") from e
    return existing


def _solve_one(record, config, policy, scorer, executor, catalog, trace_dir):
    run_id = f"{record.id}-s{config.seed}"
    trace = None
    if trace_dir is not None:
        trace = TraceWriter(Path(trace_dir) / f"{run_id}.trace.jsonl", run_id)
    try:
        engine = SearchEngine(
            config,
            policy=policy,
            scorer=scorer,
            executor=executor,
            catalog=catalog,
            trace=trace,
            run_id=run_id,
        )
        result = engine.run(record.instance())
    finally:
        if trace is not None:
            trace.close()
    answer = result.final_answer
    multiple_choice = record.answer_format is AnswerFormat.MULTIPLE_CHOICE
    gold = normalize_answer(record.answer, multiple_choice=multiple_choice)
    return Verdict(
        id=record.id,
        answer=answer,
        gold=gold,
        correct=grade(answer or "", gold, multiple_choice=multiple_choice),
    )


def run_benchmark(
    records,
    config: SearchConfig,
    *,
    policy,
    scorer,
    executor=None,
    catalog=None,
    out_dir: str | Path | None = None,
    resume: bool = False,
    max_workers: int = 1,
) -> RunReport:
    """Solve every record, grading against gold answers.

    With `out_dir` set, writes per-problem trace files and a verdicts.jsonl
    (kept in dataset order even on resume). A failing problem becomes an
    incorrect verdict carrying the error message rather than aborting the
    run. `max_workers > 1` runs problems concurrently; output order and file
    contents stay in dataset order regardless, though backends must then be
    safe to share across threads.
    """
    out_path = Path(out_dir) if out_dir is not None else None
    trace_dir = None
    verdict_file = None
    done: dict[str, Verdict] = {}
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        trace_dir = out_path / "traces"
        trace_dir.mkdir(exist_ok=True)
        verdict_file = out_path / "verdicts.jsonl"
        if resume:
            done = _load_existing_verdicts(verdict_file)

    start = time.monotonic()
    pending = [r for r in records if r.id not in done]

    def attempt(record):
        try:
            return _solve_one(record, config, policy, scorer, executor, catalog, trace_dir)
        except Exception as e:  # noqa: BLE001 - any failure becomes a verdict
            log.warning("problem %s failed: %s", record.id, e)
            multiple_choice = record.answer_format is AnswerFormat.MULTIPLE_CHOICE
            return Verdict(
                id=record.id,
                answer=None,
                gold=normalize_answer(record.answer, multiple_choice=multiple_choice),
                correct=False,
                error=f"{type(e).__name__}: {e}",
            )

    if max_workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            fresh = list(pool.map(attempt, pending))
    else:
        fresh = [attempt(r) for r in pending]
    done.update({v.id: v for v in fresh})

    ordered = tuple(done[r.id] for r in records if r.id in done)
    if verdict_file is not None:
        try:
            with open(verdict_file, "w") as fh:
                for verdict in ordered:
                    fh.write(json.dumps(verdict.to_dict(), sort_keys=True) + "\n")
        except OSError as e:
            raise PersistError(f"cannot write verdicts to {verdict_file}: {e}") from e
    report = RunReport(
        verdicts=ordered, seed=config.seed, wall_time=time.monotonic() - start
    )
    if out_path is not None:
        try:
            (out_path / "report.json").write_text(report.to_json())
        except OSError as e:
            raise PersistError(f"cannot write report: {e}") from e
    return report
