from __future__ import annotations

import csv
import json

import pytest

from stepsearch.cli import main

BOX_FOUR = {
    "*": {
        "*": {
            "understand": ["Restating the problem."],
            "code": ["```python\nx = 4\n```"],
            "reflect": ["Looks consistent."],
            "summary": ["So the result is \\boxed{4}"],
        }
    }
}


@pytest.fixture
def policy_script(tmp_path):
    path = tmp_path / "policy.json"
    path.write_text(json.dumps(BOX_FOUR))
    return str(path)


def solve_args(policy_script, *extra):
    return [
        "solve",
        "What is 2+2?",
        "--seed", "3",
        "--k", "3",
        "--m", "2",
        "--d-max", "6",
        "--mock-script", policy_script,
        *extra,
    ]


class TestSolve:
    def test_answer_on_first_line(self, policy_script, capsys):
        assert main(solve_args(policy_script)) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "4"
        assert out[1].startswith("iteration: ")
        assert out[2].startswith("kinds: understand")
        assert out[2].endswith("summary")
        assert out[3] == 'votes: {"4": 3}'

    def test_trace_written(self, policy_script, tmp_path, capsys):
        trace_dir = tmp_path / "traces"
        code = main(solve_args(policy_script, "--trace-dir", str(trace_dir)))
        assert code == 0
        out = capsys.readouterr().out
        trace_path = trace_dir / "cli-s3.trace.jsonl"
        assert f"trace: {trace_path}" in out
        assert trace_path.exists()

    def test_problem_file_with_choices(self, policy_script, tmp_path, capsys):
        script = tmp_path / "mc_policy.json"
        mc = {"*": {"*": dict(BOX_FOUR["*"]["*"], summary=["Option \\boxed{a}"])}}
        script.write_text(json.dumps(mc))
        problem = tmp_path / "problem.json"
        problem.write_text(
            json.dumps(
                {
                    "id": "q9",
                    "problem": "Pick the even number.",
                    "choices": [
                        {"label": "A", "text": "2"},
                        {"label": "B", "text": "3"},
                    ],
                }
            )
        )
        code = main(
            [
                "solve",
                "--problem-file", str(problem),
                "--seed", "3",
                "--k", "2",
                "--m", "1",
                "--d-max", "6",
                "--mock-script", str(script),
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.splitlines()[0] == "A"

    def test_problem_source_is_exclusive(self, policy_script, capsys):
        assert main(["solve", "--seed", "1", "--mock-script", policy_script]) == 1
        assert "exactly one" in capsys.readouterr().err

    def test_missing_seed(self, policy_script, capsys):
        assert main(["solve", "q", "--mock-script", policy_script]) == 1
        assert "seed is required" in capsys.readouterr().err

    def test_missing_policy(self, capsys):
        assert main(["solve", "q", "--seed", "1"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_script_entry_exits_one(self, tmp_path, capsys):
        script = tmp_path / "narrow.json"
        script.write_text(json.dumps({"only-this-id": BOX_FOUR["*"]}))
        assert main(solve_args(str(script))) == 1
        assert "no entry" in capsys.readouterr().err

    def test_unanswered_search_exits_two(self, tmp_path, capsys):
        script = tmp_path / "noanswer.json"
        bad = {"*": {"*": dict(BOX_FOUR["*"]["*"], summary=["no box here"])}}
        script.write_text(json.dumps(bad))
        code = main(solve_args(str(script)))
        assert code == 2
        assert "search failed:" in capsys.readouterr().err

    def test_config_file_plus_flag_override(self, policy_script, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "seed": 5,
                    "k": 2,
                    "m": 1,
                    "d_max": 6,
                    "backends": {"mock_policy": policy_script},
                }
            )
        )
        assert main(["solve", "What is 2+2?", "--config", str(config), "--k", "4"]) == 0
        out = capsys.readouterr().out
        assert 'votes: {"4": 4}' in out  # --k beat the file's k=2


class TestEval:
    def write_dataset(self, tmp_path, golds):
        path = tmp_path / "dataset.jsonl"
        rows = [
            {"id": f"p{i}", "problem": f"Q{i}?", "answer": g}
            for i, g in enumerate(golds)
        ]
        path.write_text("".join(json.dumps(r) + "\n" for r in rows))
        return str(path)

    def eval_args(self, dataset, policy_script, *extra):
        return [
            "eval", dataset,
            "--seed", "7",
            "--k", "2",
            "--m", "1",
            "--d-max", "6",
            "--mock-script", policy_script,
            *extra,
        ]

    def test_accuracy_line(self, policy_script, tmp_path, capsys):
        dataset = self.write_dataset(tmp_path, ["4", "4"])
        assert main(self.eval_args(dataset, policy_script)) == 0
        assert capsys.readouterr().out.splitlines()[0] == "2/2 = 1.000"

    def test_partial_accuracy(self, policy_script, tmp_path, capsys):
        dataset = self.write_dataset(tmp_path, ["4", "5"])
        assert main(self.eval_args(dataset, policy_script)) == 0
        assert capsys.readouterr().out.splitlines()[0] == "1/2 = 0.500"

    def test_out_dir_writes_report(self, policy_script, tmp_path, capsys):
        dataset = self.write_dataset(tmp_path, ["4"])
        out = tmp_path / "results"
        assert main(self.eval_args(dataset, policy_script, "--out", str(out))) == 0
        stdout = capsys.readouterr().out
        assert f"report: {out / 'report.json'}" in stdout
        report = json.loads((out / "report.json").read_text())
        assert report["accuracy"] == 1.0
        assert (out / "verdicts.jsonl").exists()
        assert (out / "traces" / "p0-s7.trace.jsonl").exists()

    def test_bad_dataset_exits_one(self, policy_script, tmp_path, capsys):
        path = tmp_path / "bad.jsonl"
        path.write_text("{nope\n")
        assert main(self.eval_args(str(path), policy_script)) == 1
        assert "invalid JSON" in capsys.readouterr().err


class TestTheory:
    def test_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "theory.csv"
        code = main(
            ["theory", "--n-max", "4", "--trials", "20", "--out", str(out)]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "lambda = 0.105573, min sample size = 29" in stdout
        assert f"wrote 4 rows to {out}" in stdout
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["n", "mean_error", "bound", "trials", "seed"]
        assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]

    def test_zero_separation_exits_one(self, tmp_path, capsys):
        code = main(
            ["theory", "--p-other", "0.9", "--p-star", "0.9",
             "--out", str(tmp_path / "t.csv")]
        )
        assert code == 1
        assert "separation must be positive" in capsys.readouterr().err

    def test_bad_prior_exits_one(self, tmp_path, capsys):
        code = main(
            ["theory", "--prior-star", "1.0", "--out", str(tmp_path / "t.csv")]
        )
        assert code == 1
        assert "--prior-star" in capsys.readouterr().err

    def test_phi_discount_flag(self, tmp_path, capsys):
        out = tmp_path / "phi.csv"
        code = main(
            ["theory", "--n-max", "4", "--trials", "20", "--phi", "0.5",
             "--out", str(out)]
        )
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        # ceil(n/2) effective draws: rows 1 and 2 share a stream, as do 3 and 4
        assert rows[1][1] == rows[2][1]
        assert rows[3][1] == rows[4][1]


class TestInspect:
    def test_summarizes_trace(self, policy_script, tmp_path, capsys):
        trace_dir = tmp_path / "traces"
        assert main(solve_args(policy_script, "--trace-dir", str(trace_dir))) == 0
        capsys.readouterr()
        trace = trace_dir / "cli-s3.trace.jsonl"
        assert main(["inspect", str(trace)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "run: cli-s3"
        assert lines[1].startswith("iter 0: understand ")
        assert "(r_T=" in lines[1]
        assert lines[-2] == "votes: 4=3"
        assert lines[-1] == "answer: 4"

    def test_corrupt_trace_exits_one(self, tmp_path, capsys):
        path = tmp_path / "broken.trace.jsonl"
        path.write_text("{nope\n")
        assert main(["inspect", str(path)]) == 1
        assert "invalid JSON" in capsys.readouterr().err

    def test_missing_trace_exits_one(self, tmp_path, capsys):
        assert main(["inspect", str(tmp_path / "absent.jsonl")]) == 1
        assert "cannot read trace" in capsys.readouterr().err


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit):
        main([])
