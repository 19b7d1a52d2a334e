#!/usr/bin/env python3
"""Regenerate the toy benchmark fixtures under data/toy/.

The five problems cover the free-form arithmetic path, the code-feedback
path (including the perfect-squares filter), fraction normalization, one
multiple-choice record, and a no-frills fallback. Mock executor results are
keyed by the sha256 of each fenced block exactly as extracted, so this
script is the single source of truth for those digests.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from stepsearch.codeexec import extract_code, source_hash  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "data" / "toy"

CODE_T1 = "Let me just compute it.\n```python\nx = 2 + 2\n```"
CODE_T2 = (
    "I will enumerate the squares and filter by last digit.\n"
    "```python\n"
    "squares = [i * i for i in range(4, 10)]\n"
    "result = len([square for square in squares if square % 10 == 6])\n"
    "```"
)
CODE_T3 = "Convert the fraction to a decimal to double-check.\n```python\np = 1 / 4\n```"
CODE_T4 = "Evaluate the expression directly.\n```python\nvalue = 2 + 1\n```"
CODE_T5 = "Multiply it out.\n```python\ny = 3 * 5\n```"

DATASET = [
    {"id": "t1", "problem": "What is 2 + 2?", "answer": "4"},
    {
        "id": "t2",
        "problem": (
            "How many perfect squares between 10 and 99 have 6 as their last digit?"
        ),
        "answer": "2",
    },
    {
        "id": "t3",
        "problem": "A fair coin is flipped twice. What is the probability of two heads?",
        "answer": "1/4",
    },
    {
        "id": "t4",
        "problem": "Which option equals 2 + 1?",
        "answer": "C",
        "choices": [
            {"label": "A", "text": "1"},
            {"label": "B", "text": "2"},
            {"label": "C", "text": "3"},
            {"label": "D", "text": "4"},
            {"label": "E", "text": "5"},
        ],
    },
    {"id": "t5", "problem": "Compute 3 * 5.", "answer": "15"},
]

POLICY = {
    "t1": {
        "understand": ["The task is plain addition of two small integers."],
        "code": [CODE_T1],
        "reflect": ["Re-checking: 2 + 2 is 4, and the code agrees."],
        "summary": ["Both the arithmetic and the code agree.\n\\boxed{4}"],
    },
    "t2": {
        "understand": [
            "Two-digit perfect squares are 16, 25, 36, 49, 64, 81; I need those ending in 6."
        ],
        "code": [CODE_T2],
        "reflect": ["16 and 36 end in 6; the filter confirms exactly two."],
        "summary": ["The count of such squares is \\boxed{2}."],
    },
    "t3": {
        "understand": ["Independent flips: multiply the per-flip head probabilities."],
        "code": [CODE_T3],
        "reflect": ["(1/2) * (1/2) = 1/4 = 0.25, matching the decimal check."],
        "summary": ["The probability is \\boxed{\\frac{1}{4}}."],
    },
    "t4": {
        "understand": ["The sum 2 + 1 is 3, so I need the option whose text is 3."],
        "code": [CODE_T4],
        "reflect": ["value = 3 matches option C exactly."],
        "summary": ["The closest option to my result is \\boxed{C}."],
    },
    "t5": {
        "understand": ["Simple multiplication of 3 by 5."],
        "code": [CODE_T5],
        "reflect": ["3 * 5 = 15; nothing subtle here."],
        "summary": ["The product is \\boxed{15}."],
    },
}

EXEC_RESULTS = {
    CODE_T1: {"ok": True, "stdout": "", "bindings": {"x": 4}},
    CODE_T2: {
        "ok": True,
        "stdout": "",
        "bindings": {"squares": [16, 25, 36, 49, 64, 81], "result": 2},
    },
    CODE_T3: {"ok": True, "stdout": "", "bindings": {"p": 0.25}},
    CODE_T4: {"ok": True, "stdout": "", "bindings": {"value": 3}},
    CODE_T5: {"ok": True, "stdout": "", "bindings": {"y": 15}},
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)

    with open(OUT / "dataset.jsonl", "w") as fh:
        for record in DATASET:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    policy_script = {
        pid: {"*": {kind: texts for kind, texts in by_kind.items()}}
        for pid, by_kind in POLICY.items()
    }
    policy_script["self_reward"] = ["8"]
    (OUT / "mock_policy.json").write_text(json.dumps(policy_script, indent=2) + "\n")

    prm = {
        "default": [0.0, 0.0],
        "rules": [{"when_kind": "summary", "logits": [2.0, 0.0]}],
    }
    (OUT / "mock_prm.json").write_text(json.dumps(prm, indent=2) + "\n")

    exec_results = {}
    for text, result in EXEC_RESULTS.items():
        blocks = extract_code(text)
        assert len(blocks) == 1, f"expected one block in {text!r}"
        exec_results[source_hash(blocks[0].source)] = result
    (OUT / "mock_exec.json").write_text(json.dumps(exec_results, indent=2) + "\n")

    config = {
        "seed": 7,
        "k": 3,
        "m": 2,
        "d_max": 6,
        "rules": "all",
        "backends": {
            "mock_policy": "data/toy/mock_policy.json",
            "mock_prm": "data/toy/mock_prm.json",
        },
        "sandbox": {"mock_exec": "data/toy/mock_exec.json"},
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
