"""Boxed-answer extraction, normalization, and grading.

Answers travel as plain strings: a summary step writes its result inside
boxed{...}, the engine extracts the last such span, and grading compares
normalized forms plus exact rational equality. No symbolic algebra.
"""

from __future__ import annotations

import re
from fractions import Fraction

__all__ = [
    "last_boxed_span",
    "normalize_answer",
    "grade",
]

_BOXED_MARKERS = ("\\boxed{", "boxed{")

_FRACTION_RE = re.compile(r"\\[dt]?frac\{([^{}]+)\}\{([^{}]+)\}")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:\.\d+)?")


def last_boxed_span(text: str) -> str | None:
    """Return the content of the last boxed{...} in text, or None.

    Handles nested braces by counting; an unbalanced marker yields None.
    """
    start = -1
    marker_len = 0
    for marker in _BOXED_MARKERS:
        idx = text.rfind(marker)
        if idx > start:
            start = idx
            marker_len = len(marker)
    if start < 0:
        return None
    depth = 0
    body_start = start + marker_len
    for pos in range(body_start, len(text)):
        ch = text[pos]
        if ch == "{":
            depth += 1
        elif ch == "}":
            if depth == 0:
                return text[body_start:pos]
            depth -= 1
    return None


def _strip_wrappers(s: str) -> str:
    s = s.strip()
    while len(s) >= 2:
        if s[0] == "$" and s[-1] == "$":
            s = s[1:-1].strip()
        elif s[0] == "{" and s[-1] == "}" and _braces_balanced(s[1:-1]):
            s = s[1:-1].strip()
        else:
            break
    return s


def _braces_balanced(s: str) -> bool:
    depth = 0
    for ch in s:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _canonical_number(s: str) -> str:
    if s.startswith("+"):
        s = s[1:]
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s in ("-0", "", "-"):
        s = "0"
    return s


def normalize_answer(raw: str, multiple_choice: bool = False) -> str:
    """Canonicalize an extracted answer for voting and grading.

    Strips whitespace, wrapping dollar signs and braces; rewrites simple
    \\frac{a}{b} as a/b; canonicalizes plain numerics; uppercases a lone
    choice letter in multiple-choice mode. Anything else passes verbatim.
    """
    s = _strip_wrappers(raw)
    m = _FRACTION_RE.fullmatch(s)
    if m:
        s = f"{m.group(1).strip()}/{m.group(2).strip()}"
    if _NUMBER_RE.fullmatch(s):
        s = _canonical_number(s)
    if multiple_choice and len(s) == 1 and s.isalpha():
        s = s.upper()
    return s


def _as_rational(s: str) -> Fraction | None:
    s = s.strip()
    if "/" in s:
        num, _, den = s.partition("/")
        num, den = num.strip(), den.strip()
        if _NUMBER_RE.fullmatch(num) and _NUMBER_RE.fullmatch(den):
            try:
                denom = Fraction(den)
                if denom == 0:
                    return None
                return Fraction(num) / denom
            except (ValueError, ZeroDivisionError):
                return None
        return None
    if _NUMBER_RE.fullmatch(s):
        try:
            return Fraction(s)
        except ValueError:
            return None
    return None


def grade(pred: str, gold: str, multiple_choice: bool = False) -> bool:
    """Exact match after normalization, plus equality as rationals."""
    p = normalize_answer(pred, multiple_choice)
    g = normalize_answer(gold, multiple_choice)
    if p == g:
        return True
    pr, gr = _as_rational(p), _as_rational(g)
    return pr is not None and gr is not None and pr == gr
