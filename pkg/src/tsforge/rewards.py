"""Output parsing and the verifiable rewards: WER reward, format reward, total.

The total reward is r_wer + r_format. The WER reward is
1 - (sub + del + ins) / n_ref and is deliberately NOT clamped at zero:
a hypothesis with more insertions than reference words scores negative,
which penalizes long hallucinations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"
_ALL_TAGS = (THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE)

# Strict output format: think block, optional whitespace, answer block,
# nothing else. Tag contents may not contain their own closing tag.
_STRICT_RE = re.compile(
    r"\A<think>((?:(?!</think>).)*)</think>\s*<answer>((?:(?!</answer>).)*)</answer>\Z",
    re.DOTALL,
)

_NORMALIZE_RE = re.compile(r"[^A-Z0-9']+")


@dataclass(frozen=True)
class ParsedOutput:
    raw: str
    think: Optional[str]
    answer: Optional[str]
    format_ok: bool


@dataclass(frozen=True)
class AlignmentCounts:
    sub: int
    dele: int
    ins: int
    hits: int
    n_ref: int

    @property
    def errors(self) -> int:
        return self.sub + self.dele + self.ins


@dataclass(frozen=True)
class RewardBreakdown:
    r_wer: float
    r_format: float
    r_total: float
    counts: AlignmentCounts
    parsed: ParsedOutput


def normalize_text(s: str) -> List[str]:
    """Uppercase words; anything outside A-Z, 0-9 and apostrophe splits."""
    return [w for w in _NORMALIZE_RE.sub(" ", s.upper()).split() if w]


def extract_first_answer(raw: str) -> Optional[str]:
    """Text of the first well-formed answer pair; None if absent or tangled."""
    open_at = raw.find(ANSWER_OPEN)
    if open_at < 0:
        return None
    close_at = raw.find(ANSWER_CLOSE, open_at + len(ANSWER_OPEN))
    if close_at < 0:
        return None
    text = raw[open_at + len(ANSWER_OPEN):close_at]
    if any(tag in text for tag in _ALL_TAGS):
        return None
    return text


def parse_output(raw: str) -> ParsedOutput:
    """Never throws; strict format check plus best-effort answer extraction."""
    m = _STRICT_RE.match(raw.strip())
    if m:
        return ParsedOutput(raw=raw, think=m.group(1), answer=m.group(2), format_ok=True)
    return ParsedOutput(raw=raw, think=None, answer=extract_first_answer(raw), format_ok=False)


def align(hyp: List[str], ref: List[str]) -> AlignmentCounts:
    """Minimal word-level edit alignment with unit costs.

    Backtrace prefers match > substitution > deletion > insertion so the
    sub/del/ins split is deterministic when several minimal alignments exist.
    """
    m, n = len(ref), len(hyp)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        ri = ref[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, n + 1):
            diag = prev[j - 1] + (0 if ri == hyp[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    sub = dele = ins = hits = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and d[i][j] == d[i - 1][j - 1]:
            hits += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + 1:
            sub += 1
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            dele += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return AlignmentCounts(sub=sub, dele=dele, ins=ins, hits=hits, n_ref=m)


def reward_wer(c: AlignmentCounts) -> float:
    if c.n_ref < 1:
        raise ValueError("reward_wer requires a non-empty reference")
    return 1.0 - c.errors / c.n_ref


def reward_format(p: ParsedOutput) -> float:
    return 1.0 if p.format_ok else 0.0


def reward_total(raw: str, ref_transcript: str) -> RewardBreakdown:
    """Score one model output against its ground-truth transcript."""
    ref_words = normalize_text(ref_transcript)
    if not ref_words:
        raise ValueError("reference transcript normalizes to zero words")
    parsed = parse_output(raw)
    hyp_words = normalize_text(parsed.answer) if parsed.answer is not None else []
    counts = align(hyp_words, ref_words)
    r_wer = reward_wer(counts)
    r_fmt = reward_format(parsed)
    return RewardBreakdown(
        r_wer=r_wer, r_format=r_fmt, r_total=r_wer + r_fmt, counts=counts, parsed=parsed
    )


def serialize_target(think_text: str, answer_text: str) -> str:
    """Render the training-target string; always parses with format reward 1."""
    return f"{THINK_OPEN}{think_text}{THINK_CLOSE}{ANSWER_OPEN}{answer_text}{ANSWER_CLOSE}"
