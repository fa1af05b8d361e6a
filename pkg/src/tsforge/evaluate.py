"""Evaluation protocol: lenient answer extraction, pooled WER, weighted average.

Extraction here is deliberately more forgiving than the strict format
reward: any first well-formed answer pair counts, with or without a think
block. Outputs with missing or tangled tags are scored as empty
hypotheses, i.e. all reference words deleted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .rewards import align, extract_first_answer, normalize_text, parse_output


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalPair:
    example_id: str
    raw_output: str
    ref_transcript: str


@dataclass(frozen=True)
class EvalSet:
    name: str
    pairs: Tuple[EvalPair, ...]

    def __post_init__(self):
        if not self.pairs:
            raise EvalError(f"eval set {self.name!r} is empty")
        for p in self.pairs:
            if not normalize_text(p.ref_transcript):
                raise EvalError(f"{self.name}/{p.example_id}: empty reference transcript")


@dataclass
class SetResult:
    wer_percent: float
    n_samples: int
    n_malformed: int


@dataclass
class EvalReport:
    per_set: Dict[str, SetResult] = field(default_factory=dict)
    weighted_avg_percent: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "per_set": {
                name: {
                    "wer_percent": r.wer_percent,
                    "n_samples": r.n_samples,
                    "n_malformed": r.n_malformed,
                }
                for name, r in self.per_set.items()
            },
            "weighted_avg_percent": self.weighted_avg_percent,
        }


def extract_answer_for_eval(raw: str) -> str:
    """First well-formed answer-pair text; empty string when tags are broken."""
    answer = extract_first_answer(raw)
    return answer if answer is not None else ""


def score_set(s: EvalSet) -> SetResult:
    """Corpus-pooled WER: total errors over total reference words, as percent."""
    total_errors = 0
    total_ref = 0
    n_malformed = 0
    for pair in s.pairs:
        if not parse_output(pair.raw_output).format_ok:
            n_malformed += 1
        hyp = normalize_text(extract_answer_for_eval(pair.raw_output))
        ref = normalize_text(pair.ref_transcript)
        counts = align(hyp, ref)
        total_errors += counts.errors
        total_ref += counts.n_ref
    return SetResult(
        wer_percent=100.0 * total_errors / total_ref,
        n_samples=len(s.pairs),
        n_malformed=n_malformed,
    )


def weighted_average(per_set: Dict[str, SetResult]) -> float:
    """Sample-size-weighted mean of per-set WER percentages."""
    if not per_set:
        raise EvalError("weighted_average needs at least one set")
    total_n = sum(r.n_samples for r in per_set.values())
    return sum(r.wer_percent * r.n_samples for r in per_set.values()) / total_n


def evaluate(sets: Sequence[EvalSet]) -> EvalReport:
    report = EvalReport()
    for s in sets:
        report.per_set[s.name] = score_set(s)
    report.weighted_avg_percent = weighted_average(report.per_set)
    return report
