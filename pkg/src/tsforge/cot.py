"""Render CoT training examples and apply the random reasoning strategy.

The think block follows a fixed five-component template (see
docs/template.md): audio information, reference description, one line per
speaker, target inference, then the answer carried separately in the
answer block. Hard examples always keep the full reasoning; easy examples
are emptied with probability p_empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

from .manifest import CotExample, Manifest, MixtureRecord, PredictionRecord
from .rewards import serialize_target
from .seeding import derive_rng

TEMPLATE_VERSION = "cot-template-v1"

PROMPT_TEXT = (
    "Listen to the reference speech and the mixed speech that follows it, then "
    "transcribe only the words spoken by the target speaker indicated by the "
    "reference. Answer in the form <think>...</think><answer>...</answer>."
)


class CotError(ValueError):
    pass


@dataclass(frozen=True)
class DifficultyLabel:
    example_id: str
    difficulty: str


def label_difficulty(pred: PredictionRecord) -> DifficultyLabel:
    """Easy iff the base model got the sample exactly right, format included.

    A format-failed prediction counts as hard even when its extracted text
    happens to match: format errors are the more fundamental failure.
    """
    easy = pred.format_ok and pred.wer == 0.0
    return DifficultyLabel(example_id=pred.example_id, difficulty="easy" if easy else "hard")


def _speaker_lines(rec: MixtureRecord, genders: Mapping[str, str], levels: Mapping[str, int]) -> List[str]:
    lines = []
    for k, src in enumerate(rec.sources, start=1):
        iv = src.interval
        lines.append(
            f"Speaker {k} speaks from {iv.start_s:.2f}s to {iv.end_s:.2f}s, "
            f"is {genders[src.utterance_id]}, and has similarity level "
            f"{levels[src.utterance_id]} to the reference."
        )
    return lines


def _infer_target(rec: MixtureRecord, ref_gender: str, genders: Mapping[str, str],
                  levels: Mapping[str, int]) -> str:
    if len(rec.sources) == 1:
        return ("There is only one speaker, so identification is straightforward: "
                "the target is Speaker 1.")
    candidates = [k for k, src in enumerate(rec.sources)
                  if genders[src.utterance_id] == ref_gender]
    if not candidates:
        candidates = list(range(len(rec.sources)))
    best_level = max(levels[rec.sources[k].utterance_id] for k in candidates)
    top = [k for k in candidates if levels[rec.sources[k].utterance_id] == best_level]
    winner = min(top, key=lambda k: (rec.sources[k].interval.start_s, k))
    if len(top) > 1:
        names = " and ".join(f"Speaker {k + 1}" for k in top)
        return (f"{names} both match the reference gender with similarity level "
                f"{best_level}; breaking the tie by earliest start time, the target "
                f"is Speaker {winner + 1}.")
    return (f"Speaker {winner + 1} matches the reference gender ({ref_gender}) and "
            f"has the highest similarity level ({best_level}), so the target is "
            f"Speaker {winner + 1}.")


def render_cot(rec: MixtureRecord, corpus: Manifest, levels: Mapping[str, int]) -> CotExample:
    """Deterministically render one CoT example from a mixture record.

    `levels` maps each source utterance id to its similarity level against
    the record's reference segment.
    """
    utts = corpus.by_id()
    for src in rec.sources:
        if src.utterance_id not in utts:
            raise CotError(f"{rec.id}: source utterance {src.utterance_id!r} not in corpus")
        if src.utterance_id not in levels:
            raise CotError(f"{rec.id}: missing similarity level for {src.utterance_id!r}")
    if rec.reference.utterance_id not in utts:
        raise CotError(f"{rec.id}: reference utterance {rec.reference.utterance_id!r} not in corpus")

    genders = {src.utterance_id: utts[src.utterance_id].gender for src in rec.sources}
    ref_gender = utts[rec.reference.utterance_id].gender
    n = rec.num_speakers

    audio_info = (
        f"The input contains a reference speech followed by a mixed speech with "
        f"{n} speaker{'s' if n != 1 else ''}; the mixed speech lasts "
        f"{rec.total_duration_s:.2f}s with {rec.overlap_s:.2f}s of overlap."
    )
    ref_info = f"The reference speech is from a {ref_gender} speaker."
    parts = [audio_info, ref_info]
    parts.extend(_speaker_lines(rec, genders, levels))
    parts.append(_infer_target(rec, ref_gender, genders, levels))
    think_text = " ".join(parts)

    answer_text = utts[rec.target_source.utterance_id].transcript
    return CotExample(
        example_id=f"cot-{rec.id}",
        mixture_id=rec.id,
        prompt_text=PROMPT_TEXT,
        think_text=think_text,
        answer_text=answer_text,
        difficulty="hard",
        think_included=True,
    )


def serialize_example(ex: CotExample) -> str:
    """The training-target string for one example."""
    return serialize_target(ex.think_text if ex.think_included else "", ex.answer_text)


def apply_random_reasoning(
    examples: Sequence[CotExample],
    labels: Mapping[str, str],
    p_empty: float = 0.5,
    seed: int = 0,
) -> List[CotExample]:
    """Empty the think block of easy examples with probability p_empty.

    Hard examples always keep their full reasoning. Per-example randomness is
    derived from (seed, example_id), so output is order-independent.
    """
    if not (0.0 <= p_empty <= 1.0):
        raise CotError("p_empty must lie in [0, 1]")
    out: List[CotExample] = []
    for ex in examples:
        difficulty = labels.get(ex.example_id)
        if difficulty is None:
            raise CotError(f"example {ex.example_id!r} has no difficulty label")
        if difficulty not in ("easy", "hard"):
            raise CotError(f"example {ex.example_id!r}: bad difficulty {difficulty!r}")
        drop = False
        if difficulty == "easy":
            rng = derive_rng(seed, "random-reasoning", ex.example_id)
            drop = bool(rng.uniform() < p_empty)
        out.append(CotExample(
            example_id=ex.example_id,
            mixture_id=ex.mixture_id,
            prompt_text=ex.prompt_text,
            think_text="" if drop else ex.think_text,
            answer_text=ex.answer_text,
            difficulty=difficulty,
            think_included=not drop,
        ))
    return out


def labels_from_predictions(preds: Manifest) -> Dict[str, str]:
    return {p.example_id: label_difficulty(p).difficulty for p in preds}
