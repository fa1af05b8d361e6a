"""Canonical record types and JSONL manifest persistence.

One record kind per manifest file, one JSON object per line, UTF-8.
Parsing is strict: unknown fields, wrong enum values, and type mismatches
are rejected with the 1-based line number, never silently coerced.
"""

from __future__ import annotations

import json
import math
import os
import wave
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Type

SCHEMA_VERSION = "v1"
GENDERS = ("male", "female")
DIFFICULTIES = ("easy", "hard")


class ManifestError(ValueError):
    """Raised for malformed manifest files or invalid records."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


def _require(obj: Dict[str, Any], key: str, typ, allow: Optional[Sequence] = None):
    if key not in obj:
        raise ValueError(f"missing field '{key}'")
    val = obj[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if typ is not None and not isinstance(val, typ):
        raise ValueError(f"field '{key}' has wrong type {type(val).__name__}")
    if isinstance(val, bool) and typ in (int, float):
        raise ValueError(f"field '{key}' has wrong type bool")
    if allow is not None and val not in allow:
        raise ValueError(f"field '{key}' must be one of {list(allow)}, got {val!r}")
    return val


def _check_no_unknown(obj: Dict[str, Any], allowed: Iterable[str]):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ValueError(f"unknown field(s): {sorted(unknown)}")


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker_id: str
    gender: str
    audio_path: str
    transcript: str
    duration_s: float
    schema: str = SCHEMA_VERSION

    ID_FIELD = "id"
    KIND = "utterance"

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValueError(f"gender must be one of {list(GENDERS)}, got {self.gender!r}")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "Utterance":
        _check_no_unknown(obj, [f.name for f in fields(cls)])
        return cls(
            id=_require(obj, "id", str),
            speaker_id=_require(obj, "speaker_id", str),
            gender=_require(obj, "gender", str, allow=GENDERS),
            audio_path=_require(obj, "audio_path", str),
            transcript=_require(obj, "transcript", str),
            duration_s=_require(obj, "duration_s", float),
            schema=str(obj.get("schema", SCHEMA_VERSION)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "speaker_id": self.speaker_id,
            "gender": self.gender,
            "audio_path": self.audio_path,
            "transcript": self.transcript,
            "duration_s": self.duration_s,
            "schema": self.schema,
        }


@dataclass(frozen=True)
class PredictionRecord:
    example_id: str
    raw_output: str
    format_ok: bool
    wer: float
    schema: str = SCHEMA_VERSION

    ID_FIELD = "example_id"
    KIND = "prediction"

    def __post_init__(self):
        if self.wer < 0:
            raise ValueError("wer must be >= 0")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "PredictionRecord":
        _check_no_unknown(obj, [f.name for f in fields(cls)])
        return cls(
            example_id=_require(obj, "example_id", str),
            raw_output=_require(obj, "raw_output", str),
            format_ok=_require(obj, "format_ok", bool),
            wer=_require(obj, "wer", float),
            schema=str(obj.get("schema", SCHEMA_VERSION)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "example_id": self.example_id,
            "raw_output": self.raw_output,
            "format_ok": self.format_ok,
            "wer": self.wer,
            "schema": self.schema,
        }


@dataclass(frozen=True)
class SpeakerInterval:
    speaker_id: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError("start_s must be >= 0")
        if self.end_s <= self.start_s:
            raise ValueError("end_s must be > start_s")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class MixtureSource:
    utterance_id: str
    interval: SpeakerInterval
    gain: float

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "MixtureSource":
        _check_no_unknown(obj, ["utterance_id", "speaker_id", "start_s", "end_s", "gain"])
        interval = SpeakerInterval(
            speaker_id=_require(obj, "speaker_id", str),
            start_s=_require(obj, "start_s", float),
            end_s=_require(obj, "end_s", float),
        )
        return cls(
            utterance_id=_require(obj, "utterance_id", str),
            interval=interval,
            gain=_require(obj, "gain", float),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "utterance_id": self.utterance_id,
            "speaker_id": self.interval.speaker_id,
            "start_s": self.interval.start_s,
            "end_s": self.interval.end_s,
            "gain": self.gain,
        }


@dataclass(frozen=True)
class ReferenceSegment:
    utterance_id: str
    ref_start_s: float
    ref_len_s: float

    def __post_init__(self):
        if self.ref_start_s < 0 or self.ref_len_s <= 0:
            raise ValueError("reference segment must have start >= 0 and positive length")


# total_duration_s must equal max interval end; looser than audio-sample
# resolution to survive JSON float round-trips.
_DURATION_TOL = 1e-6


@dataclass(frozen=True)
class MixtureRecord:
    id: str
    sources: Tuple[MixtureSource, ...]
    target_index: int
    reference: ReferenceSegment
    mixture_audio_path: str
    model_input_audio_path: str
    num_speakers: int
    total_duration_s: float
    overlap_s: float
    schema: str = SCHEMA_VERSION

    ID_FIELD = "id"
    KIND = "mixture"

    def __post_init__(self):
        if not self.sources:
            raise ValueError("sources must be non-empty")
        if not (0 <= self.target_index < len(self.sources)):
            raise ValueError("target_index out of range")
        if self.num_speakers not in (1, 2, 3):
            raise ValueError("num_speakers must be in {1, 2, 3}")
        if self.num_speakers != len(self.sources):
            raise ValueError("num_speakers must equal number of sources")
        if self.reference.utterance_id == self.sources[self.target_index].utterance_id:
            raise ValueError("reference must come from a different utterance than the target source")
        max_end = max(s.interval.end_s for s in self.sources)
        if abs(self.total_duration_s - max_end) > _DURATION_TOL:
            raise ValueError("total_duration_s must equal the latest source end time")
        if self.overlap_s < 0 or self.overlap_s > self.total_duration_s + _DURATION_TOL:
            raise ValueError("overlap_s must lie in [0, total_duration_s]")

    @property
    def target_source(self) -> MixtureSource:
        return self.sources[self.target_index]

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "MixtureRecord":
        allowed = [
            "id", "sources", "target_index", "reference", "mixture_audio_path",
            "model_input_audio_path", "num_speakers", "total_duration_s",
            "overlap_s", "schema",
        ]
        _check_no_unknown(obj, allowed)
        raw_sources = _require(obj, "sources", list)
        sources = tuple(MixtureSource.from_dict(s) for s in raw_sources)
        raw_ref = _require(obj, "reference", dict)
        _check_no_unknown(raw_ref, ["utterance_id", "ref_start_s", "ref_len_s"])
        reference = ReferenceSegment(
            utterance_id=_require(raw_ref, "utterance_id", str),
            ref_start_s=_require(raw_ref, "ref_start_s", float),
            ref_len_s=_require(raw_ref, "ref_len_s", float),
        )
        return cls(
            id=_require(obj, "id", str),
            sources=sources,
            target_index=_require(obj, "target_index", int),
            reference=reference,
            mixture_audio_path=_require(obj, "mixture_audio_path", str),
            model_input_audio_path=_require(obj, "model_input_audio_path", str),
            num_speakers=_require(obj, "num_speakers", int),
            total_duration_s=_require(obj, "total_duration_s", float),
            overlap_s=_require(obj, "overlap_s", float),
            schema=str(obj.get("schema", SCHEMA_VERSION)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "sources": [s.to_dict() for s in self.sources],
            "target_index": self.target_index,
            "reference": {
                "utterance_id": self.reference.utterance_id,
                "ref_start_s": self.reference.ref_start_s,
                "ref_len_s": self.reference.ref_len_s,
            },
            "mixture_audio_path": self.mixture_audio_path,
            "model_input_audio_path": self.model_input_audio_path,
            "num_speakers": self.num_speakers,
            "total_duration_s": self.total_duration_s,
            "overlap_s": self.overlap_s,
            "schema": self.schema,
        }


@dataclass(frozen=True)
class CotExample:
    example_id: str
    mixture_id: str
    prompt_text: str
    think_text: str
    answer_text: str
    difficulty: str
    think_included: bool
    schema: str = SCHEMA_VERSION

    ID_FIELD = "example_id"
    KIND = "cot"

    def __post_init__(self):
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"difficulty must be one of {list(DIFFICULTIES)}")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "CotExample":
        _check_no_unknown(obj, [f.name for f in fields(cls)])
        return cls(
            example_id=_require(obj, "example_id", str),
            mixture_id=_require(obj, "mixture_id", str),
            prompt_text=_require(obj, "prompt_text", str),
            think_text=_require(obj, "think_text", str),
            answer_text=_require(obj, "answer_text", str),
            difficulty=_require(obj, "difficulty", str, allow=DIFFICULTIES),
            think_included=_require(obj, "think_included", bool),
            schema=str(obj.get("schema", SCHEMA_VERSION)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "example_id": self.example_id,
            "mixture_id": self.mixture_id,
            "prompt_text": self.prompt_text,
            "think_text": self.think_text,
            "answer_text": self.answer_text,
            "difficulty": self.difficulty,
            "think_included": self.think_included,
            "schema": self.schema,
        }


RECORD_KINDS: Dict[str, type] = {
    Utterance.KIND: Utterance,
    PredictionRecord.KIND: PredictionRecord,
    MixtureRecord.KIND: MixtureRecord,
    CotExample.KIND: CotExample,
}


@dataclass
class Manifest:
    kind: Type
    records: List[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ids(self) -> List[str]:
        return [getattr(r, self.kind.ID_FIELD) for r in self.records]

    def by_id(self) -> Dict[str, Any]:
        return {getattr(r, self.kind.ID_FIELD): r for r in self.records}

    def check_unique_ids(self):
        seen = set()
        for r in self.records:
            rid = getattr(r, self.kind.ID_FIELD)
            if rid in seen:
                raise ManifestError(f"duplicate id {rid!r}")
            seen.add(rid)


def read_manifest(path: str, kind: Type) -> Manifest:
    """Read a JSONL manifest of one record kind, preserving file order."""
    if not os.path.isfile(path):
        raise ManifestError("no such file", path=path)
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                rec = kind.from_dict(obj)
            except ValueError as exc:
                raise ManifestError(str(exc), path=path, line=lineno) from exc
            rid = getattr(rec, kind.ID_FIELD)
            if rid in seen:
                raise ManifestError(f"duplicate id {rid!r}", path=path, line=lineno)
            seen.add(rid)
            records.append(rec)
    return Manifest(kind=kind, records=records)


def write_manifest(manifest: Manifest, path: str) -> None:
    """Write one record per line; refuses manifests with duplicate ids."""
    manifest.check_unique_ids()
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for rec in manifest.records:
            f.write(json.dumps(rec.to_dict(), ensure_ascii=False))
            f.write("\n")


@dataclass
class CorpusReport:
    missing_audio: List[str] = field(default_factory=list)
    duration_mismatches: List[str] = field(default_factory=list)
    empty_transcripts: List[str] = field(default_factory=list)

    def is_clean(self) -> bool:
        return not (self.missing_audio or self.duration_mismatches or self.empty_transcripts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "missing_audio": self.missing_audio,
            "duration_mismatches": self.duration_mismatches,
            "empty_transcripts": self.empty_transcripts,
        }


def _wav_duration_s(path: str) -> float:
    with wave.open(path, "rb") as w:
        return w.getnframes() / w.getframerate()


def validate_corpus(manifest: Manifest, audio_root: str) -> CorpusReport:
    """Report-only check: missing audio, duration drift > 1 sample, empty transcripts."""
    report = CorpusReport()
    for utt in manifest.records:
        if not utt.transcript.strip():
            report.empty_transcripts.append(utt.id)
        path = utt.audio_path
        if not os.path.isabs(path):
            path = os.path.join(audio_root, path)
        if not os.path.isfile(path):
            report.missing_audio.append(utt.id)
            continue
        with wave.open(path, "rb") as w:
            rate = w.getframerate()
            dur = w.getnframes() / rate
        if not math.isclose(dur, utt.duration_s, abs_tol=1.0 / rate):
            report.duration_mismatches.append(utt.id)
    return report
