"""Corpus reading, audio decoding, batching, and atomic emb-v1 writing.

Model inference is injected as a callable so the export pipeline can be
tested without downloading anything; :mod:`embexport.model` provides the
real implementation.
"""

from __future__ import annotations

import json
import logging
import os
import wave
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

EMB_FORMAT = "emb-v1"
SAMPLE_RATE = 16000
PCM_SCALE = 32767.0

log = logging.getLogger("embexport")

# embed_batch: list of float64 waveforms (16 kHz) -> (batch, dim) array
EmbedBatch = Callable[[Sequence[np.ndarray]], np.ndarray]


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class ExportJob:
    corpus_manifest_path: str
    model_id: str
    out_path: str
    device: str = "cpu"
    batch_size: int = 8
    segment_manifest_path: Optional[str] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")
        if not os.path.isfile(self.corpus_manifest_path):
            raise ExportError(f"corpus manifest not readable: {self.corpus_manifest_path}")
        out_dir = os.path.dirname(os.path.abspath(self.out_path)) or "."
        if not os.path.isdir(out_dir):
            raise ExportError(f"output directory does not exist: {out_dir}")


@dataclass
class ExportSummary:
    n_written: int = 0
    n_failed: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)

    def fail(self, key: str, reason: str) -> None:
        self.n_failed += 1
        self.failures.append((key, reason))
        log.warning("skipping %s: %s", key, reason)


def _read_jsonl(path: str) -> List[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}: line {lineno}: invalid JSON ({exc})") from exc
    return rows


def read_wav_16k_mono(path: str) -> np.ndarray:
    """Decode a mono 16 kHz 16-bit PCM WAV to float64 in [-1, 1]."""
    with wave.open(path, "rb") as wf:
        if wf.getnchannels() != 1:
            raise ExportError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getframerate() != SAMPLE_RATE:
            raise ExportError(f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()}")
        if wf.getsampwidth() != 2:
            raise ExportError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        raw = wf.readframes(wf.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE


def segment_key(utterance_id: str, start_s: float, len_s: float) -> str:
    """Key format shared with the consuming toolkit for sub-utterance spans."""
    return f"{utterance_id}#{start_s:.2f}+{len_s:.2f}"


def _collect_work(job: ExportJob) -> List[Tuple[str, str, Optional[Tuple[float, float]]]]:
    """Return (key, audio_path, optional (start_s, len_s)) work items."""
    root = os.path.dirname(os.path.abspath(job.corpus_manifest_path))
    utts: Dict[str, str] = {}
    work: List[Tuple[str, str, Optional[Tuple[float, float]]]] = []
    for row in _read_jsonl(job.corpus_manifest_path):
        uid = row.get("id")
        audio = row.get("audio_path")
        if not isinstance(uid, str) or not isinstance(audio, str):
            raise ExportError(f"{job.corpus_manifest_path}: record missing id/audio_path")
        if uid in utts:
            raise ExportError(f"{job.corpus_manifest_path}: duplicate utterance id {uid!r}")
        path = audio if os.path.isabs(audio) else os.path.join(root, audio)
        utts[uid] = path
        work.append((uid, path, None))

    if job.segment_manifest_path is not None:
        seen = set()
        for row in _read_jsonl(job.segment_manifest_path):
            ref = row.get("reference")
            if not isinstance(ref, dict):
                raise ExportError(
                    f"{job.segment_manifest_path}: record has no reference object")
            uid = ref["utterance_id"]
            start, length = float(ref["ref_start_s"]), float(ref["ref_len_s"])
            key = segment_key(uid, start, length)
            if key in seen:
                continue
            seen.add(key)
            if uid not in utts:
                raise ExportError(
                    f"{job.segment_manifest_path}: reference names unknown utterance {uid!r}")
            work.append((key, utts[uid], (start, length)))
    return work


def _load_item(path: str, span: Optional[Tuple[float, float]]) -> np.ndarray:
    samples = read_wav_16k_mono(path)
    if span is not None:
        start, length = span
        i = int(round(start * SAMPLE_RATE))
        j = i + int(round(length * SAMPLE_RATE))
        if i < 0 or j > len(samples) or j <= i:
            raise ExportError(f"{path}: segment [{start}, {start + length}) outside audio")
        samples = samples[i:j]
    if samples.size == 0:
        raise ExportError(f"{path}: empty audio")
    return samples


def write_emb_v1(path: str, rows: Sequence[Tuple[str, np.ndarray]], source_model: str) -> None:
    """Write embeddings atomically (temp file + rename into place)."""
    if not rows:
        raise ExportError("refusing to write an embedding file with no records")
    dim = len(rows[0][1])
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(json.dumps({"format": EMB_FORMAT, "dim": dim,
                                "source_model": source_model}))
            f.write("\n")
            for key, vec in rows:
                if len(vec) != dim:
                    raise ExportError(f"{key}: dim {len(vec)} differs from header dim {dim}")
                f.write(json.dumps({"utterance_id": key, "dim": dim,
                                    "vector": [float(v) for v in vec]}))
                f.write("\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def run_export(job: ExportJob, embed_batch: EmbedBatch) -> ExportSummary:
    """Embed every work item in batches and write one emb-v1 file.

    Undecodable audio and degenerate embeddings are skipped and counted;
    model or write failures are fatal.
    """
    summary = ExportSummary()
    work = _collect_work(job)

    loaded: List[Tuple[str, np.ndarray]] = []
    for key, path, span in work:
        try:
            loaded.append((key, _load_item(path, span)))
        except (ExportError, OSError, wave.Error, EOFError) as exc:
            summary.fail(key, str(exc))

    rows: List[Tuple[str, np.ndarray]] = []
    for i in range(0, len(loaded), job.batch_size):
        batch = loaded[i:i + job.batch_size]
        vectors = np.asarray(embed_batch([s for _, s in batch]), dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(batch):
            raise ExportError(
                f"model returned shape {vectors.shape} for a batch of {len(batch)}")
        for (key, _), vec in zip(batch, vectors):
            if not np.all(np.isfinite(vec)):
                summary.fail(key, "non-finite embedding")
                continue
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                summary.fail(key, "zero-norm embedding")
                continue
            rows.append((key, vec / norm))

    if not rows:
        raise ExportError("no embeddings produced; nothing to write")
    write_emb_v1(job.out_path, rows, source_model=job.model_id)
    summary.n_written = len(rows)
    return summary
