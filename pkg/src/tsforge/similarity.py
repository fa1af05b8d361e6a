"""Speaker embeddings, cosine scoring, and five-level similarity quantization.

A deterministic log-mel statistics embedder stands in for a neural
speaker model at desk scale; production embeddings arrive through the
``emb-v1`` JSONL file format written by the standalone exporter.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List

import numpy as np

from .audio import Waveform

EMB_FORMAT = "emb-v1"
PROXY_DIM = 40
_N_MELS = PROXY_DIM // 2
_FRAME_LEN = 400   # 25 ms at 16 kHz
_FRAME_HOP = 160   # 10 ms


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class SpeakerEmbedding:
    utterance_id: str
    vector: np.ndarray
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float64))
        if self.dim <= 0 or len(self.vector) != self.dim:
            raise EmbeddingError(f"{self.utterance_id}: vector length does not match dim")


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def _mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(rate / 2.0), n_mels + 2))
    bins = np.floor((n_fft + 1) * edges / rate).astype(int)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for i in range(n_mels):
        lo, mid, hi = bins[i], bins[i + 1], bins[i + 2]
        if mid > lo:
            fb[i, lo:mid] = (np.arange(lo, mid) - lo) / (mid - lo)
        if hi > mid:
            fb[i, mid:hi] = (hi - np.arange(mid, hi)) / (hi - mid)
    return fb


def proxy_embedding(w: Waveform, utterance_id: str = "") -> SpeakerEmbedding:
    """Per-band log-mel means and standard deviations, L2-normalized.

    Deterministic and dependency-free; good enough to separate the synthetic
    demo speakers and exercise the similarity/quantization pipeline.
    """
    if w.duration_s < 0.5:
        raise EmbeddingError("audio too short for proxy embedding (need >= 0.5 s)")
    x = w.samples
    if float(np.max(np.abs(x))) == 0.0:
        raise EmbeddingError("cannot embed all-zero audio")

    n_frames = 1 + (len(x) - _FRAME_LEN) // _FRAME_HOP
    idx = np.arange(_FRAME_LEN)[None, :] + _FRAME_HOP * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hanning(_FRAME_LEN)[None, :]
    power = np.abs(np.fft.rfft(frames, n=_FRAME_LEN, axis=1)) ** 2
    fb = _mel_filterbank(_N_MELS, _FRAME_LEN, w.sample_rate_hz)
    logmel = np.log(power @ fb.T + 1e-10)

    vec = np.concatenate([logmel.mean(axis=0), logmel.std(axis=0)])
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError("degenerate audio produced a zero embedding")
    return SpeakerEmbedding(utterance_id=utterance_id, vector=vec / norm, dim=PROXY_DIM)


def cosine_similarity(a: SpeakerEmbedding, b: SpeakerEmbedding) -> float:
    if a.dim != b.dim:
        raise EmbeddingError(f"dim mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.vector))
    nb = float(np.linalg.norm(b.vector))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity undefined for zero vectors")
    return float(np.dot(a.vector, b.vector) / (na * nb))


def clamp_unit(s: float) -> float:
    return max(0.0, min(1.0, s))


def quantize_similarity(s: float) -> int:
    """Uniform five-level quantization of [0, 1]: bins of width 0.2, 1.0 -> 5."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"similarity score {s} outside [0, 1]")
    return min(5, int(math.floor(5.0 * s)) + 1)


def similarity_level(a: SpeakerEmbedding, b: SpeakerEmbedding) -> int:
    return quantize_similarity(clamp_unit(cosine_similarity(a, b)))


def segment_key(utterance_id: str, start_s: float, len_s: float) -> str:
    """Embedding-map key for a sub-utterance segment (e.g. a reference clip)."""
    return f"{utterance_id}#{start_s:.2f}+{len_s:.2f}"


def write_embeddings(
    path: str, embeddings: Iterable[SpeakerEmbedding], source_model: str
) -> None:
    embs = list(embeddings)
    if not embs:
        raise EmbeddingError("refusing to write an embedding file with no header dim")
    dim = embs[0].dim
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"format": EMB_FORMAT, "dim": dim, "source_model": source_model}))
        f.write("\n")
        for e in embs:
            if e.dim != dim:
                raise EmbeddingError(f"{e.utterance_id}: dim {e.dim} differs from header dim {dim}")
            f.write(json.dumps({"utterance_id": e.utterance_id, "dim": e.dim,
                                "vector": [float(v) for v in e.vector]}))
            f.write("\n")


def load_embeddings(path: str) -> Dict[str, SpeakerEmbedding]:
    """Load an emb-v1 file; re-normalizes near-unit vectors, rejects the rest."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        return {}
    header = json.loads(lines[0])
    if header.get("format") != EMB_FORMAT:
        raise EmbeddingError(f"{path}: expected {EMB_FORMAT} header, got {header.get('format')!r}")
    dim = int(header["dim"])
    out: Dict[str, SpeakerEmbedding] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        obj = json.loads(line)
        uid = obj["utterance_id"]
        vec = np.asarray(obj["vector"], dtype=np.float64)
        if int(obj["dim"]) != dim or len(vec) != dim:
            raise EmbeddingError(f"{path}: line {lineno}: dim inconsistent with header ({uid})")
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"{path}: line {lineno}: non-finite values in embedding {uid}")
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-3:
            raise EmbeddingError(f"{path}: line {lineno}: embedding {uid} norm {norm:.6f} deviates from unit")
        out[uid] = SpeakerEmbedding(utterance_id=uid, vector=vec / norm, dim=dim)
    return out
