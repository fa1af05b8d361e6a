"""Waveform container, 16 kHz PCM WAV I/O, and mixture assembly primitives.

All audio is mono 16 kHz 16-bit PCM. Mixing is a sample-wise sum of
offset-padded sources with peak protection; the model-input audio is
reference segment + 3 s of digital silence + mixture.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .manifest import SpeakerInterval, Utterance

SAMPLE_RATE = 16000
PCM_SCALE = 32767.0


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)

    def rms(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.sqrt(np.mean(np.square(self.samples))))

    def slice_s(self, start_s: float, len_s: float) -> "Waveform":
        a = int(round(start_s * self.sample_rate_hz))
        b = a + int(round(len_s * self.sample_rate_hz))
        return Waveform(self.samples[a:b], self.sample_rate_hz)


def read_wav(path: str) -> Waveform:
    with wave.open(path, "rb") as w:
        if w.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono audio, got {w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM, got {8 * w.getsampwidth()}-bit")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, rate)


def write_wav(path: str, w: Waveform) -> None:
    pcm = np.clip(np.rint(w.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(w.sample_rate_hz)
        out.writeframes(pcm.tobytes())


def rms_normalize(w: Waveform, target_rms: float) -> Waveform:
    """Scale so that the output RMS equals target_rms; rejects silence."""
    rms = w.rms()
    if rms <= 1e-8:
        raise AudioError("cannot RMS-normalize silent audio")
    return Waveform(w.samples * (target_rms / rms), w.sample_rate_hz)


@dataclass(frozen=True)
class MixResult:
    waveform: Waveform
    intervals: Tuple[SpeakerInterval, ...]
    peak_scale: float  # 1.0 when no peak protection was needed


def mix(
    sources: Sequence[Tuple[Waveform, float]],
    speaker_ids: Optional[Sequence[str]] = None,
) -> MixResult:
    """Sum offset-padded sources; scale by 1/peak if any sample exceeds 1.

    Returns the mixture, one interval per source, and the applied peak scale.
    """
    if len(sources) == 0:
        raise AudioError("mix requires at least one source")
    if len(sources) > 3:
        raise AudioError("mix supports at most 3 sources")
    rate = sources[0][0].sample_rate_hz
    if any(w.sample_rate_hz != rate for w, _ in sources):
        raise AudioError("all sources must share one sample rate")
    if any(off < 0 for _, off in sources):
        raise AudioError("offsets must be >= 0")
    if speaker_ids is None:
        speaker_ids = [f"spk{i}" for i in range(len(sources))]

    offsets = [int(round(off * rate)) for _, off in sources]
    total = max(off + len(w) for (w, _), off in zip(sources, offsets))
    out = np.zeros(total, dtype=np.float64)
    intervals = []
    for (w, _), off, spk in zip(sources, offsets, speaker_ids):
        out[off:off + len(w)] += w.samples
        intervals.append(SpeakerInterval(speaker_id=spk, start_s=off / rate, end_s=(off + len(w)) / rate))

    peak = float(np.max(np.abs(out))) if total else 0.0
    scale = 1.0
    if peak > 1.0:
        scale = 1.0 / peak
        out *= scale
    return MixResult(Waveform(out, rate), tuple(intervals), scale)


def overlap_duration(intervals: Sequence[SpeakerInterval]) -> float:
    """Total time covered by two or more intervals, via a boundary sweep."""
    if not intervals:
        return 0.0
    points = sorted({iv.start_s for iv in intervals} | {iv.end_s for iv in intervals})
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        mid = 0.5 * (lo + hi)
        covered = sum(1 for iv in intervals if iv.start_s <= mid < iv.end_s)
        if covered >= 2:
            total += hi - lo
    return total


def select_reference_segment(
    u: Utterance, rng: np.random.Generator, len_s: float = 3.0
) -> Tuple[float, float]:
    """Uniform random len_s window; short utterances are used whole, unpadded."""
    if u.duration_s <= 0:
        raise AudioError(f"utterance {u.id} has zero duration")
    if u.duration_s < len_s:
        return 0.0, u.duration_s
    start = float(rng.uniform(0.0, u.duration_s - len_s))
    return start, len_s


def concat_with_silence(reference: Waveform, mixture: Waveform, silence_s: float = 3.0) -> Waveform:
    if reference.sample_rate_hz != mixture.sample_rate_hz:
        raise AudioError("sample-rate mismatch between reference and mixture")
    rate = reference.sample_rate_hz
    gap = np.zeros(int(round(silence_s * rate)), dtype=np.float64)
    return Waveform(np.concatenate([reference.samples, gap, mixture.samples]), rate)
