"""Bundled synthetic demo corpus: 10 utterances, 5 speakers, 2 each.

Speakers are harmonic tones with speaker-specific fundamentals and
spectral envelopes, so the proxy embedder can tell them apart. Everything
is derived from the seed; two builds with the same seed are byte-identical.
"""

from __future__ import annotations

import os
from typing import List

import numpy as np

from .audio import SAMPLE_RATE, Waveform, write_wav
from .manifest import Manifest, Utterance, write_manifest
from .seeding import derive_rng

_SPEAKERS = [
    # (speaker_id, gender, f0 Hz, spectral tilt, formant Hz)
    ("spk01", "female", 210.0, 0.55, 2400.0),
    ("spk02", "male", 110.0, 0.75, 900.0),
    ("spk03", "female", 260.0, 0.45, 3100.0),
    ("spk04", "male", 140.0, 0.85, 1300.0),
    ("spk05", "female", 185.0, 0.65, 1900.0),
]

_LEXICON = [
    "TIME", "RIVER", "STONE", "LIGHT", "GARDEN", "WINTER", "VOICE", "PAPER",
    "MOUNTAIN", "SILVER", "MORNING", "WINDOW", "FOREST", "CANDLE", "HARBOR",
    "THUNDER", "MEADOW", "LANTERN", "VILLAGE", "COMPASS",
]


def _synth(speaker, utt_idx: int, seed: int, duration_s: float) -> Waveform:
    _, _, f0, tilt, formant = speaker
    rng = derive_rng(seed, "demo-audio", speaker[0], utt_idx)
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE

    # slight per-utterance pitch drift keeps same-speaker utterances distinct
    f = f0 * (1.0 + 0.02 * float(rng.uniform(-1, 1)))
    x = np.zeros(n)
    for h in range(1, 13):
        freq = h * f
        if freq >= SAMPLE_RATE / 2:
            break
        amp = np.exp(-tilt * h) * (1.0 + 1.5 * np.exp(-((freq - formant) / 500.0) ** 2))
        phase = float(rng.uniform(0, 2 * np.pi))
        x += amp * np.sin(2 * np.pi * freq * t + phase)

    # speech-like syllabic envelope, per-utterance rate and phase
    rate = float(rng.uniform(2.5, 4.5))
    env = 0.55 + 0.45 * np.sin(2 * np.pi * rate * t + float(rng.uniform(0, 2 * np.pi))) ** 2
    x *= env
    x *= 0.3 / np.max(np.abs(x))
    return Waveform(x, SAMPLE_RATE)


def build_demo_corpus(out_dir: str, seed: int = 0) -> Manifest:
    """Write corpus.jsonl plus WAVs under out_dir/audio and return the manifest."""
    audio_dir = os.path.join(out_dir, "audio")
    os.makedirs(audio_dir, exist_ok=True)
    rng = derive_rng(seed, "demo-corpus")
    records: List[Utterance] = []
    for speaker in _SPEAKERS:
        spk_id, gender = speaker[0], speaker[1]
        for j in range(2):
            utt_id = f"{spk_id}-u{j}"
            duration = float(rng.uniform(4.0, 7.0))
            w = _synth(speaker, j, seed, duration)
            rel_path = os.path.join("audio", f"{utt_id}.wav")
            write_wav(os.path.join(out_dir, rel_path), w)
            n_words = int(rng.integers(5, 9))
            words = [_LEXICON[int(rng.integers(len(_LEXICON)))] for _ in range(n_words)]
            records.append(Utterance(
                id=utt_id,
                speaker_id=spk_id,
                gender=gender,
                audio_path=rel_path,
                transcript=" ".join(words),
                duration_s=w.duration_s,
            ))
    manifest = Manifest(kind=Utterance, records=records)
    write_manifest(manifest, os.path.join(out_dir, "corpus.jsonl"))
    return manifest
