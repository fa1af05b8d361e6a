"""Mixture-set generation: k-speaker mixes with per-target records and audio.

For every generated mixture of k speakers, k records are emitted, one per
choice of target speaker. Each record carries the reference segment drawn
from a different utterance of the target speaker, and paths to the mixture
audio and the model-input audio (reference + 3 s silence + mixture).
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Dict, List, Optional

from .audio import (
    Waveform,
    concat_with_silence,
    mix,
    overlap_duration,
    read_wav,
    rms_normalize,
    select_reference_segment,
    write_wav,
)
from .manifest import (
    Manifest,
    MixtureRecord,
    MixtureSource,
    ReferenceSegment,
    Utterance,
)
from .seeding import derive_rng

SOURCE_RMS = 0.05  # equal-RMS mixing; the per-source gain is recorded


class GenerationError(ValueError):
    pass


def _load_utterance_audio(u: Utterance, audio_root: str) -> Waveform:
    path = u.audio_path
    if not os.path.isabs(path):
        path = os.path.join(audio_root, path)
    return read_wav(path)


def generate_mixture_set(
    corpus: Manifest,
    k_speakers: int,
    count: Optional[int],
    seed: int,
    out_dir: str,
    audio_root: Optional[str] = None,
    max_offset_s: float = 0.0,
    write_audio: bool = True,
) -> Manifest:
    """Generate mixtures of k speakers, emitting k records per mixture.

    With count=None, one mixture is created per eligible source utterance
    (the utterance anchors the mix and k-1 partner speakers are drawn at
    random); with an integer count, that many mixtures are sampled. All
    randomness is derived from (seed, mixture id) so output is
    byte-identical across runs and independent of parallelism.
    """
    if k_speakers not in (1, 2, 3):
        raise GenerationError("k_speakers must be 1, 2 or 3")
    if audio_root is None:
        audio_root = out_dir

    by_speaker: Dict[str, List[Utterance]] = defaultdict(list)
    for utt in corpus:
        by_speaker[utt.speaker_id].append(utt)
    # reference must come from a second utterance of the same speaker
    eligible = sorted(spk for spk, utts in by_speaker.items() if len(utts) >= 2)
    if len(eligible) < k_speakers:
        raise GenerationError(
            f"need {k_speakers} speakers with >= 2 utterances, found {len(eligible)}"
        )

    audio_dir = os.path.join(out_dir, "audio")
    if write_audio:
        os.makedirs(audio_dir, exist_ok=True)

    wave_cache: Dict[str, Waveform] = {}

    def cached_wave(u: Utterance) -> Waveform:
        if u.id not in wave_cache:
            wave_cache[u.id] = _load_utterance_audio(u, audio_root)
        return wave_cache[u.id]

    def pick_utterance(rng, spk: str) -> Utterance:
        utts = sorted(by_speaker[spk], key=lambda u: u.id)
        return utts[int(rng.integers(len(utts)))]

    eligible_set = set(eligible)
    if count is None:
        anchors: List[Optional[Utterance]] = [
            u for u in corpus if u.speaker_id in eligible_set
        ]
        mixture_ids = [f"mix{k_speakers}-{u.id}" for u in anchors]
    else:
        anchors = [None] * count
        mixture_ids = [f"mix{k_speakers}-{i:06d}" for i in range(count)]

    records: List[MixtureRecord] = []
    for anchor, mixture_id in zip(anchors, mixture_ids):
        rng = derive_rng(seed, "mixture", mixture_id)

        chosen: List[Utterance] = []
        if anchor is not None:
            chosen.append(anchor)
            partners = [s for s in eligible if s != anchor.speaker_id]
            if len(partners) < k_speakers - 1:
                raise GenerationError("not enough partner speakers for the anchored protocol")
            spk_idx = rng.choice(len(partners), size=k_speakers - 1, replace=False)
            speakers = [partners[int(j)] for j in spk_idx]
        else:
            spk_idx = rng.choice(len(eligible), size=k_speakers, replace=False)
            speakers = [eligible[int(j)] for j in spk_idx]
        for spk in speakers:
            chosen.append(pick_utterance(rng, spk))

        offsets = [float(rng.uniform(0.0, max_offset_s)) if max_offset_s > 0 else 0.0
                   for _ in chosen]

        waves = [cached_wave(u) for u in chosen]
        gains = [SOURCE_RMS / w.rms() for w in waves]
        normed = [rms_normalize(w, SOURCE_RMS) for w in waves]
        result = mix(list(zip(normed, offsets)), speaker_ids=[u.speaker_id for u in chosen])
        overlap = overlap_duration(result.intervals)
        total = result.waveform.duration_s

        mixture_path = os.path.join("audio", f"{mixture_id}.wav")
        if write_audio:
            write_wav(os.path.join(out_dir, mixture_path), result.waveform)

        sources = tuple(
            MixtureSource(utterance_id=u.id, interval=iv, gain=g * result.peak_scale)
            for u, iv, g in zip(chosen, result.intervals, gains)
        )

        for t, target in enumerate(chosen):
            rec_rng = derive_rng(seed, "reference", mixture_id, target.id)
            pool = sorted(
                (u for u in by_speaker[target.speaker_id] if u.id != target.id),
                key=lambda u: u.id,
            )
            ref_utt = pool[int(rec_rng.integers(len(pool)))]
            ref_start, ref_len = select_reference_segment(ref_utt, rec_rng)

            input_path = os.path.join("audio", f"{mixture_id}.t{t}.input.wav")
            if write_audio:
                ref_wave = cached_wave(ref_utt).slice_s(ref_start, ref_len)
                model_input = concat_with_silence(ref_wave, result.waveform)
                write_wav(os.path.join(out_dir, input_path), model_input)

            records.append(MixtureRecord(
                id=f"{mixture_id}-t{t}",
                sources=sources,
                target_index=t,
                reference=ReferenceSegment(ref_utt.id, ref_start, ref_len),
                mixture_audio_path=mixture_path,
                model_input_audio_path=input_path,
                num_speakers=k_speakers,
                total_duration_s=total,
                overlap_s=overlap,
            ))

    return Manifest(kind=MixtureRecord, records=records)
