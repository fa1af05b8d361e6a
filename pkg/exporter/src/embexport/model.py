"""Real-model inference: wrap a pretrained audio encoder as an embed_batch callable.

Imported lazily so the export pipeline (and its tests) work without torch
or transformers installed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import SAMPLE_RATE, EmbedBatch, ExportError


def load_embedder(model_id: str, device: str = "cpu") -> EmbedBatch:
    """Load a pretrained speech encoder and return a batch embedding function.

    The encoder's last hidden states are mean-pooled over time; L2
    normalization happens downstream in the export pipeline.
    """
    try:
        import torch
        from transformers import AutoFeatureExtractor, AutoModel
    except ImportError as exc:
        raise ExportError(
            "torch and transformers are required for real-model export "
            "(pip install 'embexport[model]')") from exc

    try:
        extractor = AutoFeatureExtractor.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id).to(device).eval()
    except Exception as exc:
        raise ExportError(f"could not load model {model_id!r}: {exc}") from exc

    def embed_batch(waveforms: Sequence[np.ndarray]) -> np.ndarray:
        inputs = extractor(
            [np.asarray(w, dtype=np.float32) for w in waveforms],
            sampling_rate=SAMPLE_RATE,
            return_tensors="pt",
            padding=True,
        ).to(device)
        with torch.no_grad():
            hidden = model(**inputs).last_hidden_state
        return hidden.mean(dim=1).cpu().double().numpy()

    return embed_batch
