"""Standalone speaker-embedding exporter.

Reads a corpus manifest, runs a pretrained embedding model over the audio,
and writes an ``emb-v1`` JSONL file. The file format is the only contract
with the consuming toolkit; nothing here imports it.
"""

from .core import EMB_FORMAT, ExportError, ExportJob, ExportSummary, run_export

__all__ = ["EMB_FORMAT", "ExportError", "ExportJob", "ExportSummary", "run_export"]
