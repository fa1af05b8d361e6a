"""Target-speaker ASR CoT data construction, verifiable rewards, and evaluation."""

__version__ = "0.1.0"
