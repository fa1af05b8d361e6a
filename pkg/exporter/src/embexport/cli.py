"""Command-line entry point for the embedding exporter.

Exit codes: 0 all items exported, 3 output written but some items were
skipped, 1 fatal error, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .core import ExportError, ExportJob, run_export

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Export speaker embeddings from a pretrained model to emb-v1 JSONL.",
    )
    p.add_argument("--corpus", required=True, help="utterance manifest (JSONL)")
    p.add_argument("--model", required=True, help="pretrained model id or local path")
    p.add_argument("--out", required=True, help="output emb-v1 file")
    p.add_argument("--segment-manifest", default=None,
                   help="mixture manifest; also embeds each reference segment")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--device", default="cpu")
    p.add_argument("--log-level", default="INFO")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    try:
        job = ExportJob(
            corpus_manifest_path=args.corpus,
            model_id=args.model,
            out_path=args.out,
            device=args.device,
            batch_size=args.batch_size,
            segment_manifest_path=args.segment_manifest,
        )
        from .model import load_embedder
        summary = run_export(job, load_embedder(args.model, args.device))
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    print(f"written={summary.n_written} failed={summary.n_failed} out={args.out}")
    return EXIT_OK if summary.n_failed == 0 else EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
