"""`forge` command-line entry point.

One multiplexed binary for the whole pipeline: mix, embed-proxy, cot build,
score, select, grpo-sim, eval, demo-corpus, validate. Global flags --seed,
--jobs, --config, --log-level. Logs go to stderr; data only to files. Each
stage prints `stage=<name> status=ok records=<n>` on success.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Dict, List, Optional

from . import cot as cot_mod
from . import demo as demo_mod
from . import evaluate as eval_mod
from . import grpo as grpo_mod
from . import mixtures as mix_mod
from . import similarity as sim_mod
from .audio import read_wav
from .manifest import (
    CotExample,
    Manifest,
    ManifestError,
    MixtureRecord,
    PredictionRecord,
    Utterance,
    read_manifest,
    validate_corpus,
    write_manifest,
)
from .rewards import reward_total

log = logging.getLogger("forge")


def _load_config(path: Optional[str]) -> Dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _resolve(args, config: Dict, name: str, default=None, required: bool = False):
    """Explicit flag > config file value > default."""
    val = getattr(args, name, None)
    if val is None:
        val = config.get(name, default)
    if required and val is None:
        raise ValueError(f"missing required option --{name.replace('_', '-')} (or config key '{name}')")
    return val


def _ok(stage: str, records: int):
    print(f"stage={stage} status=ok records={records}")


def _read_jsonl(path: str) -> List[Dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {lineno}: not a JSON object")
            rows.append(obj)
    return rows


def _write_jsonl(path: str, rows: List[Dict]):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False))
            f.write("\n")


def _utterance_wave(utt: Utterance, audio_root: str):
    path = utt.audio_path
    if not os.path.isabs(path):
        path = os.path.join(audio_root, path)
    return read_wav(path)


def cmd_mix(args, config) -> int:
    corpus_path = _resolve(args, config, "corpus", required=True)
    out_dir = _resolve(args, config, "out_dir", required=True)
    corpus = read_manifest(corpus_path, Utterance)
    count_val = _resolve(args, config, "count")
    manifest = mix_mod.generate_mixture_set(
        corpus,
        k_speakers=int(_resolve(args, config, "speakers", required=True)),
        count=int(count_val) if count_val is not None else None,
        seed=int(_resolve(args, config, "seed", required=True)),
        out_dir=out_dir,
        audio_root=_resolve(args, config, "audio_root", os.path.dirname(os.path.abspath(corpus_path))),
        max_offset_s=float(_resolve(args, config, "max_offset_s", 0.0)),
    )
    write_manifest(manifest, os.path.join(out_dir, "mixtures.jsonl"))
    _ok("mix", len(manifest))
    return 0


def cmd_embed_proxy(args, config) -> int:
    corpus_path = _resolve(args, config, "corpus", required=True)
    out_path = _resolve(args, config, "out", required=True)
    corpus = read_manifest(corpus_path, Utterance)
    audio_root = _resolve(args, config, "audio_root",
                          os.path.dirname(os.path.abspath(corpus_path)))
    embeddings = []
    waves = {}
    for utt in corpus:
        waves[utt.id] = _utterance_wave(utt, audio_root)
        embeddings.append(sim_mod.proxy_embedding(waves[utt.id], utterance_id=utt.id))
    mixtures_path = _resolve(args, config, "mixtures")
    if mixtures_path:
        # also embed each record's exact reference segment
        seen = set()
        for rec in read_manifest(mixtures_path, MixtureRecord):
            ref = rec.reference
            key = sim_mod.segment_key(ref.utterance_id, ref.ref_start_s, ref.ref_len_s)
            if key in seen:
                continue
            seen.add(key)
            w = waves[ref.utterance_id].slice_s(ref.ref_start_s, ref.ref_len_s)
            embeddings.append(sim_mod.proxy_embedding(w, utterance_id=key))
    sim_mod.write_embeddings(out_path, embeddings, source_model="logmel-proxy")
    _ok("embed-proxy", len(embeddings))
    return 0


def _levels_for_record(rec: MixtureRecord, embs) -> Dict[str, int]:
    ref = rec.reference
    key = sim_mod.segment_key(ref.utterance_id, ref.ref_start_s, ref.ref_len_s)
    ref_emb = embs.get(key) or embs.get(ref.utterance_id)
    if ref_emb is None:
        raise ValueError(f"{rec.id}: no embedding for reference {ref.utterance_id!r}")
    levels = {}
    for src in rec.sources:
        src_emb = embs.get(src.utterance_id)
        if src_emb is None:
            raise ValueError(f"{rec.id}: no embedding for source {src.utterance_id!r}")
        levels[src.utterance_id] = sim_mod.similarity_level(src_emb, ref_emb)
    return levels


def cmd_cot_build(args, config) -> int:
    mixtures = read_manifest(_resolve(args, config, "mixtures", required=True), MixtureRecord)
    corpus = read_manifest(_resolve(args, config, "corpus", required=True), Utterance)
    embs = sim_mod.load_embeddings(_resolve(args, config, "embeddings", required=True))
    seed = int(_resolve(args, config, "seed", required=True))
    p_empty = float(_resolve(args, config, "p_empty", 0.5))

    examples = [cot_mod.render_cot(rec, corpus, _levels_for_record(rec, embs))
                for rec in mixtures]

    base_preds_path = _resolve(args, config, "base_preds")
    if base_preds_path:
        preds = read_manifest(base_preds_path, PredictionRecord)
        labels = cot_mod.labels_from_predictions(preds)
    else:
        # no base-model decode available: treat every sample as hard (full CoT)
        labels = {ex.example_id: "hard" for ex in examples}
    examples = cot_mod.apply_random_reasoning(examples, labels, p_empty=p_empty, seed=seed)

    out = _resolve(args, config, "out", required=True)
    write_manifest(Manifest(kind=CotExample, records=examples), out)
    _ok("cot-build", len(examples))
    return 0


def _ref_text(obj: Dict) -> str:
    for key in ("answer_text", "transcript", "text"):
        if key in obj:
            return obj[key]
    raise ValueError("reference record needs one of: answer_text, transcript, text")


def cmd_score(args, config) -> int:
    preds = _read_jsonl(_resolve(args, config, "preds", required=True))
    refs = _read_jsonl(_resolve(args, config, "refs", required=True))
    ref_by_id = {obj.get("example_id", obj.get("id")): _ref_text(obj) for obj in refs}

    rows = []
    pred_rows = []
    for obj in preds:
        eid = obj["example_id"]
        raw = obj["raw_output"]
        if eid not in ref_by_id:
            raise ValueError(f"no reference transcript for example {eid!r}")
        b = reward_total(raw, ref_by_id[eid])
        wer = b.counts.errors / b.counts.n_ref
        rows.append({
            "example_id": eid,
            "format_ok": b.parsed.format_ok,
            "wer": wer,
            "r_wer": b.r_wer,
            "r_format": b.r_format,
            "r_total": b.r_total,
            "sub": b.counts.sub,
            "del": b.counts.dele,
            "ins": b.counts.ins,
            "hits": b.counts.hits,
            "n_ref": b.counts.n_ref,
        })
        pred_rows.append(PredictionRecord(
            example_id=eid, raw_output=raw, format_ok=b.parsed.format_ok, wer=wer,
        ))
    _write_jsonl(_resolve(args, config, "out", required=True), rows)
    pred_out = _resolve(args, config, "pred_out")
    if pred_out:
        write_manifest(Manifest(kind=PredictionRecord, records=pred_rows), pred_out)
    _ok("score", len(rows))
    return 0


_STRATEGY_NAMES = {
    "random": "random",
    "balanced": "balanced_correct_error",
    "error-only": "error_only",
}


def cmd_select(args, config) -> int:
    preds = read_manifest(_resolve(args, config, "preds", required=True), PredictionRecord)
    ratio_str = str(_resolve(args, config, "ratio", "1:5"))
    c, e = (int(x) for x in ratio_str.split(":"))
    strategy = grpo_mod.SelectionStrategy(
        kind=_STRATEGY_NAMES[_resolve(args, config, "strategy", required=True)],
        budget=int(_resolve(args, config, "budget", required=True)),
        correct_to_error_ratio=(c, e),
    )
    ids = grpo_mod.select_rl_data(preds, strategy, seed=int(_resolve(args, config, "seed", required=True)))
    _write_jsonl(_resolve(args, config, "out", required=True),
                 [{"example_id": i} for i in ids])
    _ok("select", len(ids))
    return 0


def cmd_grpo_sim(args, config) -> int:
    instances = [grpo_mod.ToyInstance.from_dict(obj)
                 for obj in _read_jsonl(_resolve(args, config, "instances", required=True))]
    result = grpo_mod.simulate_grpo(
        instances,
        group_size=int(_resolve(args, config, "group_size", grpo_mod.DEFAULT_GROUP_SIZE)),
        lr=float(_resolve(args, config, "lr", 0.05)),
        steps=int(_resolve(args, config, "steps", 1000)),
        seed=int(_resolve(args, config, "seed", required=True)),
    )
    trace_path = _resolve(args, config, "trace", required=True)
    parent = os.path.dirname(os.path.abspath(trace_path))
    os.makedirs(parent, exist_ok=True)
    with open(trace_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "mean_reward", "p_best"])
        for row in result.trace:
            writer.writerow([row.step, repr(row.mean_reward), repr(row.p_best)])
    _ok("grpo-sim", len(result.trace))
    return 0


def cmd_eval(args, config) -> int:
    set_specs = _resolve(args, config, "set", required=True)
    sets = []
    for spec_str in set_specs:
        if "=" not in spec_str:
            raise ValueError(f"--set expects name=<jsonl>, got {spec_str!r}")
        name, path = spec_str.split("=", 1)
        pairs = tuple(
            eval_mod.EvalPair(
                example_id=obj["example_id"],
                raw_output=obj["raw_output"],
                ref_transcript=obj["ref_transcript"],
            )
            for obj in _read_jsonl(path)
        )
        sets.append(eval_mod.EvalSet(name=name, pairs=pairs))
    report = eval_mod.evaluate(sets)
    report_path = _resolve(args, config, "report", required=True)
    parent = os.path.dirname(os.path.abspath(report_path))
    os.makedirs(parent, exist_ok=True)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    for name, res in report.per_set.items():
        log.info("set=%s wer=%.2f%% n=%d malformed=%d",
                 name, res.wer_percent, res.n_samples, res.n_malformed)
    log.info("weighted_avg=%.2f%%", report.weighted_avg_percent)
    _ok("eval", sum(r.n_samples for r in report.per_set.values()))
    return 0


def cmd_demo_corpus(args, config) -> int:
    out_dir = _resolve(args, config, "out_dir", required=True)
    manifest = demo_mod.build_demo_corpus(out_dir, seed=int(_resolve(args, config, "seed", 0)))
    _ok("demo-corpus", len(manifest))
    return 0


def cmd_validate(args, config) -> int:
    corpus_path = _resolve(args, config, "corpus", required=True)
    corpus = read_manifest(corpus_path, Utterance)
    audio_root = _resolve(args, config, "audio_root",
                          os.path.dirname(os.path.abspath(corpus_path)))
    report = validate_corpus(corpus, audio_root)
    print(json.dumps(report.to_dict(), indent=2))
    _ok("validate", len(corpus))
    return 0 if report.is_clean() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description=__doc__)
    parser.add_argument("--config", help="JSON config file; keys mirror flag names")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallelism hint (output is identical for any value)")
    sub = parser.add_subparsers(dest="command")

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int)
        return p

    p = add("mix", cmd_mix, help="generate k-speaker mixtures and model-input audio")
    p.add_argument("--corpus")
    p.add_argument("--speakers", type=int, choices=(1, 2, 3))
    p.add_argument("--count", type=int,
                   help="number of mixtures; omit for one per source utterance")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--max-offset-s", dest="max_offset_s", type=float)

    p = add("embed-proxy", cmd_embed_proxy, help="write proxy speaker embeddings (emb-v1)")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--mixtures", help="also embed each record's reference segment")

    cot_parser = sub.add_parser("cot", help="CoT dataset commands")
    cot_sub = cot_parser.add_subparsers(dest="cot_command")
    p = cot_sub.add_parser("build", help="render CoT examples from mixtures")
    p.set_defaults(fn=cmd_cot_build)
    p.add_argument("--seed", type=int)
    p.add_argument("--mixtures")
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--base-preds", dest="base_preds")
    p.add_argument("--p-empty", dest="p_empty", type=float)
    p.add_argument("--out")

    p = add("score", cmd_score, help="compute WER/format/total rewards per example")
    p.add_argument("--preds")
    p.add_argument("--refs")
    p.add_argument("--out")
    p.add_argument("--pred-out", dest="pred_out",
                   help="also write a PredictionRecord manifest for select/cot-build")

    p = add("select", cmd_select, help="RL data selection")
    p.add_argument("--preds")
    p.add_argument("--strategy", choices=sorted(_STRATEGY_NAMES))
    p.add_argument("--budget", type=int)
    p.add_argument("--ratio")
    p.add_argument("--out")

    p = add("grpo-sim", cmd_grpo_sim, help="toy GRPO policy simulation")
    p.add_argument("--instances")
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--trace")

    p = add("eval", cmd_eval, help="tag-extraction WER evaluation")
    p.add_argument("--set", action="append")
    p.add_argument("--report")

    p = add("demo-corpus", cmd_demo_corpus, help="synthesize the bundled 10-utterance demo corpus")
    p.add_argument("--out-dir", dest="out_dir")

    p = add("validate", cmd_validate, help="check a corpus manifest against its audio")
    p.add_argument("--corpus")
    p.add_argument("--audio-root", dest="audio_root")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        config = _load_config(args.config)
        return args.fn(args, config)
    except (ValueError, ManifestError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
