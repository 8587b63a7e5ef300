"""Command-line surface: corrupt, manifest, normalize, caption, evaluate, run, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corruptions, datasets, report
from .errors import CapharnessError, ConfigError
from .harness import RunConfig, load_run, run as run_pipeline
from .lexical import build_pairs, evaluate_pairs, load_synonyms
from .normalize import normalize_batch
from .providers import (DecodingParams, captions_from_file, captions_from_http,
                        save_caption_records)
from .similarity import make_embedder, similarity_corpus


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--param expects KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _corruption_spec_from_args(args) -> corruptions.CorruptionSpec | corruptions.MixtureSpec:
    if args.mixture:
        steps_doc = json.loads(Path(args.mixture).read_text(encoding="utf-8"))
        steps = [corruptions.CorruptionSpec(
            kind=s["kind"], level=s.get("level", "medium"),
            params=dict(s.get("params") or {})) for s in steps_doc]
        return corruptions.MixtureSpec(steps)
    if not args.kind:
        raise ConfigError("either --kind or --mixture is required")
    params = dict(_parse_param(p) for p in args.param or [])
    return corruptions.CorruptionSpec(kind=args.kind, level=args.level, params=params)


def _cmd_corrupt(args) -> int:
    manifest = datasets.load_manifest(args.manifest, args.format)
    spec = _corruption_spec_from_args(args)
    out = corruptions.corrupt_dataset(manifest, spec, args.out, run_seed=args.seed,
                                      workers=args.workers)
    errors = out.provenance.get("errors", [])
    print(f"wrote {len(out.samples)} corrupted images to {args.out} "
          f"({spec.condition_id}, seed {args.seed})")
    for err in errors:
        print(f"  skipped: {err}", file=sys.stderr)
    return 0 if not errors else 1


def _cmd_manifest_convert(args) -> int:
    manifest = datasets.load_manifest(getattr(args, "in"), args.format)
    manifest.save(args.out)
    print(f"wrote {len(manifest.samples)} samples to {args.out}")
    return 0


def _cmd_manifest_stats(args) -> int:
    stats_list = []
    for path in getattr(args, "in"):
        manifest = datasets.load_manifest(path, args.format)
        stats = datasets.caption_length_stats(manifest)
        stats_list.append(stats)
        print(f"{stats.name}: {stats.total} references, "
              f"mean length {stats.mean:.2f}, median {stats.median:.1f}")
    if args.hist:
        fmt = "svg" if args.hist.endswith(".svg") else "csv"
        Path(args.hist).write_text(
            report.render_length_histogram(stats_list, fmt), encoding="utf-8")
        print(f"histogram written to {args.hist}")
    return 0


def _cmd_normalize(args) -> int:
    records = captions_from_file(getattr(args, "in"), args.model_id)
    normalize_batch(records)
    save_caption_records(records, args.out)
    print(f"normalized {len(records)} captions into {args.out}")
    return 0


def _cmd_caption(args) -> int:
    manifest = datasets.load_manifest(args.manifest, args.format)
    decoding = DecodingParams(temperature=args.temperature, top_k=args.top_k,
                              beam_size=args.beam_size, max_tokens=args.max_tokens)
    provider = args.provider
    if provider.startswith("file:"):
        records = captions_from_file(provider[len("file:"):], args.model_id)
        errors = []
    elif provider.startswith("http:"):
        url = provider[len("http:"):]
        if not url.startswith(("http://", "https://")):
            url = "http://" + url.lstrip("/")
        records, errors = captions_from_http(
            url, manifest, args.tier, decoding, args.model_id,
            timeout=args.timeout, workers=args.workers)
    else:
        raise ConfigError(f"provider must be file:<path> or http:<url>, got {provider!r}")
    save_caption_records(records, args.out)
    print(f"wrote {len(records)} captions to {args.out}")
    for err in errors:
        print(f"  failed {err['sample_id']}: {err['error']}", file=sys.stderr)
    return 0 if not errors else 1


def _cmd_evaluate(args) -> int:
    manifest = datasets.load_manifest(args.manifest, args.format)
    records = captions_from_file(args.candidates, args.model_id)
    if not args.raw:
        normalize_batch(records)
        candidates = {r.sample_id: r.normalized for r in records}
    else:
        candidates = {r.sample_id: r.raw for r in records}
    pairs = build_pairs(manifest, candidates)
    synonyms = load_synonyms(args.synonyms) if args.synonyms else None
    scores, per_sample = evaluate_pairs(pairs, cider_variant=args.cider_variant,
                                        synonyms=synonyms)
    refs_by_id = {s.sample_id: s.references for s in manifest.samples}
    sim_corpus, sim_values = similarity_corpus(
        [candidates[p.sample_id] for p in pairs],
        [refs_by_id[p.sample_id] for p in pairs],
        make_embedder(args.embedder), reduce=args.reduce)
    for row, value in zip(per_sample, sim_values):
        row["similarity"] = value

    doc = {
        "scores": scores.to_dict(),
        "similarity": sim_corpus,
        "ratio": scores.testlen / scores.reflen,
        "sample_count": len(pairs),
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    if args.per_sample:
        lines = [json.dumps(row, ensure_ascii=False) for row in per_sample]
        Path(args.per_sample).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"scored {len(pairs)} samples -> {args.out}")
    print(f"  BLEU-1 {scores.bleu1:.4f}  METEOR {scores.meteor:.4f}  "
          f"ROUGE-L {scores.rouge_l:.4f}  CIDEr {scores.cider:.4f}  "
          f"similarity {sim_corpus:.4f}")
    return 0


def _cmd_run(args) -> int:
    config_path = Path(args.config)
    config = RunConfig.from_file(config_path)
    out_dir = args.out
    if out_dir is None:
        raw = json.loads(config_path.read_text(encoding="utf-8")) \
            if config_path.suffix.lower() == ".json" else None
        if raw is None:
            try:
                import tomllib
            except ImportError:
                import tomli as tomllib
            raw = tomllib.loads(config_path.read_text(encoding="utf-8"))
        out_dir = raw.get("out_dir")
    if out_dir is None:
        raise ConfigError("no output directory: pass --out or set out_dir in the config")
    result = run_pipeline(config, out_dir)
    valid = len(result.valid_cells())
    print(f"run complete: {len(result.cells)} cells ({valid} valid) in {out_dir}")
    for cell in result.cells:
        if cell.invalid:
            print(f"  INVALID {cell.key}: {cell.reason}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    if args.table == "hist":
        if not args.manifest:
            raise ConfigError("--table hist needs at least one --manifest")
        stats_list = [datasets.caption_length_stats(datasets.load_manifest(m))
                      for m in args.manifest]
        doc = report.render_length_histogram(stats_list, args.fmt or "csv")
    else:
        result = load_run(args.run)
        fmt = args.fmt or "csv"
        if args.table == "1":
            doc = report.render_table1(result, fmt)
        else:
            doc = report.render_table2(result, fmt)
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capharness",
        description="Caption robustness harness: corrupt images, collect "
                    "captions, score them against references.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="write corrupted copies of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", default="native_jsonl", choices=datasets.FORMATS)
    p.add_argument("--kind", choices=corruptions.KINDS)
    p.add_argument("--level", default="medium", choices=corruptions.LEVELS)
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="override one severity parameter")
    p.add_argument("--mixture", help="JSON file with an ordered list of steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("manifest", help="convert or inspect dataset manifests")
    msub = p.add_subparsers(dest="subcommand", required=True)
    pc = msub.add_parser("convert", help="convert any supported format to native JSONL")
    pc.add_argument("--in", required=True)
    pc.add_argument("--format", default="native_jsonl", choices=datasets.FORMATS)
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=_cmd_manifest_convert)
    ps = msub.add_parser("stats", help="reference caption length statistics")
    ps.add_argument("--in", required=True, action="append")
    ps.add_argument("--format", default="native_jsonl", choices=datasets.FORMATS)
    ps.add_argument("--hist", help="write histogram to this .csv or .svg file")
    ps.set_defaults(func=_cmd_manifest_stats)

    p = sub.add_parser("normalize", help="normalize raw captions in a JSONL file")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model-id", default="model")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("caption", help="collect captions from a provider")
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", default="native_jsonl", choices=datasets.FORMATS)
    p.add_argument("--provider", required=True, metavar="file:<path>|http:<url>")
    p.add_argument("--tier", default="basic",
                   choices=("basic", "descriptive", "reasoning"))
    p.add_argument("--model-id", default="model")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=0)
    p.add_argument("--beam-size", type=int, default=3)
    p.add_argument("--max-tokens", type=int, default=64)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_caption)

    p = sub.add_parser("evaluate", help="score candidate captions against references")
    p.add_argument("--candidates", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", default="native_jsonl", choices=datasets.FORMATS)
    p.add_argument("--model-id", default="model")
    p.add_argument("--raw", action="store_true",
                   help="score raw captions without normalization")
    p.add_argument("--cider-variant", default="d", choices=("plain", "d"))
    p.add_argument("--embedder", default="builtin", metavar="builtin|http:<url>")
    p.add_argument("--reduce", default="max", choices=("max", "mean"))
    p.add_argument("--synonyms", help="plain-text synonym sets, one per line")
    p.add_argument("--per-sample", help="also write per-sample scores JSONL here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="execute a full configured evaluation run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="render tables and histograms from a run")
    p.add_argument("--run", help="run output directory (tables 1 and 2)")
    p.add_argument("--table", required=True, choices=("1", "2", "hist"))
    p.add_argument("--format", dest="fmt", choices=("csv", "markdown", "svg"))
    p.add_argument("--manifest", action="append",
                   help="manifest(s) for --table hist")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report" and args.table in ("1", "2") and not args.run:
        parser.error("--run is required for tables 1 and 2")
    try:
        return args.func(args)
    except CapharnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
