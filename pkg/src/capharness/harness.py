"""End-to-end orchestration: corrupt, caption, normalize, score.

A run walks the cross-product manifests x conditions x providers x tiers.
Every cell gets its own scores.json and per_sample.jsonl under
cells/<key>/; sample-level failures accumulate in errors.jsonl; the
validated config is frozen into config.lock.json (minus the output
directory itself, so runs into different directories stay byte-identical).

Seeding: each condition gets hash64(run_seed, condition_id), and the
corruption stage derives hash64(condition_seed, sample_id) per sample.
Adding or removing a condition therefore never changes the noise any
other condition sees, and neither does adding samples.

Stage outputs (corrupted images, HTTP captions) are cached under
out_dir/cache keyed by content hashes of their inputs, so a rerun only
recomputes what changed.  References are scored raw; only model output
passes through caption normalization.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corruptions import CorruptionSpec, MixtureSpec, corrupt_dataset
from .datasets import Manifest, load_manifest
from .errors import ConfigError, MetricError
from .lexical import CorpusScores, build_pairs, evaluate_pairs, load_synonyms
from .normalize import normalize_batch
from .providers import (DecodingParams, captions_from_file, captions_from_http)
from .rng import hash64
from .similarity import make_embedder, similarity_corpus

DEFAULT_FAILURE_THRESHOLD = 0.5

METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l",
                "cider", "similarity")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._+-]", "-", text)


def _canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def parse_condition(cond):
    """'clean' | corruption object | {'mixture': [steps]} -> spec or None."""
    if cond == "clean" or cond is None:
        return None
    if isinstance(cond, dict) and "mixture" in cond:
        steps = [parse_condition(step) for step in cond["mixture"]]
        return MixtureSpec(steps)
    if isinstance(cond, dict) and "kind" in cond:
        return CorruptionSpec(
            kind=cond["kind"],
            level=cond.get("level", "medium"),
            params=dict(cond.get("params") or {}),
        )
    raise ConfigError(f"cannot parse condition {cond!r}")


def condition_id_of(cond) -> str:
    spec = parse_condition(cond)
    return "clean" if spec is None else spec.condition_id


@dataclass
class ProviderConfig:
    model_id: str
    kind: str  # file | http
    path: str | None = None
    url: str | None = None

    def __post_init__(self):
        if self.kind not in ("file", "http"):
            raise ConfigError(f"provider kind must be 'file' or 'http', got {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError(f"file provider {self.model_id!r} needs a path")
        if self.kind == "http" and not self.url:
            raise ConfigError(f"http provider {self.model_id!r} needs a url")
        if not self.model_id:
            raise ConfigError("provider model_id must be non-empty")

    def to_dict(self) -> dict:
        d = {"model_id": self.model_id, "kind": self.kind}
        if self.path:
            d["path"] = self.path
        if self.url:
            d["url"] = self.url
        return d


@dataclass
class RunConfig:
    manifests: list  # of {"path", "format", optional "name"}
    conditions: list
    providers: list  # of ProviderConfig
    tiers: list = field(default_factory=lambda: ["basic"])
    decoding: DecodingParams = field(default_factory=DecodingParams)
    embedder: str = "builtin"
    similarity_reduce: str = "max"
    cider_variant: str = "d"
    run_seed: int = 0
    failure_threshold: float = DEFAULT_FAILURE_THRESHOLD
    workers: int = 4
    synonyms_path: str | None = None
    # directory that relative manifest/caption paths resolve against
    # (the config file's directory); never serialized, so the lock file
    # keeps the portable relative paths as written
    base_dir: Path | None = None

    def __post_init__(self):
        if not self.manifests:
            raise ConfigError("config needs at least one manifest")
        if not self.conditions:
            raise ConfigError("config needs at least one condition")
        if not self.providers:
            raise ConfigError("config needs at least one provider")
        if not self.tiers:
            raise ConfigError("config needs at least one prompt tier")
        for tier in self.tiers:
            if tier not in ("basic", "descriptive", "reasoning"):
                raise ConfigError(f"unknown prompt tier {tier!r}")
        for cond in self.conditions:
            try:
                parse_condition(cond)
            except ConfigError:
                raise
            except Exception as exc:  # unknown kind, bad level or parameter
                raise ConfigError(f"invalid condition {cond!r}: {exc}") from exc
        if not 0.0 <= self.failure_threshold <= 1.0:
            raise ConfigError("failure_threshold must be within [0, 1]")
        if self.cider_variant not in ("plain", "d"):
            raise ConfigError(f"unknown cider variant {self.cider_variant!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {
            "manifests", "conditions", "providers", "tiers", "decoding",
            "embedder", "similarity_reduce", "cider_variant", "run_seed",
            "failure_threshold", "workers", "synonyms_path", "out_dir",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        providers = [p if isinstance(p, ProviderConfig) else ProviderConfig(**p)
                     for p in d.get("providers", [])]
        decoding = d.get("decoding", {})
        if not isinstance(decoding, DecodingParams):
            decoding = DecodingParams(**decoding)
        return cls(
            manifests=list(d.get("manifests", [])),
            conditions=list(d.get("conditions", [])),
            providers=providers,
            tiers=list(d.get("tiers", ["basic"])),
            decoding=decoding,
            embedder=d.get("embedder", "builtin"),
            similarity_reduce=d.get("similarity_reduce", "max"),
            cider_variant=d.get("cider_variant", "d"),
            run_seed=int(d.get("run_seed", 0)),
            failure_threshold=float(d.get("failure_threshold", DEFAULT_FAILURE_THRESHOLD)),
            workers=int(d.get("workers", 4)),
            synonyms_path=d.get("synonyms_path"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            try:
                import tomllib
            except ImportError:  # 3.10
                import tomli as tomllib
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        config = cls.from_dict(data)
        config.base_dir = path.parent
        return config

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        if p.is_absolute() or self.base_dir is None:
            return p
        return self.base_dir / p

    def to_dict(self) -> dict:
        return {
            "manifests": [dict(m) for m in self.manifests],
            "conditions": list(self.conditions),
            "providers": [p.to_dict() for p in self.providers],
            "tiers": list(self.tiers),
            "decoding": self.decoding.to_dict(),
            "embedder": self.embedder,
            "similarity_reduce": self.similarity_reduce,
            "cider_variant": self.cider_variant,
            "run_seed": self.run_seed,
            "failure_threshold": self.failure_threshold,
            "workers": self.workers,
            "synonyms_path": self.synonyms_path,
        }


@dataclass
class CellReport:
    index: int
    dataset: str
    condition: str
    model: str
    tier: str
    sample_count: int
    error_count: int
    invalid: bool = False
    reason: str | None = None
    scores: CorpusScores | None = None
    similarity: float | None = None

    @property
    def key(self) -> str:
        return "__".join(_slug(p) for p in (self.dataset, self.condition, self.model, self.tier))

    @property
    def ratio(self) -> float | None:
        if self.scores is None or self.scores.reflen == 0:
            return None
        return self.scores.testlen / self.scores.reflen

    def metric(self, name: str):
        if name == "similarity":
            return self.similarity
        return None if self.scores is None else getattr(self.scores, name)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "dataset": self.dataset,
            "condition": self.condition,
            "model": self.model,
            "tier": self.tier,
            "sample_count": self.sample_count,
            "error_count": self.error_count,
            "invalid": self.invalid,
            "reason": self.reason,
            "scores": None if self.scores is None else self.scores.to_dict(),
            "similarity": self.similarity,
            "ratio": self.ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellReport":
        return cls(
            index=d["index"], dataset=d["dataset"], condition=d["condition"],
            model=d["model"], tier=d["tier"], sample_count=d["sample_count"],
            error_count=d["error_count"], invalid=d.get("invalid", False),
            reason=d.get("reason"),
            scores=None if d.get("scores") is None else CorpusScores.from_dict(d["scores"]),
            similarity=d.get("similarity"),
        )


@dataclass
class RunResult:
    cells: list
    config: dict
    out_dir: Path | None = None

    def cell(self, dataset: str, condition: str, model: str, tier: str) -> CellReport:
        for c in self.cells:
            if (c.dataset, c.condition, c.model, c.tier) == (dataset, condition, model, tier):
                return c
        raise KeyError((dataset, condition, model, tier))

    def valid_cells(self) -> list:
        return [c for c in self.cells if not c.invalid]


def load_run(out_dir: str | Path) -> RunResult:
    out_dir = Path(out_dir)
    lock = out_dir / "config.lock.json"
    config = json.loads(lock.read_text(encoding="utf-8")) if lock.is_file() else {}
    cells = []
    cells_dir = out_dir / "cells"
    if cells_dir.is_dir():
        for scores_path in cells_dir.glob("*/scores.json"):
            cells.append(CellReport.from_dict(
                json.loads(scores_path.read_text(encoding="utf-8"))))
    cells.sort(key=lambda c: c.index)
    return RunResult(cells=cells, config=config, out_dir=out_dir)


# ---------------------------------------------------------------------------
# stages


def _file_sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest_signature(manifest: Manifest) -> str:
    h = hashlib.sha256()
    for s in manifest.samples:
        h.update(s.sample_id.encode("utf-8"))
        h.update(b"\x00")
        p = manifest.resolve_path(s)
        h.update(_file_sha(p).encode() if p.is_file() else b"<missing>")
        for ref in s.references:
            h.update(b"\x00")
            h.update(ref.encode("utf-8"))
        h.update(s.domain.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()


def _materialize_condition(manifest, cond, run_seed, out_dir, workers):
    """Returns (manifest_for_condition, condition_id, corrupt_error_list)."""
    spec = parse_condition(cond)
    if spec is None:
        return manifest, "clean", []
    cond_seed = hash64(run_seed, spec.condition_id)
    key = hashlib.sha256("\x00".join([
        _manifest_signature(manifest),
        json.dumps(spec.describe(), sort_keys=True),
        str(cond_seed),
    ]).encode("utf-8")).hexdigest()[:20]
    cache_dir = out_dir / "cache" / "corrupt" / key
    marker = cache_dir / "manifest.jsonl"
    if marker.is_file():
        cached = load_manifest(marker, "native_jsonl")
        errors = [{"sample_id": "", "error": e} for e in
                  cached.provenance.get("errors", [])]
        return cached, spec.condition_id, errors
    corrupted = corrupt_dataset(manifest, spec, cache_dir, run_seed=cond_seed,
                                workers=workers)
    errors = [{"sample_id": "", "error": e}
              for e in corrupted.provenance.get("errors", [])]
    return corrupted, spec.condition_id, errors


def _file_provider_captions(provider, cache, condition_id, tier, config):
    """Best record per sample under the documented fallback order."""
    if provider.path not in cache:
        records = captions_from_file(config.resolve(provider.path), provider.model_id)
        cache[provider.path] = {(r.sample_id, r.condition_id, r.prompt_tier): r
                                for r in records}
    by_key = cache[provider.path]
    sample_ids = {sid for sid, _, _ in by_key}
    chosen = {}
    for sid in sample_ids:
        for cond, t in ((condition_id, tier), (condition_id, "basic"),
                        ("clean", tier), ("clean", "basic")):
            record = by_key.get((sid, cond, t))
            if record is not None:
                chosen[sid] = record
                break
    return chosen


def _http_provider_captions(provider, cond_manifest, condition_id, tier,
                            config, out_dir):
    key = hashlib.sha256("\x00".join([
        _manifest_signature(cond_manifest),
        provider.model_id,
        tier,
        condition_id,
        json.dumps(config.decoding.to_dict(), sort_keys=True),
    ]).encode("utf-8")).hexdigest()[:20]
    cache_path = out_dir / "cache" / "captions" / f"{key}.jsonl"
    errors_path = cache_path.with_suffix(".errors.json")
    if cache_path.is_file():
        records = captions_from_file(cache_path, provider.model_id)
        errors = json.loads(errors_path.read_text(encoding="utf-8")) \
            if errors_path.is_file() else []
        return {r.sample_id: r for r in records}, errors
    records, errors = captions_from_http(
        provider.url, cond_manifest, tier, config.decoding, provider.model_id,
        condition_id=condition_id, workers=config.workers,
    )
    from .providers import save_caption_records

    save_caption_records(records, cache_path)
    errors_path.parent.mkdir(parents=True, exist_ok=True)
    errors_path.write_text(_canonical_json(errors), encoding="utf-8")
    return {r.sample_id: r for r in records}, errors


def run(config: RunConfig, out_dir: str | Path) -> RunResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.lock.json").write_text(
        _canonical_json(config.to_dict()), encoding="utf-8")

    embedder = make_embedder(config.embedder)
    synonyms = (load_synonyms(config.resolve(config.synonyms_path))
                if config.synonyms_path else None)
    file_cache: dict = {}
    all_errors = []
    cells = []
    index = 0

    for mf_cfg in config.manifests:
        manifest = load_manifest(config.resolve(mf_cfg["path"]),
                                 mf_cfg.get("format", "native_jsonl"))
        dataset = mf_cfg.get("name") or manifest.name
        for cond in config.conditions:
            cond_manifest, condition_id, corrupt_errors = _materialize_condition(
                manifest, cond, config.run_seed, out_dir, config.workers)
            for provider in config.providers:
                for tier in config.tiers:
                    cell = _run_cell(
                        index, dataset, manifest, cond_manifest, condition_id,
                        provider, tier, config, out_dir, embedder, synonyms,
                        file_cache, corrupt_errors, all_errors,
                    )
                    cells.append(cell)
                    index += 1

    errors_lines = [json.dumps(e, ensure_ascii=False, sort_keys=True)
                    for e in all_errors]
    (out_dir / "errors.jsonl").write_text(
        "\n".join(errors_lines) + ("\n" if errors_lines else ""), encoding="utf-8")
    return RunResult(cells=cells, config=config.to_dict(), out_dir=out_dir)


def _run_cell(index, dataset, manifest, cond_manifest, condition_id, provider,
              tier, config, out_dir, embedder, synonyms, file_cache,
              corrupt_errors, all_errors):
    cell_errors = []
    for err in corrupt_errors:
        cell_errors.append({"stage": "corrupt", **err})

    if provider.kind == "file":
        captions = _file_provider_captions(provider, file_cache, condition_id, tier, config)
    else:
        captions, http_errors = _http_provider_captions(
            provider, cond_manifest, condition_id, tier, config, out_dir)
        for err in http_errors:
            cell_errors.append({"stage": "caption", **err})

    total = len(manifest.samples)
    present_ids = {s.sample_id for s in cond_manifest.samples}
    records = []
    for sample in cond_manifest.samples:
        record = captions.get(sample.sample_id)
        if record is None:
            already = {e.get("sample_id") for e in cell_errors}
            if sample.sample_id not in already:
                cell_errors.append({
                    "stage": "caption", "sample_id": sample.sample_id,
                    "error": "no caption available for this sample",
                })
        else:
            records.append(record)
    normalize_batch(records)
    candidates_by_id = {r.sample_id: r.normalized for r in records
                        if r.sample_id in present_ids}

    cell = CellReport(
        index=index, dataset=dataset, condition=condition_id,
        model=provider.model_id, tier=tier,
        sample_count=len(candidates_by_id), error_count=len(cell_errors),
    )

    failures = total - len(candidates_by_id)
    if total == 0 or len(candidates_by_id) == 0:
        cell.invalid = True
        cell.reason = "no samples scored"
    elif failures / total > config.failure_threshold:
        cell.invalid = True
        cell.reason = (f"{failures}/{total} samples failed, over the "
                       f"{config.failure_threshold:.0%} threshold")

    per_sample = []
    if not cell.invalid:
        pairs = build_pairs(cond_manifest, candidates_by_id)
        try:
            scores, per_sample = evaluate_pairs(
                pairs, cider_variant=config.cider_variant, synonyms=synonyms)
            sim_candidates = [candidates_by_id[p.sample_id] for p in pairs]
            sim_references = [
                next(s.references for s in cond_manifest.samples
                     if s.sample_id == p.sample_id)
                for p in pairs
            ]
            sim_corpus, sim_values = similarity_corpus(
                sim_candidates, sim_references, embedder,
                reduce=config.similarity_reduce)
            for row, value in zip(per_sample, sim_values):
                row["similarity"] = value
            cell.scores = scores
            cell.similarity = sim_corpus
        except MetricError as exc:
            cell.invalid = True
            cell.reason = str(exc)
            cell.scores = None
            cell.similarity = None

    cell_dir = out_dir / "cells" / cell.key
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "scores.json").write_text(
        _canonical_json(cell.to_dict()), encoding="utf-8")
    ordered_keys = ("sample_id", "testlen", "reflen", "meteor", "rouge_l",
                    "cider", "similarity")
    lines = [json.dumps({k: row[k] for k in ordered_keys if k in row},
                        ensure_ascii=False) for row in per_sample]
    (cell_dir / "per_sample.jsonl").write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    for err in cell_errors:
        all_errors.append({"cell": cell.key, **err})
    return cell


# ---------------------------------------------------------------------------
# degradation comparison


def compare(clean: RunResult, noisy: RunResult) -> dict:
    """Per-metric noisy-minus-clean deltas and noisy/clean ratios.

    Cells match on (dataset, model, tier); the clean side uses its
    "clean"-condition cells, the noisy side everything else.  A zero clean
    score yields ratio None rather than infinity.
    """
    clean_by_key = {(c.dataset, c.model, c.tier): c
                    for c in clean.valid_cells() if c.condition == "clean"}
    rows = []
    warnings = []
    for cell in noisy.valid_cells():
        if cell.condition == "clean":
            continue
        base = clean_by_key.get((cell.dataset, cell.model, cell.tier))
        if base is None:
            warnings.append(
                f"no clean counterpart for ({cell.dataset}, {cell.model}, {cell.tier})")
            continue
        metrics = {}
        for name in METRIC_NAMES:
            clean_v = base.metric(name)
            noisy_v = cell.metric(name)
            if clean_v is None or noisy_v is None:
                continue
            metrics[name] = {
                "clean": clean_v,
                "noisy": noisy_v,
                "delta": noisy_v - clean_v,
                "ratio": None if clean_v == 0 else noisy_v / clean_v,
            }
        rows.append({
            "dataset": cell.dataset, "condition": cell.condition,
            "model": cell.model, "tier": cell.tier, "metrics": metrics,
        })
    return {"rows": rows, "warnings": warnings}
