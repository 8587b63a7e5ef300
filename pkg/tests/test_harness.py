import base64
import hashlib
import json
from pathlib import Path

import pytest

from capharness.corruptions import CorruptionSpec, MixtureSpec
from capharness.datasets import Manifest, Sample
from capharness.errors import ConfigError
from capharness.harness import (
    CellReport,
    ProviderConfig,
    RunConfig,
    RunResult,
    _file_provider_captions,
    compare,
    condition_id_of,
    load_run,
    parse_condition,
    run,
)
from capharness.lexical import CorpusScores
from capharness.raster import Raster
from stub_service import StubHTTPError, StubService


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def tiny_config(fixtures_dir) -> RunConfig:
    return RunConfig.from_file(fixtures_dir / "tiny" / "run.toml")


# --- condition parsing -------------------------------------------------------


def test_parse_condition_clean():
    assert parse_condition("clean") is None
    assert parse_condition(None) is None
    assert condition_id_of("clean") == "clean"


def test_parse_condition_corruption():
    spec = parse_condition({"kind": "snow", "level": "low"})
    assert isinstance(spec, CorruptionSpec)
    assert spec.condition_id == "snow/low"
    assert condition_id_of({"kind": "snow"}) == "snow/medium"


def test_parse_condition_mixture():
    spec = parse_condition(
        {"mixture": [{"kind": "gaussian_blur", "level": "low"}, {"kind": "snow"}]}
    )
    assert isinstance(spec, MixtureSpec)
    assert spec.condition_id == "mix:gaussian_blur/low+snow/medium"


def test_parse_condition_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_condition({"noise": "gaussian"})
    with pytest.raises(ConfigError):
        parse_condition(42)


# --- configuration -----------------------------------------------------------


def test_provider_config_validation():
    ProviderConfig("m", "file", path="caps.jsonl")
    ProviderConfig("m", "http", url="http://x")
    with pytest.raises(ConfigError):
        ProviderConfig("m", "file")
    with pytest.raises(ConfigError):
        ProviderConfig("m", "http")
    with pytest.raises(ConfigError):
        ProviderConfig("m", "grpc", url="http://x")
    with pytest.raises(ConfigError):
        ProviderConfig("", "file", path="p")


def test_run_config_from_toml(fixtures_dir):
    cfg = tiny_config(fixtures_dir)
    assert cfg.run_seed == 7
    assert cfg.tiers == ["basic"]
    assert len(cfg.conditions) == 3
    assert cfg.providers[0].model_id == "identity-file"
    assert cfg.base_dir == fixtures_dir / "tiny"
    assert cfg.resolve("manifest.jsonl") == fixtures_dir / "tiny" / "manifest.jsonl"


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({
            "manifests": [{"path": "m.jsonl"}],
            "conditions": ["clean"],
            "providers": [{"model_id": "m", "kind": "file", "path": "c.jsonl"}],
            "prompt_tiers": ["basic"],
        })
    assert "prompt_tiers" in str(exc.value)


def test_run_config_validation_errors():
    base = {
        "manifests": [{"path": "m.jsonl"}],
        "conditions": ["clean"],
        "providers": [{"model_id": "m", "kind": "file", "path": "c.jsonl"}],
    }
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "manifests": []})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "conditions": []})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "providers": []})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "tiers": ["verbose"]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "failure_threshold": 1.5})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "cider_variant": "x"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**base, "conditions": [{"kind": "fog"}]})


def test_run_config_lock_round_trip(fixtures_dir):
    cfg = tiny_config(fixtures_dir)
    d = cfg.to_dict()
    assert "base_dir" not in d and "out_dir" not in d
    again = RunConfig.from_dict(d)
    assert again.to_dict() == d


# --- identity run end to end -------------------------------------------------


def test_identity_run_scores_perfectly(fixtures_dir, tmp_path):
    cfg = tiny_config(fixtures_dir)
    result = run(cfg, tmp_path / "out")
    assert len(result.cells) == 3  # 1 manifest x 3 conditions x 1 provider x 1 tier

    clean = result.cell("tiny", "clean", "identity-file", "basic")
    assert not clean.invalid
    assert clean.sample_count == 3
    assert clean.scores.bleu1 == 1.0
    assert clean.scores.bleu4 == 1.0
    assert clean.scores.rouge_l == 1.0
    assert clean.similarity == 1.0
    assert clean.scores.testlen == clean.scores.reflen


def test_identity_run_writes_expected_layout(fixtures_dir, tmp_path):
    out = tmp_path / "out"
    result = run(tiny_config(fixtures_dir), out)
    assert (out / "config.lock.json").is_file()
    assert (out / "errors.jsonl").read_text() == ""
    for cell in result.cells:
        cell_dir = out / "cells" / cell.key
        assert (cell_dir / "scores.json").is_file()
        lines = (cell_dir / "per_sample.jsonl").read_text().splitlines()
        assert len(lines) == 3
        row = json.loads(lines[0])
        assert list(row) == ["sample_id", "testlen", "reflen", "meteor",
                             "rouge_l", "cider", "similarity"]
    # two corrupted conditions were materialized into the cache
    assert len(list((out / "cache" / "corrupt").iterdir())) == 2


def test_lock_file_excludes_out_dir(fixtures_dir, tmp_path):
    run(tiny_config(fixtures_dir), tmp_path / "a")
    lock = json.loads((tmp_path / "a" / "config.lock.json").read_text())
    assert "out_dir" not in lock
    assert "base_dir" not in lock
    assert lock["run_seed"] == 7


def test_rerun_into_fresh_directory_is_byte_identical(fixtures_dir, tmp_path):
    cfg = tiny_config(fixtures_dir)
    run(cfg, tmp_path / "a")
    run(tiny_config(fixtures_dir), tmp_path / "b")
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_load_run_round_trips_cells(fixtures_dir, tmp_path):
    out = tmp_path / "out"
    live = run(tiny_config(fixtures_dir), out)
    loaded = load_run(out)
    assert len(loaded.cells) == len(live.cells)
    for a, b in zip(loaded.cells, live.cells):
        assert a.to_dict() == b.to_dict()
    assert loaded.config == live.config


# --- cross-product and fallback ----------------------------------------------


def test_cross_product_cell_count(fixtures_dir, tmp_path):
    cfg = tiny_config(fixtures_dir)
    cfg.tiers = ["basic", "reasoning"]
    cfg.conditions = ["clean", {"kind": "pixelate", "level": "low"}]
    result = run(cfg, tmp_path / "out")
    assert len(result.cells) == 4
    # the caption file only has basic-tier records; reasoning cells fall
    # back to them and still score
    for cell in result.cells:
        assert not cell.invalid
        assert cell.sample_count == 3


def test_file_provider_fallback_order(tmp_path):
    path = tmp_path / "caps.jsonl"
    cfg_dummy = RunConfig(
        manifests=[{"path": "x"}], conditions=["clean"],
        providers=[ProviderConfig("m", "file", path=str(path))],
    )
    provider = cfg_dummy.providers[0]

    def write(records):
        lines = [json.dumps(r) for r in records]
        path.write_text("\n".join(lines) + "\n")

    full = [
        {"sample_id": "s", "caption": "exact", "condition_id": "snow/low", "prompt_tier": "reasoning"},
        {"sample_id": "s", "caption": "cond basic", "condition_id": "snow/low"},
        {"sample_id": "s", "caption": "clean tier", "prompt_tier": "reasoning"},
        {"sample_id": "s", "caption": "clean basic"},
    ]
    for expect in ("exact", "cond basic", "clean tier", "clean basic"):
        write(full)
        got = _file_provider_captions(provider, {}, "snow/low", "reasoning", cfg_dummy)
        assert got["s"].raw == expect
        full = full[1:]


def test_references_are_never_normalized(tmp_path):
    # a reference that looks like markdown keeps its digits and ordering;
    # only the candidate side passes through caption cleanup
    img = tmp_path / "img.png"
    import numpy as np

    Raster(np.full((8, 8, 3), 100, dtype=np.uint8)).save_png(img)
    Manifest(
        name="refs", samples=[Sample("s", "img.png", ["1. A **dog**"])],
    ).save(tmp_path / "manifest.jsonl")
    (tmp_path / "caps.jsonl").write_text(
        json.dumps({"sample_id": "s", "caption": "1. A **dog**"}) + "\n")
    cfg = RunConfig(
        manifests=[{"path": "manifest.jsonl", "name": "refs"}],
        conditions=["clean"],
        providers=[ProviderConfig("m", "file", path="caps.jsonl")],
        base_dir=tmp_path,
    )
    result = run(cfg, tmp_path / "out")
    cell = result.cells[0]
    # raw reference tokens: ["1", "a", "dog"]; normalized candidate: ["a", "dog"]
    assert cell.scores.reflen == 3
    assert cell.scores.testlen == 2
    assert cell.scores.bleu1 < 1.0


# --- http provider integration ----------------------------------------------


def _http_config(base_dir, url, **overrides) -> RunConfig:
    settings = dict(
        manifests=[{"path": "manifest.jsonl", "name": "tiny"}],
        conditions=["clean"],
        providers=[ProviderConfig("stub-model", "http", url=url)],
        workers=2,
        base_dir=base_dir,
    )
    settings.update(overrides)
    return RunConfig(**settings)


def test_http_run_caches_captions(fixtures_dir, tmp_path):
    svc = StubService()
    with svc as url:
        cfg = _http_config(fixtures_dir / "tiny", url)
        out = tmp_path / "out"
        first = run(cfg, out)
        n_requests = len(svc.bodies("/caption"))
        assert n_requests == 3
        second = run(cfg, out)
        assert len(svc.bodies("/caption")) == n_requests  # cache hit, no traffic
    assert first.cells[0].sample_count == 3
    assert second.cells[0].to_dict()["sample_count"] == 3
    assert (out / "cache" / "captions").is_dir()


def test_http_partial_failure_under_threshold(fixtures_dir, tmp_path):
    # one sample always fails; 1/3 is under the 50% threshold so the cell
    # stays valid and the failure is recorded
    tiny = fixtures_dir / "tiny"
    target = hashlib.sha256((tiny / "images" / "im_grad.png").read_bytes()).hexdigest()

    def caption_fn(body):
        raw = base64.b64decode(body.get("image_b64", ""))
        if hashlib.sha256(raw).hexdigest() == target:
            raise StubHTTPError(500, "flaky sample")
        return "a stub caption"

    svc = StubService(caption_fn=caption_fn)
    with svc as url:
        result = run(_http_config(tiny, url), tmp_path / "out")
    cell = result.cells[0]
    assert not cell.invalid
    assert cell.sample_count == 2
    assert cell.error_count == 1
    errors = [json.loads(l) for l in (tmp_path / "out" / "errors.jsonl").read_text().splitlines()]
    assert len(errors) == 1
    assert errors[0]["sample_id"] == "tiny-001"
    assert errors[0]["stage"] == "caption"


def test_http_majority_failure_invalidates_cell(fixtures_dir, tmp_path):
    tiny = fixtures_dir / "tiny"
    keep = hashlib.sha256((tiny / "images" / "im_grad.png").read_bytes()).hexdigest()

    def caption_fn(body):
        raw = base64.b64decode(body.get("image_b64", ""))
        if hashlib.sha256(raw).hexdigest() != keep:
            raise StubHTTPError(500, "down")
        return "a stub caption"

    svc = StubService(caption_fn=caption_fn)
    with svc as url:
        result = run(_http_config(tiny, url), tmp_path / "out")
    cell = result.cells[0]
    assert cell.invalid
    assert cell.reason == "2/3 samples failed, over the 50% threshold"
    assert cell.scores is None and cell.similarity is None


def test_http_failure_threshold_is_configurable(fixtures_dir, tmp_path):
    tiny = fixtures_dir / "tiny"
    keep = hashlib.sha256((tiny / "images" / "im_grad.png").read_bytes()).hexdigest()

    def caption_fn(body):
        raw = base64.b64decode(body.get("image_b64", ""))
        if hashlib.sha256(raw).hexdigest() != keep:
            raise StubHTTPError(500, "down")
        return "a stub caption"

    svc = StubService(caption_fn=caption_fn)
    with svc as url:
        result = run(_http_config(tiny, url, failure_threshold=0.9), tmp_path / "out")
    cell = result.cells[0]
    assert not cell.invalid
    assert cell.sample_count == 1


def test_empty_candidates_invalidate_cell(fixtures_dir, tmp_path):
    # captions that normalize to nothing leave no scorable corpus
    svc = StubService(caption_fn=lambda body: "!!!")
    with svc as url:
        result = run(_http_config(fixtures_dir / "tiny", url), tmp_path / "out")
    cell = result.cells[0]
    assert cell.invalid
    assert "empty" in cell.reason


# --- degradation comparison --------------------------------------------------


def test_compare_fixture_runs(fixtures_dir):
    clean = load_run(fixtures_dir / "table1_run")
    noisy = load_run(fixtures_dir / "table2_run")
    out = compare(clean, noisy)
    assert out["warnings"] == []
    (row,) = out["rows"]
    assert row["condition"] == "adversarial_patch/high"
    b1 = row["metrics"]["bleu1"]
    assert abs(b1["delta"] - (0.5700 - 0.6774)) < 1e-12
    assert abs(b1["ratio"] - 0.5700 / 0.6774) < 1e-12
    sim = row["metrics"]["similarity"]
    assert abs(sim["delta"] - (0.3911 - 0.6492)) < 1e-12


def test_compare_zero_clean_score_gives_none_ratio():
    def cell(cond, value, index=0):
        return CellReport(
            index=index, dataset="d", condition=cond, model="m", tier="basic",
            sample_count=1, error_count=0,
            scores=CorpusScores(value, 0, 0, 0, 0, 0, 0, 10, 10),
            similarity=0.5,
        )

    clean = RunResult(cells=[cell("clean", 0.0)], config={})
    noisy = RunResult(cells=[cell("snow/low", 0.25, 1)], config={})
    out = compare(clean, noisy)
    m = out["rows"][0]["metrics"]["bleu1"]
    assert m["ratio"] is None
    assert m["delta"] == 0.25


def test_compare_missing_clean_counterpart_warns():
    noisy_cell = CellReport(
        index=0, dataset="other", condition="snow/low", model="m", tier="basic",
        sample_count=1, error_count=0,
        scores=CorpusScores(0.5, 0, 0, 0, 0, 0, 0, 10, 10), similarity=0.5,
    )
    out = compare(RunResult(cells=[], config={}), RunResult(cells=[noisy_cell], config={}))
    assert out["rows"] == []
    assert len(out["warnings"]) == 1
    assert "other" in out["warnings"][0]


def test_compare_skips_invalid_cells():
    bad = CellReport(
        index=0, dataset="d", condition="snow/low", model="m", tier="basic",
        sample_count=0, error_count=3, invalid=True, reason="no samples scored",
    )
    good_clean = CellReport(
        index=0, dataset="d", condition="clean", model="m", tier="basic",
        sample_count=1, error_count=0,
        scores=CorpusScores(1, 1, 1, 1, 1, 1, 1, 5, 5), similarity=1.0,
    )
    out = compare(RunResult(cells=[good_clean], config={}),
                  RunResult(cells=[bad], config={}))
    assert out["rows"] == []
