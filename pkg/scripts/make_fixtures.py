"""Regenerate the binary and canonical-form test fixtures.

Run from the repository root:

    python3 scripts/make_fixtures.py

Outputs are deterministic, so rerunning never changes committed bytes.
Hand-written textual fixtures (the TSV/JSON dataset files, caption files,
run configs) live next to the generated ones and are not touched here.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from capharness.datasets import Manifest, Sample  # noqa: E402
from capharness.harness import CellReport  # noqa: E402
from capharness.lexical import CorpusScores  # noqa: E402
from capharness.raster import Raster  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"


def quasi_natural_image(size: int = 96) -> Raster:
    """Smooth multi-frequency gradients; busy enough to behave like a photo."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    r = 120 + 60 * np.sin(yy / 9.0) + 40 * np.cos(xx / 13.0)
    g = 100 + 80 * np.cos((xx + yy) / 17.0)
    b = 90 + 50 * np.sin(xx / 7.0) * np.cos(yy / 11.0)
    data = np.clip(np.stack([r, g, b], axis=-1), 0, 255).astype(np.uint8)
    return Raster(data)


def tiny_images() -> dict:
    size = 48
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    grad = np.stack([
        40 + xx * 3.5,
        60 + yy * 3.0,
        np.full_like(xx, 190.0),
    ], axis=-1)

    rings = 128 + 110 * np.sin(np.hypot(xx - size / 2, yy - size / 2) / 3.0)
    checker = np.where(((xx // 6).astype(int) + (yy // 6).astype(int)) % 2 == 0, 215.0, 45.0)
    mixed = np.stack([rings, checker, (rings + checker) / 2], axis=-1)

    stripes = np.stack([
        120 + 90 * np.sin((xx + 2 * yy) / 5.0),
        120 + 90 * np.sin((2 * xx - yy) / 7.0),
        120 + 90 * np.cos(xx / 4.0),
    ], axis=-1)

    return {
        "im_grad.png": Raster(np.clip(grad, 0, 255).astype(np.uint8)),
        "im_rings.png": Raster(np.clip(mixed, 0, 255).astype(np.uint8)),
        "im_stripes.png": Raster(np.clip(stripes, 0, 255).astype(np.uint8)),
    }


TINY_SAMPLES = [
    ("tiny-001", "images/im_grad.png", [
        "a smooth blue gradient fills the whole frame",
        "soft gradient of blue and green light",
    ]),
    ("tiny-002", "images/im_rings.png", [
        "bright rings over a dark checker pattern",
        "concentric circles drawn on a checkered board",
    ]),
    ("tiny-003", "images/im_stripes.png", [
        "colorful diagonal stripes crossing each other",
        "a woven pattern of bright diagonal lines",
    ]),
]


def write_tiny():
    tiny = FIXTURES / "tiny"
    (tiny / "images").mkdir(parents=True, exist_ok=True)
    for name, raster in tiny_images().items():
        raster.save_png(tiny / "images" / name)
    samples = [Sample(sample_id=sid, image_path=path, references=list(refs))
               for sid, path, refs in TINY_SAMPLES]
    Manifest(name="tiny", samples=samples).save(tiny / "manifest.jsonl")


def write_paper_row_fixtures():
    """Reference run directories whose rendered rows are pinned in tests."""
    table1 = CellReport(
        index=0, dataset="flickr_1k", condition="clean", model="Blip-2",
        tier="basic", sample_count=1000, error_count=0,
        scores=CorpusScores(
            bleu1=0.6774, bleu2=0.4640, bleu3=0.3103, bleu4=0.2057,
            meteor=0.2075, rouge_l=0.3994, cider=0.4794,
            testlen=9371, reflen=9554,
        ),
        similarity=0.6492,
    )
    table2 = CellReport(
        index=0, dataset="flickr_1k", condition="adversarial_patch/high",
        model="Blip-2", tier="basic", sample_count=1000, error_count=0,
        scores=CorpusScores(
            bleu1=0.5700, bleu2=0.3548, bleu3=0.2175, bleu4=0.1306,
            meteor=0.1478, rouge_l=0.3340, cider=0.2523,
            testlen=8494, reflen=9554,
        ),
        similarity=0.3911,
    )
    for name, cell in (("table1_run", table1), ("table2_run", table2)):
        run_dir = FIXTURES / name
        cell_dir = run_dir / "cells" / cell.key
        cell_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.lock.json").write_text(
            json.dumps({"fixture": name}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        (cell_dir / "scores.json").write_text(
            json.dumps(cell.to_dict(), ensure_ascii=False, sort_keys=True,
                       indent=2) + "\n", encoding="utf-8")
        (cell_dir / "per_sample.jsonl").write_text("", encoding="utf-8")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    quasi_natural_image().save_png(FIXTURES / "test_image.png")
    write_tiny()
    write_paper_row_fixtures()
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
