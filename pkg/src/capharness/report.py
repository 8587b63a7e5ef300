"""Render run results as CSV/Markdown tables and length histograms.

Rendering is a pure function of its inputs: fixed column sets, fixed
decimal formatting (4 decimals for metrics, 3 for the length ratio,
round-half-even), and content-derived row ordering, so equal results
always produce byte-identical documents.
"""

from __future__ import annotations

import csv
import io

from .errors import ReportError

TABLE1_COLUMNS = ("Dataset", "Model", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4",
                  "METEOR", "ROUGE_L", "CIDEr", "testlen", "reflen", "similarity")
TABLE2_COLUMNS = ("Noise Type", "Level", "Model", "Ratio", "BLEU-1", "BLEU-2",
                  "BLEU-3", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr", "Similarity")

_NOISE_DISPLAY = {
    "gaussian_noise": "Gaussian Noise",
    "impulse_noise": "Impulse Noise",
    "speckle_noise": "Speckle Noise",
    "poisson_gaussian_sensor": "Poisson-Gaussian Sensor",
    "gaussian_blur": "Gaussian Blur",
    "defocus_blur": "Defocus Blur",
    "motion_blur": "Motion Blur",
    "zoom_blur": "Zoom Blur",
    "snow": "Snow",
    "jpeg_compression": "JPEG Compression",
    "pixelate": "Pixelate",
    "low_light_gamma": "Low Light",
    "adversarial_patch": "Adversarial",
}

_LEVEL_ORDER = {"low": 0, "medium": 1, "high": 2}


def _f4(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def _f3(value) -> str:
    return "-" if value is None else f"{value:.3f}"


def _emit(rows, columns, format: str) -> str:
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(columns) + " |",
                 "|" + "|".join(" --- " for _ in columns) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise ReportError(f"unknown table format {format!r}; expected 'csv' or 'markdown'")


def _condition_display(condition_id: str) -> tuple:
    if condition_id.startswith("mix:"):
        return "Mixture", "-"
    kind, _, level = condition_id.partition("/")
    return _NOISE_DISPLAY.get(kind, kind), level.capitalize()


def render_table1(results, format: str = "csv") -> str:
    """Clean-condition summary; one row per clean cell in config order.

    A result with no cells at all (nothing was configured) renders as a
    header-only document; a non-empty result without clean cells is an
    error, since that means the clean baseline went missing.
    """
    if not results.cells:
        return _emit([], TABLE1_COLUMNS, format)
    cells = [c for c in results.valid_cells() if c.condition == "clean"]
    if not cells:
        raise ReportError("no clean-condition cells to render")
    rows = []
    for c in cells:
        s = c.scores
        rows.append((
            c.dataset, c.model,
            _f4(s.bleu1), _f4(s.bleu2), _f4(s.bleu3), _f4(s.bleu4),
            _f4(s.meteor), _f4(s.rouge_l), _f4(s.cider),
            str(s.testlen), str(s.reflen), _f4(c.similarity),
        ))
    return _emit(rows, TABLE1_COLUMNS, format)


def render_table2(results, format: str = "csv") -> str:
    """Noisy-condition table grouped by noise type, then severity level.

    Group order is derived from cell content (noise name alphabetical,
    level low<medium<high, then model, dataset, tier), so permuting the
    input cells cannot change the document.
    """
    if not results.cells:
        return _emit([], TABLE2_COLUMNS, format)
    cells = [c for c in results.valid_cells() if c.condition != "clean"]
    if not cells:
        raise ReportError("no noisy-condition cells to render")

    def sort_key(c):
        noise, level = _condition_display(c.condition)
        return (noise, _LEVEL_ORDER.get(c.condition.partition("/")[2], 99),
                c.model, c.dataset, c.tier)

    rows = []
    for c in sorted(cells, key=sort_key):
        noise, level = _condition_display(c.condition)
        s = c.scores
        rows.append((
            noise, level, c.model, _f3(c.ratio),
            _f4(s.bleu1), _f4(s.bleu2), _f4(s.bleu3), _f4(s.bleu4),
            _f4(s.meteor), _f4(s.rouge_l), _f4(s.cider), _f4(c.similarity),
        ))
    return _emit(rows, TABLE2_COLUMNS, format)


def render_degradation(comparison: dict, format: str = "csv") -> str:
    """compare() output as a flat table: one row per (cell, metric)."""
    columns = ("Dataset", "Condition", "Model", "Tier", "Metric",
               "Clean", "Noisy", "Delta", "Ratio")
    rows = []
    for row in comparison["rows"]:
        for metric, values in row["metrics"].items():
            rows.append((
                row["dataset"], row["condition"], row["model"], row["tier"],
                metric, _f4(values["clean"]), _f4(values["noisy"]),
                _f4(values["delta"]),
                "-" if values["ratio"] is None else _f4(values["ratio"]),
            ))
    if not rows:
        raise ReportError("comparison contains no overlapping cells")
    return _emit(rows, columns, format)


# ---------------------------------------------------------------------------
# length histograms


_PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377")


def render_length_histogram(stats_list, format: str = "csv") -> str:
    """Reference-length distribution; stats_list holds 1+ LengthStats."""
    if not isinstance(stats_list, (list, tuple)):
        stats_list = [stats_list]
    if not stats_list or all(not s.counts for s in stats_list):
        raise ReportError("no length statistics to render")
    buckets = sorted({b for s in stats_list for b in s.counts})

    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if len(stats_list) == 1:
            writer.writerow(("bucket", "count"))
            for b in buckets:
                writer.writerow((b, stats_list[0].counts.get(b, 0)))
        else:
            writer.writerow(("bucket", *[s.name for s in stats_list]))
            for b in buckets:
                writer.writerow((b, *[s.counts.get(b, 0) for s in stats_list]))
        return buf.getvalue()

    if format == "svg":
        return _svg_histogram(stats_list, buckets)

    raise ReportError(f"unknown histogram format {format!r}; expected 'csv' or 'svg'")


def _svg_histogram(stats_list, buckets) -> str:
    width, height = 640, 360
    left, right, top, bottom = 50, 20, 30, 50
    plot_w = width - left - right
    plot_h = height - top - bottom
    peak = max(count for s in stats_list for count in s.counts.values())
    n_series = len(stats_list)
    slot = plot_w / max(1, len(buckets))
    bar_w = slot / (n_series + 0.5)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">caption length (tokens)</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {height / 2:.1f})">references</text>',
    ]
    for bi, bucket in enumerate(buckets):
        x_base = left + bi * slot
        for si, stats in enumerate(stats_list):
            count = stats.counts.get(bucket, 0)
            h = plot_h * count / peak
            x = x_base + si * bar_w + bar_w * 0.25
            y = height - bottom - h
            color = _PALETTE[si % len(_PALETTE)]
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                         f'height="{h:.2f}" fill="{color}"/>')
        parts.append(f'<text x="{x_base + slot / 2:.2f}" y="{height - bottom + 16}" '
                     f'text-anchor="middle" font-size="10">{bucket}</text>')
    for si, stats in enumerate(stats_list):
        color = _PALETTE[si % len(_PALETTE)]
        y = top + si * 18
        parts.append(f'<rect x="{width - right - 150}" y="{y}" width="12" '
                     f'height="12" fill="{color}"/>')
        parts.append(f'<text x="{width - right - 132}" y="{y + 10}" '
                     f'font-size="12">{stats.name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
