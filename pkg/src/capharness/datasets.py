"""Image-caption dataset ingestion into a uniform manifest model.

Three input shapes are supported:

* ``native_jsonl``: one sample object per line, optional leading header
  object carrying the manifest name and provenance.  Saving re-emits a
  canonical byte form (fixed key order, compact separators, UTF-8, LF), so
  save(load(save(m))) is byte-identical to save(m).
* ``flickr_tsv``: pipe-separated `image_name|comment_number|comment` rows,
  several caption rows per image, optional header row.
* ``nocaps_json``: COCO-style object with `images` and `annotations` arrays;
  image entries may carry a domain tag.

References are stored raw.  Caption normalization applies to model outputs
only, never to references.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

DOMAINS = ("in_domain", "near_domain", "out_of_domain", "unspecified")

_DOMAIN_ALIASES = {
    "in-domain": "in_domain",
    "indomain": "in_domain",
    "near-domain": "near_domain",
    "neardomain": "near_domain",
    "out-domain": "out_of_domain",
    "out-of-domain": "out_of_domain",
    "outdomain": "out_of_domain",
}


def _coerce_domain(value) -> str:
    if value is None or value == "":
        return "unspecified"
    key = str(value).strip().lower()
    key = _DOMAIN_ALIASES.get(key, key.replace("-", "_"))
    if key not in DOMAINS:
        raise ManifestError(f"unknown domain tag {value!r}; expected one of {DOMAINS}")
    return key


@dataclass
class Sample:
    sample_id: str
    image_path: str
    references: list
    domain: str = "unspecified"

    def __post_init__(self):
        if not self.sample_id:
            raise ManifestError("sample_id must be non-empty")
        if not self.references:
            raise ManifestError(f"sample {self.sample_id!r} has no reference captions")
        for ref in self.references:
            if not isinstance(ref, str) or not ref.strip():
                raise ManifestError(f"sample {self.sample_id!r} has an empty reference caption")
        if self.domain not in DOMAINS:
            raise ManifestError(
                f"sample {self.sample_id!r} domain {self.domain!r} not one of {DOMAINS}"
            )

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "references": list(self.references),
            "domain": self.domain,
        }


@dataclass
class Manifest:
    """Ordered, immutable-by-convention collection of samples."""

    name: str
    samples: list
    provenance: dict = field(default_factory=dict)
    root: Path | None = None  # directory image paths resolve against; not serialized

    def __post_init__(self):
        seen = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    def resolve_path(self, sample: Sample) -> Path:
        p = Path(sample.image_path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(
            {"manifest": self.name, "provenance": self.provenance},
            ensure_ascii=False, sort_keys=True, separators=(",", ":"))]
        for s in self.samples:
            lines.append(json.dumps(s.to_record(), ensure_ascii=False, separators=(",", ":")))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _sample_from_record(record: dict, locus: str) -> Sample:
    for key in ("sample_id", "image_path", "references"):
        if key not in record:
            raise ManifestError(f"{locus}: missing field {key!r}")
    try:
        return Sample(
            sample_id=str(record["sample_id"]),
            image_path=str(record["image_path"]),
            references=list(record["references"]),
            domain=_coerce_domain(record.get("domain")),
        )
    except ManifestError as exc:
        raise ManifestError(f"{locus}: {exc}") from exc


def _load_native_jsonl(path: Path) -> Manifest:
    name = path.stem
    provenance: dict = {}
    samples = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path.name} line {lineno}: not valid JSON ({exc})") from exc
            if not isinstance(record, dict):
                raise ManifestError(f"{path.name} line {lineno}: expected an object")
            if lineno == 1 and "manifest" in record and "sample_id" not in record:
                name = str(record["manifest"])
                provenance = record.get("provenance") or {}
                continue
            samples.append(_sample_from_record(record, f"{path.name} line {lineno}"))
    return Manifest(name=name, samples=samples, provenance=provenance, root=path.parent)


def _load_flickr_tsv(path: Path) -> Manifest:
    # ordered image_name -> list of (comment_number, caption)
    groups: dict = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = [p.strip() for p in line.split("|")]
            if lineno == 1 and parts[0].lower() == "image_name":
                continue
            if len(parts) < 3:
                raise ManifestError(
                    f"{path.name} line {lineno}: expected image_name|comment_number|comment"
                )
            image_name, number, caption = parts[0], parts[1], "|".join(parts[2:])
            if not image_name or not caption.strip():
                raise ManifestError(f"{path.name} line {lineno}: empty image name or caption")
            try:
                order = int(number)
            except ValueError:
                order = len(groups.get(image_name, ()))
            groups.setdefault(image_name, []).append((order, lineno, caption))
    samples = []
    for image_name, rows in groups.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        samples.append(Sample(
            sample_id=Path(image_name).stem,
            image_path=image_name,
            references=[caption for _, _, caption in rows],
            domain="unspecified",
        ))
    return Manifest(name=path.stem, samples=samples, root=path.parent)


def _load_nocaps_json(path: Path) -> Manifest:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path.name}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise ManifestError(f"{path.name}: expected object with 'images' and 'annotations'")
    images = {}
    order = []
    for i, entry in enumerate(doc["images"]):
        if "id" not in entry:
            raise ManifestError(f"{path.name}: images[{i}] missing 'id'")
        file_name = entry.get("file_name") or f"{entry['id']}.jpg"
        images[entry["id"]] = (str(file_name), _coerce_domain(entry.get("domain")))
        order.append(entry["id"])
    captions: dict = {img_id: [] for img_id in images}
    for i, ann in enumerate(doc["annotations"]):
        if "image_id" not in ann or "caption" not in ann:
            raise ManifestError(f"{path.name}: annotations[{i}] missing 'image_id' or 'caption'")
        if ann["image_id"] not in images:
            raise ManifestError(
                f"{path.name}: annotations[{i}] references unknown image_id {ann['image_id']!r}"
            )
        captions[ann["image_id"]].append((ann.get("id", i), str(ann["caption"])))
    samples = []
    for img_id in order:
        file_name, domain = images[img_id]
        refs = [c for _, c in sorted(captions[img_id], key=lambda t: t[0])]
        if not refs:
            raise ManifestError(f"{path.name}: image {img_id!r} has zero captions")
        samples.append(Sample(
            sample_id=str(img_id), image_path=file_name, references=refs, domain=domain,
        ))
    return Manifest(name=path.stem, samples=samples, root=path.parent)


_LOADERS = {
    "native_jsonl": _load_native_jsonl,
    "flickr_tsv": _load_flickr_tsv,
    "nocaps_json": _load_nocaps_json,
}

FORMATS = tuple(_LOADERS)


def load_manifest(path: str | Path, format: str = "native_jsonl") -> Manifest:
    if format not in _LOADERS:
        raise ManifestError(f"unknown manifest format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    return _LOADERS[format](path)


@dataclass
class LengthStats:
    """Reference caption length distribution for one manifest."""

    name: str
    counts: dict  # token length -> number of references
    mean: float
    median: float

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def caption_length_stats(manifest: Manifest) -> LengthStats:
    from .tokenization import tokenize

    if not manifest.samples:
        raise ManifestError(f"manifest {manifest.name!r} is empty")
    lengths = []
    for sample in manifest.samples:
        for ref in sample.references:
            lengths.append(len(tokenize(ref)))
    counts: dict = {}
    for n in sorted(lengths):
        counts[n] = counts.get(n, 0) + 1
    return LengthStats(
        name=manifest.name,
        counts=counts,
        mean=statistics.fmean(lengths),
        median=float(statistics.median(lengths)),
    )
