"""Caption sources: pre-generated caption files and live HTTP captioners.

The harness never loads model weights.  Captions either come from JSONL
files produced offline, or over a small JSON wire protocol
(POST /caption) served by whatever hosts the actual captioner.  Prompt
tier templates are fixed strings; decoding parameters travel verbatim in
every request and in run provenance.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CaptionFileError, ParameterError, ProviderError
from .raster import Raster

PROMPT_TIERS = {
    "basic": "Describe the image.",
    "descriptive": "List the objects and actions in the image.",
    "reasoning": "What is happening in the image and why?",
}


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    top_k: int = 0  # 0 disables top-k filtering
    beam_size: int = 3
    max_tokens: int = 64

    def __post_init__(self):
        if self.temperature < 0:
            raise ParameterError(f"temperature must be >= 0, got {self.temperature}")
        if self.top_k < 0:
            raise ParameterError(f"top_k must be >= 0, got {self.top_k}")
        if self.beam_size < 1:
            raise ParameterError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_tokens < 1:
            raise ParameterError(f"max_tokens must be >= 1, got {self.max_tokens}")

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_k": self.top_k,
            "beam_size": self.beam_size,
            "max_tokens": self.max_tokens,
        }


@dataclass
class CaptionRecord:
    sample_id: str
    model_id: str
    raw: str
    prompt_tier: str = "basic"
    condition_id: str = "clean"
    normalized: str = ""
    latency_ms: float | None = None

    def key(self) -> tuple:
        return (self.sample_id, self.model_id, self.prompt_tier, self.condition_id)

    def to_record(self) -> dict:
        record = {
            "sample_id": self.sample_id,
            "model_id": self.model_id,
            "prompt_tier": self.prompt_tier,
            "condition_id": self.condition_id,
            "caption": self.raw,
            "normalized": self.normalized,
        }
        if self.latency_ms is not None:
            record["latency_ms"] = self.latency_ms
        return record


def save_caption_records(records, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r.to_record(), ensure_ascii=False, separators=(",", ":"))
             for r in records]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def captions_from_file(path: str | Path, model_id: str) -> list:
    """Parse a caption JSONL file; tier defaults to basic, condition to clean."""
    path = Path(path)
    if not path.is_file():
        raise CaptionFileError(f"caption file not found: {path}")
    records = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CaptionFileError(f"{path.name} line {lineno}: not valid JSON ({exc})") from exc
            for key in ("sample_id", "caption"):
                if key not in obj:
                    raise CaptionFileError(f"{path.name} line {lineno}: missing {key!r}")
            tier = obj.get("prompt_tier") or "basic"
            if tier not in PROMPT_TIERS:
                raise CaptionFileError(
                    f"{path.name} line {lineno}: unknown prompt_tier {tier!r}"
                )
            record = CaptionRecord(
                sample_id=str(obj["sample_id"]),
                model_id=obj.get("model_id") or model_id,
                raw=str(obj["caption"]),
                prompt_tier=tier,
                condition_id=str(obj.get("condition_id") or "clean"),
                normalized=str(obj.get("normalized") or ""),
            )
            if record.key() in seen:
                raise CaptionFileError(
                    f"{path.name} line {lineno}: duplicate record for {record.key()}"
                )
            seen.add(record.key())
            records.append(record)
    return records


def _png_b64(image_path: Path) -> str:
    data = image_path.read_bytes()
    if image_path.suffix.lower() != ".png":
        data = Raster.from_bytes(data).png_bytes()
    return base64.b64encode(data).decode("ascii")


@dataclass
class HttpCaptioner:
    """Client for the POST /caption protocol."""

    base_url: str
    model_id: str
    decoding: DecodingParams = field(default_factory=DecodingParams)
    timeout: float = 60.0
    retries: int = 2
    workers: int = 4

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/caption"

    def caption_one(self, image_b64: str, prompt: str) -> str:
        import requests

        body = {
            "image_b64": image_b64,
            "prompt": prompt,
            "temperature": self.decoding.temperature,
            "top_k": self.decoding.top_k,
            "beam_size": self.decoding.beam_size,
            "max_tokens": self.decoding.max_tokens,
        }
        if self.model_id:
            body["model_id"] = self.model_id
        last_err = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(0.25 * (2 ** (attempt - 1)))
            try:
                resp = requests.post(self.url, json=body, timeout=self.timeout)
                resp.raise_for_status()
                caption = resp.json()["caption"]
                if not isinstance(caption, str):
                    raise ValueError("response field 'caption' is not a string")
                return caption
            except Exception as exc:
                last_err = exc
        raise ProviderError(str(last_err))


def captions_from_http(
    endpoint: str,
    manifest,
    tier: str,
    decoding: DecodingParams,
    model_id: str,
    condition_id: str = "clean",
    timeout: float = 60.0,
    workers: int = 4,
):
    """(records, errors): one record per captioned sample, manifest order.

    A sample that still fails after retries lands in `errors` as
    {"sample_id", "error"}; nothing is fabricated for it.  Total failure
    (no sample captioned at all) raises instead.
    """
    if tier not in PROMPT_TIERS:
        raise ParameterError(f"unknown prompt tier {tier!r}; expected one of {sorted(PROMPT_TIERS)}")
    client = HttpCaptioner(
        base_url=endpoint, model_id=model_id, decoding=decoding,
        timeout=timeout, workers=workers,
    )
    prompt = PROMPT_TIERS[tier]

    def fetch(sample):
        started = time.monotonic()
        try:
            b64 = _png_b64(manifest.resolve_path(sample))
            caption = client.caption_one(b64, prompt)
        except Exception as exc:
            return sample.sample_id, None, str(exc), 0.0
        return sample.sample_id, caption, None, (time.monotonic() - started) * 1000.0

    samples = manifest.samples
    if workers > 1 and len(samples) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fetch, samples))
    else:
        results = [fetch(s) for s in samples]

    records, errors = [], []
    for sample_id, caption, error, latency in results:
        if error is not None:
            errors.append({"sample_id": sample_id, "error": error})
        else:
            records.append(CaptionRecord(
                sample_id=sample_id, model_id=model_id, raw=caption,
                prompt_tier=tier, condition_id=condition_id,
                latency_ms=round(latency, 3),
            ))
    if samples and not records:
        missing = ", ".join(e["sample_id"] for e in errors)
        raise ProviderError(f"captioning failed for every sample: {missing}")
    return records, errors
