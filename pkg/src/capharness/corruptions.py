"""Seeded image degradation kernels with three severity levels.

Each corruption kind maps (level, overrides) to a fully resolved parameter
set; applying the same spec to the same image always yields bit-identical
output.  Kernels work on normalized [0, 1] floats and re-quantize through
``Raster.from_float``; convolutions pad with reflect-101 ("mirror") so blurs
do not darken image borders.

Severity schedule (level -> parameters):

    gaussian_noise            sigma 0.10 / 0.50 / 1.00     (on [0, 1] scale)
    impulse_noise             prob  0.02 / 0.08 / 0.20
    speckle_noise             sigma 0.10 / 0.25 / 0.50     (multiplicative)
    poisson_gaussian_sensor   sigma 0.05 / 0.15 / 0.30, photons 200 / 60 / 15
    gaussian_blur             sigma 1 / 3 / 6 px
    defocus_blur              radius 2 / 5 / 9 px
    motion_blur               length 5 / 9 / 15 px, angle seeded unless fixed
    zoom_blur                 max_scale 1.06 / 1.16 / 1.31 over 8 scales
    snow                      density 0.02 / 0.06 / 0.12, fixed streak kernel
    jpeg_compression          quality 60 / 25 / 10  (0 = lossless passthrough)
    pixelate                  block 4 / 8 / 16 px
    low_light_gamma           gamma 1.5 / 0.8 / 0.3  (output = input^(1/gamma),
                              so smaller gamma means darker)
    adversarial_patch         area 0.02 / 0.05 / 0.10 of the image, seeded
                              position, high-contrast checkerboard
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np
from scipy import ndimage

from .datasets import Manifest, Sample
from .errors import ParameterError, UnsupportedCorruptionError
from .raster import Raster
from .rng import Stream, hash64

LEVELS = ("low", "medium", "high")

# kind -> level -> resolved params
SEVERITY_TABLE = {
    "gaussian_noise": {"low": {"sigma": 0.10}, "medium": {"sigma": 0.50}, "high": {"sigma": 1.00}},
    "impulse_noise": {"low": {"prob": 0.02}, "medium": {"prob": 0.08}, "high": {"prob": 0.20}},
    "speckle_noise": {"low": {"sigma": 0.10}, "medium": {"sigma": 0.25}, "high": {"sigma": 0.50}},
    "poisson_gaussian_sensor": {
        "low": {"sigma": 0.05, "photons": 200.0},
        "medium": {"sigma": 0.15, "photons": 60.0},
        "high": {"sigma": 0.30, "photons": 15.0},
    },
    "gaussian_blur": {"low": {"sigma": 1.0}, "medium": {"sigma": 3.0}, "high": {"sigma": 6.0}},
    "defocus_blur": {"low": {"radius": 2}, "medium": {"radius": 5}, "high": {"radius": 9}},
    "motion_blur": {
        "low": {"length": 5, "angle": None},
        "medium": {"length": 9, "angle": None},
        "high": {"length": 15, "angle": None},
    },
    "zoom_blur": {
        "low": {"max_scale": 1.06, "steps": 8},
        "medium": {"max_scale": 1.16, "steps": 8},
        "high": {"max_scale": 1.31, "steps": 8},
    },
    "snow": {"low": {"density": 0.02}, "medium": {"density": 0.06}, "high": {"density": 0.12}},
    "jpeg_compression": {"low": {"quality": 60}, "medium": {"quality": 25}, "high": {"quality": 10}},
    "pixelate": {"low": {"block": 4}, "medium": {"block": 8}, "high": {"block": 16}},
    "low_light_gamma": {"low": {"gamma": 1.5}, "medium": {"gamma": 0.8}, "high": {"gamma": 0.3}},
    "adversarial_patch": {"low": {"area": 0.02}, "medium": {"area": 0.05}, "high": {"area": 0.10}},
}

KINDS = tuple(SEVERITY_TABLE)

# kind -> param -> (lo, hi), inclusive
_LEGAL_RANGES = {
    "gaussian_noise": {"sigma": (0.0, 2.0)},
    "impulse_noise": {"prob": (0.0, 1.0)},
    "speckle_noise": {"sigma": (0.0, 2.0)},
    "poisson_gaussian_sensor": {"sigma": (0.0, 2.0), "photons": (1.0, 100000.0)},
    "gaussian_blur": {"sigma": (0.0, 32.0)},
    "defocus_blur": {"radius": (0, 64)},
    "motion_blur": {"length": (1, 255), "angle": (0.0, 360.0)},
    "zoom_blur": {"max_scale": (1.0, 3.0), "steps": (1, 64)},
    "snow": {"density": (0.0, 1.0)},
    "jpeg_compression": {"quality": (0, 100)},
    "pixelate": {"block": (1, 1024)},
    "low_light_gamma": {"gamma": (0.05, 8.0)},
    "adversarial_patch": {"area": (0.0, 0.9)},
}


@dataclass
class CorruptionSpec:
    """One named degradation with severity level and resolved parameters.

    Parameters omitted from ``params`` are filled from the severity table;
    explicit overrides are validated against the kind's legal range.
    """

    kind: str
    level: str = "medium"
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SEVERITY_TABLE:
            raise UnsupportedCorruptionError(
                f"unknown corruption kind {self.kind!r}; known kinds: {', '.join(KINDS)}"
            )
        if self.level not in LEVELS:
            raise ParameterError(f"unknown level {self.level!r}; expected one of {LEVELS}")
        resolved = dict(SEVERITY_TABLE[self.kind][self.level])
        ranges = _LEGAL_RANGES[self.kind]
        for name, value in self.params.items():
            if name not in resolved:
                raise ParameterError(
                    f"{self.kind} has no parameter {name!r}; legal parameters: {sorted(resolved)}"
                )
            if value is not None:
                lo, hi = ranges[name]
                if not (lo <= value <= hi):
                    raise ParameterError(
                        f"{self.kind} parameter {name}={value} outside legal range [{lo}, {hi}]"
                    )
            resolved[name] = value
        self.params = resolved

    @property
    def condition_id(self) -> str:
        return f"{self.kind}/{self.level}"

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "seed": self.seed,
            "params": {k: v for k, v in sorted(self.params.items())},
        }


@dataclass
class MixtureSpec:
    """Ordered composition of corruptions; applied strictly in list order."""

    steps: list

    def __post_init__(self):
        if not self.steps:
            raise ParameterError("mixture must contain at least one step")

    @property
    def condition_id(self) -> str:
        return "mix:" + "+".join(s.condition_id for s in self.steps)

    def describe(self) -> dict:
        return {"mixture": [s.describe() for s in self.steps]}


# ---------------------------------------------------------------------------
# kernels


def _convolve2d_channels(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for c in range(3):
        out[:, :, c] = ndimage.correlate(x[:, :, c], kernel, mode="mirror")
    return out


def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return k / k.sum()


def _line_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Normalized 1px-wide line PSF of `length` pixels at `angle_deg`."""
    size = length if length % 2 == 1 else length + 1
    kernel = np.zeros((size, size), dtype=np.float64)
    c = (size - 1) / 2.0
    theta = math.radians(angle_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    for i in range(length):
        t = i - (length - 1) / 2.0
        px, py = c + t * dx, c + t * dy
        x0, y0 = int(math.floor(px)), int(math.floor(py))
        fx, fy = px - x0, py - y0
        for (yy, xx, w) in (
            (y0, x0, (1 - fy) * (1 - fx)),
            (y0, x0 + 1, (1 - fy) * fx),
            (y0 + 1, x0, fy * (1 - fx)),
            (y0 + 1, x0 + 1, fy * fx),
        ):
            if 0 <= yy < size and 0 <= xx < size and w > 0.0:
                kernel[yy, xx] += w
    return kernel / kernel.sum()


def _zoom_once(x: np.ndarray, scale: float) -> np.ndarray:
    """Bilinear center zoom-in by `scale` >= 1, cropped to the original size."""
    if scale == 1.0:
        return x
    h, w = x.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys = cy + (np.arange(h, dtype=np.float64) - cy) / scale
    xs = cx + (np.arange(w, dtype=np.float64) - cx) / scale
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = x[y0][:, x0] * (1 - fx) + x[y0][:, x1] * fx
    bot = x[y1][:, x0] * (1 - fx) + x[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


_SNOW_STREAK = _line_kernel(7, 60.0)
_SNOW_GAIN = 4.0
_PATCH_CELL = 4


def _apply_float(spec: CorruptionSpec, x: np.ndarray, stream: Stream) -> np.ndarray:
    p = spec.params
    kind = spec.kind
    h, w = x.shape[:2]

    if kind == "gaussian_noise":
        return x + stream.derive("gauss").normal(x.shape, p["sigma"])

    if kind == "impulse_noise":
        s = stream.derive("impulse")
        u_flip = s.uniform((h, w))
        u_salt = s.uniform((h, w))
        out = x.copy()
        flip = u_flip < p["prob"]
        out[flip] = np.where(u_salt[flip] < 0.5, 0.0, 1.0)[:, None]
        return out

    if kind == "speckle_noise":
        return x * (1.0 + stream.derive("speckle").normal(x.shape, p["sigma"]))

    if kind == "poisson_gaussian_sensor":
        photons = p["photons"]
        shot = stream.derive("shot").poisson(np.clip(x, 0.0, 1.0) * photons) / photons
        return shot + stream.derive("read").normal(x.shape, p["sigma"])

    if kind == "gaussian_blur":
        if p["sigma"] == 0:
            return x
        k = _gaussian_kernel1d(p["sigma"])
        out = np.empty_like(x)
        for c in range(3):
            tmp = ndimage.correlate1d(x[:, :, c], k, axis=0, mode="mirror")
            out[:, :, c] = ndimage.correlate1d(tmp, k, axis=1, mode="mirror")
        return out

    if kind == "defocus_blur":
        r = int(p["radius"])
        if r == 0:
            return x
        ii, jj = np.mgrid[-r : r + 1, -r : r + 1]
        disc = (ii * ii + jj * jj <= r * r).astype(np.float64)
        return _convolve2d_channels(x, disc / disc.sum())

    if kind == "motion_blur":
        length = int(p["length"])
        if length <= 1:
            return x
        angle = p["angle"]
        if angle is None:
            angle = float(stream.derive("angle").uniform(1)[0]) * 180.0
        return _convolve2d_channels(x, _line_kernel(length, angle))

    if kind == "zoom_blur":
        scales = np.linspace(1.0, p["max_scale"], int(p["steps"]))
        acc = np.zeros_like(x)
        for s in scales:
            acc += _zoom_once(x, float(s))
        return acc / len(scales)

    if kind == "snow":
        s = stream.derive("snow")
        flakes = (s.uniform((h, w)) < p["density"]).astype(np.float64)
        bright = 0.5 + 0.5 * s.uniform((h, w))
        layer = ndimage.correlate(flakes * bright, _SNOW_STREAK, mode="constant", cval=0.0)
        return x + (_SNOW_GAIN * layer)[:, :, None]

    if kind == "pixelate":
        block = int(p["block"])
        if block == 1:
            return x
        row_idx = np.arange(0, h, block)
        col_idx = np.arange(0, w, block)
        sums = np.add.reduceat(np.add.reduceat(x, row_idx, axis=0), col_idx, axis=1)
        row_n = np.diff(np.append(row_idx, h))
        col_n = np.diff(np.append(col_idx, w))
        means = sums / (row_n[:, None] * col_n[None, :])[:, :, None]
        return np.repeat(np.repeat(means, row_n, axis=0), col_n, axis=1)

    if kind == "low_light_gamma":
        gamma = p["gamma"]
        if gamma == 1.0:
            return x
        return np.power(np.clip(x, 0.0, 1.0), 1.0 / gamma)

    if kind == "adversarial_patch":
        area = p["area"]
        if area == 0:
            return x
        side = min(h, w, max(1, int(round(math.sqrt(area * h * w)))))
        u = stream.derive("patch").uniform(2)
        y0 = int(u[0] * (h - side + 1))
        x0 = int(u[1] * (w - side + 1))
        ii, jj = np.mgrid[0:side, 0:side]
        checker = ((ii // _PATCH_CELL + jj // _PATCH_CELL) % 2).astype(np.float64)
        out = x.copy()
        out[y0 : y0 + side, x0 : x0 + side] = checker[:, :, None]
        return out

    raise UnsupportedCorruptionError(f"unknown corruption kind {kind!r}")


def apply(spec: CorruptionSpec, image: Raster) -> Raster:
    """Apply one corruption; returns a new Raster, input left untouched."""
    if spec.kind == "jpeg_compression":
        quality = int(spec.params["quality"])
        if quality == 0:  # lossless passthrough sentinel
            return Raster(image.array.copy())
        return Raster.from_bytes(image.jpeg_bytes(quality))
    stream = Stream(spec.seed)
    return Raster.from_float(_apply_float(spec, image.to_float(), stream))


def apply_mixture(mix: MixtureSpec, image: Raster) -> Raster:
    """Left-to-right fold of ``apply`` over the mixture's steps."""
    out = image
    for i, step in enumerate(mix.steps):
        try:
            out = apply(step, out)
        except (ParameterError, UnsupportedCorruptionError) as exc:
            raise type(exc)(f"mixture step {i} ({step.kind}): {exc}") from exc
    return out


AnySpec = Union[CorruptionSpec, MixtureSpec]


def _with_sample_seed(spec: AnySpec, sample_seed: int) -> AnySpec:
    if isinstance(spec, MixtureSpec):
        steps = [replace(s, seed=hash64(sample_seed, i), params=dict(s.params))
                 for i, s in enumerate(spec.steps)]
        return MixtureSpec(steps)
    return replace(spec, seed=sample_seed, params=dict(spec.params))


def _safe_name(sample_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", sample_id)


def corrupt_dataset(
    manifest: Manifest,
    spec: AnySpec,
    out_dir: str | Path,
    run_seed: int = 0,
    workers: int = 1,
) -> Manifest:
    """Write one corrupted image per sample and return the pointing manifest.

    Per-sample noise uses seed hash64(run_seed, sample_id), so each sample's
    corruption is independent of every other yet reproducible.  Undecodable
    images are skipped and recorded under provenance["errors"]; output order
    follows input order regardless of worker count.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    single_jpeg = isinstance(spec, CorruptionSpec) and spec.kind == "jpeg_compression" \
        and int(spec.params["quality"]) > 0

    def corrupt_one(index_sample):
        index, sample = index_sample
        seed = hash64(run_seed, sample.sample_id)
        sample_spec = _with_sample_seed(spec, seed)
        try:
            image = Raster.load(manifest.resolve_path(sample))
        except Exception as exc:
            return index, None, f"{sample.sample_id}: cannot decode image ({exc})"
        name = f"{index:05d}_{_safe_name(sample.sample_id)}"
        if single_jpeg:
            # encode the source once at the requested quality; decoding the file
            # reproduces apply() exactly without a second compression pass
            rel = f"images/{name}.jpg"
            image.save_jpeg(out_dir / rel, int(sample_spec.params["quality"]))
        else:
            rel = f"images/{name}.png"
            if isinstance(sample_spec, MixtureSpec):
                corrupted = apply_mixture(sample_spec, image)
            else:
                corrupted = apply(sample_spec, image)
            corrupted.save_png(out_dir / rel)
        new_sample = Sample(
            sample_id=sample.sample_id,
            image_path=rel,
            references=list(sample.references),
            domain=sample.domain,
        )
        return index, new_sample, None

    tasks = list(enumerate(manifest.samples))
    if workers > 1 and tasks:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(corrupt_one, tasks))
    else:
        results = [corrupt_one(t) for t in tasks]

    results.sort(key=lambda r: r[0])
    samples = [s for _, s, err in results if err is None]
    errors = [err for _, _, err in results if err is not None]

    out = Manifest(
        name=f"{manifest.name}__{spec.condition_id}",
        samples=samples,
        provenance={
            "source": manifest.name,
            "corruption": spec.describe(),
            "run_seed": run_seed,
            "errors": errors,
        },
        root=out_dir,
    )
    out.save(out_dir / "manifest.jsonl")
    return out
