"""In-memory image grid plus PNG/JPEG decode and encode.

A Raster is a height x width x 3 array of 8-bit RGB values, the unit every
corruption kernel operates on.  Kernels compute in normalized [0, 1] floats
and re-quantize with clamp-then-round (half away from zero) so results do not
depend on platform rounding modes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class Raster:
    array: np.ndarray  # (H, W, 3) uint8, row-major

    def __post_init__(self):
        a = np.asarray(self.array)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"raster must be (H, W, 3), got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        if a.dtype != np.uint8:
            raise ValueError(f"raster must be uint8, got {a.dtype}")
        self.array = np.ascontiguousarray(a)

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def width(self) -> int:
        return self.array.shape[1]

    def to_float(self) -> np.ndarray:
        """Normalized float64 copy in [0, 1]."""
        return self.array.astype(np.float64) / 255.0

    @classmethod
    def from_float(cls, data: np.ndarray) -> "Raster":
        """Re-quantize [0, 1] floats: clamp first, then round half away from zero."""
        clipped = np.clip(data, 0.0, 1.0) * 255.0
        return cls(np.floor(clipped + 0.5).astype(np.uint8))

    @classmethod
    def load(cls, path: str | Path) -> "Raster":
        with Image.open(path) as img:
            return cls(np.asarray(img.convert("RGB"), dtype=np.uint8))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Raster":
        with Image.open(io.BytesIO(data)) as img:
            return cls(np.asarray(img.convert("RGB"), dtype=np.uint8))

    def to_image(self) -> Image.Image:
        return Image.fromarray(self.array, mode="RGB")

    def save_png(self, path: str | Path) -> None:
        self.to_image().save(path, format="PNG")

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.to_image().save(buf, format="PNG")
        return buf.getvalue()

    def jpeg_bytes(self, quality: int) -> bytes:
        buf = io.BytesIO()
        self.to_image().save(buf, format="JPEG", quality=quality)
        return buf.getvalue()

    def save_jpeg(self, path: str | Path, quality: int) -> None:
        self.to_image().save(path, format="JPEG", quality=quality)

    def same_pixels(self, other: "Raster") -> bool:
        return np.array_equal(self.array, other.array)
