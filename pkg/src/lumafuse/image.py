"""Pixel data model, luminance helper, and binary PPM (P6) I/O.

Images are H x W x 3 float64 rasters with every sample in [0, 1], stored
interleaved RGB in row-major order (the same order as the file format).
Instances are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError

# Luma weights used everywhere in this codebase (filters and metrics alike).
LUMA_R = 0.27
LUMA_G = 0.67
LUMA_B = 0.06

_WHITESPACE = b" \t\r\n\v\f"


@dataclass(frozen=True, eq=False)
class Image:
    """Validated RGB raster. ``data`` has shape (height, width, 3)."""

    data: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeError(f"image data must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"image must have at least one pixel, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image data must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def same_shape(self, other: "Image") -> bool:
        return self.data.shape == other.data.shape


def luminance(img: Image) -> np.ndarray:
    """Per-pixel luma 0.27*r + 0.67*g + 0.06*b as an (H, W) array."""
    d = img.data
    return LUMA_R * d[:, :, 0] + LUMA_G * d[:, :, 1] + LUMA_B * d[:, :, 2]


def _skip_separators(data: bytes, pos: int) -> int:
    """Advance past PPM whitespace and '#' comments; error if none present."""
    start = pos
    while pos < len(data):
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos == start:
        raise FormatError("expected whitespace", offset=pos)
    return pos


def _read_uint(data: bytes, pos: int, what: str) -> tuple[int, int]:
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise FormatError(f"expected decimal {what}", offset=start)
    return int(data[start:pos]), pos


def load_ppm(data: bytes) -> Image:
    """Parse binary PPM (magic P6, maxval 255) into an Image.

    Each 8-bit sample v maps to v / 255.0. Raises FormatError (carrying the
    byte offset) on a bad magic, malformed header, unsupported maxval, or a
    truncated/oversized payload.
    """
    if data[:2] != b"P6":
        raise FormatError(f"expected magic 'P6', got {data[:2]!r}", offset=0)
    pos = _skip_separators(data, 2)
    width, pos = _read_uint(data, pos, "width")
    pos = _skip_separators(data, pos)
    height, pos = _read_uint(data, pos, "height")
    pos = _skip_separators(data, pos)
    maxval, pos = _read_uint(data, pos, "maxval")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, only 255", offset=pos - len(str(maxval)))
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}", offset=2)
    # exactly one whitespace byte between header and raster
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("expected single whitespace before raster", offset=pos)
    pos += 1
    expected = width * height * 3
    payload = data[pos:]
    if len(payload) < expected:
        raise FormatError(
            f"truncated payload: need {expected} bytes, have {len(payload)}",
            offset=len(data),
        )
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after raster", offset=pos + expected)
    raster = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return Image(raster.reshape(height, width, 3))


def save_ppm(img: Image) -> bytes:
    """Serialize to binary PPM. Samples quantize as round(v*255) half-up.

    load_ppm(save_ppm(x)) differs from x by at most 1/510 per sample, and is
    lossless when every sample is an exact multiple of 1/255.
    """
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    # floor(v*255 + 0.5) is round-half-up, bit-stable across platforms
    samples = np.floor(img.data * 255.0 + 0.5)
    samples = np.clip(samples, 0.0, 255.0).astype(np.uint8)
    return header + samples.tobytes()
