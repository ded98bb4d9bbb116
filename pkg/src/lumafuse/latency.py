"""Affine transmission-latency model and the enhancement benchmark harness.

The latency model is propagation + payload/bandwidth + per-image processing,
exactly linear in the image count. The shipped edge and cloud calibrations
solve the model through one published point each (40 raw 400x600 frames:
cloud 248.4 ms, edge 9.7 ms) with zero propagation and processing terms,
since only the slope of each curve is published.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from typing import Sequence

from .errors import FormatError
from .image import Image, save_ppm
from .nn import WeightStore, enhance

PER_IMAGE_BYTES = 400 * 600 * 3  # raw RGB frame at the dataset resolution
CLOUD_MS_AT_40 = 248.4
EDGE_MS_AT_40 = 9.7

_MODEL_FIELDS = ("propagation_ms", "bandwidth_bytes_per_ms", "per_image_bytes", "per_image_proc_ms")


@dataclass(frozen=True)
class LatencyModel:
    propagation_ms: float
    bandwidth_bytes_per_ms: float
    per_image_bytes: float
    per_image_proc_ms: float

    def __post_init__(self):
        for name in _MODEL_FIELDS:
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name}={v} must be finite and nonnegative")
            object.__setattr__(self, name, v)
        if self.bandwidth_bytes_per_ms <= 0:
            raise ValueError("bandwidth_bytes_per_ms must be positive")

    def to_text(self) -> str:
        return "".join(f"{name}={float(getattr(self, name))!r}\n" for name in _MODEL_FIELDS)

    @classmethod
    def from_text(cls, text: str) -> "LatencyModel":
        values: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in _MODEL_FIELDS:
                raise FormatError(f"line {lineno}: expected one of {_MODEL_FIELDS}, got {raw!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise FormatError(f"line {lineno}: bad float {val!r}") from None
        missing = [n for n in _MODEL_FIELDS if n not in values]
        if missing:
            raise FormatError(f"missing fields: {', '.join(missing)}")
        return cls(**values)


def _calibrated(total_ms_at_40: float) -> LatencyModel:
    return LatencyModel(
        propagation_ms=0.0,
        bandwidth_bytes_per_ms=40 * PER_IMAGE_BYTES / total_ms_at_40,
        per_image_bytes=PER_IMAGE_BYTES,
        per_image_proc_ms=0.0,
    )


CLOUD_MODEL = _calibrated(CLOUD_MS_AT_40)
EDGE_MODEL = _calibrated(EDGE_MS_AT_40)

NAMED_MODELS = {"cloud": CLOUD_MODEL, "edge": EDGE_MODEL}


def simulate_latency(model: LatencyModel, n_images: int) -> float:
    """Total transmission time in ms for n images: affine in n."""
    if n_images < 0:
        raise ValueError(f"n_images must be >= 0, got {n_images}")
    return (
        model.propagation_ms
        + n_images * model.per_image_bytes / model.bandwidth_bytes_per_ms
        + n_images * model.per_image_proc_ms
    )


def latency_curve(model: LatencyModel, counts: Sequence[int]) -> list[tuple[int, float]]:
    return [(int(n), simulate_latency(model, int(n))) for n in counts]


def curve_to_csv(curve: Sequence[tuple[int, float]]) -> str:
    return "image_count,total_ms\n" + "".join(f"{n},{ms:.6f}\n" for n, ms in curve)


@dataclass(frozen=True)
class BenchReport:
    """Wall-clock throughput of enhance() plus simulated deployment numbers.

    ``fps`` is raw pipeline throughput; ``edge_fps``/``cloud_fps`` fold the
    simulated transmission time for the processed frames into the clock.
    Outputs are hashed per repetition to confirm determinism.
    """

    fps: float
    per_image_ms: float
    images: int
    repetitions: int
    edge_fps: float
    cloud_fps: float
    edge_curve: list[tuple[int, float]]
    cloud_curve: list[tuple[int, float]]
    output_digest: str
    deterministic: bool

    def summary(self) -> str:
        lines = [
            f"images={self.images} repetitions={self.repetitions}",
            f"pipeline_fps={self.fps:.4f} per_image_ms={self.per_image_ms:.3f}",
            f"edge_fps={self.edge_fps:.4f} cloud_fps={self.cloud_fps:.4f}",
            f"deterministic={self.deterministic} output_digest={self.output_digest[:16]}",
        ]
        return "\n".join(lines)


def bench_pipeline(
    encoder_ws: WeightStore,
    detail_ws: WeightStore,
    images: Sequence[Image],
    repetitions: int = 3,
    edge_model: LatencyModel = EDGE_MODEL,
    cloud_model: LatencyModel = CLOUD_MODEL,
    curve_counts: Sequence[int] = tuple(range(0, 41, 5)),
) -> BenchReport:
    """Benchmark enhance() after one warm-up pass.

    Outputs are deterministic; timings are not. Effective edge/cloud FPS
    divide the processed frame count by compute time plus the simulated
    transmission time for that many frames.
    """
    if not images:
        raise ValueError("need at least one image")
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    enhance(images[0], encoder_ws, detail_ws)  # warm-up
    digests = []
    start = time.perf_counter()
    for _ in range(repetitions):
        sha = hashlib.sha256()
        for img in images:
            out = enhance(img, encoder_ws, detail_ws)
            sha.update(save_ppm(out))
        digests.append(sha.hexdigest())
    elapsed = time.perf_counter() - start
    n_processed = len(images) * repetitions
    fps = n_processed / elapsed if elapsed > 0 else float("inf")
    compute_s = elapsed
    edge_s = compute_s + simulate_latency(edge_model, n_processed) / 1000.0
    cloud_s = compute_s + simulate_latency(cloud_model, n_processed) / 1000.0
    return BenchReport(
        fps=fps,
        per_image_ms=1000.0 * elapsed / n_processed,
        images=len(images),
        repetitions=repetitions,
        edge_fps=n_processed / edge_s,
        cloud_fps=n_processed / cloud_s,
        edge_curve=latency_curve(edge_model, curve_counts),
        cloud_curve=latency_curve(cloud_model, curve_counts),
        output_digest=digests[0],
        deterministic=len(set(digests)) == 1,
    )
