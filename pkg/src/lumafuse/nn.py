"""Forward-only inference for the two fixed CNN architectures.

The hyperparameter encoder maps an image to the six ISP filter parameters;
the detail network produces a per-pixel residual in (-1, 1). Both run on
plain float64 numpy with a portable binary weight container ("NNW1").

conv2d and gaussian_blur accumulate taps in a fixed order (bias first, then
channel-major kernel positions) so outputs are bit-identical to a naive
nested-loop implementation with the same ordering.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError
from .filters import IspParams, PARAM_RANGES, apply_pipeline
from .image import Image

BN_EPS = 1e-5

WEIGHT_MAGIC = b"NNW1"

ENCODER_CHANNELS = (8, 16, 32, 64, 128)
ENCODER_MIN_SIDE = 63  # smallest input that survives five pool stages
DETAIL_CHANNELS = 32
DETAIL_BLOCKS = 3


def _encoder_shapes() -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    in_ch = 3
    for i, out_ch in enumerate(ENCODER_CHANNELS, start=1):
        shapes[f"conv{i}.weight"] = (out_ch, in_ch, 3, 3)
        shapes[f"conv{i}.bias"] = (out_ch,)
        in_ch = out_ch
    shapes["fc.weight"] = (6, ENCODER_CHANNELS[-1])
    shapes["fc.bias"] = (6,)
    return shapes


def _bn_shapes(prefix: str, ch: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.gamma": (ch,),
        f"{prefix}.beta": (ch,),
        f"{prefix}.mean": (ch,),
        f"{prefix}.var": (ch,),
    }


def _detail_shapes() -> dict[str, tuple[int, ...]]:
    ch = DETAIL_CHANNELS
    shapes: dict[str, tuple[int, ...]] = {
        "conv_in.weight": (ch, 3, 3, 3),
        "conv_in.bias": (ch,),
    }
    shapes.update(_bn_shapes("bn_in", ch))
    for k in range(1, DETAIL_BLOCKS + 1):
        shapes[f"res{k}.conv1.weight"] = (ch, ch, 3, 3)
        shapes[f"res{k}.conv1.bias"] = (ch,)
        shapes.update(_bn_shapes(f"res{k}.bn1", ch))
        shapes[f"res{k}.conv2.weight"] = (ch, ch, 3, 3)
        shapes[f"res{k}.conv2.bias"] = (ch,)
        shapes.update(_bn_shapes(f"res{k}.bn2", ch))
    shapes["conv_out.weight"] = (3, ch, 3, 3)
    shapes["conv_out.bias"] = (3,)
    return shapes


ARCHITECTURES: dict[str, dict[str, tuple[int, ...]]] = {
    "encoder": _encoder_shapes(),
    "detail": _detail_shapes(),
}


@dataclass(frozen=True, eq=False)
class WeightStore:
    """Named float32 tensors validated against a declared architecture."""

    arch: str
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise FormatError(f"unknown architecture {self.arch!r}")
        expected = ARCHITECTURES[self.arch]
        missing = sorted(set(expected) - set(self.tensors))
        extra = sorted(set(self.tensors) - set(expected))
        if missing or extra:
            raise FormatError(
                f"weight set does not match architecture {self.arch!r}:"
                f" missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        frozen: dict[str, np.ndarray] = {}
        for name, shape in expected.items():
            t = np.asarray(self.tensors[name], dtype=np.float32)
            if t.shape != shape:
                raise FormatError(f"tensor {name!r} has shape {t.shape}, expected {shape}")
            if not np.all(np.isfinite(t)):
                raise FormatError(f"tensor {name!r} contains non-finite values")
            t = np.ascontiguousarray(t)
            t.flags.writeable = False
            frozen[name] = t
        object.__setattr__(self, "tensors", frozen)

    def get(self, name: str) -> np.ndarray:
        """Tensor as float64 for computation."""
        return self.tensors[name].astype(np.float64)


def conv2d(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    stride: int = 1,
    padding: int = 1,
) -> np.ndarray:
    """Cross-correlation of (C, H, W) with (O, C, KH, KW) kernels plus bias.

    Zero padding; with a 3x3 kernel, stride 1 and padding 1 the spatial size
    is preserved. No kernel flip.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"input must be (C, H, W), got {x.shape}")
    if w.ndim != 4:
        raise ShapeError(f"kernel must be (O, C, KH, KW), got {w.shape}")
    out_ch, in_ch, kh, kw = w.shape
    if in_ch != x.shape[0]:
        raise ShapeError(f"kernel expects {in_ch} input channels, input has {x.shape[0]}")
    if b.shape != (out_ch,):
        raise ShapeError(f"bias must have shape ({out_ch},), got {b.shape}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"invalid stride {stride} or padding {padding}")
    h, wd = x.shape[1], x.shape[2]
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wd + 2 * padding - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"input {h}x{wd} too small for kernel {kh}x{kw} at padding {padding}")
    padded = np.zeros((x.shape[0], h + 2 * padding, wd + 2 * padding))
    padded[:, padding : padding + h, padding : padding + wd] = x
    out = np.empty((out_ch, out_h, out_w))
    for o in range(out_ch):
        acc = np.full((out_h, out_w), b[o])
        for c in range(in_ch):
            for ky in range(kh):
                for kx in range(kw):
                    plane = padded[
                        c,
                        ky : ky + stride * (out_h - 1) + 1 : stride,
                        kx : kx + stride * (out_w - 1) + 1 : stride,
                    ]
                    acc += w[o, c, ky, kx] * plane
        out[o] = acc
    return out


def max_pool(x: np.ndarray, kernel: int = 3, stride: int = 2) -> np.ndarray:
    """Max pooling without padding; output extent floor((n - kernel)/stride) + 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"input must be (C, H, W), got {x.shape}")
    h, w = x.shape[1], x.shape[2]
    if h < kernel or w < kernel:
        raise ShapeError(f"input {h}x{w} smaller than pooling kernel {kernel}")
    windows = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    return windows[:, ::stride, ::stride].max(axis=(-2, -1))


def batch_norm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
) -> np.ndarray:
    """Inference-mode normalization: gamma*(x - mean)/sqrt(var + eps) + beta."""
    g = gamma[:, None, None]
    b = beta[:, None, None]
    m = mean[:, None, None]
    v = var[:, None, None]
    return g * (x - m) / np.sqrt(v + BN_EPS) + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _image_to_chw(img: Image) -> np.ndarray:
    return np.moveaxis(img.data, 2, 0)


def encoder_forward(img: Image, ws: WeightStore) -> IspParams:
    """Run the hyperparameter encoder: five conv+pool stages, global max
    pooling to a 128-vector, and a fully connected head whose six outputs are
    mapped through a sigmoid into the parameter ranges."""
    if ws.arch != "encoder":
        raise ShapeError(f"expected encoder weights, got {ws.arch!r}")
    h, w = img.height, img.width
    sh, sw = h, w
    for _ in range(5):
        if sh < 3 or sw < 3:
            raise ShapeError(
                f"image {h}x{w} too small for five pooling stages; need at least "
                f"{ENCODER_MIN_SIDE}x{ENCODER_MIN_SIDE}"
            )
        sh = (sh - 3) // 2 + 1
        sw = (sw - 3) // 2 + 1
    x = _image_to_chw(img)
    for i in range(1, 6):
        x = conv2d(x, ws.get(f"conv{i}.weight"), ws.get(f"conv{i}.bias"))
        x = max_pool(x)
    feat = x.max(axis=(1, 2))
    raw = ws.get("fc.weight") @ feat + ws.get("fc.bias")
    squashed = _sigmoid(raw)
    mapped = [lo + s * (hi - lo) for s, (lo, hi) in zip(squashed, PARAM_RANGES)]
    return IspParams.from_array(mapped)


def _res_block(x: np.ndarray, ws: WeightStore, prefix: str) -> np.ndarray:
    h = conv2d(x, ws.get(f"{prefix}.conv1.weight"), ws.get(f"{prefix}.conv1.bias"))
    h = relu(batch_norm(h, *(ws.get(f"{prefix}.bn1.{p}") for p in ("gamma", "beta", "mean", "var"))))
    h = conv2d(h, ws.get(f"{prefix}.conv2.weight"), ws.get(f"{prefix}.conv2.bias"))
    h = relu(batch_norm(h, *(ws.get(f"{prefix}.bn2.{p}") for p in ("gamma", "beta", "mean", "var"))))
    return x + h


def detail_forward(img: Image, ws: WeightStore) -> np.ndarray:
    """Run the detail network; returns an (H, W, 3) residual in (-1, 1)."""
    if ws.arch != "detail":
        raise ShapeError(f"expected detail weights, got {ws.arch!r}")
    x = _image_to_chw(img)
    x = conv2d(x, ws.get("conv_in.weight"), ws.get("conv_in.bias"))
    x = relu(batch_norm(x, *(ws.get(f"bn_in.{p}") for p in ("gamma", "beta", "mean", "var"))))
    for k in range(1, DETAIL_BLOCKS + 1):
        x = _res_block(x, ws, f"res{k}")
    x = conv2d(x, ws.get("conv_out.weight"), ws.get("conv_out.bias"))
    x = np.tanh(x)
    return np.moveaxis(x, 0, 2)


def enhance(
    img: Image,
    encoder_ws: WeightStore,
    detail_ws: WeightStore,
    detail_input: str = "original",
) -> Image:
    """Full enhancement: ISP pipeline driven by the encoder's parameters plus
    the detail residual, clamped to [0, 1].

    ``detail_input`` selects what the detail network sees: the original image
    (default) or the pipeline output ("enhanced").
    """
    if detail_input not in ("original", "enhanced"):
        raise ValueError(f"detail_input must be 'original' or 'enhanced', got {detail_input!r}")
    params = encoder_forward(img, encoder_ws)
    base = apply_pipeline(img, params)
    residual = detail_forward(img if detail_input == "original" else base, detail_ws)
    return Image(np.clip(base.data + residual, 0.0, 1.0))


def save_weights(ws: WeightStore) -> bytes:
    """Serialize to the NNW1 container (names sorted, trailing CRC32)."""
    chunks = [WEIGHT_MAGIC, struct.pack("<I", len(ws.tensors))]
    for name in sorted(ws.tensors):
        t = ws.tensors[name]
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", t.ndim))
        chunks.append(struct.pack(f"<{t.ndim}I", *t.shape))
        chunks.append(t.astype("<f4").tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def load_weights(data: bytes, arch: str) -> WeightStore:
    """Parse an NNW1 container and validate against the declared architecture."""
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError(f"expected magic {WEIGHT_MAGIC!r}, got {data[:4]!r}", offset=0)
    if len(data) < 12:
        raise FormatError("file too short for header and checksum", offset=len(data))
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            offset=len(data) - 4,
        )
    (count,) = struct.unpack("<I", data[4:8])
    pos = 8
    end = len(data) - 4
    tensors: dict[str, np.ndarray] = {}

    def need(n: int, what: str) -> None:
        if pos + n > end:
            raise FormatError(f"truncated while reading {what}", offset=pos)

    for _ in range(count):
        need(2, "name length")
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        need(name_len, "name")
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        need(1, "rank")
        rank = data[pos]
        pos += 1
        need(4 * rank, "dims")
        shape = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        n_values = 1
        for extent in shape:
            n_values *= extent
        need(4 * n_values, f"tensor {name!r} data")
        values = np.frombuffer(data, dtype="<f4", count=n_values, offset=pos).reshape(shape)
        pos += 4 * n_values
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}", offset=pos)
        tensors[name] = values
    if pos != end:
        raise FormatError(f"{end - pos} unparsed bytes before checksum", offset=pos)
    return WeightStore(arch, tensors)


def random_weights(arch: str, seed: int, scale: float = 0.1) -> WeightStore:
    """Deterministic random weights for tests, demos, and benchmarks."""
    if arch not in ARCHITECTURES:
        raise FormatError(f"unknown architecture {arch!r}")
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(ARCHITECTURES[arch].items()):
        if name.endswith(".var"):
            t = rng.uniform(0.5, 1.5, size=shape)
        elif name.endswith(".gamma"):
            t = rng.uniform(0.8, 1.2, size=shape)
        else:
            t = rng.normal(0.0, scale, size=shape)
        tensors[name] = t.astype(np.float32)
    return WeightStore(arch, tensors)
