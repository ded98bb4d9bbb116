"""Embedding-space prompt losses and the pluggable embedding provider.

Prompts and images live in the same unit-sphere embedding space; quality is
scored by a two-way softmax over dot products (no temperature). Three losses
are provided: the binary language-image loss, the enhancement-correlation
loss, and the margin-ranking cue refinement loss over an ordered series of
progressively stronger enhancements. Analytic gradients back the optimizers.
"""

from __future__ import annotations

import hashlib
import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol

import numpy as np

from .errors import FormatError, ShapeError
from .image import Image

EMBEDDING_MAGIC = b"EMB1"
TEST_ENCODER_GRID = 8
TEST_ENCODER_DIM = TEST_ENCODER_GRID * TEST_ENCODER_GRID * 3

NORM_WARN_TOL = 1e-4
NORM_ERROR_TOL = 1e-2


@dataclass(frozen=True, eq=False)
class Embedding:
    """Unit-norm vector (L2 norm within 1e-6 of 1, enforced)."""

    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ShapeError(f"embedding must be a nonempty 1-D vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains non-finite values")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding norm {norm} deviates from 1 by more than 1e-6")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    @classmethod
    def unit(cls, values) -> "Embedding":
        """Normalize an arbitrary nonzero vector onto the unit sphere."""
        v = np.asarray(values, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise ValueError("cannot normalize a (near-)zero vector")
        return cls(v / norm)

    def dot(self, other: "Embedding") -> float:
        if self.dim != other.dim:
            raise ShapeError(f"embedding dims differ: {self.dim} vs {other.dim}")
        return float(np.dot(self.values, other.values))


@dataclass(frozen=True)
class PromptPair:
    """Positive (normal-light) and negative (low-light) prompt embeddings."""

    t_pos: Embedding
    t_neg: Embedding

    def __post_init__(self):
        if self.t_pos.dim != self.t_neg.dim:
            raise ShapeError(f"prompt dims differ: {self.t_pos.dim} vs {self.t_neg.dim}")


@dataclass(frozen=True)
class Margins:
    """Correlation-gap targets for the cue refinement loss."""

    p0: float = 0.9
    p1: float = 0.2
    p2: float = 0.3

    def __post_init__(self):
        for name in ("p0", "p1", "p2"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"margin {name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)


def _softmax_pair(a: float, b: float) -> float:
    """exp(a) / (exp(a) + exp(b)), arranged so f(a,b) + f(b,a) == 1.0 exactly."""
    if a >= b:
        ea = math.exp(a)
        eb = math.exp(b)
        return ea / (ea + eb)
    return 1.0 - _softmax_pair(b, a)


def similarity_g(e_img: Embedding, pair: PromptPair) -> float:
    """Two-way softmax score of the image against the prompt pair, in (0, 1)."""
    return _softmax_pair(e_img.dot(pair.t_pos), e_img.dot(pair.t_neg))


def _binary_loss(g: float, label: int) -> float:
    if label == 1:
        return -math.log(g)
    return -math.log(1.0 - g)


def loss_li(e_img: Embedding, label: int, pair: PromptPair) -> float:
    """Binary language-image loss: -log g for label 1, -log(1-g) for label 0."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    return _binary_loss(similarity_g(e_img, pair), label)


def loss_ehc(e_enhanced: Embedding, t_tt: Embedding, pair: PromptPair) -> float:
    """Enhancement-correlation loss.

    -ln( exp(e.t_tt) / (exp(e.t_pos) + exp(e.t_neg)) ); the numerator prompt
    is the refined cue while the denominator keeps the original pair.
    """
    d_tt = e_enhanced.dot(t_tt)
    d_pos = e_enhanced.dot(pair.t_pos)
    d_neg = e_enhanced.dot(pair.t_neg)
    return math.log(math.exp(d_pos) + math.exp(d_neg)) - d_tt


def correlation_r(e_img: Embedding, t_tt: Embedding, t_neg: Embedding) -> float:
    """Correlation of an image with the refined cue: softmax of (e.t_tt) against (e.t_neg)."""
    return _softmax_pair(e_img.dot(t_tt), e_img.dot(t_neg))


CW_MODES = ("literal", "text_consistent")


def cw_slacks(
    r_t: float,
    r_f: float,
    r_en: float,
    r_en3: float,
    r_en2: float,
    r_en1: float,
    r_en0: float,
    m: Margins = Margins(),
    mode: str = "literal",
) -> tuple[float, ...]:
    """The six margin slacks S_0..S_5 of the cue refinement loss."""
    if mode not in CW_MODES:
        raise ValueError(f"mode must be one of {CW_MODES}, got {mode!r}")
    rs = (r_t, r_f, r_en, r_en3, r_en2, r_en1, r_en0)
    for name, r in zip(("r_t", "r_f", "r_en", "r_en3", "r_en2", "r_en1", "r_en0"), rs):
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"{name}={r} outside [0, 1]")
    s1 = m.p1 - (r_t - r_f) if mode == "literal" else m.p1 - (r_t - r_en)
    return (
        m.p0 - (r_t - r_f),
        s1,
        m.p2 - (r_en - r_en3),
        m.p2 - (r_en3 - r_en2),
        m.p2 - (r_en2 - r_en1),
        m.p2 - (r_en1 - r_en0),
    )


def loss_cw(
    r_t: float,
    r_f: float,
    r_en: float,
    r_en3: float,
    r_en2: float,
    r_en1: float,
    r_en0: float,
    m: Margins = Margins(),
    mode: str = "literal",
) -> float:
    """Cue refinement loss: sum of hinged margin slacks, 0 iff all slacks <= 0."""
    return sum(max(0.0, s) for s in cw_slacks(r_t, r_f, r_en, r_en3, r_en2, r_en1, r_en0, m, mode))


# Array-level loss/gradient kernels used by the optimizers and gradient tests.
# These take raw float vectors (not necessarily unit norm) so they stay
# differentiable in the ambient space; projection happens in the optimizer.


def softmax_pair_raw(a: float, b: float) -> float:
    return _softmax_pair(a, b)


def li_mean_loss_and_grads(
    t_pos: np.ndarray,
    t_neg: np.ndarray,
    normal_vecs: np.ndarray,
    low_vecs: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean binary loss over both sample sets and its gradients w.r.t. the prompts.

    normal_vecs (label 1) and low_vecs (label 0) are (N, D) arrays.
    """
    n_total = len(normal_vecs) + len(low_vecs)
    if n_total == 0:
        raise ValueError("need at least one embedding")
    loss = 0.0
    g_pos = np.zeros_like(t_pos)
    g_neg = np.zeros_like(t_neg)
    for vec in normal_vecs:
        g = _softmax_pair(float(vec @ t_pos), float(vec @ t_neg))
        loss += -math.log(g)
        g_pos += (g - 1.0) * vec
        g_neg += (1.0 - g) * vec
    for vec in low_vecs:
        g = _softmax_pair(float(vec @ t_pos), float(vec @ t_neg))
        loss += -math.log(1.0 - g)
        g_pos += g * vec
        g_neg += -g * vec
    return loss / n_total, g_pos / n_total, g_neg / n_total


def cw_loss_and_grad(
    t_tt: np.ndarray,
    t_neg: np.ndarray,
    e_t: np.ndarray,
    e_f: np.ndarray,
    series_strongest_first: np.ndarray,
    m: Margins = Margins(),
    mode: str = "literal",
) -> tuple[float, np.ndarray]:
    """Cue refinement loss as a function of the refined cue vector, with gradient.

    ``series_strongest_first`` is (5, D): full enhancement first, then the
    progressively weaker iterates down to the weakest. Active hinges (slack
    exactly 0 excluded) contribute r*(1-r)*e terms through the softmax.
    """
    vecs = [e_t, e_f] + [series_strongest_first[i] for i in range(5)]
    rs = []
    drs = []
    for vec in vecs:
        r = _softmax_pair(float(vec @ t_tt), float(vec @ t_neg))
        rs.append(r)
        drs.append(r * (1.0 - r) * vec)
    r_t, r_f, r_en, r_en3, r_en2, r_en1, r_en0 = rs
    d_t, d_f, d_en, d_en3, d_en2, d_en1, d_en0 = drs
    slacks = cw_slacks(r_t, r_f, r_en, r_en3, r_en2, r_en1, r_en0, m, mode)
    d_s1 = -(d_t - d_f) if mode == "literal" else -(d_t - d_en)
    slack_grads = (
        -(d_t - d_f),
        d_s1,
        -(d_en - d_en3),
        -(d_en3 - d_en2),
        -(d_en2 - d_en1),
        -(d_en1 - d_en0),
    )
    loss = 0.0
    grad = np.zeros_like(t_tt)
    for s, ds in zip(slacks, slack_grads):
        if s > 0.0:
            loss += s
            grad += ds
    return loss, grad


def test_encoder(img: Image) -> Embedding:
    """Deterministic stand-in for a frozen image encoder.

    Average-pools the image to an 8x8x3 grid, subtracts the global mean, and
    L2-normalizes (a zero vector maps to the first basis vector). Invariant
    to global additive brightness shifts.
    """
    grid = TEST_ENCODER_GRID
    d = img.data
    h, w = d.shape[0], d.shape[1]
    pooled = np.empty((grid, grid, 3))
    for i in range(grid):
        ri0, ri1 = (i * h) // grid, ((i + 1) * h) // grid
        if ri1 <= ri0:
            ri0, ri1 = min(ri0, h - 1), min(ri0, h - 1) + 1
        for j in range(grid):
            cj0, cj1 = (j * w) // grid, ((j + 1) * w) // grid
            if cj1 <= cj0:
                cj0, cj1 = min(cj0, w - 1), min(cj0, w - 1) + 1
            pooled[i, j] = d[ri0:ri1, cj0:cj1].mean(axis=(0, 1))
    flat = pooled.ravel() - pooled.mean()
    norm = float(np.linalg.norm(flat))
    if norm < 1e-12:
        basis = np.zeros(TEST_ENCODER_DIM)
        basis[0] = 1.0
        return Embedding(basis)
    return Embedding(flat / norm)


class EmbeddingProvider(Protocol):
    """Deterministic source of image and named (prompt) embeddings."""

    def encode_image(self, img: Image) -> Embedding: ...

    def lookup(self, name: str) -> Embedding: ...


@dataclass(frozen=True)
class StubProvider:
    """Fully offline provider: test_encoder for images, name-seeded unit
    vectors for prompts. Same input always yields the identical embedding."""

    dim: int = TEST_ENCODER_DIM

    def encode_image(self, img: Image) -> Embedding:
        return test_encoder(img)

    def lookup(self, name: str) -> Embedding:
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return Embedding.unit(rng.standard_normal(self.dim))


@dataclass(frozen=True)
class TableProvider:
    """Provider backed by a loaded embedding table; images are not encodable."""

    table: Mapping[str, Embedding] = field(default_factory=dict)

    def encode_image(self, img: Image) -> Embedding:
        raise LookupError("table provider cannot encode images")

    def lookup(self, name: str) -> Embedding:
        try:
            return self.table[name]
        except KeyError:
            raise LookupError(f"no embedding named {name!r}") from None


def save_embeddings(table: Mapping[str, Embedding] | Iterable[tuple[str, Embedding]]) -> bytes:
    """Serialize a named embedding table to the EMB1 container (float32 rows)."""
    items = list(table.items()) if isinstance(table, Mapping) else list(table)
    if not items:
        raise ValueError("refusing to write an empty embedding table")
    dim = items[0][1].dim
    chunks = [EMBEDDING_MAGIC, struct.pack("<II", len(items), dim)]
    seen = set()
    for name, emb in items:
        if emb.dim != dim:
            raise ShapeError(f"embedding {name!r} has dim {emb.dim}, table dim is {dim}")
        if name in seen:
            raise ValueError(f"duplicate embedding name {name!r}")
        seen.add(name)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(emb.values.astype("<f4").tobytes())
    return b"".join(chunks)


def load_embeddings(data: bytes) -> dict[str, Embedding]:
    """Parse an EMB1 container into a named Embedding table.

    Rows are re-normalized on load; a norm deviating from 1 by more than 1e-4
    triggers a warning, by more than 1e-2 an error.
    """
    if data[:4] != EMBEDDING_MAGIC:
        raise FormatError(f"expected magic {EMBEDDING_MAGIC!r}, got {data[:4]!r}", offset=0)
    if len(data) < 12:
        raise FormatError("file too short for header", offset=len(data))
    count, dim = struct.unpack_from("<II", data, 4)
    if dim == 0:
        raise FormatError("embedding dim must be positive", offset=8)
    pos = 12
    table: dict[str, Embedding] = {}
    for _ in range(count):
        if pos + 2 > len(data):
            raise FormatError("truncated while reading name length", offset=pos)
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + name_len > len(data):
            raise FormatError("truncated while reading name", offset=pos)
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        if pos + 4 * dim > len(data):
            raise FormatError(f"truncated while reading values for {name!r}", offset=pos)
        values = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += 4 * dim
        if name in table:
            raise FormatError(f"duplicate embedding name {name!r}", offset=pos)
        norm = float(np.linalg.norm(values))
        if abs(norm - 1.0) > NORM_ERROR_TOL:
            raise FormatError(f"embedding {name!r} norm {norm} deviates from 1 by more than {NORM_ERROR_TOL}")
        if abs(norm - 1.0) > NORM_WARN_TOL:
            warnings.warn(f"embedding {name!r} norm {norm} re-normalized on load", stacklevel=2)
        table[name] = Embedding.unit(values)
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes", offset=pos)
    return table
