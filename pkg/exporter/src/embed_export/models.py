"""Encoder registry.

Model ids use a scheme prefix:

- ``builtin:tiny``  - deterministic offline featurizer (no downloads). Image
  side: a 4x4 grid of per-cell RGB means plus a 16-bin luma histogram, 64
  dims. Text side: signed hashed character trigrams into the same 64 dims.
  It is a stand-in for environments where no pretrained encoder can be
  fetched; it keeps the full export path exercised and its image features
  are brightness-sensitive.
- ``clip:<model>``  - a real vision-language encoder loaded through
  sentence-transformers (e.g. ``clip:clip-ViT-B-32``). Loading failure is
  fatal by contract.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image as PilImage


class ModelLoadError(RuntimeError):
    """The requested encoder cannot be loaded; callers must treat as fatal."""


@dataclass(frozen=True)
class TinyModel:
    """Offline deterministic featurizer; 64-dim shared space."""

    grid: int = 4
    hist_bins: int = 16

    @property
    def model_id(self) -> str:
        return "builtin:tiny"

    @property
    def dim(self) -> int:
        return self.grid * self.grid * 3 + self.hist_bins

    def encode_image(self, image: PilImage.Image) -> np.ndarray:
        rgb = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
        h, w, _ = rgb.shape
        g = self.grid
        cells = np.empty((g, g, 3))
        for i in range(g):
            r0, r1 = (i * h) // g, max(((i + 1) * h) // g, (i * h) // g + 1)
            for j in range(g):
                c0, c1 = (j * w) // g, max(((j + 1) * w) // g, (j * w) // g + 1)
                cells[i, j] = rgb[min(r0, h - 1) : min(r1, h), min(c0, w - 1) : min(c1, w)].mean(axis=(0, 1))
        luma = 0.27 * rgb[:, :, 0] + 0.67 * rgb[:, :, 1] + 0.06 * rgb[:, :, 2]
        hist, _ = np.histogram(luma, bins=self.hist_bins, range=(0.0, 1.0))
        hist = hist / luma.size
        return np.concatenate([cells.ravel(), hist])

    def encode_text(self, text: str) -> np.ndarray:
        out = np.zeros(self.dim)
        padded = f"  {text.lower()}  "
        for i in range(len(padded) - 2):
            trigram = padded[i : i + 3].encode("utf-8")
            digest = hashlib.sha256(trigram).digest()
            idx = int.from_bytes(digest[:4], "little") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            out[idx] += sign
        if not np.any(out):
            out[0] = 1.0
        return out


class SentenceTransformerModel:
    """Real encoder behind sentence-transformers; import and load lazily."""

    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(f"sentence-transformers unavailable: {exc}") from exc
        try:
            self._model = SentenceTransformer(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {name!r}: {exc}") from exc
        self._name = name

    @property
    def model_id(self) -> str:
        return f"clip:{self._name}"

    @property
    def dim(self) -> int:
        return int(self._model.get_sentence_embedding_dimension())

    def encode_image(self, image: PilImage.Image) -> np.ndarray:
        return np.asarray(self._model.encode([image.convert("RGB")])[0], dtype=np.float64)

    def encode_text(self, text: str) -> np.ndarray:
        return np.asarray(self._model.encode([text])[0], dtype=np.float64)


def load_model(model_id: str):
    scheme, _, rest = model_id.partition(":")
    if scheme == "builtin":
        if rest != "tiny":
            raise ModelLoadError(f"unknown builtin model {rest!r}; available: tiny")
        return TinyModel()
    if scheme == "clip":
        if not rest:
            raise ModelLoadError("clip: scheme needs a model name, e.g. clip:clip-ViT-B-32")
        return SentenceTransformerModel(rest)
    raise ModelLoadError(f"unknown model scheme {scheme!r}; use builtin:tiny or clip:<name>")
