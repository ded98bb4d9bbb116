"""Batch export of image and prompt embeddings to an EMB1 file."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image as PilImage, UnidentifiedImageError

from .emb1 import write_table
from .models import load_model

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".ppm", ".bmp", ".tif", ".tiff", ".webp")


@dataclass(frozen=True)
class ExportManifest:
    """What to embed and where to write it.

    Row names are image file stems and verbatim prompt strings; they must be
    unique across both groups. At least one entry is required.
    """

    image_paths: tuple[Path, ...]
    prompts: tuple[str, ...]
    output_path: Path
    model_id: str = "builtin:tiny"

    def __post_init__(self):
        if not self.image_paths and not self.prompts:
            raise ValueError("manifest is empty: need at least one image or prompt")
        names = [p.stem for p in self.image_paths] + list(self.prompts)
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate row names: {', '.join(dupes)}")


@dataclass
class ExportResult:
    output_path: Path
    sidecar_path: Path
    rows: int
    dim: int
    skipped: list[str] = field(default_factory=list)


def export(manifest: ExportManifest) -> ExportResult:
    """Run the encoder over every manifest entry and write the EMB1 table.

    Unreadable images are skipped with a warning on stderr and reported in
    the result; a model that cannot load raises (fatal). The sidecar
    ``<output>.meta`` records the model id for provenance.
    """
    model = load_model(manifest.model_id)
    rows = []
    skipped: list[str] = []
    for path in manifest.image_paths:
        try:
            with PilImage.open(path) as img:
                values = model.encode_image(img)
        except (OSError, UnidentifiedImageError) as exc:
            print(f"warning: skipping unreadable image {path}: {exc}", file=sys.stderr)
            skipped.append(str(path))
            continue
        rows.append((path.stem, values))
    for prompt in manifest.prompts:
        rows.append((prompt, model.encode_text(prompt)))
    if not rows:
        raise ValueError("nothing to export: every manifest entry failed")
    data = write_table(rows)
    manifest.output_path.write_bytes(data)
    sidecar = manifest.output_path.with_name(manifest.output_path.name + ".meta")
    sidecar.write_text(
        f"model_id={model.model_id}\nrows={len(rows)}\ndim={model.dim}\n"
        f"skipped={len(skipped)}\n"
    )
    return ExportResult(manifest.output_path, sidecar, len(rows), model.dim, skipped)


def collect_images(directory: Path) -> tuple[Path, ...]:
    """Image files directly inside ``directory``, sorted by name."""
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    return tuple(
        sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    )
