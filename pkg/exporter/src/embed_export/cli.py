"""Command line for the embedding exporter.

Exit codes: 0 all rows exported, 3 partial (some images skipped),
2 usage error, 1 fatal error (model load failure, empty manifest, I/O).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exporter import ExportManifest, collect_images, export
from .models import ModelLoadError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-export", description=__doc__)
    parser.add_argument("--images", required=True, help="directory of images (stems become row names)")
    parser.add_argument("--prompts", required=True, help="text file, one prompt per line")
    parser.add_argument("--output", required=True, help="EMB1 output path")
    parser.add_argument("--model", default="builtin:tiny", help="builtin:tiny or clip:<name>")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        prompts = tuple(
            line.strip() for line in Path(args.prompts).read_text().splitlines() if line.strip()
        )
        manifest = ExportManifest(
            image_paths=collect_images(Path(args.images)),
            prompts=prompts,
            output_path=Path(args.output),
            model_id=args.model,
        )
        result = export(manifest)
    except (ModelLoadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {result.rows} rows (dim {result.dim}) to {result.output_path}; "
        f"model id recorded in {result.sidecar_path}"
    )
    if result.skipped:
        print(f"skipped {len(result.skipped)} unreadable image(s)", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
