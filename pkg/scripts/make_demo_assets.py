#!/usr/bin/env python3
"""Write seeded demo assets: encoder/detail weight files and a synthetic
low-light test frame, ready for the CLI (enhance/bench/serve)."""

import argparse
from pathlib import Path

import numpy as np

from lumafuse import Image, random_weights, save_ppm, save_weights


def synthetic_low_light(seed: int, h: int, w: int) -> Image:
    """Dim scene with an uneven illumination gradient and some structure."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    falloff = 0.08 + 0.22 * np.exp(-(((yy - h * 0.3) / (0.5 * h)) ** 2 + ((xx - w * 0.7) / (0.4 * w)) ** 2))
    texture = rng.uniform(0.0, 0.3, size=(h, w, 3))
    stripes = 0.08 * (np.sin(xx / 6.0)[:, :, None] > 0.5)
    arr = np.clip(falloff[:, :, None] * (0.6 + texture) + stripes, 0.0, 1.0)
    return Image(arr)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_assets")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--size", type=int, default=96, help="demo frame side length (>= 63)")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "encoder.nnw").write_bytes(save_weights(random_weights("encoder", args.seed)))
    (out / "detail.nnw").write_bytes(save_weights(random_weights("detail", args.seed + 1)))
    (out / "low_light.ppm").write_bytes(save_ppm(synthetic_low_light(args.seed + 2, args.size, args.size)))
    print(f"wrote encoder.nnw, detail.nnw, low_light.ppm to {out}/")
    print(f"try: lumafuse enhance {out}/low_light.ppm {out}/enhanced.ppm "
          f"--encoder {out}/encoder.nnw --detail {out}/detail.nnw")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
