#!/usr/bin/env python3
"""Edge-vs-cloud transmission latency experiment.

Writes the simulated latency curves for both shipped calibrations and prints
the 40-image calibration points. Optionally benchmarks the real pipeline on
seeded weights to compare effective edge/cloud throughput.
"""

import argparse
from pathlib import Path

from lumafuse import (
    CLOUD_MODEL,
    EDGE_MODEL,
    bench_pipeline,
    latency_curve,
    random_weights,
    simulate_latency,
)
from lumafuse.latency import curve_to_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="latency_results")
    parser.add_argument("--max-images", type=int, default=40)
    parser.add_argument("--step", type=int, default=5)
    parser.add_argument("--bench", action="store_true", help="also time the pipeline on seeded weights")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = range(0, args.max_images + 1, args.step)
    (out / "edge_curve.csv").write_text(curve_to_csv(latency_curve(EDGE_MODEL, counts)))
    (out / "cloud_curve.csv").write_text(curve_to_csv(latency_curve(CLOUD_MODEL, counts)))
    print(f"calibration at 40 images: cloud {simulate_latency(CLOUD_MODEL, 40):.1f} ms, "
          f"edge {simulate_latency(EDGE_MODEL, 40):.1f} ms")
    print(f"curves written to {out}/edge_curve.csv and {out}/cloud_curve.csv")

    if args.bench:
        from make_demo_assets import synthetic_low_light

        enc = random_weights("encoder", 7)
        det = random_weights("detail", 8)
        frames = [synthetic_low_light(s, 63, 63) for s in range(4)]
        report = bench_pipeline(enc, det, frames, repetitions=2)
        print(report.summary())
        print("simulated deployment ordering: "
              f"edge {report.edge_fps:.3f} fps vs cloud {report.cloud_fps:.3f} fps")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
