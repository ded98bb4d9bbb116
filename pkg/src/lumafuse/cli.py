"""Operator CLI: enhance, metrics, fit-isp, refine-prompt, iterate, bench,
simulate, serve.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import latency as lat
from .errors import LumafuseError
from .filters import IspParams
from .image import load_ppm, save_ppm
from .metrics import CSV_HEADER, iqa_report
from .nn import enhance, load_weights
from .optim import (
    OptimizerConfig,
    fit_isp_params,
    generate_iterates,
    refine_prompt,
    trace_to_csv,
)
from .prompts import Margins, load_embeddings, save_embeddings
from .service import EnhanceServer


def _read_image(path: str):
    return load_ppm(Path(path).read_bytes())


def _read_weights(path: str, arch: str):
    return load_weights(Path(path).read_bytes(), arch)


def _opt_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        learning_rate=args.lr,
        max_iters=args.iters,
        tolerance=args.tolerance,
        seed=args.seed,
    )


def _add_opt_flags(p: argparse.ArgumentParser, default_lr: float) -> None:
    p.add_argument("--lr", type=float, default=default_lr, help="step size")
    p.add_argument("--iters", type=int, default=500, help="max iterations")
    p.add_argument("--tolerance", type=float, default=1e-7, help="stop when improvement drops below")
    p.add_argument("--seed", type=int, default=0)


def _cmd_enhance(args) -> int:
    img = _read_image(args.input)
    enc = _read_weights(args.encoder, "encoder")
    det = _read_weights(args.detail, "detail")
    out = enhance(img, enc, det, args.detail_input)
    Path(args.output).write_bytes(save_ppm(out))
    return 0


def _cmd_metrics(args) -> int:
    a = _read_image(args.reference)
    b = _read_image(args.distorted)
    name = args.name or f"{Path(args.reference).stem}-vs-{Path(args.distorted).stem}"
    report = iqa_report(a, b)
    if args.kv:
        print(report.as_kv(name))
    else:
        print(CSV_HEADER)
        print(report.as_csv_row(name))
    return 0


def _cmd_fit_isp(args) -> int:
    img = _read_image(args.input)
    ref = _read_image(args.reference)
    fit = fit_isp_params(img, ref, _opt_config(args))
    Path(args.params_out).write_text(fit.params.to_text())
    if args.trace:
        Path(args.trace).write_text(trace_to_csv(fit.trace))
    print(f"mse={fit.mse!r} iterations={fit.iterations}")
    return 0


def _cmd_refine_prompt(args) -> int:
    table = load_embeddings(Path(args.embeddings).read_bytes())

    def pick(name: str):
        if name not in table:
            raise LumafuseError(f"no embedding named {name!r} in {args.embeddings}")
        return table[name]

    series_names = [s for s in args.series.split(",") if s]
    if len(series_names) != 5:
        raise LumafuseError(f"--series needs 5 comma-separated names, got {len(series_names)}")
    result = refine_prompt(
        pick(args.t_tt),
        pick(args.t_neg),
        pick(args.e_t),
        pick(args.e_f),
        [pick(n) for n in series_names],
        Margins(args.p0, args.p1, args.p2),
        _opt_config(args),
        mode=args.mode,
    )
    out_name = args.out_name or args.t_tt
    Path(args.output).write_bytes(save_embeddings({out_name: result.t_tt}))
    if args.trace:
        Path(args.trace).write_text(trace_to_csv(result.trace))
    print(f"loss={result.loss!r} initial={result.initial_loss!r} iterations={result.iterations}")
    return 0


def _cmd_iterate(args) -> int:
    img = _read_image(args.input)
    params = IspParams.from_text(Path(args.params).read_text())
    series = generate_iterates(img, params)
    prefix = Path(args.out_prefix)
    names = [f"{prefix}_en{i}.ppm" for i in range(4)] + [f"{prefix}_en.ppm"]
    for path, image in zip(names, series.all_images_weak_to_strong()):
        Path(path).write_bytes(save_ppm(image))
    print("\n".join(names))
    return 0


def _cmd_bench(args) -> int:
    enc = _read_weights(args.encoder, "encoder")
    det = _read_weights(args.detail, "detail")
    images = [_read_image(p) for p in args.images]
    report = lat.bench_pipeline(enc, det, images, repetitions=args.reps)
    print(report.summary())
    return 0


def _resolve_model(name_or_path: str) -> lat.LatencyModel:
    if name_or_path in lat.NAMED_MODELS:
        return lat.NAMED_MODELS[name_or_path]
    return lat.LatencyModel.from_text(Path(name_or_path).read_text())


def _cmd_simulate(args) -> int:
    model = _resolve_model(args.config)
    counts = range(0, args.max_images + 1, args.step)
    csv_text = lat.curve_to_csv(lat.latency_curve(model, counts))
    if args.output:
        Path(args.output).write_text(csv_text)
    else:
        print(csv_text, end="")
    return 0


def _cmd_serve(args) -> int:
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise LumafuseError(f"--bind must be host:port, got {args.bind!r}")
    enc = _read_weights(args.encoder, "encoder")
    det = _read_weights(args.detail, "detail")
    server = EnhanceServer(
        host, int(port), enc, det, max_bytes=args.max_bytes, detail_input=args.detail_input
    )
    print(f"serving on {server.address[0]}:{server.address[1]}", file=sys.stderr)
    server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lumafuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance one PPM image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--encoder", required=True, help="encoder weight file (NNW1)")
    p.add_argument("--detail", required=True, help="detail network weight file (NNW1)")
    p.add_argument("--detail-input", choices=("original", "enhanced"), default="original")
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("metrics", help="PSNR/SSIM/VIF between two PPMs")
    p.add_argument("reference")
    p.add_argument("distorted")
    p.add_argument("--name", default=None)
    p.add_argument("--kv", action="store_true", help="emit key=value record instead of CSV")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("fit-isp", help="fit filter parameters to a reference by MSE")
    p.add_argument("input")
    p.add_argument("reference")
    p.add_argument("--params-out", required=True)
    p.add_argument("--trace", default=None, help="write iter,loss CSV here")
    _add_opt_flags(p, default_lr=2.0)
    p.set_defaults(func=_cmd_fit_isp)

    p = sub.add_parser("refine-prompt", help="refine the positive cue on an embedding file")
    p.add_argument("--embeddings", required=True, help="EMB1 file")
    p.add_argument("--t-tt", required=True, help="name of the cue to refine")
    p.add_argument("--t-neg", required=True)
    p.add_argument("--e-t", required=True, help="normal-light image embedding name")
    p.add_argument("--e-f", required=True, help="low-light image embedding name")
    p.add_argument("--series", required=True, help="5 names, weakest to strongest, comma-separated")
    p.add_argument("--output", required=True, help="EMB1 file for the refined cue")
    p.add_argument("--out-name", default=None)
    p.add_argument("--trace", default=None)
    p.add_argument("--mode", choices=("literal", "text_consistent"), default="literal")
    p.add_argument("--p0", type=float, default=0.9)
    p.add_argument("--p1", type=float, default=0.2)
    p.add_argument("--p2", type=float, default=0.3)
    _add_opt_flags(p, default_lr=0.05)
    p.set_defaults(func=_cmd_refine_prompt)

    p = sub.add_parser("iterate", help="write the 4 partial iterates plus the final image")
    p.add_argument("input")
    p.add_argument("params", help="parameter file (key=value)")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=_cmd_iterate)

    p = sub.add_parser("bench", help="benchmark the pipeline and simulated deployments")
    p.add_argument("images", nargs="+")
    p.add_argument("--encoder", required=True)
    p.add_argument("--detail", required=True)
    p.add_argument("--reps", type=int, default=3)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("simulate", help="latency curve CSV for a config")
    p.add_argument("--config", required=True, help="'cloud', 'edge', or a config file path")
    p.add_argument("--max-images", type=int, default=40)
    p.add_argument("--step", type=int, default=5)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the framed-stream enhancement service")
    p.add_argument("--bind", default="127.0.0.1:7355")
    p.add_argument("--encoder", required=True)
    p.add_argument("--detail", required=True)
    p.add_argument("--max-bytes", type=int, default=32 * 1024 * 1024)
    p.add_argument("--detail-input", choices=("original", "enhanced"), default="original")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (LumafuseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
