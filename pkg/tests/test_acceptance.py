"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them inline). Tolerances are pinned
here and nowhere else."""

import math
import socket
import struct
import time

import numpy as np

from lumafuse import (
    CLOUD_MODEL,
    EDGE_MODEL,
    Embedding,
    EnhanceServer,
    Image,
    IspParams,
    Margins,
    OptimizerConfig,
    PromptPair,
    apply_pipeline,
    bench_pipeline,
    contrast,
    conv2d,
    enhance,
    fit_isp_params,
    gamma_correct,
    gaussian_blur,
    luminance,
    pipeline_jacobian,
    psnr,
    random_weights,
    request_enhance,
    save_ppm,
    sharpen,
    similarity_g,
    simulate_latency,
    ssim,
    vif,
    white_balance,
)
from lumafuse.cli import main as cli_main
from lumafuse.metrics import SSIM_C1
from lumafuse.nn import ARCHITECTURES, WeightStore, detail_forward
from lumafuse.prompts import cw_loss_and_grad, li_mean_loss_and_grads
from lumafuse.service import recv_frame, send_frame

import oracles
from conftest import seeded_image, smooth_image


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert ok, f"{name}{suffix}"


def interior_case(seed: int):
    rng = np.random.default_rng(seed)
    img = smooth_image(seed, 8, 8)
    p = IspParams(
        rng.uniform(0.8, 1.2),
        rng.uniform(0.8, 1.2),
        rng.uniform(0.8, 1.2),
        rng.uniform(0.6, 1.6),
        rng.uniform(0.2, 0.8),
        rng.uniform(0.2, 0.8),
    )
    return img, p


def fd_jacobian(img: Image, p: IspParams, h: float = 1e-4) -> np.ndarray:
    base = p.as_array()
    out = []
    for i in range(6):
        plus, minus = base.copy(), base.copy()
        plus[i] += h
        minus[i] -= h
        f_plus = apply_pipeline(img, IspParams.from_array(plus)).data
        f_minus = apply_pipeline(img, IspParams.from_array(minus)).data
        out.append((f_plus - f_minus) / (2 * h))
    return np.stack(out)


def test_gradient_fidelity():
    start = time.perf_counter()
    worst_pipeline = 0.0
    for seed in range(20):
        img, p = interior_case(seed)
        analytic = pipeline_jacobian(img, p).stacked()
        numeric = fd_jacobian(img, p)
        worst_pipeline = max(worst_pipeline, oracles.max_rel_err(analytic, numeric, floor=1e-2))

    rng = np.random.default_rng(999)
    dim = 12
    t_pos = Embedding.unit(rng.standard_normal(dim)).values
    t_neg = Embedding.unit(rng.standard_normal(dim)).values
    normals = np.stack([Embedding.unit(rng.standard_normal(dim)).values for _ in range(5)])
    lows = np.stack([Embedding.unit(rng.standard_normal(dim)).values for _ in range(5)])
    _, g_pos, g_neg = li_mean_loss_and_grads(t_pos, t_neg, normals, lows)
    fd_pos = oracles.fd_gradient(lambda v: li_mean_loss_and_grads(v, t_neg, normals, lows)[0], t_pos, 1e-5)
    fd_neg = oracles.fd_gradient(lambda v: li_mean_loss_and_grads(t_pos, v, normals, lows)[0], t_neg, 1e-5)
    worst_li = max(
        oracles.max_rel_err(g_pos, fd_pos, floor=1e-3),
        oracles.max_rel_err(g_neg, fd_neg, floor=1e-3),
    )

    t = Embedding.unit(rng.standard_normal(dim)).values
    e_t = Embedding.unit(rng.standard_normal(dim)).values
    e_f = Embedding.unit(rng.standard_normal(dim)).values
    series = np.stack([Embedding.unit(rng.standard_normal(dim)).values for _ in range(5)])
    _, grad = cw_loss_and_grad(t, t_neg, e_t, e_f, series)
    fd_cw = oracles.fd_gradient(lambda v: cw_loss_and_grad(v, t_neg, e_t, e_f, series)[0], t, 1e-5)
    worst_cw = oracles.max_rel_err(grad, fd_cw, floor=1e-3)

    elapsed = time.perf_counter() - start
    ok = worst_pipeline <= 1e-3 and worst_li <= 1e-4 and worst_cw <= 1e-4 and elapsed < 10.0
    report(
        "gradient-fidelity",
        ok,
        f"pipeline={worst_pipeline:.2e} li={worst_li:.2e} cw={worst_cw:.2e} t={elapsed:.2f}s",
    )


def test_identity_suite():
    img = seeded_image(100, 16, 16)
    checks = [
        np.array_equal(apply_pipeline(img, IspParams.identity()).data, img.data),
        np.array_equal(white_balance(img, 1.0, 1.0, 1.0).data, img.data),
        np.array_equal(gamma_correct(img, 1.0).data, img.data),
        np.array_equal(contrast(img, 0.0).data, img.data),
        np.array_equal(sharpen(img, 0.0).data, img.data),
    ]
    zero_detail = WeightStore(
        "detail", {k: np.zeros(s, dtype=np.float32) for k, s in ARCHITECTURES["detail"].items()}
    )
    residual = detail_forward(img, zero_detail)
    checks.append(bool(np.all(residual == 0.0)))
    report("identity-suite", all(checks), f"{sum(checks)}/6 identities hold")


def test_oracle_equivalence():
    kernel = oracles.gaussian_kernel_loops(5, 1.0)
    conv_ok = 0
    blur_ok = 0
    for seed in range(50):
        rng = np.random.default_rng(seed + 3000)
        c, o = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        h, w = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        x = rng.normal(size=(c, h, w))
        k = rng.normal(size=(o, c, 3, 3))
        b = rng.normal(size=o)
        if np.array_equal(conv2d(x, k, b), oracles.conv2d_loops(x, k, b)):
            conv_ok += 1
        arr = rng.uniform(0, 1, size=(int(rng.integers(1, 9)), int(rng.integers(1, 9))))
        if np.array_equal(gaussian_blur(arr), oracles.blur_loops(arr, kernel)):
            blur_ok += 1
    report("oracle-equivalence", conv_ok == 50 and blur_ok == 50, f"conv {conv_ok}/50, blur {blur_ok}/50")


def test_loss_arithmetic():
    e = Embedding.unit(np.random.default_rng(0).standard_normal(8))
    t = Embedding.unit(np.random.default_rng(1).standard_normal(8))
    g_equal = similarity_g(e, PromptPair(t, t))

    from lumafuse import loss_cw

    all_equal = loss_cw(0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5)
    # margin-satisfying construction needs relaxed margins: four consecutive
    # gaps of 0.3 cannot fit in [0, 1] at the defaults
    m = Margins(0.5, 0.1, 0.2)
    satisfied = loss_cw(0.99, 0.01, 0.9, 0.65, 0.45, 0.25, 0.05, m)
    ok = g_equal == 0.5 and abs(all_equal - 2.3) <= 1e-12 and satisfied == 0.0
    report("loss-arithmetic", ok, f"g={g_equal} all_equal={all_equal} satisfied={satisfied}")


def fit_image(seed: int, h: int = 24, w: int = 24) -> Image:
    rng = np.random.default_rng(seed)
    arr = rng.uniform(0.15, 0.8, size=(h, w, 3))
    arr = 0.5 * arr + 0.5 * gaussian_blur(arr)
    return Image(np.clip(arr, 0, 1))


def test_inverse_recovery():
    rng = np.random.default_rng(1000)
    results = []
    for seed in range(5):
        img = fit_image(seed)
        p_star = IspParams(
            rng.uniform(0.8, 1.4),
            rng.uniform(0.8, 1.4),
            rng.uniform(0.7, 1.2),
            rng.uniform(0.55, 1.5),
            rng.uniform(0.2, 0.8),
            rng.uniform(0.3, 1.5),
        )
        ref = apply_pipeline(img, p_star)
        fit = fit_isp_params(img, ref, OptimizerConfig(learning_rate=2.0, max_iters=500))
        results.append((fit.mse, fit.iterations))
    ok = all(mse < 1e-4 and iters <= 500 for mse, iters in results)
    report("inverse-recovery", ok, " ".join(f"{mse:.1e}@{it}" for mse, it in results))


def test_metric_sanity():
    x = Image(np.random.default_rng(60).uniform(0.1, 0.9, size=(64, 64, 3)))
    checks = []
    checks.append(psnr(x, x) == 100.0)
    checks.append(ssim(x, x) == 1.0)
    checks.append(abs(vif(x, x) - 1.0) <= 1e-6)
    noise = np.random.default_rng(61).normal(size=x.data.shape)
    vifs = [vif(x, Image(np.clip(x.data + s * noise, 0, 1))) for s in (0.01, 0.05, 0.1)]
    checks.append(vifs[0] > vifs[1] > vifs[2])
    a, b = 0.5, 0.25
    const = ssim(Image(np.full((16, 16, 3), a)), Image(np.full((16, 16, 3), b)))
    closed_form = (2 * a * b + SSIM_C1) / (a * a + b * b + SSIM_C1)
    checks.append(abs(const - closed_form) <= 1e-6)
    report("metric-sanity", all(checks), f"vif(x,x)={vif(x, x):.8f} noise={['%.3f' % v for v in vifs]}")


def test_latency_calibration():
    cloud_ms = simulate_latency(CLOUD_MODEL, 40)
    edge_ms = simulate_latency(EDGE_MODEL, 40)
    cal_ok = abs(cloud_ms - 248.4) / 248.4 <= 0.01 and abs(edge_ms - 9.7) / 9.7 <= 0.01

    enc = random_weights("encoder", 200)
    det = random_weights("detail", 201)
    rep = bench_pipeline(enc, det, [seeded_image(202, 63, 63)], repetitions=1)
    ordering_ok = rep.edge_fps > rep.cloud_fps
    print(
        "NOTE: absolute FPS figures of the published deployment table are NOT "
        "reproducible here (hardware unspecified); only the edge > cloud ordering is checked."
    )
    report(
        "latency-calibration",
        cal_ok and ordering_ok,
        f"cloud={cloud_ms:.2f}ms edge={edge_ms:.2f}ms edge_fps={rep.edge_fps:.2f} cloud_fps={rep.cloud_fps:.2f}",
    )


def test_end_to_end_smoke(tmp_path, capsys):
    print(
        "NOTE: published absolute IQA scores (PSNR 16.35 / SSIM 0.595 / VIF 0.6770 "
        "class of results) are NOT reproducible at desk scale: they need trained "
        "weights and the source datasets. Substituted by property suites plus this smoke test."
    )
    rng = np.random.default_rng(300)
    low = Image(rng.uniform(0.0, 0.25, size=(64, 64, 3)))
    enc = random_weights("encoder", 301)
    det = random_weights("detail", 302)
    out = enhance(low, enc, det)
    valid = out.data.min() >= 0.0 and out.data.max() <= 1.0
    lum_shift = abs(float(luminance(out).mean()) - float(luminance(low).mean()))

    in_path = tmp_path / "in.ppm"
    out_path = tmp_path / "out.ppm"
    in_path.write_bytes(save_ppm(low))
    out_path.write_bytes(save_ppm(out))
    code = cli_main(["metrics", str(in_path), str(out_path)])
    captured = capsys.readouterr().out.strip().splitlines()
    csv_ok = (
        code == 0
        and captured[-2] == "name,psnr,ssim,vif"
        and len(captured[-1].split(",")) == 4
        and all(math.isfinite(float(v)) for v in captured[-1].split(",")[1:])
    )
    with capsys.disabled():
        report(
            "iqa-smoke-substitute",
            valid and lum_shift > 1e-6 and csv_ok,
            f"lum_shift={lum_shift:.4f} csv_row={captured[-1]!r}",
        )


def test_service_robustness():
    enc = random_weights("encoder", 400)
    det = random_weights("detail", 401)
    server = EnhanceServer("127.0.0.1", 0, enc, det, max_bytes=1024 * 1024, workers=4)
    server.start()
    host, port = server.address
    rng = np.random.default_rng(402)
    try:
        for i in range(1000):
            mode = i % 4
            try:
                with socket.create_connection((host, port), timeout=10) as conn:
                    if mode == 0:
                        send_frame(conn, rng.bytes(int(rng.integers(1, 256))))
                        recv_frame(conn)
                    elif mode == 1:
                        conn.sendall(struct.pack(">I", 0))
                        recv_frame(conn)
                    elif mode == 2:
                        # declared length larger than what we send, then hang up
                        conn.sendall(struct.pack(">I", 1024) + rng.bytes(int(rng.integers(0, 64))))
                    else:
                        conn.sendall(rng.bytes(int(rng.integers(1, 4))))
            except (ConnectionError, OSError) as exc:  # server must never refuse
                report("service-robustness", False, f"frame {i}: {exc}")

        payload = save_ppm(seeded_image(403, 63, 63))
        first = request_enhance(host, port, payload)
        second = request_enhance(host, port, payload)
        ok = first[0] > 0 and first == second
        report("service-robustness", ok, "1000 fuzzed frames, round-trips bit-identical")
    finally:
        server.stop()
