"""Independent reference implementations used as test oracles.

Everything here is written as naive scalar loops (python floats, no
vectorization) so it shares no code path with the package. Accumulation
orders follow the documented contracts (bias first, then channel-major
kernel taps; row-major kernel construction) so exact-match assertions are
meaningful.
"""

from __future__ import annotations

import math

import numpy as np

LUMA = (0.27, 0.67, 0.06)


def reflect(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * n - 2
    j = i % period
    return j if j < n else period - j


def gaussian_kernel_loops(size: int, sigma: float) -> list[list[float]]:
    half = size // 2
    rows = []
    total = 0.0
    for dy in range(-half, half + 1):
        row = []
        for dx in range(-half, half + 1):
            w = math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
            row.append(w)
            total += w
        rows.append(row)
    return [[w / total for w in row] for row in rows]


def blur_loops(arr: np.ndarray, kernel: list[list[float]]) -> np.ndarray:
    """Reflect-padded 2-D convolution of an (H, W) or (H, W, C) array."""
    size = len(kernel)
    half = size // 2
    squeeze = arr.ndim == 2
    data = arr[:, :, None] if squeeze else arr
    h, w, ch = data.shape
    cells = data.tolist()
    ymap = [[reflect(y + k - half, h) for k in range(size)] for y in range(h)]
    xmap = [[reflect(x + k - half, w) for k in range(size)] for x in range(w)]
    out = np.empty((h, w, ch))
    for y in range(h):
        yrow = ymap[y]
        for x in range(w):
            xrow = xmap[x]
            for c in range(ch):
                s = 0.0
                for ky in range(size):
                    row = cells[yrow[ky]]
                    krow = kernel[ky]
                    for kx in range(size):
                        s += krow[kx] * row[xrow[kx]][c]
                out[y, x, c] = s
    return out[:, :, 0] if squeeze else out


def conv2d_loops(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    stride: int = 1,
    padding: int = 1,
) -> np.ndarray:
    """Zero-padded cross-correlation, one output pixel at a time."""
    in_ch, h, wd = x.shape
    out_ch, _, kh, kw = w.shape
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wd + 2 * padding - kw) // stride + 1
    padded = np.zeros((in_ch, h + 2 * padding, wd + 2 * padding))
    padded[:, padding : padding + h, padding : padding + wd] = x
    xp = padded.tolist()
    wl = np.asarray(w, dtype=np.float64).tolist()
    bl = [float(v) for v in b]
    out = np.empty((out_ch, out_h, out_w))
    for o in range(out_ch):
        for oy in range(out_h):
            for ox in range(out_w):
                s = bl[o]
                for c in range(in_ch):
                    for ky in range(kh):
                        row = xp[c][oy * stride + ky]
                        wrow = wl[o][c][ky]
                        for kx in range(kw):
                            s += wrow[kx] * row[ox * stride + kx]
                out[o, oy, ox] = s
    return out


def max_pool_loops(x: np.ndarray, kernel: int = 3, stride: int = 2) -> np.ndarray:
    ch, h, w = x.shape
    out_h = (h - kernel) // stride + 1
    out_w = (w - kernel) // stride + 1
    out = np.empty((ch, out_h, out_w))
    for c in range(ch):
        for oy in range(out_h):
            for ox in range(out_w):
                best = -math.inf
                for ky in range(kernel):
                    for kx in range(kernel):
                        v = float(x[c, oy * stride + ky, ox * stride + kx])
                        if v > best:
                            best = v
                out[c, oy, ox] = best
    return out


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)


def reference_pipeline(arr: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
    """Straight-line scalar evaluation of the four-filter chain.

    params = (w_r, w_g, w_b, gamma, alpha, lam); per-stage clamp to [0, 1];
    luminance floor 1e-6 for the contrast singular point; 5x5 sigma-1
    Gaussian with reflect padding for the sharpen blur.
    """
    w_r, w_g, w_b, gamma, alpha, lam = params
    h, w, _ = arr.shape
    y1 = np.empty_like(arr)
    for y in range(h):
        for x in range(w):
            y1[y, x, 0] = _clamp01(float(arr[y, x, 0]) * w_r)
            y1[y, x, 1] = _clamp01(float(arr[y, x, 1]) * w_g)
            y1[y, x, 2] = _clamp01(float(arr[y, x, 2]) * w_b)
    y2 = np.empty_like(arr)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                y2[y, x, c] = _clamp01(float(y1[y, x, c]) ** gamma)
    y3 = np.empty_like(arr)
    for y in range(h):
        for x in range(w):
            r, g, b = (float(y2[y, x, c]) for c in range(3))
            lum = LUMA[0] * r + LUMA[1] * g + LUMA[2] * b
            enl = 0.5 * (1.0 - math.cos(math.pi * lum))
            for c, v in enumerate((r, g, b)):
                en = 0.0 if lum < 1e-6 else v * (enl / lum)
                y3[y, x, c] = _clamp01(alpha * en + (1.0 - alpha) * v)
    kernel = gaussian_kernel_loops(5, 1.0)
    blurred = blur_loops(y3, kernel)
    y4 = np.empty_like(arr)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                v = float(y3[y, x, c])
                y4[y, x, c] = _clamp01(v + lam * (v - float(blurred[y, x, c])))
    return y4


def luma_loops(img_arr: np.ndarray) -> np.ndarray:
    h, w, _ = img_arr.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = (
                LUMA[0] * float(img_arr[y, x, 0])
                + LUMA[1] * float(img_arr[y, x, 1])
                + LUMA[2] * float(img_arr[y, x, 2])
            )
    return out


def vif_loops(ref_arr: np.ndarray, dist_arr: np.ndarray) -> float:
    """Naive pixel-domain multi-scale VIF over 4 scales.

    Same contract as the library (9x9 sigma 1.8 Gaussian windows, reflect
    padding for both windowing and the inter-scale blur, 2x decimation,
    noise floor 2/255**2) but built entirely from scalar loops.
    """
    kernel = gaussian_kernel_loops(9, 9 / 5.0)
    sigma_nsq = 2.0 / (255.0**2)
    ref = luma_loops(ref_arr)
    dist = luma_loops(dist_arr)
    num = 0.0
    den = 0.0
    for scale in range(4):
        if scale > 0:
            ref = blur_loops(ref, kernel)[::2, ::2]
            dist = blur_loops(dist, kernel)[::2, ::2]
        mu_x = blur_loops(ref, kernel)
        mu_y = blur_loops(dist, kernel)
        exx = blur_loops(ref * ref, kernel)
        eyy = blur_loops(dist * dist, kernel)
        exy = blur_loops(ref * dist, kernel)
        h, w = ref.shape
        for y in range(h):
            for x in range(w):
                mx = float(mu_x[y, x])
                my = float(mu_y[y, x])
                sx = max(float(exx[y, x]) - mx * mx, 0.0)
                sy = max(float(eyy[y, x]) - my * my, 0.0)
                sxy = float(exy[y, x]) - mx * my
                g = sxy / (sx + 1e-10)
                sv = sy - g * sxy
                num += math.log2(1.0 + g * g * sx / (sv + sigma_nsq))
                den += math.log2(1.0 + sx / sigma_nsq)
    return 1.0 if den == 0.0 else num / den


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> float:
    """Entrywise |a - n| / max(|n|, floor), maximized."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(n), floor)))


def fd_gradient(fn, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (fn(x + step) - fn(x - step)) / (2.0 * h)
    return grad


def _sigmoid_scalar(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


PARAM_RANGES = ((0.5, 2.0), (0.5, 2.0), (0.5, 2.0), (0.3, 3.0), (0.0, 1.0), (0.0, 5.0))


def encoder_forward_loops(img_arr: np.ndarray, tensors: dict[str, np.ndarray]) -> list[float]:
    """Naive forward pass of the five-stage encoder; returns the six params."""
    x = np.moveaxis(img_arr.astype(np.float64), 2, 0)
    for i in range(1, 6):
        w = tensors[f"conv{i}.weight"].astype(np.float64)
        b = tensors[f"conv{i}.bias"].astype(np.float64)
        x = conv2d_loops(x, w, b)
        x = max_pool_loops(x)
    feat = [max(float(v) for v in x[c].ravel()) for c in range(x.shape[0])]
    fw = tensors["fc.weight"].astype(np.float64).tolist()
    fb = tensors["fc.bias"].astype(np.float64).tolist()
    out = []
    for j in range(6):
        s = fb[j]
        for k, f in enumerate(feat):
            s += fw[j][k] * f
        lo, hi = PARAM_RANGES[j]
        out.append(lo + _sigmoid_scalar(s) * (hi - lo))
    return out


def _bn_relu_loops(x: np.ndarray, tensors: dict[str, np.ndarray], prefix: str) -> np.ndarray:
    gamma = tensors[f"{prefix}.gamma"].astype(np.float64)
    beta = tensors[f"{prefix}.beta"].astype(np.float64)
    mean = tensors[f"{prefix}.mean"].astype(np.float64)
    var = tensors[f"{prefix}.var"].astype(np.float64)
    out = np.empty_like(x)
    for c in range(x.shape[0]):
        denom = math.sqrt(float(var[c]) + 1e-5)
        g, be, m = float(gamma[c]), float(beta[c]), float(mean[c])
        for y in range(x.shape[1]):
            for xx in range(x.shape[2]):
                v = g * (float(x[c, y, xx]) - m) / denom + be
                out[c, y, xx] = v if v > 0.0 else 0.0
    return out


def detail_forward_loops(img_arr: np.ndarray, tensors: dict[str, np.ndarray]) -> np.ndarray:
    """Naive forward pass of the detail network; (H, W, 3) residual."""

    def conv(x, prefix):
        return conv2d_loops(
            x,
            tensors[f"{prefix}.weight"].astype(np.float64),
            tensors[f"{prefix}.bias"].astype(np.float64),
        )

    x = np.moveaxis(img_arr.astype(np.float64), 2, 0)
    x = _bn_relu_loops(conv(x, "conv_in"), tensors, "bn_in")
    for k in range(1, 4):
        h = _bn_relu_loops(conv(x, f"res{k}.conv1"), tensors, f"res{k}.bn1")
        h = _bn_relu_loops(conv(h, f"res{k}.conv2"), tensors, f"res{k}.bn2")
        x = x + h
    x = conv(x, "conv_out")
    out = np.empty_like(x)
    for c in range(x.shape[0]):
        for y in range(x.shape[1]):
            for xx in range(x.shape[2]):
                out[c, y, xx] = math.tanh(float(x[c, y, xx]))
    return np.moveaxis(out, 0, 2)
