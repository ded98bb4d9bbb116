"""Differentiable ISP filter chain: white balance, gamma, contrast, sharpen.

Every filter maps a valid Image to a valid Image (per-stage clamp to [0, 1])
and the composed pipeline exposes analytic partial derivatives of each output
pixel with respect to all six hyperparameters, so the chain can be fitted by
gradient descent. At clamped pixels the derivative is 0 (subgradient
convention). apply_pipeline at identity parameters is a bit-exact identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .image import LUMA_B, LUMA_G, LUMA_R, Image

W_RANGE = (0.5, 2.0)
GAMMA_RANGE = (0.3, 3.0)
ALPHA_RANGE = (0.0, 1.0)
LAMBDA_RANGE = (0.0, 5.0)

PARAM_NAMES = ("w_r", "w_g", "w_b", "gamma", "alpha", "lambda")
PARAM_RANGES = (W_RANGE, W_RANGE, W_RANGE, GAMMA_RANGE, ALPHA_RANGE, LAMBDA_RANGE)

# Luminance below this level uses the analytic limit En -> 0.
_LUM_FLOOR = 1e-6

BLUR_KERNEL_SIZE = 5
BLUR_SIGMA = 1.0


def _check_range(name: str, value: float, lo: float, hi: float) -> None:
    if not math.isfinite(value) or not (lo <= value <= hi):
        raise ParameterError(f"{name}={value!r} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class IspParams:
    """The six filter hyperparameters. ``lam`` serializes as 'lambda'."""

    w_r: float = 1.0
    w_g: float = 1.0
    w_b: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        for field, name, (lo, hi) in zip(
            ("w_r", "w_g", "w_b", "gamma", "alpha", "lam"), PARAM_NAMES, PARAM_RANGES
        ):
            value = float(getattr(self, field))
            _check_range(name, value, lo, hi)
            object.__setattr__(self, field, value)

    @classmethod
    def identity(cls) -> "IspParams":
        return cls(1.0, 1.0, 1.0, 1.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w_r, self.w_g, self.w_b, self.gamma, self.alpha, self.lam])

    @classmethod
    def from_array(cls, values) -> "IspParams":
        v = [float(x) for x in values]
        if len(v) != 6:
            raise ParameterError(f"expected 6 parameter values, got {len(v)}")
        return cls(*v)

    def to_text(self) -> str:
        values = (self.w_r, self.w_g, self.w_b, self.gamma, self.alpha, self.lam)
        return "".join(f"{name}={value!r}\n" for name, value in zip(PARAM_NAMES, values))

    @classmethod
    def from_text(cls, text: str) -> "IspParams":
        values: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ParameterError(f"line {lineno}: expected key=value, got {raw!r}")
            key = key.strip()
            if key not in PARAM_NAMES:
                raise ParameterError(f"line {lineno}: unknown parameter {key!r}")
            if key in values:
                raise ParameterError(f"line {lineno}: duplicate parameter {key!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise ParameterError(f"line {lineno}: bad float {val!r}") from None
        missing = [n for n in PARAM_NAMES if n not in values]
        if missing:
            raise ParameterError(f"missing parameters: {', '.join(missing)}")
        return cls.from_array([values[n] for n in PARAM_NAMES])


@dataclass(frozen=True, eq=False)
class FilterJacobian:
    """d(pipeline output)/d(theta) rasters, one (H, W, 3) array per parameter."""

    d_w_r: np.ndarray
    d_w_g: np.ndarray
    d_w_b: np.ndarray
    d_gamma: np.ndarray
    d_alpha: np.ndarray
    d_lam: np.ndarray

    def by_name(self) -> dict[str, np.ndarray]:
        return {
            "w_r": self.d_w_r,
            "w_g": self.d_w_g,
            "w_b": self.d_w_b,
            "gamma": self.d_gamma,
            "alpha": self.d_alpha,
            "lambda": self.d_lam,
        }

    def stacked(self) -> np.ndarray:
        return np.stack([self.by_name()[n] for n in PARAM_NAMES])


def gaussian_kernel(size: int = BLUR_KERNEL_SIZE, sigma: float = BLUR_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian kernel.

    Built with scalar math in row-major order so the values are reproducible
    bit-for-bit by an independent loop implementation.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    half = size // 2
    weights = []
    total = 0.0
    for dy in range(-half, half + 1):
        row = []
        for dx in range(-half, half + 1):
            w = math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
            row.append(w)
            total += w
        weights.append(row)
    kernel = np.array(weights, dtype=np.float64)
    return kernel / total


_KERNEL_5X5 = gaussian_kernel()


def reflect_index(i: int, n: int) -> int:
    """Fold index i into [0, n) by symmetric reflection without edge repeat."""
    if n == 1:
        return 0
    period = 2 * n - 2
    j = i % period
    return j if j < n else period - j


def _reflect_indices(n: int, pad: int) -> np.ndarray:
    idx = np.arange(-pad, n + pad)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def gaussian_blur(arr: np.ndarray, kernel: np.ndarray | None = None) -> np.ndarray:
    """Blur an (H, W) or (H, W, C) array with reflect padding.

    Accumulates kernel taps in row-major order over whole image planes; this
    makes the per-pixel accumulation order identical to a naive nested loop,
    so results match a loop oracle bit-for-bit.
    """
    if kernel is None:
        kernel = _KERNEL_5X5
    size = kernel.shape[0]
    half = size // 2
    h, w = arr.shape[0], arr.shape[1]
    rows = _reflect_indices(h, half)
    cols = _reflect_indices(w, half)
    padded = arr[np.ix_(rows, cols)]
    out = np.zeros_like(arr, dtype=np.float64)
    for ky in range(size):
        for kx in range(size):
            out += kernel[ky, kx] * padded[ky : ky + h, kx : kx + w]
    return out


def _clamp01(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0)


def _luma(arr: np.ndarray) -> np.ndarray:
    return LUMA_R * arr[:, :, 0] + LUMA_G * arr[:, :, 1] + LUMA_B * arr[:, :, 2]


# Raw (array-level) stage implementations. Each returns the pre-clamp result.


def _wb_raw(arr: np.ndarray, w_r: float, w_g: float, w_b: float) -> np.ndarray:
    return arr * np.array([w_r, w_g, w_b])


def _gamma_raw(arr: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == 1.0:
        # pow(v, 1.0) is not guaranteed bit-exact by every libm; the identity
        # contract requires it to be
        return arr.copy()
    return np.power(arr, gamma)


def _contrast_parts(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (lum, enl, en) for the contrast S-curve."""
    lum = _luma(arr)
    enl = 0.5 * (1.0 - np.cos(np.pi * lum))
    safe = np.maximum(lum, _LUM_FLOOR)
    ratio = np.where(lum < _LUM_FLOOR, 0.0, enl / safe)
    en = arr * ratio[:, :, None]
    return lum, enl, en


def _contrast_raw(arr: np.ndarray, alpha: float) -> np.ndarray:
    _, _, en = _contrast_parts(arr)
    return alpha * en + (1.0 - alpha) * arr


def _sharpen_raw(arr: np.ndarray, lam: float) -> np.ndarray:
    return arr + lam * (arr - gaussian_blur(arr))


def white_balance(img: Image, w_r: float, w_g: float, w_b: float) -> Image:
    """Per-channel gain followed by clamp to [0, 1]."""
    for name, value in (("w_r", w_r), ("w_g", w_g), ("w_b", w_b)):
        _check_range(name, value, *W_RANGE)
    return Image(_clamp01(_wb_raw(img.data, w_r, w_g, w_b)))


def gamma_correct(img: Image, gamma: float) -> Image:
    """Per-channel power transform; 0**gamma is 0."""
    _check_range("gamma", gamma, *GAMMA_RANGE)
    return Image(_clamp01(_gamma_raw(img.data, gamma)))


def contrast(img: Image, alpha: float) -> Image:
    """Blend toward the cosine S-curve remap of luminance.

    En scales each pixel by EnL(Lum)/Lum where EnL = (1 - cos(pi*Lum))/2;
    below the luminance floor the analytic limit En -> 0 applies. Gray
    pixels at Lum = 0.5 are a fixed point.
    """
    _check_range("alpha", alpha, *ALPHA_RANGE)
    return Image(_clamp01(_contrast_raw(img.data, alpha)))


def sharpen(img: Image, lam: float) -> Image:
    """Unsharp masking: In + lam * (In - Gauss(In)), clamped."""
    _check_range("lambda", lam, *LAMBDA_RANGE)
    if lam == 0.0:
        return img
    return Image(_clamp01(_sharpen_raw(img.data, lam)))


def _pipeline_arrays(arr: np.ndarray, p: IspParams) -> list[np.ndarray]:
    """Clamped outputs [y1, y2, y3, y4] of the four stages."""
    y1 = _clamp01(_wb_raw(arr, p.w_r, p.w_g, p.w_b))
    y2 = _clamp01(_gamma_raw(y1, p.gamma))
    y3 = _clamp01(_contrast_raw(y2, p.alpha))
    y4 = _clamp01(_sharpen_raw(y3, p.lam))
    return [y1, y2, y3, y4]


def apply_pipeline(img: Image, p: IspParams) -> Image:
    """Compose white balance, gamma, contrast, sharpen in that order."""
    if p == IspParams.identity():
        return img
    return Image(_pipeline_arrays(img.data, p)[-1])


def _interior_mask(raw: np.ndarray) -> np.ndarray:
    # derivative passes only where the clamp is inactive
    return ((raw > 0.0) & (raw < 1.0)).astype(np.float64)


def pipeline_jacobian(img: Image, p: IspParams) -> FilterJacobian:
    """Analytic d(output)/d(theta) for all six hyperparameters.

    Derivatives are propagated stage by stage with the chain rule; pixels on
    a clamp boundary at any stage carry derivative 0 from that stage on.
    Matches central finite differences at interior points.
    """
    x = img.data
    w = np.array([p.w_r, p.w_g, p.w_b])

    raw1 = _wb_raw(x, *w)
    y1 = _clamp01(raw1)
    m1 = _interior_mask(raw1)

    raw2 = _gamma_raw(y1, p.gamma)
    y2 = _clamp01(raw2)
    m2 = _interior_mask(raw2)

    lum, enl, en = _contrast_parts(y2)
    raw3 = p.alpha * en + (1.0 - p.alpha) * y2
    y3 = _clamp01(raw3)
    m3 = _interior_mask(raw3)

    blur3 = gaussian_blur(y3)
    raw4 = y3 + p.lam * (y3 - blur3)
    m4 = _interior_mask(raw4)

    # stage-local input derivatives
    if p.gamma == 1.0:
        dgamma_dy1 = np.ones_like(y1)
    else:
        dgamma_dy1 = np.where(y1 > 0.0, p.gamma * np.power(np.maximum(y1, 1e-300), p.gamma - 1.0), 0.0)

    # contrast per-pixel 3x3 Jacobian pieces: ratio = EnL/Lum and its slope
    safe_lum = np.maximum(lum, _LUM_FLOOR)
    low = lum < _LUM_FLOOR
    ratio = np.where(low, 0.0, enl / safe_lum)
    enl_slope = 0.5 * np.pi * np.sin(np.pi * lum)
    ratio_slope = np.where(low, 0.0, (enl_slope * safe_lum - enl) / (safe_lum * safe_lum))
    luma_w = np.array([LUMA_R, LUMA_G, LUMA_B])

    def through_contrast(d: np.ndarray) -> np.ndarray:
        lum_dir = d @ luma_w
        en_dir = ratio[:, :, None] * d + (ratio_slope * lum_dir)[:, :, None] * y2
        return p.alpha * en_dir + (1.0 - p.alpha) * d

    def through_sharpen(d: np.ndarray) -> np.ndarray:
        return (1.0 + p.lam) * d - p.lam * gaussian_blur(d)

    def downstream_from_gamma_output(d: np.ndarray) -> np.ndarray:
        d = through_contrast(d * m2) * m3
        return through_sharpen(d) * m4

    # white-balance gains: d(raw1)/d(w_c) = x_c on channel c only
    wb_jacs = []
    for c in range(3):
        d = np.zeros_like(x)
        d[:, :, c] = x[:, :, c]
        d *= m1
        wb_jacs.append(downstream_from_gamma_output(dgamma_dy1 * d))

    # gamma: d(raw2)/d(gamma) = y1**gamma * ln(y1), 0 at y1 == 0
    with np.errstate(divide="ignore"):
        log_y1 = np.where(y1 > 0.0, np.log(np.maximum(y1, 1e-300)), 0.0)
    d_gamma_raw = np.where(y1 > 0.0, raw2 * log_y1, 0.0)
    d_gamma = through_contrast(d_gamma_raw * m2) * m3
    d_gamma = through_sharpen(d_gamma) * m4

    # alpha: d(raw3)/d(alpha) = En - y2
    d_alpha = through_sharpen((en - y2) * m3) * m4

    # lambda: d(raw4)/d(lambda) = y3 - Gauss(y3)
    d_lam = (y3 - blur3) * m4

    return FilterJacobian(wb_jacs[0], wb_jacs[1], wb_jacs[2], d_gamma, d_alpha, d_lam)
