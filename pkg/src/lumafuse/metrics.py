"""Full-reference image quality metrics: PSNR, SSIM, and pixel-domain VIF.

SSIM and VIF operate on the shared luma raster (0.27/0.67/0.06 weights).
VIF is the pixel-domain multi-scale variant (4 scales, Gaussian windows);
the reported record carries the variant tag so scores are not confused with
wavelet-domain implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .filters import gaussian_blur, gaussian_kernel
from .image import Image, luminance

PSNR_CAP_DB = 100.0
_PSNR_MSE_FLOOR = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

VIF_SCALES = 4
VIF_WINDOW = 9
VIF_SIGMA = VIF_WINDOW / 5.0
VIF_SIGMA_NSQ = 2.0 / (255.0**2)  # visual noise variance on the [0, 1] scale
VIF_VARIANT = "pixel-multiscale-4"

_SSIM_KERNEL = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
_VIF_KERNEL = gaussian_kernel(VIF_WINDOW, VIF_SIGMA)


@dataclass(frozen=True)
class IqaReport:
    """One metric triple; psnr in dB (capped), ssim in [-1, 1], vif >= 0."""

    psnr: float
    ssim: float
    vif: float

    def as_kv(self, name: str) -> str:
        return (
            f"name={name} psnr={self.psnr:.6f} ssim={self.ssim:.6f} "
            f"vif={self.vif:.6f} vif_variant={VIF_VARIANT}"
        )

    def as_csv_row(self, name: str) -> str:
        return f"{name},{self.psnr:.6f},{self.ssim:.6f},{self.vif:.6f}"


CSV_HEADER = "name,psnr,ssim,vif"


def _check_same_shape(x: Image, y: Image) -> None:
    if not x.same_shape(y):
        raise ShapeError(f"image shapes differ: {x.data.shape} vs {y.data.shape}")


def psnr(x: Image, y: Image) -> float:
    """10*log10(1/MSE) over all channels, peak 1.0; capped at 100 dB."""
    _check_same_shape(x, y)
    mse = float(np.mean((x.data - y.data) ** 2))
    if mse < _PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / mse)


def _valid_filter(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Windowed weighted sums without padding (valid region only)."""
    size = kernel.shape[0]
    out_h = arr.shape[0] - size + 1
    out_w = arr.shape[1] - size + 1
    acc = np.zeros((out_h, out_w))
    for ky in range(size):
        for kx in range(size):
            acc += kernel[ky, kx] * arr[ky : ky + out_h, kx : kx + out_w]
    return acc


def ssim(x: Image, y: Image) -> float:
    """Structural similarity on luma with an 11x11 Gaussian window.

    Written so that swapping the inputs gives the exact same float result.
    """
    _check_same_shape(x, y)
    if min(x.height, x.width) < SSIM_WINDOW:
        raise ShapeError(f"images must be at least {SSIM_WINDOW} pixels per side")
    lx = luminance(x)
    ly = luminance(y)
    mu_x = _valid_filter(lx, _SSIM_KERNEL)
    mu_y = _valid_filter(ly, _SSIM_KERNEL)
    sigma_x2 = _valid_filter(lx * lx, _SSIM_KERNEL) - mu_x * mu_x
    sigma_y2 = _valid_filter(ly * ly, _SSIM_KERNEL) - mu_y * mu_y
    sigma_xy = _valid_filter(lx * ly, _SSIM_KERNEL) - mu_x * mu_y
    num = (2.0 * (mu_x * mu_y) + SSIM_C1) * (2.0 * sigma_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x2 + sigma_y2 + SSIM_C2)
    return float(np.mean(num / den))


def _window_stats(arr: np.ndarray) -> np.ndarray:
    return gaussian_blur(arr, _VIF_KERNEL)


def vif(x_ref: Image, y_dist: Image) -> float:
    """Pixel-domain multi-scale visual information fidelity.

    Four scales by Gaussian blur + 2x decimation. Per scale, 9x9 Gaussian
    window statistics give the gain g = cov/(var_ref + 1e-10) and the
    residual var_v = var_dist - g*cov; information passed through the
    distortion channel is summed against information in the reference, both
    through the same visual-noise floor.
    """
    _check_same_shape(x_ref, y_dist)
    if min(x_ref.height, x_ref.width) < 32:
        raise ShapeError("images must be at least 32 pixels per side")
    ref = luminance(x_ref)
    dist = luminance(y_dist)
    num = 0.0
    den = 0.0
    for scale in range(VIF_SCALES):
        if scale > 0:
            ref = gaussian_blur(ref, _VIF_KERNEL)[::2, ::2]
            dist = gaussian_blur(dist, _VIF_KERNEL)[::2, ::2]
        mu_x = _window_stats(ref)
        mu_y = _window_stats(dist)
        sigma_x2 = np.maximum(_window_stats(ref * ref) - mu_x * mu_x, 0.0)
        sigma_y2 = np.maximum(_window_stats(dist * dist) - mu_y * mu_y, 0.0)
        sigma_xy = _window_stats(ref * dist) - mu_x * mu_y
        g = sigma_xy / (sigma_x2 + 1e-10)
        sigma_v2 = sigma_y2 - g * sigma_xy
        num += float(np.sum(np.log2(1.0 + g * g * sigma_x2 / (sigma_v2 + VIF_SIGMA_NSQ))))
        den += float(np.sum(np.log2(1.0 + sigma_x2 / VIF_SIGMA_NSQ)))
    if den == 0.0:
        # constant reference carries no information; identity convention
        return 1.0
    return num / den


def iqa_report(x: Image, y: Image) -> IqaReport:
    return IqaReport(psnr=psnr(x, y), ssim=ssim(x, y), vif=vif(x, y))
