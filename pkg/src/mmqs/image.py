"""Image helpers: seeded Gaussian noise, PSNR/SSIM, and 8-bit file I/O.

Images are plain float64 numpy arrays shaped ``(H, W)`` for grayscale or
``(H, W, C)`` for color, with values nominally in ``[0, 1]``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image as PILImage

PSNR_MAX = 1.0
SSIM_WINDOW = 8
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def as_image(x) -> np.ndarray:
    """Return ``x`` as a float64 image array, validating its shape."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-D, got shape {arr.shape}")
    return arr


def num_channels(x: np.ndarray) -> int:
    return 1 if x.ndim == 2 else x.shape[2]


class GaussianSampler:
    """Seeded source of i.i.d. ``N(0, sigma^2)`` samples.

    Backed by numpy's PCG64 bit generator, whose output stream is fixed
    across platforms for a given seed. One sampler per run; not thread-safe.
    """

    def __init__(self, seed: int, sigma: float = 1.0):
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.seed = int(seed)
        self.sigma = float(sigma)
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def sample(self, shape) -> np.ndarray:
        return self.sigma * self._rng.standard_normal(shape)

    def __repr__(self):
        return f"GaussianSampler(seed={self.seed}, sigma={self.sigma})"


def add_gaussian_noise(x, sampler: GaussianSampler) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if sampler.sigma == 0:
        return x.copy()
    return x + sampler.sample(x.shape)


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(reference, estimate) -> float:
    a = as_image(reference)
    b = as_image(estimate)
    _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(reference, estimate) -> float:
    """Peak signal-to-noise ratio in dB with a peak value of 1.0.

    The squared error is averaged jointly over all pixels and channels.
    Identical inputs give ``inf``.
    """
    err = mse(reference, estimate)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(PSNR_MAX**2 / err))


def _luma(x: np.ndarray) -> np.ndarray:
    return x if x.ndim == 2 else x.mean(axis=2)


def ssim(reference, estimate) -> float:
    """Mean SSIM over all valid 8x8 uniform windows.

    Color inputs are reduced to their channel mean first. Local statistics
    use population (biased) variances.
    """
    a = as_image(reference)
    b = as_image(estimate)
    _check_same_shape(a, b)
    a, b = _luma(a), _luma(b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")

    def local_mean(z):
        return sliding_window_view(z, (SSIM_WINDOW, SSIM_WINDOW)).mean(axis=(-2, -1))

    mu_a, mu_b = local_mean(a), local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def read_image(path) -> np.ndarray:
    """Load an 8-bit PNG/PGM/PPM file as floats in ``[0, 1]``."""
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
        arr = np.asarray(im, dtype=np.float64)
    return as_image(arr / 255.0)


def to_uint8(x) -> np.ndarray:
    return np.round(np.clip(as_image(x), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, x) -> None:
    """Write ``x`` as an 8-bit image; format follows the file suffix."""
    path = Path(path)
    data = to_uint8(x)
    im = PILImage.fromarray(data)
    fmt = {".png": "PNG", ".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}.get(path.suffix.lower())
    if fmt is None:
        raise ValueError(f"unsupported image suffix: {path.suffix}")
    im.save(path, format=fmt)
