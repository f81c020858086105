"""Evaluation metrics: Strehl ratio, radial MTF, PSNR, SSIM, gradient phase error.

Strehl uses energy-equalized peaks so intensity scaling cannot inflate it.
The MTF frequency axis is normalized to cycles per aperture width, putting
the incoherent cutoff of an ideal disk at 1.0 regardless of grid size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fourier import cfft2
from .optics import Psf, psf_from_pupil, pupil_function
from .zernike import phase_gradient


@dataclass(frozen=True)
class MtfProfile:
    """Radially averaged |OTF| with a monotone frequency axis."""

    radial_frequency: np.ndarray
    contrast: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.radial_frequency, dtype=float)
        c = np.asarray(self.contrast, dtype=float)
        if f.shape != c.shape or f.ndim != 1:
            raise ValueError("frequency and contrast must be matching vectors")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency axis must be strictly increasing")
        object.__setattr__(self, "radial_frequency", f)
        object.__setattr__(self, "contrast", c)


def strehl_ratio(psf: Psf, aperture) -> float:
    """Peak of psf over peak of the bare-aperture PSF, energy equalized."""
    k = psf.kernel
    if k.sum() <= 0:
        raise ValueError("psf has zero energy")
    reference = psf_from_pupil(
        pupil_function(aperture, np.zeros((aperture.n, aperture.n))),
        psf.pad_factor)
    if reference.kernel.shape != k.shape:
        raise ValueError(f"psf grid {k.shape} does not match aperture grid "
                         f"{reference.kernel.shape} at pad {psf.pad_factor}")
    return float((k.max() / k.sum()) /
                 (reference.kernel.max() / reference.kernel.sum()))


def mtf(psf: Psf, aperture_width: float | None = None) -> MtfProfile:
    """|F{psf}| normalized at DC and averaged over 1-bin annuli.

    aperture_width (pupil samples) rescales the axis to cycles per aperture
    width; without it the axis stays in raw FFT bins.
    """
    k = psf.kernel / psf.kernel.sum()
    otf = np.abs(cfft2(k))
    n = k.shape[0]
    c = n // 2
    otf = otf / otf[c, c]
    yy, xx = np.mgrid[0:n, 0:n]
    rings = np.rint(np.hypot(yy - c, xx - c)).astype(int)
    nbins = n // 2
    sums = np.bincount(rings.ravel(), otf.ravel(), minlength=nbins)[:nbins]
    counts = np.bincount(rings.ravel(), minlength=nbins)[:nbins]
    contrast = sums / counts
    bins = np.arange(nbins, dtype=float)
    freq = bins / aperture_width if aperture_width else bins
    return MtfProfile(radial_frequency=freq, contrast=contrast)


def disk_mtf_analytic(s: np.ndarray) -> np.ndarray:
    """Autocorrelation of a unit disk vs normalized frequency s in [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return (2.0 / np.pi) * (np.arccos(s) - s * np.sqrt(1.0 - s * s))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf for identical inputs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _ssim_window(sigma: float, width: int) -> np.ndarray:
    half = width // 2
    g = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0,
         window_width: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity with a Gaussian window, interior-only.

    Windows that would read outside the image are dropped rather than padded,
    so borders never bias the score.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    w = _ssim_window(sigma, window_width)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    def filt(img):
        return ndimage.convolve(img, w, mode="constant")

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    smap = num / den
    half = window_width // 2
    interior = smap[half:-half, half:-half] if min(a.shape) > 2 * half else smap
    return float(interior.mean())


def gradient_phase_error(est: np.ndarray, gt: np.ndarray, mask) -> float:
    """Mean squared forward-gradient discrepancy over in-mask pixel pairs.

    Insensitive to piston by construction: only differences of neighboring
    phase values enter.
    """
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if est.shape != gt.shape:
        raise ValueError("phase shapes differ")
    support = np.asarray(getattr(mask, "support", mask)) > 0
    if not support.any():
        raise ValueError("empty mask")
    gx_e, gy_e = phase_gradient(est, support)
    gx_g, gy_g = phase_gradient(gt, support)
    pairs_x = support[:, :-1] & support[:, 1:]
    pairs_y = support[:-1, :] & support[1:, :]
    err = 0.0
    if pairs_x.any():
        err += float(np.mean((gx_e[:, :-1][pairs_x] - gx_g[:, :-1][pairs_x]) ** 2))
    if pairs_y.any():
        err += float(np.mean((gy_e[:-1, :][pairs_y] - gy_g[:-1, :][pairs_y]) ** 2))
    return err
