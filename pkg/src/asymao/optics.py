"""Wave-optics forward model: pupils, PSFs, and incoherent image formation.

The pupil lives on an n x n grid (n a power of two). PSFs are formed on a
zero-padded grid (pad_factor * n) so that phases of a few radians RMS stay
well sampled. The camera samples at the native pitch: before convolving with
a scene, a padded PSF is resampled by stride-pad_factor subsampling, which is
exact as long as the pupil support stays inside the central half of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fourier import (cfft2, center_flip, check_grid_side, circular_convolve,
                      embed_center, subsample_center)


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex field on the pupil grid."""

    grid: np.ndarray
    dx: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"field grid must be square, got {g.shape}")
        check_grid_side(g.shape[0])
        if not np.all(np.isfinite(g)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "grid", g.astype(complex, copy=False))

    @property
    def n(self) -> int:
        return self.grid.shape[0]


@dataclass(frozen=True)
class Psf:
    """Nonnegative intensity kernel with energy bookkeeping.

    pad_factor records the sampling pitch relative to the native pupil grid:
    a PSF from psf_from_pupil has kernel side pad_factor * n and must be
    resampled to native pitch before it acts on a scene.
    """

    kernel: np.ndarray
    pad_factor: int = 1

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 2:
            raise ValueError("psf kernel must be 2-D")
        if np.any(k < 0):
            raise ValueError("psf kernel must be nonnegative")
        if not np.all(np.isfinite(k)):
            raise ValueError("psf kernel contains non-finite values")
        if k.sum() <= 0:
            raise ValueError("psf kernel has zero energy")
        object.__setattr__(self, "kernel", k)

    @property
    def energy(self) -> float:
        return float(self.kernel.sum())


@dataclass(frozen=True)
class SceneImage:
    """Scene pixels, clamped to [0, 1] on ingestion."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 2:
            raise ValueError("scene must be 2-D")
        object.__setattr__(self, "pixels", np.clip(p, 0.0, 1.0))

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class Measurement:
    """Sensor image: scene convolved with a unit-sum kernel plus noise."""

    pixels: np.ndarray
    noise_sigma: float = 0.0


def pupil_function(aperture, phase: np.ndarray) -> ComplexField:
    """Complex pupil A * exp(j phase). Phase outside the support is irrelevant."""
    amp = aperture.amplitude
    phase = np.asarray(phase, dtype=float)
    if amp.shape != phase.shape:
        raise ValueError(f"aperture {amp.shape} and phase {phase.shape} differ")
    return ComplexField(amp * np.exp(1j * phase))


def psf_from_pupil(pupil: ComplexField, pad_factor: int = 2) -> Psf:
    """PSF |F{pupil}|^2 on a pad_factor-times finer focal grid.

    The pupil is zero-embedded at the center of the padded grid; the transform
    is unitary, so the kernel energy equals the pupil energy (Parseval).
    """
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    n = pupil.n
    padded = embed_center(pupil.grid, n * pad_factor)
    h = np.abs(cfft2(padded)) ** 2
    return Psf(h, pad_factor=pad_factor)


def measurement_kernel(psf: Psf, scene_shape) -> np.ndarray:
    """Unit-sum convolution kernel at the scene's pitch, center-origin layout.

    Padded-grid PSFs are stride-subsampled to native pitch (exact when the
    pupil support fits the central half-grid); smaller kernels are embedded at
    the center. The result always sums to 1 so measurements conserve flux.
    """
    n = scene_shape[0]
    k = psf.kernel
    if psf.pad_factor > 1 and k.shape[0] == n * psf.pad_factor:
        k = subsample_center(k, psf.pad_factor)
    elif k.shape[0] < n:
        k = embed_center(k, n)
    elif k.shape != tuple(scene_shape):
        raise ValueError(f"kernel {k.shape} incompatible with scene {scene_shape}")
    return k / k.sum()


def image_measurement(scene: SceneImage, psf: Psf, noise_sigma: float = 0.0,
                      seed: int = 0, mode: str = "circular") -> Measurement:
    """Form Y = X conv H + noise with a unit-sum kernel.

    mode "circular" wraps at the boundary (FFT pipeline); "linear" zero-pads,
    matching a direct spatial-domain convolution.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    x = scene.pixels
    if x.size == 0:
        raise ValueError("empty scene")
    k = measurement_kernel(psf, x.shape)
    if mode == "circular":
        y = circular_convolve(x, k)
    elif mode == "linear":
        # zero-padded convolution on a doubled grid: the scene sits in the
        # top-left quadrant, so wrapped tails land outside it and the
        # same-size linear result is exactly that quadrant
        n = x.shape[0]
        xp = np.zeros((2 * n, 2 * n))
        xp[:n, :n] = x
        y = circular_convolve(xp, embed_center(k, 2 * n))[:n, :n]
    else:
        raise ValueError(f"unknown convolution mode {mode!r}")
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, y.shape)
    # sensor intensities cannot go negative
    return Measurement(np.maximum(y, 0.0), noise_sigma=noise_sigma)


def conjugate_flip(phase: np.ndarray) -> np.ndarray:
    """The PSF-preserving twin for symmetric apertures: -phase(-x, -y)."""
    return -center_flip(np.asarray(phase, dtype=float))


def corrected_psf(aperture, phi_o: np.ndarray, phi_slm: np.ndarray,
                  pad_factor: int = 2) -> Psf:
    """PSF of the residual aberration phi_o + phi_slm."""
    phi_o = np.asarray(phi_o, dtype=float)
    phi_slm = np.asarray(phi_slm, dtype=float)
    if phi_o.shape != phi_slm.shape:
        raise ValueError("phase shapes differ")
    return psf_from_pupil(pupil_function(aperture, phi_o + phi_slm), pad_factor)
