"""Blind PSF estimation from a single natural-scene measurement.

Multi-scale alternating minimization: at each scale the latent image is
recovered by half-quadratic-splitting TV deconvolution, sharpened by a shock
filter, and the kernel is re-solved in the gradient domain against the
strongest edges only. Coarse-to-fine continuation halves the prior weight per
finer scale. No RNG is involved, so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as spfft
from scipy import ndimage

from ..optics import Psf


@dataclass(frozen=True)
class PatchStack:
    """Non-overlapping row-major tiling of a measurement."""

    patches: np.ndarray     # (P, M, N)
    grid_shape: tuple       # (rows, cols) of the tiling

    @property
    def count(self) -> int:
        return self.patches.shape[0]


@dataclass(frozen=True)
class PsfEstimate:
    """Unit-energy kernel with the misfit it achieved."""

    psf: Psf
    fidelity: float
    iterations_used: int
    converged: bool = True


def patchify(measurement, patch_m: int, patch_n: int) -> PatchStack:
    """Cut into non-overlapping patches; concatenation reproduces the input."""
    y = np.asarray(getattr(measurement, "pixels", measurement), dtype=float)
    rows, cols = y.shape
    if rows % patch_m or cols % patch_n:
        raise ValueError(f"measurement {y.shape} not divisible into "
                         f"{patch_m}x{patch_n} patches")
    gr, gc = rows // patch_m, cols // patch_n
    p = (y.reshape(gr, patch_m, gc, patch_n)
          .swapaxes(1, 2)
          .reshape(gr * gc, patch_m, patch_n))
    return PatchStack(patches=p, grid_shape=(gr, gc))


def reassemble(stack: PatchStack) -> np.ndarray:
    """Inverse of patchify."""
    gr, gc = stack.grid_shape
    p, m, n = stack.patches.shape
    return (stack.patches.reshape(gr, gc, m, n)
            .swapaxes(1, 2)
            .reshape(gr * m, gc * n))


def _dxf(a):
    return np.roll(a, -1, 1) - a


def _dyf(a):
    return np.roll(a, -1, 0) - a


def _pad_kernel_fft(k: np.ndarray, n: int) -> np.ndarray:
    big = np.zeros((n, n))
    ks = k.shape[0]
    lo = n // 2 - ks // 2
    big[lo:lo + ks, lo:lo + ks] = k
    return spfft.fft2(spfft.ifftshift(big))


def _deconv_tv(y: np.ndarray, kernel_f: np.ndarray, lam: float,
               n_outer: int = 3) -> np.ndarray:
    """Half-quadratic splitting for min ||k*X - Y||^2 + lam |grad X|_1."""
    n = y.shape[0]
    yf = spfft.fft2(y)
    dxk = np.zeros((n, n))
    dxk[0, 0], dxk[0, 1] = -1.0, 1.0
    dyk = np.zeros((n, n))
    dyk[0, 0], dyk[1, 0] = -1.0, 1.0
    dx_f, dy_f = spfft.fft2(dxk), spfft.fft2(dyk)
    dd = np.abs(dx_f) ** 2 + np.abs(dy_f) ** 2
    kh = np.conj(kernel_f)
    x = y.copy()
    eta = 2.0 * lam
    for _ in range(n_outer):
        gx = spfft.ifft2(dx_f * spfft.fft2(x)).real
        gy = spfft.ifft2(dy_f * spfft.fft2(x)).real
        t = lam / (2.0 * eta)
        wx = np.sign(gx) * np.maximum(np.abs(gx) - t, 0.0)
        wy = np.sign(gy) * np.maximum(np.abs(gy) - t, 0.0)
        num = kh * yf + eta * (np.conj(dx_f) * spfft.fft2(wx)
                               + np.conj(dy_f) * spfft.fft2(wy))
        x = spfft.ifft2(num / (np.abs(kernel_f) ** 2 + eta * dd)).real
        eta *= 2.0
    return x


def _shock(x: np.ndarray, iters: int = 3, dt: float = 0.4,
           sigma: float = 1.0) -> np.ndarray:
    out = x.copy()
    for _ in range(iters):
        s = ndimage.gaussian_filter(out, sigma)
        gx = (np.roll(s, -1, 1) - np.roll(s, 1, 1)) / 2
        gy = (np.roll(s, -1, 0) - np.roll(s, 1, 0)) / 2
        out = out - dt * np.sign(ndimage.laplace(s)) * np.hypot(gx, gy)
    return out


def kernel_project(h: np.ndarray, kernel_size: int,
                   support_threshold: float = 0.002) -> np.ndarray:
    """Crop to the kernel box, clip negatives, drop sub-threshold dust,
    renormalize to unit sum. The low threshold keeps faint speckle tails that
    asymmetric-aperture PSFs rely on."""
    n = h.shape[0]
    lo = n // 2 - kernel_size // 2
    k = h[lo:lo + kernel_size, lo:lo + kernel_size].copy()
    k[k < 0] = 0.0
    if k.max() > 0:
        k[k < support_threshold * k.max()] = 0.0
    s = k.sum()
    if s <= 0:
        k = np.zeros((kernel_size, kernel_size))
        k[kernel_size // 2, kernel_size // 2] = 1.0
        s = 1.0
    return k / s


def _solve_kernel_scale(y: np.ndarray, kernel_size: int, h0: np.ndarray,
                        lam: float, iters: int, edge_keep: float,
                        gamma: float, support_threshold: float):
    """Alternate latent-image and gradient-domain kernel solves at one scale."""
    n = y.shape[0]
    h = h0.copy()
    bx_f, by_f = spfft.fft2(_dxf(y)), spfft.fft2(_dyf(y))
    delta = np.inf
    for _ in range(iters):
        x = _deconv_tv(y, _pad_kernel_fft(h, n), lam)
        xs = _shock(x)
        gx, gy = _dxf(xs), _dyf(xs)
        mag = np.hypot(gx, gy)
        sel = mag >= np.quantile(mag, 1.0 - edge_keep)
        px_f, py_f = spfft.fft2(gx * sel), spfft.fft2(gy * sel)
        num = np.conj(px_f) * bx_f + np.conj(py_f) * by_f
        den = np.abs(px_f) ** 2 + np.abs(py_f) ** 2 + gamma * n * n
        h_new = kernel_project(spfft.fftshift(spfft.ifft2(num / den).real),
                               kernel_size, support_threshold)
        delta = float(np.linalg.norm(h_new - h))
        h = h_new
    return h, delta


def _latent_range_violation(y: np.ndarray, h: np.ndarray,
                            lam: float) -> float:
    """Out-of-range energy of the latent implied by kernel h.

    Deconvolving by a kernel that overstates the blur drives the latent
    outside the [0, 1] sensor range (ringing undershoots), so this is a
    physical validity test for the estimate. Normalized by the measurement's
    mean-square intensity."""
    x = _deconv_tv(y, _pad_kernel_fft(h, y.shape[0]), lam)
    below = np.minimum(x, 0.0)
    above = np.maximum(x - 1.0, 0.0)
    return float(np.mean(below ** 2 + above ** 2) / np.mean(y ** 2))


def _down2(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[::2, ::2] + a[1::2, ::2] + a[::2, 1::2] + a[1::2, 1::2])


def _up2(k: np.ndarray, kernel_size: int) -> np.ndarray:
    z = ndimage.zoom(k, 2.0, order=1)
    out = np.zeros((kernel_size, kernel_size))
    lo = max(0, z.shape[0] // 2 - kernel_size // 2)
    sub = z[lo:lo + kernel_size, lo:lo + kernel_size]
    o = (kernel_size - sub.shape[0]) // 2
    out[o:o + sub.shape[0], o:o + sub.shape[1]] = sub
    out[out < 0] = 0.0
    return out / out.sum() if out.sum() > 0 else out


def estimate_psf_blind(measurement, kernel_size: int = 63, lam0: float = 2e-3,
                       iters_per_scale: int = 6, edge_keep: float = 0.05,
                       gamma: float = 1e-2, support_threshold: float = 0.002,
                       coarsest: int = 64,
                       fallback_tau: float = 5e-3) -> PsfEstimate:
    """Estimate the blur kernel of a single measurement.

    kernel_size must be odd and no larger than the measurement. The returned
    kernel is unit-sum at the camera pitch (pad_factor 1); fidelity is the
    data misfit ||X_final * h - Y||^2 at the finest scale.

    Alternating minimization overstates the blur of an already-sharp
    measurement (the sharpening step overshoots true step edges and the
    kernel solve then has to smooth the overshoot back out). Such kernels are
    unphysical: deconvolving by them pushes the latent outside the sensor
    range. When that out-of-range energy exceeds fallback_tau the estimate is
    rejected and the identity kernel is returned.
    """
    y = np.asarray(getattr(measurement, "pixels", measurement), dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise ValueError(f"measurement must be square, got {y.shape}")
    if not np.any(y):
        raise ValueError("all-zero measurement")
    if kernel_size % 2 == 0 or kernel_size > min(y.shape):
        raise ValueError("kernel_size must be odd and fit the measurement")

    pyramid = [y]
    while pyramid[-1].shape[0] > coarsest:
        pyramid.append(_down2(pyramid[-1]))
    pyramid = pyramid[::-1]
    n_scales = len(pyramid)
    sizes = []
    for s in range(n_scales):
        k = max(5, int(round(kernel_size / 2 ** (n_scales - 1 - s))))
        sizes.append(k + 1 if k % 2 == 0 else k)

    h = None
    iterations = 0
    delta = np.inf
    for s, ys in enumerate(pyramid):
        lam = lam0 * 2.0 ** (n_scales - 1 - s)
        if h is None:
            g = np.exp(-0.5 * (np.arange(sizes[s]) - sizes[s] // 2) ** 2)
            h = np.outer(g, g)
            h /= h.sum()
        else:
            h = _up2(h, sizes[s])
        h, delta = _solve_kernel_scale(ys, sizes[s], h, lam, iters_per_scale,
                                       edge_keep, gamma, support_threshold)
        iterations += iters_per_scale

    converged = bool(delta <= 0.05 * np.linalg.norm(h))
    if _latent_range_violation(y, h, lam0) > fallback_tau:
        h = np.zeros((kernel_size, kernel_size))
        h[kernel_size // 2, kernel_size // 2] = 1.0
        converged = True
    x = _deconv_tv(y, _pad_kernel_fft(h, y.shape[0]), lam0)
    resid = spfft.ifft2(spfft.fft2(x) * _pad_kernel_fft(h, y.shape[0])).real - y
    fidelity = float(np.sum(resid ** 2))
    return PsfEstimate(psf=Psf(h, pad_factor=1), fidelity=fidelity,
                       iterations_used=iterations,
                       converged=converged)


def kernel_ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Translation-searched normalized cross-correlation of two kernels."""
    n = max(a.shape[0], b.shape[0])
    pa = np.zeros((2 * n, 2 * n))
    pb = np.zeros((2 * n, 2 * n))
    pa[:a.shape[0], :a.shape[1]] = a
    pb[:b.shape[0], :b.shape[1]] = b
    xc = spfft.ifft2(spfft.fft2(pa) * np.conj(spfft.fft2(pb))).real
    return float(xc.max() / (np.linalg.norm(a) * np.linalg.norm(b)))
