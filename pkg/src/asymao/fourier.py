"""Centered unitary FFT helpers shared by the optics and estimator code.

All spectra in this package put the zero-frequency sample at index n//2
(fftshift layout). The transforms are unitary ("ortho"), so energy is
preserved exactly and Parseval checks need no tolerance scaling.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft


def check_grid_side(n: int) -> None:
    """Grids are square with power-of-two sides >= 8 so FFT centers are exact."""
    if n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"grid side must be a power of two >= 8, got {n}")


def cfft2(x: np.ndarray) -> np.ndarray:
    """Centered unitary 2-D FFT: center-origin input, center-origin spectrum."""
    return _fft.fftshift(_fft.fft2(_fft.ifftshift(x), norm="ortho"))


def cifft2(x: np.ndarray) -> np.ndarray:
    """Inverse of cfft2."""
    return _fft.fftshift(_fft.ifft2(_fft.ifftshift(x), norm="ortho"))


def center_flip(a: np.ndarray) -> np.ndarray:
    """Point reflection about the FFT center, index k -> (-k) mod n.

    On even grids the sample at index 0 is its own mirror; the reversal is
    therefore a flip plus a one-sample roll, not a plain [::-1].
    """
    return np.roll(a[::-1, ::-1], (1, 1), axis=(0, 1))


def embed_center(small: np.ndarray, n: int) -> np.ndarray:
    """Embed a (possibly smaller) array at the FFT center of an n x n grid."""
    if small.shape[0] > n or small.shape[1] > n:
        raise ValueError(f"cannot embed {small.shape} into {n}x{n}")
    out = np.zeros((n, n), dtype=small.dtype)
    # align the small array's center pixel (m//2) with the big grid's n//2
    oy = n // 2 - small.shape[0] // 2
    ox = n // 2 - small.shape[1] // 2
    out[oy:oy + small.shape[0], ox:ox + small.shape[1]] = small
    return out


def crop_center(a: np.ndarray, m: int) -> np.ndarray:
    """Crop an m x m block whose center pixel is the grid's FFT center."""
    n = a.shape[0]
    if m > n:
        raise ValueError(f"cannot crop {m}x{m} from {a.shape}")
    o = n // 2 - m // 2
    return a[o:o + m, o:o + m].copy()


def subsample_center(a: np.ndarray, stride: int) -> np.ndarray:
    """Stride-subsample keeping the FFT center on the output grid.

    With even n and the center at n//2, plain a[::stride] already passes
    through the center sample.
    """
    return a[::stride, ::stride].copy()


def circular_convolve(image: np.ndarray, kernel_centered: np.ndarray) -> np.ndarray:
    """Circular convolution with a kernel stored in center-origin layout."""
    K = _fft.fft2(_fft.ifftshift(kernel_centered))
    return np.real(_fft.ifft2(_fft.fft2(image) * K))
