"""Aperture masks: construction, symmetry classification, checkerboard encoding.

Shapes are hard-edged by default; graded masks come in through the bitmap
path. Every mask must keep its support inside the central half of the grid so
a pad_factor-2 focal grid samples the PSF without aliasing, and so row/column
zero (which the FFT-center flip maps onto itself) stays empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fourier import center_flip, cfft2, check_grid_side, cifft2


@dataclass(frozen=True)
class Aperture:
    """Amplitude mask in [0, 1] with its shape tag and nonzero-sample count."""

    amplitude: np.ndarray
    shape_tag: str = "bitmap"
    fill_count: int = field(init=False, default=0)

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"aperture must be square, got {a.shape}")
        check_grid_side(a.shape[0])
        if a.min() < 0 or a.max() > 1:
            raise ValueError("aperture amplitude must lie in [0, 1]")
        support = a > 0
        count = int(support.sum())
        if count == 0:
            raise ValueError("aperture has empty support")
        n = a.shape[0]
        ii, jj = np.nonzero(support)
        # central-half constraint: headroom for pad_factor 2 and the flip map
        if (np.abs(ii - n // 2).max() > n // 4
                or np.abs(jj - n // 2).max() > n // 4):
            raise ValueError("aperture support leaves the central half-grid")
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "fill_count", count)

    @property
    def n(self) -> int:
        return self.amplitude.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.amplitude > 0


def make_aperture(shape_tag: str, grid_n: int, size_fraction: float = 0.4,
                  bitmap: np.ndarray | None = None) -> Aperture:
    """Build a centered mask. size_fraction sets the circumradius (disk,
    triangle) or half-width (rectangle) as a fraction of the grid half-side.

    Supported tags: disk, rectangle, triangle, bitmap. The triangle is
    equilateral with its centroid at the grid center and apex pointing up
    (toward row 0). Rectangles use a 0.7 height/width ratio so they stay
    point-symmetric but not square.
    """
    check_grid_side(grid_n)
    if shape_tag == "bitmap":
        if bitmap is None:
            raise ValueError("bitmap aperture needs pixel data")
        b = np.asarray(bitmap, dtype=float)
        if b.max() > 1.0:
            b = b / 255.0  # 8-bit grayscale in
        return Aperture(b, shape_tag="bitmap")
    if not 0.0 < size_fraction <= 0.5:
        raise ValueError("size_fraction must be in (0, 0.5] to keep the "
                         "support inside the central half-grid")
    c = grid_n // 2
    yy, xx = np.mgrid[0:grid_n, 0:grid_n]
    y = yy - c
    x = xx - c
    r = size_fraction * (grid_n / 2.0)
    if shape_tag == "disk":
        mask = x * x + y * y <= r * r
    elif shape_tag == "rectangle":
        mask = (np.abs(x) <= r) & (np.abs(y) <= 0.7 * r)
    elif shape_tag == "triangle":
        # vertices at circumradius r: apex (0, -r), base corners (+-r*sqrt3/2, r/2)
        s3 = np.sqrt(3.0)
        mask = (y <= r / 2) & (y >= s3 * x - r) & (y >= -s3 * x - r)
    else:
        raise ValueError(f"unknown aperture shape {shape_tag!r}")
    return Aperture(mask.astype(float), shape_tag=shape_tag)


def is_point_symmetric(aperture: Aperture, tol: float = 1e-9) -> bool:
    """True iff the amplitude equals its point reflection about the FFT center."""
    a = aperture.amplitude
    return bool(np.max(np.abs(a - center_flip(a))) <= tol)


def checkerboard_encode(aperture: Aperture, slm_phase: np.ndarray,
                        checker_amplitude: float = np.pi) -> np.ndarray:
    """Emulate amplitude masking on a phase-only modulator.

    Inside the support the phase is untouched. Outside, alternate pixels get
    +-checker_amplitude/2 so the full peak-to-peak swing is checker_amplitude;
    at pi the cell-averaged field is exp(+j pi/2)/2 + exp(-j pi/2)/2 = 0, and
    the diffracted energy lands outside the passband of a Fourier-plane stop.
    """
    if not 0.0 < checker_amplitude <= np.pi:
        raise ValueError("checker_amplitude must be in (0, pi]")
    phase = np.asarray(slm_phase, dtype=float)
    if phase.shape != aperture.amplitude.shape:
        raise ValueError("phase and aperture shapes differ")
    n = phase.shape[0]
    ii, jj = np.mgrid[0:n, 0:n]
    checker = np.where((ii + jj) % 2 == 0, 0.5, -0.5) * checker_amplitude
    return np.where(aperture.support, phase, phase + checker)


def zero_order_leakage(aperture: Aperture, phase: np.ndarray) -> float:
    """Energy surviving outside the support after a quarter-band low pass.

    Models the relay's Fourier-plane stop: a uniform-amplitude SLM field
    exp(j phase) is low-pass filtered to the central quarter band (half-width
    n/8) and the remaining intensity is summed where the aperture is dark.
    Checkerboard-encoded phases should score far below unencoded ones.
    """
    phase = np.asarray(phase, dtype=float)
    n = phase.shape[0]
    u = np.exp(1j * phase)
    f = cfft2(u)
    c = n // 2
    band = np.zeros((n, n))
    band[c - n // 8:c + n // 8, c - n // 8:c + n // 8] = 1.0
    u_lp = cifft2(f * band)
    outside = ~aperture.support
    return float(np.sum(np.abs(u_lp[outside]) ** 2))
