"""Zernike phase basis over the aperture's circumscribing disk.

Modes carry RMS (Noll) normalization and are then re-orthonormalized against
the discrete masked inner product, because pixel sampling alone leaves Gram
errors of a few 1e-3 on a 256 grid. After that step a coefficient vector's
L2 norm equals the wavefront RMS over the disk to machine precision, and
least-squares fitting reduces to plain projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .fourier import check_grid_side


@dataclass(frozen=True)
class ZernikeBasis:
    """Orthonormal mode stack with its valid-domain disk."""

    modes: np.ndarray            # (count, n, n), zero outside mask
    indices: tuple               # (radial order, azimuthal frequency) pairs
    mask: np.ndarray             # bool disk where the modes live
    disk_radius_fraction: float
    basis_id: str

    @property
    def count(self) -> int:
        return self.modes.shape[0]

    @property
    def n(self) -> int:
        return self.modes.shape[1]


@dataclass(frozen=True)
class ZernikeCoeffs:
    """Coefficient vector in radians; L2 norm == wavefront RMS over the disk."""

    values: np.ndarray
    basis_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", v)

    @property
    def rms(self) -> float:
        return float(np.linalg.norm(self.values))


def _radial_poly(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in range((n - m) // 2 + 1):
        coef = ((-1) ** k * factorial(n - k)
                / (factorial(k) * factorial((n + m) // 2 - k)
                   * factorial((n - m) // 2 - k)))
        out += coef * rho ** (n - 2 * k)
    return out


def zernike_indices(max_radial_order: int) -> tuple:
    """(n, m) pairs for 1 <= n <= max order, piston excluded; 27 pairs at 6."""
    pairs = []
    for n in range(1, max_radial_order + 1):
        for m in range(-n, n + 1, 2):
            pairs.append((n, m))
    return tuple(pairs)


def build_basis(grid_n: int, disk_radius_fraction: float = 0.9,
                max_radial_order: int = 6) -> ZernikeBasis:
    """All non-piston modes with radial order up to max_radial_order,
    orthonormal under the discrete inner product sum(a*b)/mask_area."""
    check_grid_side(grid_n)
    if not 0.0 < disk_radius_fraction <= 1.0:
        raise ValueError("disk_radius_fraction must be in (0, 1]")
    if max_radial_order < 1:
        raise ValueError("max_radial_order must be >= 1")
    c = grid_n // 2
    yy, xx = np.mgrid[0:grid_n, 0:grid_n]
    radius = disk_radius_fraction * (grid_n / 2.0)
    rho = np.hypot(yy - c, xx - c) / radius
    theta = np.arctan2(yy - c, xx - c)
    mask = rho <= 1.0
    indices = zernike_indices(max_radial_order)
    modes = np.zeros((len(indices), grid_n, grid_n))
    for k, (n, m) in enumerate(indices):
        rad = _radial_poly(n, abs(m), rho)
        if m == 0:
            z = np.sqrt(n + 1.0) * rad
        elif m > 0:
            z = np.sqrt(2.0 * (n + 1)) * rad * np.cos(m * theta)
        else:
            z = np.sqrt(2.0 * (n + 1)) * rad * np.sin(-m * theta)
        modes[k] = np.where(mask, z, 0.0)
    # pixel sampling leaves the analytic Gram off by a few 1e-3; a Cholesky
    # whitening against the discrete product makes projection == least squares
    flat = modes[:, mask]
    gram = flat @ flat.T / flat.shape[1]
    lower = np.linalg.cholesky(gram)
    flat = np.linalg.solve(lower, flat)
    modes[:, mask] = flat
    modes[:, ~mask] = 0.0
    basis_id = f"zernike:{grid_n}:{disk_radius_fraction}:{max_radial_order}"
    return ZernikeBasis(modes=modes, indices=indices, mask=mask,
                        disk_radius_fraction=disk_radius_fraction,
                        basis_id=basis_id)


def _check_match(coeffs: ZernikeCoeffs, basis: ZernikeBasis) -> None:
    if coeffs.basis_id != basis.basis_id:
        raise ValueError(f"coeffs built for {coeffs.basis_id}, "
                         f"basis is {basis.basis_id}")
    if coeffs.values.size != basis.count:
        raise ValueError("coefficient count does not match basis")


def phase_from_coeffs(coeffs, basis: ZernikeBasis) -> np.ndarray:
    """phi = sum_k c_k Z_k; zero outside the disk.

    Accepts ZernikeCoeffs (validated against the basis identity) or a bare
    coefficient vector of matching length.
    """
    if hasattr(coeffs, "basis_id"):
        _check_match(coeffs, basis)
        values = coeffs.values
    else:
        values = np.asarray(coeffs, dtype=float)
        if values.size != basis.count:
            raise ValueError("coefficient count does not match basis")
    return np.tensordot(values, basis.modes, axes=1)


def sample_coeffs(seed: int, rms_target: float, basis: ZernikeBasis,
                  decay: float = 1.0) -> ZernikeCoeffs:
    """Gaussian draw with per-order variance (1+n)^(-decay), rescaled so the
    norm (hence wavefront RMS) hits rms_target exactly."""
    if rms_target <= 0:
        raise ValueError("rms_target must be > 0")
    if decay < 0:
        raise ValueError("decay must be >= 0")
    rng = np.random.default_rng(seed)
    std = np.array([(1.0 + n) ** (-decay / 2.0) for n, _ in basis.indices])
    v = rng.normal(0.0, 1.0, basis.count) * std
    v *= rms_target / np.linalg.norm(v)
    return ZernikeCoeffs(values=v, basis_id=basis.basis_id)


def fit_coeffs(phase: np.ndarray, basis: ZernikeBasis) -> ZernikeCoeffs:
    """Least-squares projection onto the basis over its disk."""
    phase = np.asarray(phase, dtype=float)
    if phase.shape != basis.mask.shape:
        raise ValueError(f"phase {phase.shape} does not match basis grid")
    flat = basis.modes[:, basis.mask]
    v = flat @ phase[basis.mask] / flat.shape[1]
    return ZernikeCoeffs(values=v, basis_id=basis.basis_id)


def phase_gradient(phase: np.ndarray, mask) -> tuple:
    """Forward differences (gx, gy) kept only where both pixels of a pair lie
    inside the mask; everything else is zero. mask may be an Aperture or a
    boolean array."""
    phase = np.asarray(phase, dtype=float)
    support = np.asarray(getattr(mask, "support", mask)) > 0
    if phase.shape != support.shape:
        raise ValueError("phase and mask shapes differ")
    gx = np.zeros_like(phase)
    gy = np.zeros_like(phase)
    both_x = support[:, :-1] & support[:, 1:]
    both_y = support[:-1, :] & support[1:, :]
    gx[:, :-1] = np.where(both_x, phase[:, 1:] - phase[:, :-1], 0.0)
    gy[:-1, :] = np.where(both_y, phase[1:, :] - phase[:-1, :], 0.0)
    return gx, gy
