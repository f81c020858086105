"""Aperture-conditioned coefficient space for stable phase fitting.

Zernike modes restricted to a small asymmetric support are nearly linearly
dependent (condition numbers in the 1e4 range for the triangle), so naive
least squares amplifies estimation noise into huge coefficients. This class
keeps only the singular directions whose in-support singular value is at
least tau times the largest, yielding an orthonormal set over the support.
All loop-internal estimation happens in this reduced space; results map back
to ordinary Zernike coefficients through the retained directions.
"""

from __future__ import annotations

import numpy as np

from ..zernike import ZernikeBasis, ZernikeCoeffs


class SupportBasis:
    """SVD-truncated span of a Zernike basis over an aperture support."""

    def __init__(self, basis: ZernikeBasis, support: np.ndarray,
                 tau: float = 0.03):
        support = np.asarray(getattr(support, "support", support)) > 0
        if support.shape != basis.mask.shape:
            raise ValueError("support grid does not match basis grid")
        if not 0.0 < tau < 1.0:
            raise ValueError("tau must be in (0, 1)")
        self.basis = basis
        self.support = support
        n_sup = int(support.sum())
        b = basis.modes[:, support] / np.sqrt(n_sup)
        u, s, _ = np.linalg.svd(b, full_matrices=False)
        rank = int(np.sum(s >= tau * s[0]))
        self._u = u[:, :rank]
        self._s = s[:rank]
        self.rank = rank
        # full-grid direction maps, orthonormal under sum(a*b)/n_sup
        self.directions = np.tensordot((self._u / self._s).T, basis.modes,
                                       axes=(1, 0))

    def fit(self, phase: np.ndarray) -> np.ndarray:
        """Project a phase map onto the retained directions."""
        return (self.directions[:, self.support] @ phase[self.support]
                / self.support.sum())

    def phase(self, a: np.ndarray) -> np.ndarray:
        """Full-grid phase for reduced coefficients a."""
        return np.tensordot(np.asarray(a, dtype=float), self.directions,
                            axes=(0, 0))

    def to_coeffs(self, a: np.ndarray) -> ZernikeCoeffs:
        """Reduced coefficients -> Zernike coefficients (retained span only)."""
        return ZernikeCoeffs(self._u @ (np.asarray(a, dtype=float) / self._s),
                             self.basis.basis_id)

    def from_coeffs(self, coeffs: ZernikeCoeffs) -> np.ndarray:
        """Zernike coefficients -> reduced coefficients (drops the null span)."""
        return self._s * (self._u.T @ coeffs.values)
