"""Phase retrieval from PSF intensity under a known aperture.

Two stages with one convention: support-constrained iterative Fourier
retrieval (error-reduction warmup, then hybrid input-output cycles) from
multiple seeded random starts, followed by optional parametric refinement of
Zernike coefficients against the PSF with a monotone line search. Estimates
are reported tilt- and piston-free; kernel translation is handled separately
by centroid registration.

Everything runs on the native pupil grid: with the aperture support inside
the central half-grid, the native-grid PSF equals the exact camera-pitch
subsample of the padded focal grid, which makes retrieval 4x cheaper than
working padded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.ma as ma
import scipy.fft as spfft
from skimage.restoration import unwrap_phase

from ..aperture import Aperture, is_point_symmetric
from ..fourier import cfft2, cifft2, embed_center, subsample_center
from ..optics import Psf
from ..zernike import ZernikeBasis, ZernikeCoeffs, build_basis, fit_coeffs, phase_from_coeffs
from .optimize import armijo_minimize


@dataclass(frozen=True)
class PhaseEstimate:
    """Tilt/piston-free phase with its coefficient projection and misfit."""

    phase: np.ndarray
    coeffs: ZernikeCoeffs
    residual: float
    ambiguous: bool = False
    converged: bool = True


def remove_tilt_piston(phase: np.ndarray, aperture) -> np.ndarray:
    """Subtract the support-restricted least-squares piston and tip/tilt.

    Output is zero outside the support; applying twice equals applying once.
    """
    phase = np.asarray(phase, dtype=float)
    support = np.asarray(getattr(aperture, "support", aperture)) > 0
    n = phase.shape[0]
    c = n // 2
    i = np.arange(n, dtype=float)
    y = np.broadcast_to((i - c)[:, None], (n, n))
    x = np.broadcast_to((i - c)[None, :], (n, n))
    design = np.stack([np.ones(int(support.sum())), x[support], y[support]], 1)
    coef, *_ = np.linalg.lstsq(design, phase[support], rcond=None)
    return (phase - (coef[0] + coef[1] * x + coef[2] * y)) * support


def register_centroid(kernel: np.ndarray) -> np.ndarray:
    """Roll a kernel so its center of mass sits on the center pixel."""
    ks = kernel.shape[0]
    yy, xx = np.mgrid[0:ks, 0:ks]
    total = kernel.sum()
    cy = (kernel * yy).sum() / total
    cx = (kernel * xx).sum() / total
    return np.roll(kernel, (int(round(ks // 2 - cy)), int(round(ks // 2 - cx))),
                   (0, 1))


def _native_target(psf: Psf, n: int):
    """Map any PSF onto the native grid; small kernels come back with the
    comparison box they occupy (their outside is unknown, not zero)."""
    k = psf.kernel
    side = k.shape[0]
    if psf.pad_factor > 1 and side == n * psf.pad_factor:
        return subsample_center(k, psf.pad_factor), None
    if side == n:
        return k.copy(), None
    if side < n:
        lo = n // 2 - side // 2
        box = (lo, lo + side)
        return embed_center(register_centroid(k), n), box
    raise ValueError(f"psf grid {k.shape} larger than pupil grid {n}")


def magnitude_misfit(aperture: Aperture, phase: np.ndarray, psf: Psf) -> float:
    """Relative Fourier-magnitude misfit of a candidate phase against a PSF.

    This is the quantity retrieval minimizes; for point-symmetric apertures
    it is identical at a phase and its conjugate flip.
    """
    a = aperture.amplitude
    target, _ = _native_target(psf, aperture.n)
    m = np.sqrt(np.maximum(target, 0.0))
    m *= np.sqrt((a ** 2).sum() / (m ** 2).sum())
    g = np.abs(cfft2(a * np.exp(1j * np.asarray(phase, dtype=float))))
    return float(np.sum((g - m) ** 2) / np.sum(m ** 2))


def retrieve_phase_iterative(psf: Psf, aperture: Aperture,
                             basis: ZernikeBasis | None = None,
                             n_starts: int = 8, seed: int = 0,
                             beta: float = 0.9, warmup: int = 50,
                             cycles: int = 5, hio_steps: int = 40,
                             er_steps: int = 10, conv_tol: float = 1e-10,
                             stagnation_window: int = 30,
                             stagnation_rel: float = 1e-3,
                             misfit_tol: float = 1e-2) -> PhaseEstimate:
    """Support-constrained ER/HIO phase retrieval with multi-start selection.

    The PSF is rescaled to the aperture's energy before inversion. The best
    start by relative magnitude misfit wins; its phase is unwrapped over the
    support and normalized tilt/piston-free. Symmetric apertures flag the
    result ambiguous: the conjugate-flipped twin fits equally well.
    """
    n = aperture.n
    a = aperture.amplitude
    target, _ = _native_target(psf, n)
    m = np.sqrt(np.maximum(target, 0.0))
    energy = (m ** 2).sum()
    if energy <= 0:
        raise ValueError("psf has zero energy")
    m *= np.sqrt((a ** 2).sum() / energy)

    # corner-origin layout for the inner loop: plain fft2, no shifting per step
    m_c = spfft.ifftshift(m)
    a_c = spfft.ifftshift(a)
    sup_c = a_c > 0
    rng = np.random.default_rng(seed)
    schedule = ["ER"] * warmup + (["HIO"] * hio_steps + ["ER"] * er_steps) * cycles
    best_field, best_mis = None, np.inf
    m_norm = float(np.sum(m_c ** 2))

    for _ in range(n_starts):
        g = a_c * np.exp(1j * rng.uniform(-np.pi, np.pi, (n, n)))
        history = []
        for step in schedule:
            gf = spfft.fft2(g, norm="ortho")
            mis = float(np.sum((np.abs(gf) - m_c) ** 2) / m_norm)
            history.append(mis)
            gp = spfft.ifft2(m_c * np.exp(1j * np.angle(gf)), norm="ortho")
            inside = a_c * np.exp(1j * np.angle(gp))
            g = np.where(sup_c, inside, 0.0 if step == "ER" else g - beta * gp)
            if mis < conv_tol:
                break
            if (len(history) > stagnation_window
                    and history[-stagnation_window - 1] - mis
                    < stagnation_rel * history[-stagnation_window - 1]):
                break
        # one magnitude projection + support projection, then score
        gf = spfft.fft2(g, norm="ortho")
        gp = spfft.ifft2(m_c * np.exp(1j * np.angle(gf)), norm="ortho")
        g = np.where(sup_c, a_c * np.exp(1j * np.angle(gp)), 0.0)
        mis = float(np.sum((np.abs(spfft.fft2(g, norm="ortho")) - m_c) ** 2)
                    / m_norm)
        if mis < best_mis:
            best_mis, best_field = mis, g
        if best_mis < conv_tol:
            break

    wrapped = np.angle(spfft.fftshift(best_field))
    support = aperture.support
    unwrapped = np.asarray(
        unwrap_phase(ma.array(wrapped, mask=~support)).filled(0.0))
    phase = remove_tilt_piston(unwrapped, aperture)
    if basis is None:
        basis = build_basis(n)
    return PhaseEstimate(phase=phase, coeffs=fit_coeffs(phase, basis),
                         residual=best_mis,
                         ambiguous=is_point_symmetric(aperture),
                         converged=bool(best_mis <= misfit_tol))


def _psf_objective(aperture: Aperture, basis: ZernikeBasis, target: np.ndarray,
                   box) -> callable:
    """Squared-L2 PSF misfit over the comparison region, energy-normalized
    on that region, with its analytic coefficient gradient."""
    a = aperture.amplitude
    if box is None:
        region = slice(None), slice(None)
    else:
        region = slice(box[0], box[1]), slice(box[0], box[1])
    t = np.zeros_like(target)
    t[region] = target[region] / target[region].sum()
    mask = np.zeros_like(target)
    mask[region] = 1.0

    def fun_grad(c):
        p = a * np.exp(1j * np.tensordot(c, basis.modes, axes=(0, 0)))
        g = cfft2(p)
        h = np.abs(g) ** 2
        s = float(h[region].sum())
        hb = h * mask / s
        d = hb - t
        f = float(np.sum(d ** 2))
        q = float(np.sum(d * hb))
        w = (2.0 / s) * (d - q) * mask
        r = cifft2(w * g)
        grad = -2.0 * np.tensordot(basis.modes, np.imag(p * np.conj(r)),
                                   axes=([1, 2], [0, 1]))
        return f, grad

    return fun_grad


def refine_phase_zernike(psf: Psf, aperture: Aperture, init: ZernikeCoeffs,
                         basis: ZernikeBasis | None = None,
                         iters: int = 120) -> PhaseEstimate:
    """Descend ||psf(phase(c)) - psf_target||^2 over Zernike coefficients.

    Both PSFs are compared at the native camera pitch, normalized over the
    comparison region; small-kernel targets are compared inside their own box
    only, since beyond it their values are unknown rather than zero. The line
    search is monotone, so the objective never increases.
    """
    if basis is None:
        basis = build_basis(aperture.n)
    if init.basis_id != basis.basis_id:
        raise ValueError("init coefficients do not match basis")
    target, box = _native_target(psf, aperture.n)
    fun_grad = _psf_objective(aperture, basis, target, box)
    c, f, _, progressed = armijo_minimize(fun_grad, init.values, iters)
    coeffs = ZernikeCoeffs(c, basis.basis_id)
    phase = remove_tilt_piston(phase_from_coeffs(coeffs, basis), aperture)
    return PhaseEstimate(phase=phase, coeffs=coeffs, residual=f,
                         ambiguous=is_point_symmetric(aperture),
                         converged=bool(progressed or f <= 1e-8))
