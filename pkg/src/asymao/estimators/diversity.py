"""Joint phase estimation from several frames with known SLM offsets.

Once the loop has applied at least one correction, it owns multiple
measurements of the same static scene through different, known phase offsets.
For fixed aberration coefficients the unknown scene drops out per frequency
in closed form (its Wiener solution is plugged back in), leaving an objective
over coefficients alone:

    f(a) = sum_freq [ sum_k |Y_k|^2 - |sum_k conj(U_k) Y_k|^2 / (sum_k |U_k|^2 + delta) ]

with U_k the transfer function of the unit-sum camera-pitch PSF for
phase(a) + slm_k. The gradient treats the plugged-in scene as constant
(envelope theorem) and backpropagates through PSF normalization, the
camera-pitch subsampling, and the pupil transform. This multi-frame stage is
what pins down kernel details single-frame blind estimation cannot resolve.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as spfft

from ..aperture import Aperture
from ..fourier import cfft2
from .optimize import armijo_minimize
from .support import SupportBasis


def _padded_pupil_psf(aperture: Aperture, phase: np.ndarray, pad_factor: int):
    """Padded pupil field, its transform, and the native-pitch PSF sample."""
    n = aperture.n
    big = n * pad_factor
    o = (big - n) // 2
    p = np.zeros((big, big), complex)
    p[o:o + n, o:o + n] = aperture.amplitude * np.exp(1j * phase)
    g = cfft2(p)
    h = np.abs(g) ** 2
    return p, g, h[::pad_factor, ::pad_factor].copy()


def diversity_objective(sb: SupportBasis, aperture: Aperture, a: np.ndarray,
                        measurements_f: list, slm_phases: list,
                        pad_factor: int = 2, delta: float = 1e-6):
    """Objective and gradient in the support-basis coefficient space.

    measurements_f holds corner-origin unnormalized FFTs of the frames, in
    the same order as slm_phases.
    """
    n = aperture.n
    big = n * pad_factor
    o = (big - n) // 2
    phi = sb.phase(a)
    frames = len(measurements_f)
    transfer, caches = [], []
    for k in range(frames):
        p, g, h_native = _padded_pupil_psf(aperture, phi + slm_phases[k],
                                           pad_factor)
        s = h_native.sum()
        u = h_native / s
        transfer.append(spfft.fft2(spfft.ifftshift(u)))
        caches.append((p, g, s, u))
    s2 = sum(np.abs(t) ** 2 for t in transfer) + delta
    b = sum(np.conj(transfer[k]) * measurements_f[k] for k in range(frames))
    x_hat = b / s2

    f = delta * float(np.sum(np.abs(x_hat) ** 2))
    grad = np.zeros(sb.rank)
    for k in range(frames):
        r_k = x_hat * transfer[k] - measurements_f[k]
        f += float(np.sum(np.abs(r_k) ** 2))
        du = np.conj(x_hat) * r_k
        p, g, s, u = caches[k]
        # back through fft2 o ifftshift (adjoint of unnormalized fft2 is
        # size * ifft2), then through the unit-sum normalization
        d = spfft.fftshift(spfft.ifft2(2.0 * du).real) * u.size
        dh_native = (d - float(np.sum(d * u))) / s
        dh = np.zeros((big, big))
        dh[::pad_factor, ::pad_factor] = dh_native
        dphi = -2.0 * np.imag(p * cfft2(dh * np.conj(g)))[o:o + n, o:o + n]
        grad += np.tensordot(sb.directions, dphi, axes=([1, 2], [0, 1]))
    return f, grad


def refine_phase_diversity(sb: SupportBasis, aperture: Aperture,
                           measurements: list, slm_phases: list,
                           inits: list, pad_factor: int = 2,
                           iters: int = 60, delta: float = 1e-6):
    """Minimize the multi-frame objective from each init; keep the best.

    Returns (coefficients, objective). measurements may be Measurement
    objects or raw frames.
    """
    if len(measurements) != len(slm_phases):
        raise ValueError("one SLM phase per measurement required")
    if len(measurements) < 2:
        raise ValueError("diversity needs at least two frames")
    measurements_f = [
        spfft.fft2(np.asarray(getattr(m, "pixels", m), dtype=float))
        for m in measurements]

    def fun_grad(a):
        return diversity_objective(sb, aperture, a, measurements_f,
                                   slm_phases, pad_factor, delta)

    best = None
    for a0 in inits:
        a_opt, f_opt, _, _ = armijo_minimize(fun_grad, np.asarray(a0, float),
                                             iters)
        if best is None or f_opt < best[1]:
            best = (a_opt, f_opt)
    return best
