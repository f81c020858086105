"""Forward-model contracts: pupils, PSFs, and image formation."""

import numpy as np
import pytest

from asymao.aperture import make_aperture
from asymao.fourier import center_flip
from asymao.optics import (ComplexField, Measurement, Psf, SceneImage,
                           conjugate_flip, corrected_psf, image_measurement,
                           measurement_kernel, psf_from_pupil,
                           pupil_function)


def tilt_phase(n, cycles_y, cycles_x):
    """Linear phase ramp in the centered convention."""
    idx = np.arange(n) - n // 2
    return 2 * np.pi * (cycles_y * idx[:, None] +
                        cycles_x * idx[None, :]) / n


def test_pupil_function_shapes_and_values():
    ap = make_aperture("disk", 32)
    phi = np.full((32, 32), 0.3)
    p = pupil_function(ap, phi)
    assert p.n == 32
    inside = ap.support
    assert np.allclose(p.grid[inside], ap.amplitude[inside] * np.exp(0.3j))
    with pytest.raises(ValueError):
        pupil_function(ap, np.zeros((16, 16)))


def test_psf_energy_equals_pupil_energy():
    # unitary transform: Parseval holds to rounding for any pad factor
    ap = make_aperture("triangle", 64)
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((64, 64))
    pupil = pupil_function(ap, phi)
    e_pupil = np.sum(np.abs(pupil.grid) ** 2)
    for pad in (1, 2, 4):
        psf = psf_from_pupil(pupil, pad)
        assert psf.kernel.shape == (64 * pad, 64 * pad)
        assert abs(psf.energy - e_pupil) / e_pupil <= 1e-10


def test_piston_leaves_psf_unchanged():
    ap = make_aperture("triangle", 32)
    rng = np.random.default_rng(2)
    phi = rng.standard_normal((32, 32))
    p0 = psf_from_pupil(pupil_function(ap, phi), 2).kernel
    p1 = psf_from_pupil(pupil_function(ap, phi + 1.7), 2).kernel
    assert np.max(np.abs(p0 - p1)) / p0.max() <= 1e-12


def test_tilt_shifts_psf():
    # one cycle of tilt across the pupil moves the padded PSF by pad pixels
    n, pad = 32, 2
    ap = make_aperture("disk", n)
    p0 = psf_from_pupil(pupil_function(ap, np.zeros((n, n))), pad).kernel
    p1 = psf_from_pupil(pupil_function(ap, tilt_phase(n, 0, 1)), pad).kernel
    assert np.max(np.abs(np.roll(p0, pad, axis=1) - p1)) / p0.max() <= 1e-9


@pytest.mark.parametrize("shape", ["disk", "rectangle"])
def test_conjugate_flip_psf_identical_on_symmetric_apertures(shape):
    n = 64
    ap = make_aperture(shape, n)
    rng = np.random.default_rng(4)
    phi = rng.standard_normal((n, n))
    p1 = psf_from_pupil(pupil_function(ap, phi), 2).kernel
    p2 = psf_from_pupil(pupil_function(ap, conjugate_flip(phi)), 2).kernel
    assert np.linalg.norm(p1 - p2) / np.linalg.norm(p1) <= 1e-9


def test_conjugate_flip_psf_differs_on_triangle():
    n = 64
    ap = make_aperture("triangle", n)
    # an even-parity phase is what the flip actually negates
    rng = np.random.default_rng(4)
    raw = rng.standard_normal((n, n))
    phi = 0.5 * (raw + center_flip(raw))
    p1 = psf_from_pupil(pupil_function(ap, phi), 2).kernel
    p2 = psf_from_pupil(pupil_function(ap, conjugate_flip(phi)), 2).kernel
    assert np.linalg.norm(p1 - p2) / np.linalg.norm(p1) >= 1e-2


def test_conjugate_flip_involution():
    rng = np.random.default_rng(6)
    phi = rng.standard_normal((16, 16))
    assert np.array_equal(conjugate_flip(conjugate_flip(phi)), phi)


def test_measurement_kernel_unit_sum_and_subsampling():
    n = 32
    ap = make_aperture("disk", n)
    psf = psf_from_pupil(pupil_function(ap, np.zeros((n, n))), 2)
    k = measurement_kernel(psf, (n, n))
    assert k.shape == (n, n)
    assert abs(k.sum() - 1.0) <= 1e-12
    # padded-grid subsampling is exact: compare against the native transform
    native = psf_from_pupil(pupil_function(ap, np.zeros((n, n))), 1)
    k_native = measurement_kernel(native, (n, n))
    assert np.max(np.abs(k - k_native)) <= 1e-12


def test_measurement_kernel_embeds_small_kernels():
    small = np.ones((5, 5))
    k = measurement_kernel(Psf(small, pad_factor=1), (16, 16))
    assert k.shape == (16, 16)
    assert abs(k.sum() - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        measurement_kernel(Psf(np.ones((24, 24)), pad_factor=1), (16, 16))


def conv_linear_oracle(x, k_centered):
    """Zero-padded spatial convolution, kernel origin at its center pixel."""
    n = x.shape[0]
    m = k_centered.shape[0]
    c = m // 2
    out = np.zeros_like(x, dtype=float)
    for oy in range(n):
        for ox in range(n):
            acc = 0.0
            for ky in range(m):
                for kx in range(m):
                    sy, sx = oy - (ky - c), ox - (kx - c)
                    if 0 <= sy < n and 0 <= sx < n:
                        acc += x[sy, sx] * k_centered[ky, kx]
            out[oy, ox] = acc
    return out


def test_linear_mode_matches_zero_padded_oracle():
    rng = np.random.default_rng(8)
    x = rng.uniform(0.0, 1.0, (8, 8))
    k = rng.uniform(0.0, 1.0, (3, 3))
    k /= k.sum()
    scene = SceneImage(x)
    got = image_measurement(scene, Psf(k, pad_factor=1), mode="linear").pixels
    want = conv_linear_oracle(x, np.asarray(
        measurement_kernel(Psf(k, pad_factor=1), (8, 8))))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_circular_mode_preserves_flux():
    scene = SceneImage(np.random.default_rng(9).uniform(0, 1, (32, 32)))
    ap = make_aperture("triangle", 32)
    psf = psf_from_pupil(pupil_function(ap, np.zeros((32, 32))), 2)
    y = image_measurement(scene, psf).pixels
    assert abs(y.sum() - scene.pixels.sum()) / scene.pixels.sum() <= 1e-9


def test_measurement_noise_is_seed_deterministic():
    scene = SceneImage(np.random.default_rng(10).uniform(0, 1, (32, 32)))
    psf = Psf(np.ones((5, 5)) / 25.0, pad_factor=1)
    a = image_measurement(scene, psf, noise_sigma=0.01, seed=42).pixels
    b = image_measurement(scene, psf, noise_sigma=0.01, seed=42).pixels
    c = image_measurement(scene, psf, noise_sigma=0.01, seed=43).pixels
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.min() >= 0.0


def test_measurement_rejects_bad_inputs():
    scene = SceneImage(np.zeros((16, 16)))
    psf = Psf(np.ones((3, 3)), pad_factor=1)
    with pytest.raises(ValueError):
        image_measurement(scene, psf, noise_sigma=-1.0)
    with pytest.raises(ValueError):
        image_measurement(scene, psf, mode="mirror")


def test_corrected_psf_cancels_at_exact_conjugate():
    n = 32
    ap = make_aperture("triangle", n)
    rng = np.random.default_rng(12)
    phi = rng.standard_normal((n, n)) * 0.5
    corrected = corrected_psf(ap, phi, -phi, 2).kernel
    bare = psf_from_pupil(pupil_function(ap, np.zeros((n, n))), 2).kernel
    assert np.max(np.abs(corrected - bare)) / bare.max() <= 1e-12


def test_field_and_scene_validation():
    with pytest.raises(ValueError):
        ComplexField(np.zeros((8, 12)))
    with pytest.raises(ValueError):
        ComplexField(np.full((8, 8), np.nan))
    with pytest.raises(ValueError):
        Psf(-np.ones((8, 8)))
    with pytest.raises(ValueError):
        Psf(np.zeros((8, 8)))
    s = SceneImage(np.linspace(-1, 2, 64).reshape(8, 8))
    assert s.pixels.min() >= 0.0 and s.pixels.max() <= 1.0
    assert Measurement(np.zeros((4, 4))).noise_sigma == 0.0
