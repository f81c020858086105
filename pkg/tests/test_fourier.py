"""Transform-layer checks against brute-force oracles."""

import numpy as np
import pytest

from asymao.fourier import (cfft2, check_grid_side, cifft2, center_flip,
                            circular_convolve, crop_center, embed_center,
                            subsample_center)


def dft2_oracle(x):
    """Direct O(n^4) centered unitary DFT; the FFT must match it exactly
    up to rounding."""
    n = x.shape[0]
    idx = np.arange(n) - n // 2
    out = np.zeros((n, n), dtype=complex)
    for ky in range(n):
        for kx in range(n):
            fy, fx = idx[ky], idx[kx]
            ph = np.exp(-2j * np.pi * (fy * idx[:, None] +
                                       fx * idx[None, :]) / n)
            out[ky, kx] = (x * ph).sum()
    return out / n


@pytest.mark.parametrize("n", [8, 16, 32])
def test_cfft2_matches_direct_dft(n):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    got = cfft2(x)
    want = dft2_oracle(x)
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) <= 1e-10


def test_cfft2_round_trip_and_parseval():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    X = cfft2(x)
    assert np.max(np.abs(cifft2(X) - x)) <= 1e-12
    e_in = np.sum(np.abs(x) ** 2)
    e_out = np.sum(np.abs(X) ** 2)
    assert abs(e_in - e_out) / e_in <= 1e-10


def test_cfft2_centered_conventions():
    # a constant transforms to a single spike at the center bin
    n = 16
    X = cfft2(np.ones((n, n)))
    assert abs(X[n // 2, n // 2] - n) <= 1e-12
    off = X.copy()
    off[n // 2, n // 2] = 0
    assert np.max(np.abs(off)) <= 1e-12


def test_center_flip_is_involution_and_fixes_center():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((16, 16))
    assert np.array_equal(center_flip(center_flip(a)), a)
    assert center_flip(a)[8, 8] == a[8, 8]
    # index k maps to (-k) mod n
    assert center_flip(a)[3, 5] == a[(-3) % 16, (-5) % 16]


def test_check_grid_side_rejects_bad_sizes():
    for bad in (0, 4, 7, 12, 100):
        with pytest.raises(ValueError):
            check_grid_side(bad)
    for ok in (8, 16, 256):
        check_grid_side(ok)


def test_embed_crop_round_trip():
    rng = np.random.default_rng(5)
    small = rng.standard_normal((7, 7))
    big = embed_center(small, 16)
    assert np.array_equal(crop_center(big, 7), small)
    # center pixel of the small block lands on the grid center
    assert big[16 // 2, 16 // 2] == small[3, 3]
    with pytest.raises(ValueError):
        embed_center(np.zeros((20, 20)), 16)
    with pytest.raises(ValueError):
        crop_center(np.zeros((8, 8)), 9)


def test_subsample_keeps_center():
    a = np.zeros((16, 16))
    a[8, 8] = 1.0
    s = subsample_center(a, 2)
    assert s.shape == (8, 8)
    assert s[4, 4] == 1.0


def conv_circular_oracle(x, k_centered):
    """Nested-loop circular convolution with the kernel's origin at n//2."""
    n = x.shape[0]
    c = n // 2
    out = np.zeros_like(x, dtype=float)
    for oy in range(n):
        for ox in range(n):
            acc = 0.0
            for ky in range(n):
                for kx in range(n):
                    acc += x[(oy - (ky - c)) % n, (ox - (kx - c)) % n] \
                        * k_centered[ky, kx]
            out[oy, ox] = acc
    return out


def test_circular_convolve_matches_nested_loops():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((8, 8))
    k = rng.standard_normal((8, 8))
    got = circular_convolve(x, k)
    want = conv_circular_oracle(x, k)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_circular_convolve_delta_is_identity():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((16, 16))
    delta = np.zeros((16, 16))
    delta[8, 8] = 1.0
    assert np.max(np.abs(circular_convolve(x, delta) - x)) <= 1e-12


def test_circular_convolve_is_linear():
    rng = np.random.default_rng(17)
    x1 = rng.standard_normal((16, 16))
    x2 = rng.standard_normal((16, 16))
    k = rng.standard_normal((16, 16))
    lhs = circular_convolve(2.5 * x1 - 0.5 * x2, k)
    rhs = 2.5 * circular_convolve(x1, k) - 0.5 * circular_convolve(x2, k)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
