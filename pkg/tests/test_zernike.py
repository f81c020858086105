"""Zernike basis contracts, checked against independent integration."""

import numpy as np
import pytest

from asymao.zernike import (ZernikeCoeffs, build_basis, fit_coeffs,
                            phase_from_coeffs, phase_gradient, sample_coeffs,
                            zernike_indices)


def analytic_mode(n, m, rho, theta):
    """Textbook RMS-normalized Zernike polynomial, written independently of
    the package's recursion."""
    from math import factorial
    rad = np.zeros_like(rho)
    for k in range((n - abs(m)) // 2 + 1):
        rad += ((-1) ** k * factorial(n - k)
                / (factorial(k) * factorial((n + abs(m)) // 2 - k)
                   * factorial((n - abs(m)) // 2 - k))) \
            * rho ** (n - 2 * k)
    if m == 0:
        return np.sqrt(n + 1.0) * rad
    if m > 0:
        return np.sqrt(2.0 * (n + 1)) * rad * np.cos(m * theta)
    return np.sqrt(2.0 * (n + 1)) * rad * np.sin(-m * theta)


def test_mode_count_and_indices():
    assert len(zernike_indices(6)) == 27
    assert zernike_indices(1) == ((1, -1), (1, 1))
    basis = build_basis(64, 0.9, 6)
    assert basis.count == 27
    assert basis.modes.shape == (27, 64, 64)
    # piston is deliberately absent
    assert (0, 0) not in basis.indices


def test_gram_matrix_is_identity():
    basis = build_basis(128, 0.9, 6)
    flat = basis.modes[:, basis.mask]
    gram = flat @ flat.T / flat.shape[1]
    assert np.max(np.abs(gram - np.eye(basis.count))) <= 1e-3


def test_modes_match_analytic_zernike_polynomials():
    # the whitening step may only nudge each mode by the pixelization error
    n = 128
    basis = build_basis(n, 0.9, 6)
    c = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    radius = 0.9 * n / 2.0
    rho = np.hypot(yy - c, xx - c) / radius
    theta = np.arctan2(yy - c, xx - c)
    for k, (order, azim) in enumerate(basis.indices):
        want = np.where(basis.mask, analytic_mode(order, azim, rho, theta), 0)
        num = np.sqrt(np.mean((basis.modes[k] - want)[basis.mask] ** 2))
        assert num <= 0.05, (order, azim, num)


def test_tilt_mode_is_linear_in_x():
    basis = build_basis(64, 0.9, 1)
    k = basis.indices.index((1, 1))
    mode = basis.modes[k]
    c = 32
    row = mode[c, basis.mask[c]]
    x = np.arange(64)[basis.mask[c]] - c
    fit = np.polyfit(x, row, 1)
    assert abs(fit[1]) <= 1e-9                      # no offset
    resid = row - np.polyval(fit, x)
    assert np.max(np.abs(resid)) <= 1e-9            # exactly linear


def test_coeff_norm_equals_wavefront_rms():
    basis = build_basis(128, 0.9, 6)
    coeffs = sample_coeffs(3, 1.3, basis)
    phi = phase_from_coeffs(coeffs, basis)
    rms = np.sqrt(np.mean(phi[basis.mask] ** 2))
    assert abs(rms - coeffs.rms) / coeffs.rms <= 1e-10
    assert abs(coeffs.rms - 1.3) <= 1e-12


def test_unit_defocus_has_unit_rms():
    basis = build_basis(128, 0.9, 2)
    values = np.zeros(basis.count)
    values[basis.indices.index((2, 0))] = 1.0
    phi = phase_from_coeffs(values, basis)
    rms = np.sqrt(np.mean(phi[basis.mask] ** 2))
    assert abs(rms - 1.0) <= 0.01


def test_phase_from_coeffs_is_linear():
    basis = build_basis(64, 0.9, 4)
    rng = np.random.default_rng(5)
    a = rng.standard_normal(basis.count)
    b = rng.standard_normal(basis.count)
    lhs = phase_from_coeffs(2.0 * a - 3.0 * b, basis)
    rhs = 2.0 * phase_from_coeffs(a, basis) - 3.0 * phase_from_coeffs(b, basis)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_fit_round_trip():
    basis = build_basis(128, 0.9, 6)
    coeffs = sample_coeffs(11, 0.8, basis)
    got = fit_coeffs(phase_from_coeffs(coeffs, basis), basis)
    assert np.max(np.abs(got.values - coeffs.values)) <= 1e-6


def test_fit_tolerates_piston_offsets():
    # modes are only zero-mean up to pixelization, so a large piston leaks
    # into the fit at the 1e-3 level, not machine precision
    basis = build_basis(128, 0.9, 3)
    coeffs = sample_coeffs(7, 1.0, basis)
    phi = phase_from_coeffs(coeffs, basis)
    got = fit_coeffs(phi + 2.5, basis)
    assert np.max(np.abs(got.values - coeffs.values)) <= 0.01


def test_sample_coeffs_determinism_and_rescale():
    basis = build_basis(64, 0.9, 6)
    a = sample_coeffs(21, 1.0, basis)
    b = sample_coeffs(21, 1.0, basis)
    c = sample_coeffs(22, 1.0, basis)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    # scaling the target scales the draw exactly
    d = sample_coeffs(21, 2.0, basis)
    assert np.max(np.abs(d.values - 2.0 * a.values)) <= 1e-12


def test_sample_coeffs_decay_zero_is_isotropic():
    # with no decay every mode has equal variance 1/count on the unit sphere;
    # Monte Carlo with 600 draws pins each to about +-20%
    basis = build_basis(64, 0.9, 6)
    draws = np.array([sample_coeffs(seed, 1.0, basis, decay=0.0).values
                      for seed in range(600)])
    var = np.var(draws, axis=0)
    expected = 1.0 / basis.count
    assert np.all(np.abs(var - expected) <= 0.3 * expected)


def test_sample_coeffs_decay_suppresses_high_orders():
    basis = build_basis(64, 0.9, 6)
    draws = np.array([sample_coeffs(seed, 1.0, basis, decay=2.0).values
                      for seed in range(400)])
    var = np.var(draws, axis=0)
    order = np.array([n for n, _ in basis.indices])
    low = var[order == 1].mean()
    high = var[order == 6].mean()
    assert high < low / 4.0


def test_phase_gradient_matches_difference_oracle():
    rng = np.random.default_rng(9)
    phase = rng.standard_normal((32, 32))
    mask = np.zeros((32, 32), dtype=bool)
    mask[8:24, 8:24] = True
    gx, gy = phase_gradient(phase, mask)
    for _ in range(200):
        y, x = rng.integers(0, 31, 2)
        if mask[y, x] and mask[y, x + 1]:
            assert gx[y, x] == phase[y, x + 1] - phase[y, x]
        else:
            assert gx[y, x] == 0.0
        if mask[y, x] and mask[y + 1, x]:
            assert gy[y, x] == phase[y + 1, x] - phase[y, x]
        else:
            assert gy[y, x] == 0.0


def test_validation_errors():
    basis = build_basis(64, 0.9, 2)
    other = build_basis(64, 0.9, 3)
    with pytest.raises(ValueError):
        phase_from_coeffs(ZernikeCoeffs(np.zeros(basis.count),
                                        basis.basis_id), other)
    with pytest.raises(ValueError):
        phase_from_coeffs(np.zeros(basis.count + 1), basis)
    with pytest.raises(ValueError):
        build_basis(63, 0.9, 2)
    with pytest.raises(ValueError):
        build_basis(64, 1.5, 2)
    with pytest.raises(ValueError):
        build_basis(64, 0.9, 0)
    with pytest.raises(ValueError):
        sample_coeffs(0, -1.0, basis)
    with pytest.raises(ValueError):
        sample_coeffs(0, 1.0, basis, decay=-0.5)
    with pytest.raises(ValueError):
        fit_coeffs(np.zeros((32, 32)), basis)
