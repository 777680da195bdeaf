import numpy as np
import pytest

from rflab.fields import ModelParams, PeriodicGrid
from rflab.riesz import build_kernel
from rflab.thermo import (
    estimate_c_star,
    fit_bound_constants,
    h_energy,
    h_prime,
    h_relative,
    p_relative,
    pressure,
    pressure_prime,
    relative_interaction,
    verify_bound_constants,
)

from conftest import smooth_random_field


def test_h_energy_spot_values():
    assert h_energy(0.0, 2.0) == 0.0
    assert h_energy(1.0, 2.0) == 1.0
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    oracle = float(mp.mpf(2) ** mp.mpf("1.5") / (mp.mpf("1.5") - 1))
    assert h_energy(2.0, 1.5) == pytest.approx(oracle, rel=1e-14)


def test_h_prime_is_derivative_of_h():
    quad = pytest.importorskip("scipy.integrate").quad
    for gamma in (1.4, 2.0, 3.0):
        val, _ = quad(lambda s: h_prime(s, gamma), 0.0, 2.0)
        assert val == pytest.approx(float(h_energy(2.0, gamma)), rel=1e-9)
        valp, _ = quad(lambda s: pressure_prime(s, gamma), 0.0, 2.0)
        assert valp == pytest.approx(float(pressure(2.0, gamma)), rel=1e-9)


def test_relative_quantities_at_gamma_two():
    # gamma = 2: h(rho|rho_bar) = (rho - rho_bar)^2 and p = h there
    assert h_relative(2.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-14)
    assert p_relative(2.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-14)
    rng = np.random.default_rng(5)
    rho = rng.uniform(0.0, 3.0, size=50)
    rho_bar = rng.uniform(0.2, 3.0, size=50)
    assert np.allclose(h_relative(rho, rho_bar, 2.0), (rho - rho_bar) ** 2, rtol=1e-12)


def test_h_relative_matches_integral_form():
    # Bregman gap equals int_{rho_bar}^{rho} (h'(s) - h'(rho_bar)) ds
    quad = pytest.importorskip("scipy.integrate").quad
    gamma = 1.4
    rng = np.random.default_rng(9)
    for _ in range(10):
        rho = float(rng.uniform(0.0, 3.0))
        rho_bar = float(rng.uniform(0.3, 2.5))
        val, _ = quad(lambda s: h_prime(s, gamma) - h_prime(rho_bar, gamma), rho_bar, rho)
        assert float(h_relative(rho, rho_bar, gamma)) == pytest.approx(val, rel=1e-9, abs=1e-12)


def test_p_relative_identity_with_h_relative():
    # p(rho|rho_bar) = (gamma - 1) h(rho|rho_bar), to rounding measured
    # against the size of the assembled terms
    rng = np.random.default_rng(13)
    for _ in range(1000):
        gamma = float(rng.uniform(1.05, 3.0))
        rho = float(rng.uniform(0.0, 5.0))
        rho_bar = float(rng.uniform(1e-3, 5.0))
        pr = float(p_relative(rho, rho_bar, gamma))
        hr = float(h_relative(rho, rho_bar, gamma))
        scale = pressure(rho, gamma) + pressure(rho_bar, gamma) \
            + abs(pressure_prime(rho_bar, gamma) * (rho - rho_bar))
        assert abs(pr - (gamma - 1.0) * hr) <= 1e-12 * float(scale)


def test_h_relative_nonnegative_and_zero_on_diagonal():
    rng = np.random.default_rng(17)
    gammas = rng.uniform(1.05, 3.5, size=200)
    rhos = rng.uniform(0.0, 4.0, size=200)
    bars = rng.uniform(1e-3, 4.0, size=200)
    for gamma, rho, rho_bar in zip(gammas, rhos, bars):
        assert float(h_relative(rho, rho_bar, gamma)) >= 0.0
        assert float(h_relative(rho_bar, rho_bar, gamma)) == 0.0


def test_pair_validation_errors():
    with pytest.raises(ValueError):
        h_relative(-0.1, 1.0, 2.0)
    with pytest.raises(ValueError):
        h_relative(1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        p_relative(1.0, -1.0, 2.0)


def test_fit_constants_quadratic_pressure():
    # gamma = 2 makes both ratios identically one, so the fit returns 0.95
    c = fit_bound_constants(gamma=2.0, delta=0.5, Mbar=1.0)
    assert c.R == 2.0
    assert c.C1 == pytest.approx(0.95, rel=1e-12)
    assert c.C2 == pytest.approx(0.95, rel=1e-12)
    assert c.C1 >= 0.95 - 1e-12
    assert verify_bound_constants(c)


def test_fit_constants_general_gamma():
    c = fit_bound_constants(gamma=1.5, delta=0.5, Mbar=2.0)
    assert 0 < c.C1 < np.inf and 0 < c.C2 < np.inf
    assert verify_bound_constants(c)
    # the certified lower bounds hold on fresh random samples in each zone
    rng = np.random.default_rng(21)
    for _ in range(500):
        rho_bar = float(rng.uniform(c.delta, c.Mbar))
        rho = float(rng.uniform(0.0, c.R))
        gap = float(h_relative(rho, rho_bar, c.gamma))
        assert gap >= c.C1 * (rho - rho_bar) ** 2 - 1e-13
        rho_t = float(rng.uniform(c.R * 1.0000001, 100.0 * c.R))
        gap_t = float(h_relative(rho_t, rho_bar, c.gamma))
        assert gap_t >= c.C2 * (rho_t - rho_bar) ** c.gamma - 1e-13


def test_fit_constants_input_validation():
    with pytest.raises(ValueError):
        fit_bound_constants(gamma=2.0, delta=2.0, Mbar=1.0)
    with pytest.raises(ValueError):
        fit_bound_constants(gamma=1.0, delta=0.5, Mbar=1.0)
    with pytest.raises(ValueError):
        fit_bound_constants(gamma=2.0, delta=0.0, Mbar=1.0)


def _mode_pair(grid, k, amp=0.1):
    """(rho, rho_bar) differing by one Fourier mode around the flat state."""
    x = grid.centers()
    wave = np.ones(grid.shape)
    for a in range(grid.dim):
        if k[a]:
            wave = wave * np.cos(2 * np.pi * k[a] * x[a] / grid.length_per_axis)
    return 1.0 + amp * wave, np.ones(grid.shape)


def _random_pairs(grid, rng, n, amp=0.2):
    out = []
    for _ in range(n):
        rho_bar = 1.0 + 0.5 * smooth_random_field(grid, rng, amp=0.5)
        rho = rho_bar * (1.0 + amp * smooth_random_field(grid, rng, amp=1.0))
        out.append((np.clip(rho, 1e-6, None), rho_bar))
    return out


def test_estimate_c_star_certificate_and_holdout():
    grid = PeriodicGrid(dim=2, cells_per_axis=16)
    params = ModelParams(gamma=2.0, alpha=-0.5, sign=1)
    kernel = build_kernel(params, grid)
    rng = np.random.default_rng(25)

    # seed the fit ensemble with the spectrally extremal modes so the
    # empirical maximum is the true operator bound at gamma = 2
    lam_ops = kernel.symbol * grid.cell_volume
    flat = np.unravel_index(int(np.argmax(np.abs(lam_ops))), grid.shape)
    fit_pairs = [_mode_pair(grid, (0, 0)), _mode_pair(grid, flat),
                 _mode_pair(grid, (1, 0)), _mode_pair(grid, (1, 1))]
    fit_pairs += _random_pairs(grid, rng, 12)

    cert = estimate_c_star(fit_pairs, params, grid, kernel)
    assert cert.c_star_emp == pytest.approx(float(np.max(np.abs(lam_ops))), rel=1e-10)
    assert cert.kappa_max == pytest.approx(2.0 / cert.c_star_emp, rel=1e-14)
    assert cert.kappa == pytest.approx(0.5 * cert.kappa_max, rel=1e-14)
    assert cert.lam == pytest.approx(0.5, rel=1e-12)

    # at kappa = 1/c* the margin is one half
    cert_half = estimate_c_star(fit_pairs, params, grid, kernel,
                                kappa=1.0 / cert.c_star_emp)
    assert cert_half.lam == pytest.approx(0.5, rel=1e-12)

    # holdout: relative potential energy stays coercive with the certified margin
    vol = grid.cell_volume
    for rho, rho_bar in _random_pairs(grid, rng, 30):
        e = rho - rho_bar
        internal = float(np.sum(h_relative(rho, rho_bar, params.gamma))) * vol
        relpot = internal + 0.5 * cert.kappa * relative_interaction(e, kernel)
        assert relpot >= -1e-12 * max(internal, 1.0)
        assert relpot >= cert.lam * internal * (1 - 1e-9) - 1e-12


def test_estimate_c_star_rejects_trivial_ensembles():
    grid = PeriodicGrid(dim=1, cells_per_axis=16)
    params = ModelParams(gamma=2.0, alpha=-0.5)
    kernel = build_kernel(params, grid)
    flat = np.ones(grid.shape)
    with pytest.raises(ValueError, match="trivial ensemble"):
        estimate_c_star([(flat, flat.copy())] * 3, params, grid, kernel)
    # uninformative pairs are skipped, informative ones counted
    rho = flat * 1.2
    cert = estimate_c_star([(flat, flat.copy()), (rho, flat)], params, grid, kernel)
    assert cert.n_pairs == 1


def test_relative_interaction_single_mode_formula():
    # a single Fourier mode sees exactly one eigenvalue of the convolution
    grid = PeriodicGrid(dim=1, cells_per_axis=32)
    params = ModelParams(alpha=-0.5, sign=1)
    kernel = build_kernel(params, grid)
    x = grid.centers()[0]
    for k, amp in ((1, 0.3), (3, 0.7)):
        e = amp * np.cos(2 * np.pi * k * x)
        lam_k = kernel.symbol[k] * grid.cell_volume
        expected = lam_k * float(np.sum(e * e)) * grid.cell_volume
        assert relative_interaction(e, kernel) == pytest.approx(expected, rel=1e-10)
        assert relative_interaction(e, kernel, backend="direct") == pytest.approx(expected, rel=1e-10)
