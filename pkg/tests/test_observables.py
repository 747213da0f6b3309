import math

import numpy as np
import pytest

from ckbohm.core import (
    HarmonicPotential,
    LinearPotential,
    NonNormalizableError,
    PhysicalSetup,
    classify_regime,
)
from ckbohm.gaussian_ode import OdeConfig, gaussian_amplitude, initial_packet, propagate
from ckbohm.closed_form import (
    coherent_packet_params,
    free_params,
    harmonic_params,
    linear_params,
)
from ckbohm.grid_solver import GridConfig, init_grid, propagate_grid
from ckbohm.observables import (
    ObservableSeries,
    current_density,
    gaussian_norm,
    gaussian_observables,
    grid_observable_series,
    grid_observables,
    harmonic_energy,
    linear_energy,
    linear_energy_asymptote,
    linear_energy_slope_limit,
    observable_series,
    quantum_potential,
    superposition_density,
    superposition_observables,
)

W0 = 2.0 * math.pi / 10.0


# ---------------------------------------------------------------------------
# Gaussian observables
# ---------------------------------------------------------------------------


def test_fig1_initial_energy():
    setup = PhysicalSetup(gamma=0.5)
    state = initial_packet(0.0, 2.5, 1.0, setup)
    mean, disp, energy = gaussian_observables(state, setup)
    assert mean == 0.0
    assert disp == pytest.approx(1.0, rel=1e-14)
    # quoted value: E_0 = p0^2/2m + hbar^2/(8 m sigma0^2) = 3.25
    assert energy == pytest.approx(3.25, rel=1e-14)


def test_fig3_initial_energy():
    setup = PhysicalSetup(gamma=0.3 * W0, potential=HarmonicPotential(W0))
    sigma0 = math.sqrt(1.0 / (2.0 * W0))
    state = initial_packet(5.0, 0.0, sigma0, setup)
    _, _, energy = gaussian_observables(state, setup)
    # oracle: m w0^2 x0^2 / 2 + hbar w0 / 2 (coherent initial shape)
    assert energy == pytest.approx(0.5 * W0**2 * 25.0 + 0.5 * W0, rel=1e-13)
    assert energy == pytest.approx(5.249, abs=1e-3)


def test_free_energy_decay_value():
    setup = PhysicalSetup(gamma=0.1)
    state = free_params(10.0, 0.0, 2.5, 1.0, setup)
    _, _, energy = gaussian_observables(state, setup)
    # oracle: 3.25 e^{-2 gamma t}
    assert energy == pytest.approx(3.25 * math.exp(-2.0), rel=1e-12)
    assert energy == pytest.approx(0.43980, abs=1e-5)


def test_gaussian_norm_is_unity_along_flow():
    setup = PhysicalSetup(gamma=0.5)
    for t in (0.0, 3.0, 20.0):
        state = free_params(t, 0.0, 2.5, 1.0, setup)
        assert gaussian_norm(state, setup) == pytest.approx(1.0, rel=1e-12)


def test_gaussian_observables_rejects_bad_state():
    setup = PhysicalSetup()
    state = initial_packet(0.0, 0.0, 1.0, setup)
    bad = type(state)(X=0.0, P=0.0, alpha=0.25 - 0.1j, f=0.0j, t=0.0)
    with pytest.raises(NonNormalizableError):
        gaussian_observables(bad, setup)


def test_observable_series_shapes_and_write(tmp_path):
    setup = PhysicalSetup(gamma=0.1)
    states = propagate(
        initial_packet(0.0, 2.5, 1.0, setup), setup, OdeConfig(dt=1e-2, t_end=2.0, record_stride=50)
    )
    series = observable_series(states, setup)
    assert series.times.shape == (5,)
    path = tmp_path / "obs.dat"
    series.write(path)
    back = ObservableSeries.read(path)
    np.testing.assert_array_equal(back.times, series.times)
    np.testing.assert_array_equal(back.energy, series.energy)


# ---------------------------------------------------------------------------
# Linear energy
# ---------------------------------------------------------------------------


def linear_setup(gamma):
    return PhysicalSetup(gamma=gamma, potential=LinearPotential(0.25))


def test_linear_energy_t0():
    setup = linear_setup(0.5)
    # oracle: -m a x0 + hbar^2/(8 m sigma0^2) at p0 = 0
    assert linear_energy(0.0, 50.0, 0.0, 1.0, setup) == pytest.approx(-12.5 + 0.125, rel=1e-14)


def test_linear_energy_slope_limit():
    # oracle: differentiate the asymptote, -m a^2 / gamma
    assert linear_energy_slope_limit(linear_setup(0.5)) == pytest.approx(-0.125, rel=1e-14)
    t1, t2 = 60.0, 80.0
    setup = linear_setup(0.5)
    slope = (
        linear_energy(t2, 50.0, 0.0, 1.0, setup) - linear_energy(t1, 50.0, 0.0, 1.0, setup)
    ) / (t2 - t1)
    assert slope == pytest.approx(-0.125, abs=1e-9)


def test_linear_energy_asymptote_agrees_at_late_times():
    setup = linear_setup(0.5)
    t = 40.0  # gamma t = 20
    exact = linear_energy(t, 50.0, 0.5, 1.0, setup)
    approx = linear_energy_asymptote(t, 50.0, 0.5, setup)
    assert abs(exact - approx) < 1e-6 * abs(exact)


def test_linear_energy_gamma_zero_conserved():
    setup = linear_setup(0.0)
    e0 = linear_energy(0.0, 50.0, 1.0, 1.0, setup)
    assert linear_energy(9.0, 50.0, 1.0, 1.0, setup) == pytest.approx(e0, rel=1e-14)


@pytest.mark.parametrize("gamma", [0.025, 0.5])
def test_linear_energy_matches_general_route(gamma):
    # independent route: the general Gaussian energy on closed-form parameters
    setup = linear_setup(gamma)
    for t in (0.0, 3.0, 17.0):
        state = linear_params(t, 50.0, 0.7, 1.0, setup)
        _, _, energy = gaussian_observables(state, setup)
        assert linear_energy(t, 50.0, 0.7, 1.0, setup) == pytest.approx(energy, rel=1e-11)


# ---------------------------------------------------------------------------
# Harmonic energy
# ---------------------------------------------------------------------------


def test_harmonic_energy_frictionless_limit():
    setup = PhysicalSetup(gamma=0.0, potential=HarmonicPotential(W0))
    # oracle: m w0^2 x0^2 / 2 + hbar w0 / 2
    assert harmonic_energy(0.0, 5.0, setup) == pytest.approx(
        0.5 * W0**2 * 25.0 + 0.5 * W0, rel=1e-13
    )


def test_harmonic_energy_matches_general_route():
    # strongest check: the specialized law equals the general Gaussian energy
    # evaluated on the stationary-shape packet parameters
    gamma = 0.3 * W0
    setup = PhysicalSetup(gamma=gamma, potential=HarmonicPotential(W0))
    for t in (0.0, 1.3, 3.7, 6.2, 11.0):
        params = coherent_packet_params(t, 5.0, setup)
        _, _, energy = gaussian_observables(params, setup)
        assert harmonic_energy(t, 5.0, setup) == pytest.approx(energy, rel=1e-11)


def test_harmonic_energy_envelope_decay():
    gamma = 0.3 * W0
    setup = PhysicalSetup(gamma=gamma, potential=HarmonicPotential(W0))
    e0 = harmonic_energy(0.0, 5.0, setup)
    t = 10.0 / gamma
    bound = math.exp(-10.0) * (1.0 + gamma / (2.0 * W0)) / (1.0 - gamma / (2.0 * W0))
    assert harmonic_energy(t, 5.0, setup) / e0 <= bound


def test_harmonic_zero_point_term_vanishes():
    gamma = 0.3 * W0
    setup = PhysicalSetup(gamma=gamma, potential=HarmonicPotential(W0))
    regime = classify_regime(setup)
    zero_point = 0.5 * W0 * (W0 / regime.rate)
    # launch from the well bottom: only the zero-point term remains
    for t in (0.0, 5.0, 30.0):
        assert harmonic_energy(t, 0.0, setup) == pytest.approx(
            zero_point * math.exp(-gamma * t), rel=1e-12
        )
    assert harmonic_energy(200.0, 0.0, setup) < 1e-15


def test_harmonic_energy_other_regimes_rejected():
    setup = PhysicalSetup(gamma=4.0 * W0, potential=HarmonicPotential(W0))
    with pytest.raises(NonNormalizableError):
        harmonic_energy(1.0, 5.0, setup)


# ---------------------------------------------------------------------------
# Quantum potential and current
# ---------------------------------------------------------------------------


def test_quantum_potential_gaussian_center():
    sigma = 0.7
    setup = PhysicalSetup(gamma=0.3)

    def rho(x):
        return np.exp(-((x - 1.0) ** 2) / (2.0 * sigma**2))

    t = 2.0
    q = quantum_potential(rho, 1.0, t, setup)
    # oracle: symbolic differentiation of the Gaussian gives
    # Q(center) = hbar^2 e^{-gamma t} / (4 m sigma^2)
    assert q == pytest.approx(math.exp(-0.6) / (4.0 * sigma**2), rel=1e-7)


def test_quantum_potential_two_forms_agree():
    # algebraic identity between the sqrt(rho) form and the rho form,
    # evaluated with exact Gaussian derivatives
    sigma, xc = 0.9, 0.4
    x = 1.1
    hbar = m = 1.0
    rho = math.exp(-((x - xc) ** 2) / (2.0 * sigma**2))
    drho = -(x - xc) / sigma**2 * rho
    d2rho = (-1.0 / sigma**2 + (x - xc) ** 2 / sigma**4) * rho
    form_rho = -(hbar**2 / (4.0 * m)) * (d2rho / rho - 0.5 * (drho / rho) ** 2)
    root = math.sqrt(rho)
    d2root = (-1.0 / (2.0 * sigma**2) + (x - xc) ** 2 / (4.0 * sigma**4)) * root
    form_root = -(hbar**2 / (2.0 * m)) * d2root / root
    assert form_rho == pytest.approx(form_root, rel=1e-12)


def test_quantum_potential_quenched_by_friction():
    setup = PhysicalSetup(gamma=50.0)

    def rho(x):
        return np.exp(-(x**2) / 2.0)

    assert abs(quantum_potential(rho, 0.0, 1.0, setup)) < 1e-20


def test_quantum_potential_grid_matches_callable():
    setup = PhysicalSetup(gamma=0.2)
    cfg = GridConfig(x_min=-12.0, x_max=12.0, n_points=1024)
    params = initial_packet(0.5, 0.0, 0.8, setup)
    grid_state = init_grid(cfg, lambda x: gaussian_amplitude(x, params, 1.0))
    grid_state.t = 1.0

    def rho(x):
        return np.exp(-((x - 0.5) ** 2) / (2.0 * 0.64))

    for x in (0.5, 1.2, -0.3):
        q_grid = quantum_potential(grid_state, x, 1.0, setup)
        q_call = quantum_potential(rho, x, 1.0, setup)
        assert q_grid == pytest.approx(q_call, rel=1e-5, abs=1e-8)


def test_quantum_potential_node_warning():
    setup = PhysicalSetup()

    def rho(x):
        return np.exp(-np.clip(x, -30, 30) ** 2 * 20.0)

    with pytest.warns(RuntimeWarning):
        quantum_potential(rho, 25.0, 0.0, setup)


def test_current_density_real_state_zero():
    setup = PhysicalSetup()
    cfg = GridConfig(x_min=-12.0, x_max=12.0, n_points=512)
    params = initial_packet(0.0, 0.0, 1.0, setup)
    state = init_grid(cfg, lambda x: gaussian_amplitude(x, params, 1.0))
    np.testing.assert_allclose(current_density(state, setup), 0.0, atol=1e-14)


def test_current_integral_equals_momentum_expectation():
    setup = PhysicalSetup(gamma=0.2)
    cfg = GridConfig(x_min=-25.0, x_max=25.0, n_points=1024)
    params = initial_packet(0.0, 1.7, 1.0, setup)
    state = init_grid(cfg, lambda x: gaussian_amplitude(x, params, 1.0))
    state.t = 3.0
    total_current = np.trapezoid(current_density(state, setup), dx=state.dx)
    # independent oracle: spectral momentum expectation
    psi_k = np.fft.fft(state.psi)
    k = state.wavenumbers
    p_exp = np.sum(k * np.abs(psi_k) ** 2) / np.sum(np.abs(psi_k) ** 2)
    assert total_current == pytest.approx(p_exp * math.exp(-0.2 * 3.0), abs=1e-8)


def test_continuity_residual_small():
    gamma = 0.1
    setup = PhysicalSetup(gamma=gamma)
    cfg = GridConfig(x_min=-25.0, x_max=35.0, n_points=1024, dt=1e-3)
    params = initial_packet(0.0, 2.5, 1.0, setup)
    state = init_grid(cfg, lambda x: gaussian_amplitude(x, params, 1.0))
    t_probe = 2.0
    before, mid, after = propagate_grid(
        state, setup, cfg, t_probe + cfg.dt, [t_probe, t_probe + cfg.dt / 2, t_probe + cfg.dt]
    )
    drho_dt = (after.density() - before.density()) / cfg.dt
    k = mid.wavenumbers
    dj_dx = np.real(np.fft.ifft(1j * k * np.fft.fft(current_density(mid, setup))))
    residual = np.max(np.abs(drho_dt + dj_dx))
    assert residual < 1e-3 * np.max(np.abs(drho_dt))


# ---------------------------------------------------------------------------
# Grid observables
# ---------------------------------------------------------------------------


def test_grid_energy_fig1_initial():
    setup = PhysicalSetup(gamma=0.5)
    cfg = GridConfig(x_min=-40.0, x_max=60.0, n_points=4096)
    params = initial_packet(0.0, 2.5, 1.0, setup)
    state = init_grid(cfg, lambda x: gaussian_amplitude(x, params, 1.0))
    _, _, energy, norm = grid_observables(state, setup)
    assert energy == pytest.approx(3.25, abs=1e-6)
    assert norm == pytest.approx(1.0, abs=1e-10)


def test_grid_series_matches_gaussian_route():
    gamma = 0.1
    setup = PhysicalSetup(gamma=gamma)
    cfg = GridConfig(x_min=-30.0, x_max=45.0, n_points=2048, dt=2e-3)
    params0 = initial_packet(0.0, 2.5, 1.0, setup)
    state = init_grid(cfg, lambda x: gaussian_amplitude(x, params0, 1.0))
    times = [0.0, 2.0, 4.0, 6.0]
    snaps = propagate_grid(state, setup, cfg, 6.0, times)
    series = grid_observable_series(snaps, setup)
    for i, t in enumerate(times):
        ref = free_params(t, 0.0, 2.5, 1.0, setup)
        mean_ref, disp_ref, energy_ref = gaussian_observables(ref, setup)
        assert abs(series.mean_x[i] - mean_ref) < 1e-4 * max(1.0, abs(mean_ref))
        assert abs(series.dispersion[i] - disp_ref) < 1e-4 * disp_ref
        assert abs(series.energy[i] - energy_ref) < 1e-4 * abs(energy_ref)
        assert series.norm[i] == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# Superposition observables
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("separation", [1.5, 10.0])
def test_superposition_observables_against_quadrature(separation):
    setup = PhysicalSetup(gamma=0.1)
    t = 4.0
    p1 = free_params(t, separation / 2.0, 0.0, 1.0, setup)
    p2 = free_params(t, -separation / 2.0, 0.4, 1.2, setup)
    mean, disp, energy, norm = superposition_observables(p1, p2, setup)
    # independent oracle: dense-lattice quadrature with spectral kinetic term
    n, span = 8192, 80.0
    x = np.linspace(-span / 2, span / 2, n, endpoint=False)
    dx = x[1] - x[0]
    psi = gaussian_amplitude(x, p1, 1.0) + gaussian_amplitude(x, p2, 1.0)
    rho = np.abs(psi) ** 2
    total = np.trapezoid(rho, dx=dx)
    mean_q = np.trapezoid(x * rho, dx=dx) / total
    disp_q = math.sqrt(np.trapezoid((x - mean_q) ** 2 * rho, dx=dx) / total)
    k = 2.0 * math.pi * np.fft.fftfreq(n, dx)
    kin = np.trapezoid(np.real(np.conj(psi) * np.fft.ifft(0.5 * k * k * np.fft.fft(psi))), dx=dx)
    energy_q = math.exp(-2.0 * 0.1 * t) * kin / total
    assert mean == pytest.approx(mean_q, abs=1e-9)
    assert disp == pytest.approx(disp_q, rel=1e-9)
    assert energy == pytest.approx(energy_q, rel=1e-9)
    assert norm == 1.0


def test_superposition_density_normalized_and_symmetric():
    setup = PhysicalSetup(gamma=0.025)
    t = 20.0
    p1 = free_params(t, 5.0, 0.0, 1.0, setup)
    p2 = free_params(t, -5.0, 0.0, 1.0, setup)
    x = np.linspace(-60.0, 60.0, 6001)
    rho = superposition_density(x, p1, p2, setup)
    assert np.trapezoid(rho, x) == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(rho, rho[::-1], atol=1e-12)
