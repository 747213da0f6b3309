import math

import numpy as np
import pytest

from ckbohm.core import (
    HarmonicPotential,
    LinearPotential,
    NonNormalizableError,
    PhysicalSetup,
    SimulationError,
)
from ckbohm.gaussian_ode import (
    GaussianParams,
    OdeConfig,
    ansatz_derivatives,
    gaussian_amplitude,
    initial_packet,
    propagate,
    rk4_step,
)
from ckbohm.closed_form import (
    free_params,
    free_solution,
    harmonic_params,
    linear_params,
    linear_solution,
)
from ckbohm.bohm import velocity_gaussian

W0 = 2.0 * math.pi / 10.0


def test_initial_packet_fig1_alpha():
    state = initial_packet(0.0, 2.5, 1.0, PhysicalSetup())
    assert state.alpha == 0.25j
    assert state.X == 0.0 and state.P == 2.5 and state.t == 0.0


def test_initial_packet_coherent_width():
    sigma0 = math.sqrt(1.0 / (2.0 * W0))
    assert sigma0 == pytest.approx(0.89206, abs=1e-5)
    state = initial_packet(0.0, 0.0, sigma0, PhysicalSetup())
    assert state.alpha == pytest.approx(0.5j * W0, rel=1e-14)


def test_initial_packet_dispersion_identity():
    for sigma0 in (0.3, 1.0, 2.7):
        state = initial_packet(1.0, 0.0, sigma0, PhysicalSetup())
        assert state.dispersion(1.0) == pytest.approx(sigma0, rel=1e-15)


def test_initial_packet_rejects_bad_width():
    with pytest.raises(ValueError):
        initial_packet(0.0, 0.0, 0.0, PhysicalSetup())


def test_initial_packet_normalization_constant():
    # f0 = (i hbar / 4) ln(2 pi sigma0^2) makes the sampled packet unit-norm
    state = initial_packet(0.0, 2.5, 1.0, PhysicalSetup())
    x = np.linspace(-12.0, 12.0, 4001)
    rho = np.abs(gaussian_amplitude(x, state, 1.0)) ** 2
    assert np.trapezoid(rho, x) == pytest.approx(1.0, abs=1e-12)


def test_derivatives_free_hand_values():
    state = GaussianParams(X=0.0, P=2.5, alpha=0.25j, f=0.0j, t=0.0)
    dX, dP, dalpha, _ = ansatz_derivatives(state, PhysicalSetup(gamma=0.7))
    assert dX == pytest.approx(2.5, rel=1e-15)
    assert dP == 0.0
    # oracle: -2 alpha^2 / m = -2 (i/4)^2 = 1/8, pure real
    assert dalpha == pytest.approx(0.125 + 0.0j, abs=1e-16)


def test_derivatives_coherent_fixed_point():
    setup = PhysicalSetup(potential=HarmonicPotential(W0))
    state = GaussianParams(X=0.0, P=0.0, alpha=0.5j * W0, f=0.0j, t=0.0)
    _, _, dalpha, _ = ansatz_derivatives(state, setup)
    assert abs(dalpha) < 1e-16


def test_derivatives_linear_force():
    setup = PhysicalSetup(potential=LinearPotential(0.25))
    state = GaussianParams(X=7.0, P=0.0, alpha=0.25j, f=0.0j, t=0.0)
    _, dP, _, _ = ansatz_derivatives(state, setup)
    assert dP == pytest.approx(0.25, rel=1e-15)


def test_rk4_single_step_against_closed_form():
    setup = PhysicalSetup(gamma=0.5)
    state = rk4_step(initial_packet(0.0, 2.5, 1.0, setup), setup, 1e-3)
    ref = free_solution(1e-3, 0.0, 2.5, 1.0, setup)
    assert abs(state.X - ref.x) < 1e-12
    assert abs(state.alpha - ref.alpha) < 1e-12


def test_rk4_coherent_state_invariant():
    setup = PhysicalSetup(potential=HarmonicPotential(W0))
    state = initial_packet(0.0, 0.0, math.sqrt(1.0 / (2.0 * W0)), setup)
    for _ in range(50):
        state = rk4_step(state, setup, 1e-2)
    assert state.alpha == pytest.approx(0.5j * W0, abs=1e-14)


def test_rk4_richardson_ratio():
    # one full step vs two half steps: local error ratio ~ 2^4
    setup = PhysicalSetup(gamma=0.4, potential=HarmonicPotential(W0))
    state0 = initial_packet(5.0, 0.0, 1.0, setup)
    dt = 0.2

    def err(step_dt, n):
        s = state0
        for _ in range(n):
            s = rk4_step(s, setup, step_dt)
        ref = harmonic_params(n * step_dt, 5.0, 0.0, state0.alpha, setup)
        return abs(s.X - ref.X) + abs(s.alpha - ref.alpha)

    ratio = err(dt, 1) / err(dt / 2, 2)
    assert 10.0 < ratio < 24.0


def test_propagate_fig1_free():
    setup = PhysicalSetup(gamma=0.1)
    states = propagate(
        initial_packet(0.0, 2.5, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=40.0, record_stride=8000),
    )
    ref = free_solution(40.0, 0.0, 2.5, 1.0, setup)
    assert states[-1].t == 40.0
    assert states[-1].X == pytest.approx(ref.x, abs=1e-8)


def test_propagate_fig2_linear():
    setup = PhysicalSetup(gamma=0.5, potential=LinearPotential(0.25))
    states = propagate(
        initial_packet(50.0, 0.0, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=40.0, record_stride=8000),
    )
    final = states[-1]
    _, p_ref = linear_solution(40.0, 50.0, 0.0, setup)
    assert final.physical_momentum(0.5) == pytest.approx(p_ref, abs=1e-8)


@pytest.mark.parametrize("fac", [0.3, 2.0, 4.0])
def test_propagate_fig3_harmonic(fac):
    gamma = fac * W0
    setup = PhysicalSetup(gamma=gamma, potential=HarmonicPotential(W0))
    sigma0 = math.sqrt(1.0 / (2.0 * W0))
    states = propagate(
        initial_packet(5.0, 0.0, sigma0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=20.0, record_stride=4000),
    )
    for state in states:
        ref = harmonic_params(state.t, 5.0, 0.0, 1j / (4.0 * sigma0**2), setup)
        scale = max(1.0, abs(ref.X), abs(ref.P))
        assert abs(state.X - ref.X) / scale < 1e-8
        assert abs(state.P - ref.P) / scale < 1e-8
        assert abs(state.alpha - ref.alpha) / max(1.0, abs(ref.alpha)) < 1e-8
        assert state.alpha.imag > 0.0
        assert state.dispersion(1.0) > 0.0


def test_propagate_gamma_zero_regression():
    # frictionless free packet must match the textbook closed form
    setup = PhysicalSetup()
    states = propagate(
        initial_packet(0.0, 2.5, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=20.0, record_stride=2000),
    )
    for state in states:
        t = state.t
        sigma_ref = math.sqrt(1.0 + (t / 2.0) ** 2)
        assert state.X == pytest.approx(2.5 * t, rel=1e-8, abs=1e-10)
        assert state.dispersion(1.0) == pytest.approx(sigma_ref, rel=1e-8)


def test_phase_norm_matches_closed_form_free():
    # cross-check at the e^{i f / hbar} level: f carries a log branch
    setup = PhysicalSetup(gamma=0.5)
    states = propagate(
        initial_packet(0.0, 2.5, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=10.0, record_stride=1000),
    )
    for state in states:
        ref = free_params(state.t, 0.0, 2.5, 1.0, setup)
        assert abs(np.exp(1j * state.f) - np.exp(1j * ref.f)) < 1e-10
        assert state.s_cl == pytest.approx(ref.s_cl, rel=1e-10, abs=1e-12)


def test_linear_phase_with_action_removed():
    # Re f is dominated by the huge classical action; compare the shape part.
    setup = PhysicalSetup(gamma=0.5, potential=LinearPotential(0.25))
    states = propagate(
        initial_packet(50.0, 0.0, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=20.0, record_stride=4000),
    )
    for state in states:
        ref = linear_params(state.t, 50.0, 0.0, 1.0, setup)
        assert state.s_cl == pytest.approx(ref.s_cl, rel=1e-9)
        got = np.exp(1j * (state.f - state.s_cl))
        want = np.exp(1j * (ref.f - ref.s_cl))
        assert abs(got - want) / abs(want) < 1e-8


def test_action_term_does_not_move_trajectories():
    # zeroing f leaves every Bohmian velocity unchanged
    setup = PhysicalSetup(gamma=0.3)
    states = propagate(
        initial_packet(0.0, 2.5, 1.0, setup),
        setup,
        OdeConfig(dt=1e-3, t_end=5.0, record_stride=1000),
    )
    x = np.linspace(-3.0, 8.0, 23)
    for state in states:
        stripped = GaussianParams(
            X=state.X, P=state.P, alpha=state.alpha, f=0.0j, t=state.t
        )
        np.testing.assert_array_equal(
            velocity_gaussian(x, state, setup), velocity_gaussian(x, stripped, setup)
        )


@pytest.mark.parametrize(
    "setup,x0,p0,sigma0",
    [
        (PhysicalSetup(gamma=0.1), 0.0, 2.5, 1.0),
        (PhysicalSetup(gamma=0.5, potential=LinearPotential(0.25)), 50.0, 0.0, 1.0),
        (PhysicalSetup(gamma=0.3 * W0, potential=HarmonicPotential(W0)), 5.0, 0.0, 0.892),
        (PhysicalSetup(gamma=4.0 * W0, potential=HarmonicPotential(W0)), 5.0, 0.0, 0.892),
    ],
    ids=["free", "linear", "harmonic-under", "harmonic-over"],
)
def test_step_halving_convergence_order(setup, x0, p0, sigma0):
    t_end = 4.0
    state0 = initial_packet(x0, p0, sigma0, setup)

    def endpoint_error(dt):
        states = propagate(state0, setup, OdeConfig(dt=dt, t_end=t_end, record_stride=int(t_end / dt)))
        final = states[-1]
        if isinstance(setup.potential, HarmonicPotential):
            ref = harmonic_params(t_end, x0, p0, state0.alpha, setup)
        elif isinstance(setup.potential, LinearPotential):
            ref = linear_params(t_end, x0, p0, sigma0, setup)
        else:
            ref = free_params(t_end, x0, p0, sigma0, setup)
        return math.sqrt(
            abs(final.X - ref.X) ** 2
            + abs(final.P - ref.P) ** 2
            + (abs(final.alpha - ref.alpha) / max(1.0, abs(ref.alpha))) ** 2
        )

    e1, e2 = endpoint_error(0.05), endpoint_error(0.025)
    order = math.log2(e1 / e2)
    assert 3.8 < order < 4.2


def test_propagate_rejects_non_normalizable_start():
    setup = PhysicalSetup()
    bad = GaussianParams(X=0.0, P=0.0, alpha=-0.25j, f=0.0j, t=0.0)
    with pytest.raises(NonNormalizableError):
        propagate(bad, setup, OdeConfig(dt=1e-3, t_end=1.0))


def test_rk4_flags_loss_of_normalizability():
    setup = PhysicalSetup()
    # A huge step drives Im(alpha) through zero for a strongly chirped state.
    state = GaussianParams(X=0.0, P=0.0, alpha=5.0 + 1e-4j, f=0.0j, t=0.0)
    with pytest.raises(NonNormalizableError):
        rk4_step(state, setup, 10.0)


def test_overflow_guard_trips():
    setup = PhysicalSetup(gamma=80.0, potential=HarmonicPotential(1.0))
    state = initial_packet(0.0, 0.0, 1.0, setup)
    with pytest.raises(SimulationError):
        propagate(state, setup, OdeConfig(dt=0.05, t_end=10.0))


def test_ode_config_validation():
    with pytest.raises(ValueError):
        OdeConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        OdeConfig(dt=2.0, t_end=1.0)
    with pytest.raises(ValueError):
        OdeConfig(dt=0.1, t_end=1.0, record_stride=0)
