"""Observable extraction from Gaussian parameters or grid wave functions.

Energy convention: the mean energy is the canonical-Hamiltonian expectation
rescaled to physical units,

    Ebar = <H> e^{-gamma t}
         = e^{-2 gamma t} <P^2/2m> + <V>,

which for a Gaussian state splits into the classical centroid energy plus a
spreading contribution.  No separate "physical momentum operator" value is
defined: the physical-variable commutator carries an anomalous e^{-gamma t}
and position-space observables are all this module reports (Delta x, not
Delta p).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    Damping,
    HarmonicPotential,
    LinearPotential,
    NonNormalizableError,
    PhysicalSetup,
    classify_regime,
    potential_eval,
)
from .gaussian_ode import GaussianParams
from .grid_solver import GridWavefunction

__all__ = [
    "ObservableSeries",
    "gaussian_observables",
    "gaussian_norm",
    "observable_series",
    "superposition_observables",
    "superposition_density",
    "linear_energy",
    "linear_energy_asymptote",
    "linear_energy_slope_limit",
    "harmonic_energy",
    "quantum_potential",
    "current_density",
    "grid_observables",
    "grid_observable_series",
]


@dataclass
class ObservableSeries:
    """Time series of <x>, Delta x, Ebar and norm for any representation."""

    times: np.ndarray
    mean_x: np.ndarray
    dispersion: np.ndarray
    energy: np.ndarray
    norm: np.ndarray

    def write(self, path) -> None:
        header = "columns = t mean_x dispersion energy norm"
        np.savetxt(
            path,
            np.column_stack([self.times, self.mean_x, self.dispersion, self.energy, self.norm]),
            fmt="%.17g",
            header=header,
        )

    @classmethod
    def read(cls, path) -> "ObservableSeries":
        data = np.loadtxt(path, ndmin=2)
        return cls(
            times=data[:, 0],
            mean_x=data[:, 1],
            dispersion=data[:, 2],
            energy=data[:, 3],
            norm=data[:, 4],
        )


def gaussian_observables(state: GaussianParams, setup: PhysicalSetup):
    """(mean_x, dispersion, energy) of a Gaussian-ansatz state.

    Ebar = E_t + (hbar/2m)(|alpha|^2/Im alpha) e^{-2 gamma t}
               + hbar V''/(8 Im alpha),
    with E_t the classical energy of the centroid (p = P e^{-gamma t}).
    """
    if state.alpha.imag <= 0.0:
        raise NonNormalizableError("state with Im(alpha) <= 0 has no observables")
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    decay2 = math.exp(-2.0 * gamma * state.t)
    v, _, v2 = potential_eval(setup.potential, m, state.X)
    p_phys = state.P * math.exp(-gamma * state.t)
    classical = p_phys * p_phys / (2.0 * m) + v
    spread = (hbar / (2.0 * m)) * (abs(state.alpha) ** 2 / state.alpha.imag) * decay2
    curvature = hbar * v2 / (8.0 * state.alpha.imag)
    return state.X, state.dispersion(hbar), classical + spread + curvature


def gaussian_norm(state: GaussianParams, setup: PhysicalSetup) -> float:
    """Spatial norm implied by the parameters (1 for consistent f)."""
    hbar = setup.hbar
    return math.sqrt(math.pi * hbar / (2.0 * state.alpha.imag)) * math.exp(
        -2.0 * state.f.imag / hbar
    )


def observable_series(states: Sequence[GaussianParams], setup: PhysicalSetup) -> ObservableSeries:
    rows = [gaussian_observables(s, setup) for s in states]
    return ObservableSeries(
        times=np.array([s.t for s in states]),
        mean_x=np.array([r[0] for r in rows]),
        dispersion=np.array([r[1] for r in rows]),
        energy=np.array([r[2] for r in rows]),
        norm=np.array([gaussian_norm(s, setup) for s in states]),
    )


# ---------------------------------------------------------------------------
# Two-packet superpositions (exact Gaussian pair moments)
# ---------------------------------------------------------------------------


def _pair_moments(pi: GaussianParams, pj: GaussianParams, hbar: float):
    """<Psi_i|{1, x, x^2}|Psi_j> and <Psi_i|P^2/2m|Psi_j>*2m, analytically.

    The integrand is exp(c2 x^2 + c1 x + c0) with Re c2 < 0 for normalizable
    packets, so all moments are Gaussian integrals.
    """
    iu = 1j / hbar
    c2 = iu * (pj.alpha - np.conj(pi.alpha))
    c1 = iu * (
        -2.0 * pj.alpha * pj.X
        + 2.0 * np.conj(pi.alpha) * pi.X
        + pj.P
        - pi.P
    )
    c0 = iu * (
        pj.alpha * pj.X**2
        - np.conj(pi.alpha) * pi.X**2
        - pj.P * pj.X
        + pi.P * pi.X
        + pj.f
        - np.conj(pi.f)
    )
    a = -c2
    m0 = np.sqrt(np.pi / a) * np.exp(c0 + c1 * c1 / (4.0 * a))
    m1 = (c1 / (2.0 * a)) * m0
    m2 = (1.0 / (2.0 * a) + (c1 / (2.0 * a)) ** 2) * m0
    # <Psi_i| (2 alpha_j (x - X_j) + P_j)^2 - 2 i hbar alpha_j |Psi_j>
    b = pj.P - 2.0 * pj.alpha * pj.X
    kin2m = (
        4.0 * pj.alpha**2 * m2
        + 4.0 * pj.alpha * b * m1
        + b * b * m0
        - 2.0j * hbar * pj.alpha * m0
    )
    return m0, m1, m2, kin2m


def superposition_observables(p1: GaussianParams, p2: GaussianParams, setup: PhysicalSetup):
    """(mean_x, dispersion, energy, norm) of the normalized sum of two packets.

    All expectation values are computed from exact pairwise Gaussian moments
    (interference terms included), so the result stays valid even when the
    packets are far too narrow for any practical lattice.
    """
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    t = p1.t
    tot0 = tot1 = tot2 = totk = 0.0 + 0.0j
    for pi in (p1, p2):
        for pj in (p1, p2):
            m0, m1, m2, kin2m = _pair_moments(pi, pj, hbar)
            tot0 += m0
            tot1 += m1
            tot2 += m2
            totk += kin2m
    norm2 = tot0.real
    if norm2 <= 0.0:
        raise NonNormalizableError("superposition has non-positive norm")
    mean = (tot1 / norm2).real
    mean2 = (tot2 / norm2).real
    disp = math.sqrt(max(mean2 - mean * mean, 0.0))
    kinetic = (totk / norm2).real / (2.0 * m)
    v0, v1, v2 = potential_eval(setup.potential, m, 0.0)
    pot = v0 + v1 * mean + 0.5 * v2 * mean2
    energy = math.exp(-2.0 * gamma * t) * kinetic + pot
    # Norm of the normalized composite is 1 by construction; report the raw
    # component normalization as a consistency diagnostic.
    return mean, disp, energy, 1.0


def superposition_density(x, p1: GaussianParams, p2: GaussianParams, setup: PhysicalSetup):
    """Normalized |N(Psi_1 + Psi_2)|^2 on the given positions."""
    from .gaussian_ode import gaussian_amplitude

    amp = gaussian_amplitude(x, p1, setup.hbar) + gaussian_amplitude(x, p2, setup.hbar)
    m0 = 0.0
    for pi in (p1, p2):
        for pj in (p1, p2):
            m0 += _pair_moments(pi, pj, setup.hbar)[0]
    return np.abs(amp) ** 2 / m0.real


# ---------------------------------------------------------------------------
# Scenario-specialized energies
# ---------------------------------------------------------------------------


def _linear_slope(setup: PhysicalSetup) -> float:
    if not isinstance(setup.potential, LinearPotential):
        raise ValueError("linear_energy requires a linear potential")
    return setup.potential.slope


def linear_energy(t: float, x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> float:
    """Exact mean energy of the damped packet on the ramp V = -m a x.

    For gamma t >> 1 the energy decreases linearly with slope -m a^2 / gamma
    (the packet keeps sliding downhill at the limit momentum).  gamma = 0
    reduces to the conserved value p0^2/2m - m a x0 + hbar^2/8m sigma0^2.
    """
    a = _linear_slope(setup)
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    zero_point = hbar**2 / (8.0 * m * sigma0**2)
    if gamma == 0.0:
        return p0**2 / (2.0 * m) - m * a * x0 + zero_point
    tau = (1.0 - math.exp(-gamma * t)) / gamma
    decay2 = math.exp(-2.0 * gamma * t)
    return (
        p0**2 / (2.0 * m) * decay2
        - m * a * x0
        - p0 * a * gamma * tau * tau
        + 0.5
        * m
        * a
        * a
        * (3.0 - 2.0 * gamma * t - 4.0 * math.exp(-gamma * t) + decay2)
        / gamma**2
        + zero_point * decay2
    )


def linear_energy_asymptote(t: float, x0: float, p0: float, setup: PhysicalSetup) -> float:
    """gamma t >> 1 limit: Ebar = -m a x0 - p0 a / gamma + (m a^2 / 2 gamma^2)(3 - 2 gamma t)."""
    a = _linear_slope(setup)
    m, gamma = setup.mass, setup.gamma
    if gamma <= 0.0:
        raise ValueError("the linear-energy asymptote requires gamma > 0")
    return -m * a * x0 - p0 * a / gamma + 0.5 * m * a * a * (3.0 - 2.0 * gamma * t) / gamma**2


def linear_energy_slope_limit(setup: PhysicalSetup) -> float:
    """Asymptotic energy loss rate dEbar/dt -> -m a^2 / gamma."""
    a = _linear_slope(setup)
    if setup.gamma <= 0.0:
        raise ValueError("the asymptotic slope requires gamma > 0")
    return -setup.mass * a * a / setup.gamma


def harmonic_energy(t: float, x0: float, setup: PhysicalSetup) -> float:
    """Mean energy of the underdamped stationary-shape coherent packet.

    Ebar = (1/2) m omega0^2 x0^2 (omega0/Omega)^2
           [1 + (gamma/2 omega0) sin(2 Omega t - phi)] e^{-gamma t}
         + (1/2) omega0 hbar (omega0/Omega) e^{-gamma t}.

    Both the oscillation energy and the zero-point term decay at the rate
    gamma.  Other regimes carry no finite energy expectation value (their
    stationary-shape states are not normalizable).
    """
    if not isinstance(setup.potential, HarmonicPotential):
        raise ValueError("harmonic_energy requires a harmonic potential")
    regime = classify_regime(setup)
    if regime.kind is not Damping.UNDERDAMPED:
        raise NonNormalizableError(
            f"no finite energy expectation in the {regime.kind.value} regime"
        )
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    omega0 = setup.potential.omega0
    big_omega, phi = regime.rate, regime.phase
    ratio = omega0 / big_omega
    decay = math.exp(-gamma * t)
    osc = (
        0.5
        * m
        * omega0**2
        * x0**2
        * ratio**2
        * (1.0 + (gamma / (2.0 * omega0)) * math.sin(2.0 * big_omega * t - phi))
    )
    return (osc + 0.5 * omega0 * hbar * ratio) * decay


# ---------------------------------------------------------------------------
# Quantum potential and current
# ---------------------------------------------------------------------------


def _node_warn(context: str):
    warnings.warn(f"{context}: density below node floor, value is ill-conditioned",
                  RuntimeWarning, stacklevel=3)


def quantum_potential(rho, x: float, t: float, setup: PhysicalSetup) -> float:
    """Q = -(hbar^2/2m) (d^2 sqrt(rho)/dx^2) / sqrt(rho) * e^{-gamma t}.

    ``rho`` may be a callable density or a grid wave function; derivatives
    are finite-difference for callables and spectral on grids.  The quantum
    force is quenched by the medium through the e^{-gamma t} factor.
    """
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    decay = math.exp(-gamma * t)
    if isinstance(rho, GridWavefunction):
        grid = rho
        dens = grid.density()
        floor = 1e-12 * dens.max()
        if np.interp(x, grid.x, dens) < floor:
            _node_warn("quantum_potential")
        root = np.sqrt(np.maximum(dens, 0.0))
        k = grid.wavenumbers
        d2 = np.fft.ifft(-(k * k) * np.fft.fft(root)).real
        q_arr = -(hbar**2 / (2.0 * m)) * d2 / np.maximum(root, math.sqrt(floor)) * decay
        return float(np.interp(x, grid.x, q_arr))
    # Callable density: fourth-order central stencil on sqrt(rho).
    h = 1e-3 * max(1.0, abs(x))
    xs = x + h * np.arange(-2, 3)
    root = np.sqrt(np.asarray(rho(xs), dtype=float))
    if root[2] ** 2 < 1e-300:
        _node_warn("quantum_potential")
        root[2] = max(root[2], 1e-150)
    d2 = (-root[0] + 16.0 * root[1] - 30.0 * root[2] + 16.0 * root[3] - root[4]) / (
        12.0 * h * h
    )
    return -(hbar**2 / (2.0 * m)) * d2 / root[2] * decay


def current_density(state: GridWavefunction, setup: PhysicalSetup) -> np.ndarray:
    """Probability current J = (hbar/m) Im(Psi* dPsi/dx) e^{-gamma t} on the grid."""
    k = state.wavenumbers
    dpsi = np.fft.ifft(1j * k * np.fft.fft(state.psi))
    return (
        (setup.hbar / setup.mass)
        * np.imag(np.conj(state.psi) * dpsi)
        * math.exp(-setup.gamma * state.t)
    )


# ---------------------------------------------------------------------------
# Grid observables
# ---------------------------------------------------------------------------


def grid_observables(state: GridWavefunction, setup: PhysicalSetup):
    """(mean_x, dispersion, energy, norm) by quadrature and spectral kinetic term.

    energy = e^{-2 gamma t} <P^2/2m> + <V>, the canonical-operator value
    rescaled to physical units.
    """
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    x = state.x
    dens = state.density()
    dx = state.dx
    norm = float(np.trapezoid(dens, dx=dx))
    mean = float(np.trapezoid(x * dens, dx=dx)) / norm
    mean2 = float(np.trapezoid(x * x * dens, dx=dx)) / norm
    disp = math.sqrt(max(mean2 - mean * mean, 0.0))
    k = state.wavenumbers
    kin_psi = np.fft.ifft((hbar**2 * k * k / (2.0 * m)) * np.fft.fft(state.psi))
    kin = float(np.trapezoid(np.real(np.conj(state.psi) * kin_psi), dx=dx)) / norm
    v0, v1, v2 = potential_eval(setup.potential, m, 0.0)
    v_arr = v0 + v1 * x + 0.5 * v2 * x * x
    pot = float(np.trapezoid(v_arr * dens, dx=dx)) / norm
    energy = math.exp(-2.0 * gamma * state.t) * kin + pot
    return mean, disp, energy, norm


def grid_observable_series(snapshots: Sequence[GridWavefunction], setup: PhysicalSetup) -> ObservableSeries:
    rows = [grid_observables(s, setup) for s in snapshots]
    return ObservableSeries(
        times=np.array([s.t for s in snapshots]),
        mean_x=np.array([r[0] for r in rows]),
        dispersion=np.array([r[1] for r in rows]),
        energy=np.array([r[2] for r in rows]),
        norm=np.array([r[3] for r in rows]),
    )
