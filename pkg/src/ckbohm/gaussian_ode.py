"""Numerical propagator for the Gaussian wave-packet parameter set.

In a damping medium the canonical-variable Gaussian ansatz

    Psi(x, t) = exp{ (i/hbar) [alpha_t (x - X_t)^2 + P_t (x - X_t) + f_t] }

stays exact for quadratic-or-lower potentials.  Its five parameters obey the
coupled ODE system

    dX/dt     = (P/m) e^{-gamma t}
    dP/dt     = -V'(X) e^{+gamma t}
    dalpha/dt = -(2 alpha^2 / m) e^{-gamma t} - (1/2) V''(X) e^{+gamma t}
    df/dt     = (i hbar alpha / m) e^{-gamma t} + L_t

with L_t the classical Lagrangian along the centroid.  ``P`` is the canonical
momentum; the physical momentum is p = P e^{-gamma t}, while the physical
position coincides with X.  This module integrates the system with a
fixed-step classical RK4 scheme, evaluating the stiff e^{+-gamma t} factors
exactly at the stage times so the fourth order survives strong damping.

The space-independent Lagrangian term in f only moves the global phase and
norm; it is integrated as given and additionally accumulated in the separate
``s_cl`` field so its dynamical irrelevance can be asserted.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import NonNormalizableError, PhysicalSetup, SimulationError, potential_eval

__all__ = [
    "GaussianParams",
    "OdeConfig",
    "initial_packet",
    "classical_lagrangian",
    "ansatz_derivatives",
    "rk4_step",
    "propagate",
    "gaussian_amplitude",
]

# Magnitude at which propagation aborts rather than overflow silently.
# Relevant for overdamped stationary shapes where alpha grows like e^{gamma t}.
_OVERFLOW_LIMIT = 1e280


@dataclass(frozen=True)
class GaussianParams:
    """Instantaneous Gaussian-ansatz state (canonical variables).

    ``s_cl`` accumulates the classical action integral of the Lagrangian
    along the centroid; it duplicates the dynamical part of Re(f) and exists
    only so tests can separate the two contributions.
    """

    X: float
    P: float
    alpha: complex
    f: complex
    t: float = 0.0
    s_cl: float = 0.0

    def physical_momentum(self, gamma: float) -> float:
        return self.P * math.exp(-gamma * self.t)

    def dispersion(self, hbar: float) -> float:
        """Delta x = sqrt(hbar / (4 Im alpha))."""
        if self.alpha.imag <= 0.0:
            raise NonNormalizableError(
                f"Im(alpha) = {self.alpha.imag} is not positive at t = {self.t}"
            )
        return math.sqrt(hbar / (4.0 * self.alpha.imag))


@dataclass(frozen=True)
class OdeConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")


def initial_packet(x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> GaussianParams:
    """Parameters of the normalized Gaussian packet centered at (x0, p0).

    The packet has position density of width sigma0, so
    alpha_0 = i hbar / (4 sigma0^2) and f_0 = (i hbar / 4) ln(2 pi sigma0^2).
    """
    if sigma0 <= 0.0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    hbar = setup.hbar
    alpha0 = 1j * hbar / (4.0 * sigma0**2)
    f0 = 0.25j * hbar * math.log(2.0 * math.pi * sigma0**2)
    return GaussianParams(X=x0, P=p0, alpha=alpha0, f=f0, t=0.0)


def classical_lagrangian(X: float, P: float, t: float, setup: PhysicalSetup) -> float:
    """L_t = (P^2/2m) e^{-gamma t} - V(X) e^{+gamma t} along the centroid."""
    v, _, _ = potential_eval(setup.potential, setup.mass, X)
    return (P * P / (2.0 * setup.mass)) * math.exp(-setup.gamma * t) - v * math.exp(
        setup.gamma * t
    )


def ansatz_derivatives(state: GaussianParams, setup: PhysicalSetup):
    """Right-hand side of the parameter ODE system at the state's own time.

    Returns ``(dX, dP, dalpha, df)``.
    """
    m = setup.mass
    decay = math.exp(-setup.gamma * state.t)
    growth = math.exp(setup.gamma * state.t)
    _, v1, v2 = potential_eval(setup.potential, m, state.X)
    dX = (state.P / m) * decay
    dP = -v1 * growth
    dalpha = -(2.0 * state.alpha * state.alpha / m) * decay - 0.5 * v2 * growth
    df = (1j * setup.hbar * state.alpha / m) * decay + classical_lagrangian(
        state.X, state.P, state.t, setup
    )
    return dX, dP, dalpha, df


def _rhs(X, P, alpha, t, setup):
    # Same derivatives as ansatz_derivatives, on raw scalars for the RK4 loop.
    m = setup.mass
    decay = math.exp(-setup.gamma * t)
    growth = math.exp(setup.gamma * t)
    v, v1, v2 = potential_eval(setup.potential, m, X)
    dX = (P / m) * decay
    dP = -v1 * growth
    dalpha = -(2.0 * alpha * alpha / m) * decay - 0.5 * v2 * growth
    lag = (P * P / (2.0 * m)) * decay - v * growth
    df = (1j * setup.hbar * alpha / m) * decay + lag
    return dX, dP, dalpha, df, lag


def rk4_step(state: GaussianParams, setup: PhysicalSetup, dt: float) -> GaussianParams:
    """Advance all parameters by one RK4 step of size dt.

    The exponential damping factors are re-evaluated at every stage time.
    Raises ``NonNormalizableError`` if Im(alpha) is not positive afterwards
    and ``SimulationError`` if any magnitude runs into the overflow guard.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t0 = state.t
    X, P, a, f, s = state.X, state.P, state.alpha, state.f, state.s_cl

    k1 = _rhs(X, P, a, t0, setup)
    k2 = _rhs(X + 0.5 * dt * k1[0], P + 0.5 * dt * k1[1], a + 0.5 * dt * k1[2], t0 + 0.5 * dt, setup)
    k3 = _rhs(X + 0.5 * dt * k2[0], P + 0.5 * dt * k2[1], a + 0.5 * dt * k2[2], t0 + 0.5 * dt, setup)
    k4 = _rhs(X + dt * k3[0], P + dt * k3[1], a + dt * k3[2], t0 + dt, setup)

    w = dt / 6.0
    X1 = X + w * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
    P1 = P + w * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
    a1 = a + w * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
    f1 = f + w * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3])
    s1 = s + w * (k1[4] + 2.0 * (k2[4] + k3[4]) + k4[4])

    if a1.imag <= 0.0:
        raise NonNormalizableError(
            f"Im(alpha) = {a1.imag} after step to t = {t0 + dt}; "
            "initial state or step size is invalid"
        )
    if (
        abs(a1) > _OVERFLOW_LIMIT
        or abs(f1.real) > _OVERFLOW_LIMIT
        or setup.gamma * (t0 + dt) > math.log(_OVERFLOW_LIMIT)
    ):
        raise SimulationError(
            f"overflow guard tripped at t = {t0 + dt}: |alpha| = {abs(a1):.3e}, "
            f"|Re f| = {abs(f1.real):.3e}, gamma*t = {setup.gamma * (t0 + dt):.3e}"
        )
    return GaussianParams(X=X1, P=P1, alpha=a1, f=f1, t=t0 + dt, s_cl=s1)


def propagate(state0: GaussianParams, setup: PhysicalSetup, cfg: OdeConfig) -> list[GaussianParams]:
    """Integrate the parameter set and return recorded states.

    States are recorded at t0, t0 + stride*dt, 2*stride*dt, ... up to t_end
    (the initial state is always included).  Recorded times are exact
    multiples of dt, not floating-point accumulations.
    """
    if state0.alpha.imag <= 0.0:
        raise NonNormalizableError("initial state is not normalizable (Im alpha <= 0)")
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("t_end must be an integer number of dt steps")
    records = [state0]
    state = state0
    t0 = state0.t
    for i in range(1, n_steps + 1):
        state = rk4_step(state, setup, cfg.dt)
        # Pin the time to the exact step grid; repeated addition drifts.
        state = replace(state, t=t0 + i * cfg.dt)
        if i % cfg.record_stride == 0:
            records.append(state)
    return records


def gaussian_amplitude(x, params: GaussianParams, hbar: float):
    """Complex amplitude of the ansatz at positions ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    dx = x - params.X
    phase = (params.alpha * dx * dx + params.P * dx + params.f) / hbar
    out = np.exp(1j * phase)
    if out.ndim == 0:
        return complex(out)
    return out
