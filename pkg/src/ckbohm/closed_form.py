"""Exact solutions for damped Gaussian packets: free, linear ramp, harmonic well.

Every closed form here is an exact solution of the Gaussian-parameter ODE
system (see :mod:`ckbohm.gaussian_ode`), which makes this module both the
fastest engine and the oracle against which the ODE and grid engines are
cross-validated.

Conventions:

* ``tau = (1 - e^{-gamma t}) / gamma`` is the contracted time.  Replacing t
  by tau in the frictionless free-packet formulas yields the damped ones.
* Harmonic shape dynamics is handled through g = alpha e^{-gamma t}, which
  obeys an autonomous Riccati equation with roots
  ``g_pm = (m/2) (-gamma/2 +- beta)``, ``beta = sqrt((gamma/2)^2 - omega0^2)``
  (principal branch: beta = i*Omega underdamped, beta = Gamma overdamped).
* All phases use the principal complex logarithm.  For normalizable initial
  data (Im g0 > 0) the log argument never winds around the origin, so the
  phase is continuous in time; cross-checks against the ODE engine compare
  e^{i f / hbar} rather than f itself.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Damping,
    DampingRegime,
    HarmonicPotential,
    LinearPotential,
    NonNormalizableError,
    PhysicalSetup,
    SingularStateError,
    classify_regime,
)
from .gaussian_ode import GaussianParams, gaussian_amplitude

__all__ = [
    "time_contraction",
    "FreeSolution",
    "free_solution",
    "free_f",
    "free_asymptotics",
    "linear_solution",
    "linear_action",
    "harmonic_centroid",
    "harmonic_action",
    "HarmonicShapeState",
    "riccati_roots",
    "harmonic_g",
    "harmonic_g_integral",
    "harmonic_shape",
    "StationaryShape",
    "stationary_alpha",
    "quasi_eigenstate",
    "coherent_packet",
    "coherent_packet_params",
    "free_params",
    "linear_params",
    "harmonic_params",
]


def time_contraction(gamma: float, t: float) -> float:
    """tau = (1 - e^{-gamma t}) / gamma, with the gamma -> 0 limit tau = t."""
    if gamma == 0.0:
        return t
    return -math.expm1(-gamma * t) / gamma


def _ramp_kernel(gamma: float, t: float) -> float:
    """(gamma t - 1 + e^{-gamma t}) / gamma^2, series-protected near gamma t = 0."""
    u = gamma * t
    if abs(u) < 1e-4:
        # (e^{-u} - 1 + u)/u^2 = 1/2 - u/6 + u^2/24 - u^3/120 + u^4/720 - ...
        return t * t * (0.5 - u / 6.0 + u * u / 24.0 - u**3 / 120.0 + u**4 / 720.0)
    return (u - 1.0 + math.exp(-u)) / (gamma * gamma)


# ---------------------------------------------------------------------------
# Free packet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeSolution:
    """Damped free-packet state: centroid, shape and effective spreading.

    ``sigma_tilde`` is the complex spreading with
    alpha = i hbar / (4 sigma0 sigma_tilde) and sigma = |sigma_tilde|.
    """

    x: float
    p: float
    alpha: complex
    sigma: float
    sigma_tilde: complex


def free_solution(t: float, x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> FreeSolution:
    """Exact damped free-packet solution at time t.

    The centroid stops at x0 + p0/(m gamma) and the width freezes at
    sigma0 sqrt(1 + (hbar / 2 m gamma sigma0^2)^2) as t -> infinity;
    at gamma = 0 the frictionless forms (tau -> t) are used.
    """
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    tau = time_contraction(gamma, t)
    x = x0 + (p0 / m) * tau
    p = p0 * math.exp(-gamma * t)
    sigma_tilde = sigma0 * (1.0 + 0.5j * hbar * tau / (m * sigma0**2))
    alpha = 0.25j * hbar / (sigma0 * sigma_tilde)
    return FreeSolution(x=x, p=p, alpha=alpha, sigma=abs(sigma_tilde), sigma_tilde=sigma_tilde)


def free_f(t: float, x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> complex:
    """Phase/normalization parameter of the damped free packet.

    f = (i hbar / 4) ln(2 pi sigma_tilde^2) + S_cl with the classical action
    S_cl = (p0^2 / 2m) tau.  Only e^{i f / hbar} is branch-free; compare at
    that level.
    """
    sol = free_solution(t, x0, p0, sigma0, setup)
    tau = time_contraction(setup.gamma, t)
    s_cl = (p0**2 / (2.0 * setup.mass)) * tau
    return 0.25j * setup.hbar * cmath.log(2.0 * math.pi * sol.sigma_tilde**2) + s_cl


def free_asymptotics(x0: float, p0: float, sigma0: float, setup: PhysicalSetup):
    """Limit position and width (x_inf, sigma_inf) of the frozen free packet."""
    if setup.gamma <= 0.0:
        raise ValueError("a free packet only freezes for gamma > 0")
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    x_inf = x0 + p0 / (m * gamma)
    sigma_inf = sigma0 * math.sqrt(1.0 + (hbar / (2.0 * m * gamma * sigma0**2)) ** 2)
    return x_inf, sigma_inf


# ---------------------------------------------------------------------------
# Linear ramp V(x) = -m a x
# ---------------------------------------------------------------------------


def _linear_slope(setup: PhysicalSetup) -> float:
    if not isinstance(setup.potential, LinearPotential):
        raise ValueError("linear_solution requires a linear potential")
    return setup.potential.slope


def linear_solution(t: float, x0: float, p0: float, setup: PhysicalSetup):
    """Damped centroid (x_t, p_t) under V(x) = -m a x.

    For gamma*t >> 1 the motion becomes uniform with limit momentum
    p_inf = m a / gamma; at gamma = 0 it is uniformly accelerated.
    """
    a = _linear_slope(setup)
    m, gamma = setup.mass, setup.gamma
    tau = time_contraction(gamma, t)
    x = x0 + (p0 / m) * tau + a * _ramp_kernel(gamma, t)
    p = p0 * math.exp(-gamma * t) + m * a * tau
    return x, p


def linear_action(t: float, x0: float, p0: float, setup: PhysicalSetup) -> float:
    """Classical action S_cl along the damped linear-potential trajectory."""
    a = _linear_slope(setup)
    m, gamma = setup.mass, setup.gamma
    if gamma == 0.0:
        return (
            p0**2 * t / (2.0 * m)
            + m * a * x0 * t
            + p0 * a * t * t
            + m * a * a * t**3 / 3.0
        )
    # S_cl = [X P]_0^t - int P^2 e^{-gamma t'} / 2m dt' with P = A + B e^{gamma t'}
    x_t, p_t = linear_solution(t, x0, p0, setup)
    cap_p = p_t * math.exp(gamma * t)
    big_a = p0 - m * a / gamma
    big_b = m * a / gamma
    tau = time_contraction(gamma, t)
    kinetic = (
        big_a**2 * tau
        + 2.0 * big_a * big_b * t
        + big_b**2 * math.expm1(gamma * t) / gamma
    ) / (2.0 * m)
    return x_t * cap_p - x0 * p0 - kinetic


def linear_params(t: float, x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> GaussianParams:
    """Full Gaussian-parameter state for the damped linear-potential packet.

    The shape flow is identical to the free case (only V'' enters it); the
    centroid and the action differ.
    """
    x, p = linear_solution(t, x0, p0, setup)
    shape = free_solution(t, x0, p0, sigma0, setup)
    s_cl = linear_action(t, x0, p0, setup)
    f = 0.25j * setup.hbar * cmath.log(2.0 * math.pi * shape.sigma_tilde**2) + s_cl
    return GaussianParams(
        X=x, P=p * math.exp(setup.gamma * t), alpha=shape.alpha, f=f, t=t, s_cl=s_cl
    )


def free_params(t: float, x0: float, p0: float, sigma0: float, setup: PhysicalSetup) -> GaussianParams:
    """Full Gaussian-parameter state for the damped free packet."""
    sol = free_solution(t, x0, p0, sigma0, setup)
    tau = time_contraction(setup.gamma, t)
    s_cl = (p0**2 / (2.0 * setup.mass)) * tau
    return GaussianParams(
        X=sol.x,
        P=sol.p * math.exp(setup.gamma * t),
        alpha=sol.alpha,
        f=free_f(t, x0, p0, sigma0, setup),
        t=t,
        s_cl=s_cl,
    )


# ---------------------------------------------------------------------------
# Harmonic well: centroid
# ---------------------------------------------------------------------------


def _require_harmonic(setup: PhysicalSetup) -> float:
    if not isinstance(setup.potential, HarmonicPotential):
        raise ValueError("operation requires a harmonic potential")
    return setup.potential.omega0


def _check_regime(regime: DampingRegime, setup: PhysicalSetup) -> DampingRegime:
    actual = classify_regime(setup)
    if actual.kind is not regime.kind:
        raise ValueError(
            f"regime {regime.kind.value} inconsistent with setup "
            f"(omega0 = {_require_harmonic(setup)}, gamma = {setup.gamma} "
            f"classifies as {actual.kind.value})"
        )
    return actual


def harmonic_centroid(t: float, x0: float, p0: float, regime: DampingRegime, setup: PhysicalSetup):
    """Damped-oscillator centroid (x_t, p_t) in the given regime.

    Launches with p0 = 0 reproduce the turning-point forms
    (omega0/Omega) x0 e^{-gamma t/2} cos(Omega t - phi) and their critical /
    overdamped analogs; general p0 is supported through the standard
    fundamental solutions.  The overdamped branch uses the explicit
    cosh/sinh combination so all returned quantities stay real.
    """
    _require_harmonic(setup)
    regime = _check_regime(regime, setup)
    m, gamma = setup.mass, setup.gamma
    half = 0.5 * gamma
    v0 = p0 / m
    envelope = math.exp(-half * t)
    if regime.kind is Damping.UNDERDAMPED:
        om = regime.rate
        c, s = math.cos(om * t), math.sin(om * t)
        b = (v0 + half * x0) / om
        pos = x0 * c + b * s
        x = envelope * pos
        xdot = envelope * (-half * pos + om * (b * c - x0 * s))
    elif regime.kind is Damping.CRITICAL:
        u = v0 + half * x0
        pos = x0 + u * t
        x = envelope * pos
        xdot = envelope * (-half * pos + u)
    else:
        gam = regime.rate
        c, s = math.cosh(gam * t), math.sinh(gam * t)
        b = (v0 + half * x0) / gam
        pos = x0 * c + b * s
        x = envelope * pos
        xdot = envelope * (-half * pos + gam * (x0 * s + b * c))
    return x, m * xdot


def harmonic_action(t: float, x0: float, p0: float, regime: DampingRegime, setup: PhysicalSetup) -> float:
    """Classical action along a damped harmonic trajectory.

    Integrating the Lagrangian by parts against the equation of motion
    collapses the integral to the boundary term S_cl = (X_t P_t - X_0 P_0)/2,
    valid in every damping regime.
    """
    x_t, p_t = harmonic_centroid(t, x0, p0, regime, setup)
    cap_p = p_t * math.exp(setup.gamma * t)
    return 0.5 * (x_t * cap_p - x0 * p0)


# ---------------------------------------------------------------------------
# Harmonic well: Riccati shape dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicShapeState:
    """Shape parameter in the damped frame, g = alpha e^{-gamma t}, with the
    Riccati roots g_pm and branch frequency beta it evolves between."""

    g: complex
    g_plus: complex
    g_minus: complex
    beta: complex


def riccati_roots(setup: PhysicalSetup):
    """Roots g_pm of g^2 + (m gamma / 2) g + (m omega0 / 2)^2 and beta.

    Identities: g_+ + g_- = -m gamma / 2 and g_+ g_- = (m omega0 / 2)^2.
    """
    omega0 = _require_harmonic(setup)
    m, gamma = setup.mass, setup.gamma
    beta = cmath.sqrt(complex((0.5 * gamma) ** 2 - omega0**2))
    g_plus = 0.5 * m * (-0.5 * gamma + beta)
    g_minus = 0.5 * m * (-0.5 * gamma - beta)
    return g_plus, g_minus, beta


def harmonic_g(t: float, g0: complex, setup: PhysicalSetup) -> complex:
    """Evolve the damped-frame shape parameter g from g0 to time t.

    Away from criticality the flow is the Moebius map between the fixed
    points g_pm; at criticality both roots merge at g_s = -m gamma / 4 and
    the flow is rational in t.  Normalizable initial data (Im g0 > 0) never
    reaches the pole of either form; if a pole is hit the error reports its
    time.
    """
    regime = classify_regime(setup)
    m = setup.mass
    if regime.kind is Damping.CRITICAL:
        g_s = -0.25 * m * setup.gamma
        den = 1.0 + (g0 - g_s) * (2.0 * t / m)
        if den == 0.0:
            pole = -m / (2.0 * (g0 - g_s))
            raise SingularStateError(
                f"critical shape flow pole at t = {pole.real}", pole_time=pole.real
            )
        return g_s + (g0 - g_s) / den
    g_plus, g_minus, beta = riccati_roots(setup)
    # Rescale numerator and denominator by e^{-beta t} so nothing overflows
    # for Re(beta) > 0.
    decay = cmath.exp(-2.0 * beta * t)
    den = (g0 - g_minus) - (g0 - g_plus) * decay
    scale = abs(g0 - g_minus) + abs(g0 - g_plus)
    if abs(den) <= 1e-300 * max(scale, 1.0):
        ratio = (g0 - g_plus) / (g0 - g_minus)
        pole = (cmath.log(ratio) / (2.0 * beta)).real
        raise SingularStateError(
            f"shape flow pole at t = {pole}", pole_time=pole
        )
    num = g_plus * (g0 - g_minus) - g_minus * (g0 - g_plus) * decay
    return num / den


def harmonic_g_integral(t: float, g0: complex, setup: PhysicalSetup) -> complex:
    """int_0^t g dt', used for the phase/normalization parameter f.

    Principal-branch logarithms; continuous for Im g0 > 0.
    """
    regime = classify_regime(setup)
    m = setup.mass
    if regime.kind is Damping.CRITICAL:
        g_s = -0.25 * m * setup.gamma
        return g_s * t + 0.5 * m * cmath.log(1.0 + (g0 - g_s) * (2.0 * t / m))
    g_plus, g_minus, beta = riccati_roots(setup)
    den_t = (g0 - g_minus) - (g0 - g_plus) * cmath.exp(-2.0 * beta * t)
    den_0 = g_plus - g_minus
    return -0.25 * m * setup.gamma * t + 0.5 * m * (
        beta * t + cmath.log(den_t) - cmath.log(den_0)
    )


def harmonic_shape(t: float, g0: complex, setup: PhysicalSetup) -> HarmonicShapeState:
    g_plus, g_minus, beta = riccati_roots(setup)
    return HarmonicShapeState(
        g=harmonic_g(t, g0, setup), g_plus=g_plus, g_minus=g_minus, beta=beta
    )


def harmonic_params(t: float, x0: float, p0: float, alpha0: complex, setup: PhysicalSetup) -> GaussianParams:
    """Full Gaussian-parameter state in the harmonic well at time t.

    ``alpha0`` is the initial shape parameter (equal to g0); the returned
    state carries alpha_t = g_t e^{gamma t} and the exact phase f_t.
    """
    if alpha0.imag <= 0.0:
        raise NonNormalizableError("alpha0 must have positive imaginary part")
    regime = classify_regime(setup)
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    x_t, p_t = harmonic_centroid(t, x0, p0, regime, setup)
    g_t = harmonic_g(t, alpha0, setup)
    s_cl = harmonic_action(t, x0, p0, regime, setup)
    f0 = 0.25j * hbar * math.log(math.pi * hbar / (2.0 * alpha0.imag))
    f = f0 + (1j * hbar / m) * harmonic_g_integral(t, alpha0, setup) + s_cl
    return GaussianParams(
        X=x_t,
        P=p_t * math.exp(gamma * t),
        alpha=g_t * math.exp(gamma * t),
        f=f,
        t=t,
        s_cl=s_cl,
    )


# ---------------------------------------------------------------------------
# Stationary shapes and special states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationaryShape:
    """Shape law alpha_t = g_root e^{gamma t} with constant damped-frame g.

    Only the underdamped root has Im g > 0 and hence a normalizable Gaussian
    envelope; the critical and overdamped laws are pure (real-alpha) phase
    profiles whose velocity field is still meaningful.
    """

    kind: Damping
    g_root: complex
    normalizable: bool
    gamma: float
    mass: float
    hbar: float
    rate: float

    def alpha(self, t: float) -> complex:
        return self.g_root * math.exp(self.gamma * t)

    def f_shape(self, t: float) -> complex:
        """Shape contribution to f (no classical action term)."""
        if self.normalizable:
            f0 = 0.25j * self.hbar * math.log(
                math.pi * self.hbar / (2.0 * self.g_root.imag)
            )
        else:
            f0 = 0.0 + 0.0j
        return f0 + (1j * self.hbar * self.g_root / self.mass) * t

    def sigma(self, t: float) -> float:
        """Width e^{-gamma t/2} sqrt(hbar / 2 m Omega) (underdamped only)."""
        if not self.normalizable:
            raise NonNormalizableError(
                f"{self.kind.value} stationary shape has no Gaussian envelope"
            )
        return math.exp(-0.5 * self.gamma * t) * math.sqrt(
            self.hbar / (2.0 * self.mass * self.rate)
        )


def stationary_alpha(regime: DampingRegime, setup: PhysicalSetup) -> StationaryShape:
    """Fixed-point shape law of the Riccati flow for the given regime.

    The root is chosen so that the gamma -> 0 limit recovers the frictionless
    coherent value alpha = i m omega0 / 2:

    * underdamped:  g = (i m Omega / 2)(1 + i gamma / 2 Omega), normalizable
    * critical:     g = -m gamma / 4 (real, non-normalizable)
    * overdamped:   g = (m Gamma / 2)(1 - gamma / 2 Gamma) (real,
      non-normalizable)
    """
    regime = _check_regime(regime, setup)
    m = setup.mass
    if regime.kind is Damping.CRITICAL:
        root: complex = complex(-0.25 * m * setup.gamma)
        normalizable = False
    else:
        g_plus, _, _ = riccati_roots(setup)
        root = g_plus
        normalizable = regime.kind is Damping.UNDERDAMPED
    return StationaryShape(
        kind=regime.kind,
        g_root=root,
        normalizable=normalizable,
        gamma=setup.gamma,
        mass=m,
        hbar=setup.hbar,
        rate=regime.rate,
    )


def _hermite(n: int, u):
    """Physicists' Hermite polynomial by the three-term recurrence."""
    h_prev = np.ones_like(u)
    if n == 0:
        return h_prev
    h = 2.0 * u
    for j in range(1, n):
        h_prev, h = h, 2.0 * u * h - 2.0 * j * h_prev
    return h


_MAX_HERMITE = 50


def quasi_eigenstate(n: int, x, t: float, setup: PhysicalSetup):
    """Quasi-stationary eigenstate of the damped harmonic well.

    At every instant this is an eigenstate of the damped wave equation, but
    the whole family collapses toward the well bottom: the envelope narrows
    like e^{-gamma t/2} while the e^{gamma t/4} prefactor keeps the spatial
    norm exactly 1.  Only defined for omega0 > gamma/2.
    """
    if n < 0 or n > _MAX_HERMITE:
        raise ValueError(f"n must be in [0, {_MAX_HERMITE}], got {n}")
    omega0 = _require_harmonic(setup)
    m, hbar, gamma = setup.mass, setup.hbar, setup.gamma
    if omega0 <= 0.5 * gamma:
        raise ValueError(
            f"quasi-eigenstates require omega0 > gamma/2 "
            f"(omega0 = {omega0}, gamma/2 = {0.5 * gamma})"
        )
    big_omega = math.sqrt(omega0**2 - (0.5 * gamma) ** 2)
    x = np.asarray(x, dtype=float)
    norm = (math.pi * hbar / (m * big_omega)) ** (-0.25) / math.sqrt(
        2.0**n * math.factorial(n)
    )
    grow = math.exp(gamma * t)
    u = math.sqrt(m * big_omega / hbar) * math.exp(0.5 * gamma * t) * x
    envelope = -(m * big_omega / (2.0 * hbar)) * grow * x * x
    phase = -(n + 0.5) * big_omega * t - (m * gamma / (4.0 * hbar)) * grow * x * x
    out = norm * math.exp(0.25 * gamma * t) * np.exp(envelope + 1j * phase) * _hermite(n, u)
    if out.ndim == 0:
        return complex(out)
    return out


def coherent_packet_params(t: float, x0: float, setup: PhysicalSetup) -> GaussianParams:
    """Parameters of the minimum-uncertainty packet launched at rest from x0.

    gamma = 0 gives the textbook coherent state (constant width
    sqrt(hbar / 2 m omega0)); underdamped gamma > 0 gives the stationary
    shape alpha_t = (i m Omega / 2)(1 + i gamma / 2 Omega) e^{gamma t} whose
    width shrinks like e^{-gamma t/2}.  Critical and overdamped setups have
    no normalizable analog.
    """
    regime = classify_regime(setup)
    if regime.kind is not Damping.UNDERDAMPED:
        raise NonNormalizableError(
            f"no normalizable coherent packet in the {regime.kind.value} regime"
        )
    shape = stationary_alpha(regime, setup)
    x_t, p_t = harmonic_centroid(t, x0, 0.0, regime, setup)
    s_cl = harmonic_action(t, x0, 0.0, regime, setup)
    return GaussianParams(
        X=x_t,
        P=p_t * math.exp(setup.gamma * t),
        alpha=shape.alpha(t),
        f=shape.f_shape(t) + s_cl,
        t=t,
        s_cl=s_cl,
    )


def coherent_packet(x, t: float, x0: float, setup: PhysicalSetup):
    """Complex amplitude of the damped coherent packet at positions x."""
    params = coherent_packet_params(t, x0, setup)
    return gaussian_amplitude(x, params, setup.hbar)
