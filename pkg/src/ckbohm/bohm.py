"""Bohmian trajectory engine.

Trajectories are integral curves of the damped hydrodynamic velocity field

    v(x, t) = (dS/dx / m) e^{-gamma t},

where S is the phase of the wave function.  The field can come from three
sources, all exposed here both as plain velocity functions and as field
objects the ensemble integrator can drive:

* a single Gaussian-ansatz state, where the field is affine in x,
* a two-packet superposition, via the flux-weighted four-term formula,
* a grid wave function, via spectral differentiation plus cubic
  interpolation.

Single-packet flows are affine with positive slope sigma_t/sigma_0, so they
preserve launch ordering exactly (no crossing).  Superpositions develop
interference nodes where the raw velocity quotient is ill-conditioned; the
integrator clamps flagged samples to their last finite velocity, because a
true trajectory never reaches a node in finite time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import norm as _normal

from .core import Damping, PhysicalSetup, SimulationError, classify_regime
from .closed_form import free_solution, harmonic_centroid, linear_solution
from .gaussian_ode import GaussianParams
from .grid_solver import GridWavefunction

__all__ = [
    "TrajectoryExitError",
    "TrajectoryEnsemble",
    "sample_initial_positions",
    "velocity_gaussian",
    "velocity_superposition",
    "velocity_grid",
    "GaussianField",
    "SuperpositionField",
    "GridField",
    "FunctionField",
    "integrate_trajectories",
    "analytic_trajectory",
    "empirical_tv_distance",
]

_DENSITY_FLOOR = 1e-12  # node flag: rho below this fraction of max rho


class TrajectoryExitError(SimulationError):
    """A trajectory left the grid interior; carries the exit time."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


@dataclass
class TrajectoryEnsemble:
    """Positions of an ordered set of trajectories at recorded times.

    ``positions[i, j]`` is trajectory i at ``times[j]``; ``node_flagged[i]``
    marks trajectories that needed the node-proximity velocity clamp at any
    point.
    """

    launch_positions: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    node_flagged: np.ndarray

    def write(self, path, centroid: np.ndarray | None = None) -> None:
        """Plain-text dump: columns t, x_traj_0 ... x_traj_{n-1}, x_centroid."""
        n = self.launch_positions.size
        cols = [self.times] + [self.positions[i] for i in range(n)]
        names = ["t"] + [f"x_traj_{i}" for i in range(n)]
        if centroid is not None:
            cols.append(np.asarray(centroid))
            names.append("x_centroid")
        header = "columns = " + " ".join(names)
        np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header)


def sample_initial_positions(
    x0: float,
    sigma0: float,
    n: int,
    mode: str = "quantile",
    seed: int | None = None,
) -> np.ndarray:
    """Launch points distributed according to the initial Gaussian density.

    ``quantile`` places point i at the (i + 1/2)/n quantile of
    N(x0, sigma0^2), which is deterministic and symmetric; ``random`` draws
    i.i.d. samples with the given seed and returns them sorted.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if mode == "quantile":
        q = (np.arange(n) + 0.5) / n
        return x0 + sigma0 * _normal.ppf(q)
    if mode == "random":
        rng = np.random.default_rng(seed)
        return np.sort(rng.normal(x0, sigma0, size=n))
    raise ValueError(f"unknown sampling mode {mode!r}")


def velocity_gaussian(x, state: GaussianParams, setup: PhysicalSetup):
    """v = [P/m + (2 Re alpha / m)(x - X)] e^{-gamma t} for one packet.

    At x = X the second term vanishes and the trajectory rides the classical
    centroid flow.
    """
    x = np.asarray(x, dtype=float)
    decay = math.exp(-setup.gamma * state.t)
    out = (state.P / setup.mass + (2.0 * state.alpha.real / setup.mass) * (x - state.X)) * decay
    if out.ndim == 0:
        return float(out)
    return out


def _log_density_and_phase(x: np.ndarray, p: GaussianParams, hbar: float):
    dx = x - p.X
    exponent_im = p.alpha.imag * dx * dx + p.f.imag
    exponent_re = p.alpha.real * dx * dx + p.P * dx + p.f.real
    return -2.0 * exponent_im / hbar, exponent_re


def velocity_superposition(
    x,
    p1: GaussianParams,
    p2: GaussianParams,
    setup: PhysicalSetup,
    return_node_flag: bool = False,
):
    """Flux-weighted velocity of a normalized two-packet superposition.

    The field is the density-weighted sum of the two single-packet fields
    plus cos/sin interference terms driven by the phase difference
    xi = (S1 - S2)/hbar.  Weights are evaluated in log space so packets of
    very different magnitude cannot overflow.  With ``return_node_flag`` the
    second return value marks points whose density is below the node floor
    (1e-12 of the peak), where the quotient is ill-conditioned.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m, hbar = setup.mass, setup.hbar
    if abs(p1.t - p2.t) > 1e-9 * max(1.0, abs(p1.t)):
        raise ValueError("superposed packets must share the same time")
    decay = math.exp(-setup.gamma * p1.t)

    lr1, s1 = _log_density_and_phase(x, p1, hbar)
    lr2, s2 = _log_density_and_phase(x, p2, hbar)
    ref = np.maximum(lr1, lr2)
    w1 = np.exp(lr1 - ref)
    w2 = np.exp(lr2 - ref)
    xi = (s1 - s2) / hbar
    cross = np.sqrt(w1 * w2)
    rho = w1 + w2 + 2.0 * cross * np.cos(xi)

    # Peak log-density of either packet, for the global node floor.
    peak = max(-2.0 * p1.f.imag / hbar, -2.0 * p2.f.imag / hbar)
    flag = (np.log(np.maximum(rho, 1e-300)) + ref) < (math.log(_DENSITY_FLOOR) + peak)
    rho = np.maximum(rho, 1e-300)

    v1 = p1.P / m + (2.0 * p1.alpha.real / m) * (x - p1.X)
    v2 = p2.P / m + (2.0 * p2.alpha.real / m) * (x - p2.X)
    interference = (
        np.cos(xi) * (0.5 * (p1.P + p2.P) / m
                      + (p1.alpha.real * (x - p1.X) + p2.alpha.real * (x - p2.X)) / m)
        - np.sin(xi) * (p1.alpha.imag * (x - p1.X) - p2.alpha.imag * (x - p2.X)) / m
    )
    v = decay * (w1 * v1 + w2 * v2 + 2.0 * cross * interference) / rho
    if scalar:
        v, flag = float(v[0]), bool(flag[0])
    if return_node_flag:
        return v, flag
    return v


def _grid_velocity_array(state: GridWavefunction, setup: PhysicalSetup):
    """Velocity samples on the grid, plus the node mask."""
    k = state.wavenumbers
    dpsi = np.fft.ifft(1j * k * np.fft.fft(state.psi))
    rho = state.density()
    floor = _DENSITY_FLOOR * rho.max()
    v = (setup.hbar / setup.mass) * np.imag(dpsi * np.conj(state.psi)) / np.maximum(rho, floor)
    v *= math.exp(-setup.gamma * state.t)
    return v, rho, floor


def velocity_grid(
    x,
    state: GridWavefunction,
    setup: PhysicalSetup,
    return_node_flag: bool = False,
):
    """(hbar/m) Im(dPsi/dx / Psi) e^{-gamma t} from a grid wave function.

    Spectral differentiation on the grid, cubic interpolation off it.
    Positions must lie in the grid interior.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < state.x_min + state.dx) or np.any(x > state.x_max - 2 * state.dx):
        raise ValueError("requested positions fall outside the grid interior")
    v_arr, rho, floor = _grid_velocity_array(state, setup)
    xs = state.x
    v = CubicSpline(xs, v_arr)(x)
    flag = CubicSpline(xs, rho)(x) < floor
    if scalar:
        v, flag = float(v[0]), bool(flag[0])
    if return_node_flag:
        return v, flag
    return v


# ---------------------------------------------------------------------------
# Velocity fields for the ensemble integrator
# ---------------------------------------------------------------------------


class VelocityField(Protocol):
    def velocity_and_flags(self, x: np.ndarray, t: float): ...


class GaussianField:
    """Field of a single packet whose parameters come from ``params_of(t)``."""

    def __init__(self, params_of: Callable[[float], GaussianParams], setup: PhysicalSetup):
        self.params_of = params_of
        self.setup = setup

    def velocity_and_flags(self, x: np.ndarray, t: float):
        return velocity_gaussian(x, self.params_of(t), self.setup), None


class SuperpositionField:
    """Field of two coherently superposed packets."""

    def __init__(
        self,
        params1_of: Callable[[float], GaussianParams],
        params2_of: Callable[[float], GaussianParams],
        setup: PhysicalSetup,
    ):
        self.params1_of = params1_of
        self.params2_of = params2_of
        self.setup = setup

    def velocity_and_flags(self, x: np.ndarray, t: float):
        return velocity_superposition(
            x, self.params1_of(t), self.params2_of(t), self.setup, return_node_flag=True
        )


class FunctionField:
    """Adapter for a plain callable v(x, t)."""

    def __init__(self, fn: Callable[[np.ndarray, float], np.ndarray]):
        self.fn = fn

    def velocity_and_flags(self, x: np.ndarray, t: float):
        return self.fn(x, t), None


class GridField:
    """Field interpolated from grid snapshots, cubic in both x and t.

    Snapshots must be equally spaced in time.  Trajectory positions outside
    the interior margin raise ``TrajectoryExitError`` through the integrator.
    """

    def __init__(self, snapshots: Sequence[GridWavefunction], setup: PhysicalSetup):
        if len(snapshots) < 2:
            raise ValueError("need at least two snapshots")
        self.snapshots = list(snapshots)
        self.setup = setup
        self.times = np.array([s.t for s in self.snapshots])
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
            raise ValueError("snapshots must be equally spaced in time")
        self.dt_snap = float(steps[0])
        first = self.snapshots[0]
        self.x_lo = first.x_min + 2 * first.dx
        self.x_hi = first.x_max - 3 * first.dx
        self._cache: dict[int, tuple[CubicSpline, CubicSpline, float]] = {}

    def _splines(self, j: int):
        if j not in self._cache:
            snap = self.snapshots[j]
            v_arr, rho, floor = _grid_velocity_array(snap, self.setup)
            self._cache[j] = (
                CubicSpline(snap.x, v_arr),
                CubicSpline(snap.x, rho),
                floor,
            )
        return self._cache[j]

    def velocity_and_flags(self, x: np.ndarray, t: float):
        if np.any(x < self.x_lo) or np.any(x > self.x_hi):
            raise TrajectoryExitError(
                f"trajectory left the grid interior at t = {t}", exit_time=t
            )
        m = len(self.snapshots)
        s = (t - self.times[0]) / self.dt_snap
        j1 = int(np.clip(math.floor(s), 0, m - 2))
        j0 = max(j1 - 1, 0)
        j3 = min(j1 + 2, m - 1)
        window = sorted({j0, j1, j1 + 1, j3})
        v = np.zeros_like(np.asarray(x, dtype=float))
        flag = np.zeros(np.asarray(x).shape, dtype=bool)
        # Lagrange interpolation in t over the (<= 4)-node window.
        ts = self.times[window]
        for idx, j in enumerate(window):
            w = 1.0
            for kdx, jk in enumerate(window):
                if kdx != idx:
                    w *= (t - ts[kdx]) / (ts[idx] - ts[kdx])
            vsp, rsp, floor = self._splines(j)
            v = v + w * vsp(x)
            flag |= rsp(x) < floor
        return v, flag


def integrate_trajectories(
    launches: np.ndarray,
    field: VelocityField,
    t_end: float,
    dt: float,
    record_stride: int = 1,
    t0: float = 0.0,
) -> TrajectoryEnsemble:
    """RK4 transport of an ensemble through a time-dependent velocity field.

    The field is re-evaluated at every stage time (no interpolation beyond
    what the field itself does).  Samples flagged as node-proximate reuse
    their last finite velocity for that stage.
    """
    launches = np.atleast_1d(np.asarray(launches, dtype=float))
    n_steps = int(round((t_end - t0) / dt))
    if abs(t0 + n_steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end - t0 must be an integer number of dt steps")
    x = launches.copy()
    times = [t0]
    history = [x.copy()]
    ever_flagged = np.zeros(x.shape, dtype=bool)
    last_v = np.zeros_like(x)

    def eval_v(pos, t):
        v, flag = field.velocity_and_flags(pos, t)
        v = np.asarray(v, dtype=float)
        if flag is not None and np.any(flag):
            v = np.where(flag, last_v, v)
            ever_flagged[flag] = True
        return v

    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        k1 = eval_v(x, t)
        k2 = eval_v(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = eval_v(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = eval_v(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        last_v = k1
        if i % record_stride == 0:
            times.append(t0 + i * dt)
            history.append(x.copy())
    return TrajectoryEnsemble(
        launch_positions=launches,
        times=np.array(times),
        positions=np.vstack([h[np.newaxis, :] for h in history]).T.copy(),
        node_flagged=ever_flagged,
    )


def analytic_trajectory(
    scenario: str,
    x_launch: float,
    t: float,
    setup: PhysicalSetup,
    x0: float = 0.0,
    p0: float = 0.0,
    sigma0: float = 1.0,
) -> float:
    """Closed trajectory laws for the analytically solvable flows.

    scenario:
      * ``"free"`` or ``"linear"``: x(t) = x_t + (sigma_t/sigma_0)(x(0) - x0)
      * ``"quasi_eigenstate"``: x(t) = x(0) e^{-gamma t/2}
      * ``"coherent"``: x(t) = x_t + (x(0) - x0) e^{-gb t/2} with gb = gamma
        for under-/critically damped and gb = gamma - 2*Gamma overdamped
    """
    gamma = setup.gamma
    if scenario in ("free", "linear"):
        shape = free_solution(t, x0, p0, sigma0, setup)
        if scenario == "free":
            x_t = shape.x
        else:
            x_t, _ = linear_solution(t, x0, p0, setup)
        return x_t + (shape.sigma / sigma0) * (x_launch - x0)
    if scenario == "quasi_eigenstate":
        return x_launch * math.exp(-0.5 * gamma * t)
    if scenario == "coherent":
        regime = classify_regime(setup)
        x_t, _ = harmonic_centroid(t, x0, p0, regime, setup)
        gbar = gamma
        if regime.kind is Damping.OVERDAMPED:
            gbar = gamma - 2.0 * regime.rate
        return x_t + (x_launch - x0) * math.exp(-0.5 * gbar * t)
    raise ValueError(f"unsupported scenario {scenario!r}")


def empirical_tv_distance(
    samples: np.ndarray,
    density: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n_bins: int = 24,
) -> float:
    """Total-variation distance between binned samples and a density.

    Both the empirical and the exact distribution are coarsened onto the
    same bins, so the statistic tests transport rather than binning.  Mass
    outside [lo, hi] is accumulated in two overflow cells.
    """
    samples = np.asarray(samples, dtype=float)
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    p_emp = counts / samples.size
    p_true = np.empty(n_bins)
    for i in range(n_bins):
        xs = np.linspace(edges[i], edges[i + 1], 9)
        p_true[i] = np.trapezoid(density(xs), xs)
    below = float(np.mean(samples < lo))
    above = float(np.mean(samples > hi))
    xs_lo = np.linspace(lo - 20.0 * (hi - lo), lo, 2001)
    xs_hi = np.linspace(hi, hi + 20.0 * (hi - lo), 2001)
    true_below = float(np.trapezoid(density(xs_lo), xs_lo))
    true_above = float(np.trapezoid(density(xs_hi), xs_hi))
    tv = 0.5 * (
        np.abs(p_emp - p_true).sum()
        + abs(below - true_below)
        + abs(above - true_above)
    )
    return float(tv)
