"""Split-step Fourier solver for the damped wave equation.

Brute-force oracle for everything else in the package: it propagates

    i hbar dPsi/dt = -(hbar^2 / 2m) e^{-gamma t} d^2Psi/dx^2
                     + V(x) e^{+gamma t} Psi

for arbitrary initial data (superpositions included) on a uniform periodic
grid.  One step is Strang splitting, half potential / full kinetic / half
potential, with both exponential prefactors evaluated at the step midpoint
t + dt/2; midpoint evaluation keeps the scheme second order in dt despite
the time-dependent coefficients (endpoint evaluation degrades it to first
order).

The instantaneous Hamiltonian is Hermitian, so the evolution is unitary at
every instant and the discrete norm is conserved to roundoff; a per-step
norm-drift check turns violations into hard errors instead of silent decay.
Domains must be sized so the packet never reaches the periodic boundary.
An optional cosine-ramp absorber supports runs that translate indefinitely
(linear potential); with the absorber active the norm is allowed to fall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PhysicalSetup, SimulationError, potential_eval

__all__ = [
    "GridResolutionError",
    "GridInstabilityError",
    "GridConfig",
    "GridWavefunction",
    "init_grid",
    "split_step",
    "propagate_grid",
    "write_snapshot",
]

_BOUNDARY_TOL = 1e-10  # max boundary amplitude relative to max |psi|
_TAIL_FRACTION = 0.9  # spectral-tail check starts at this fraction of k_max
_TAIL_TOL = 1e-8  # max tolerated spectral-tail weight at init
_NORM_DRIFT_TOL = 1e-8  # per-step norm drift treated as instability


class GridResolutionError(SimulationError):
    """Initial data is not resolved by the grid (too narrow or too fast)."""


class GridInstabilityError(SimulationError):
    """Norm drifted by more than the unitarity tolerance in one step."""


@dataclass(frozen=True)
class GridConfig:
    x_min: float
    x_max: float
    n_points: int = 4096
    dt: float = 1e-3
    absorbing_margin: float = 0.0

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.n_points < 2 or self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.absorbing_margin <= 0.2:
            raise ValueError("absorbing_margin must lie in [0, 0.2]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    def check_momentum_resolution(self, p_max: float, hbar: float) -> None:
        """Require hbar*pi/dx >= 8 * p_max so the fastest momentum is resolved."""
        limit = hbar * math.pi / self.dx
        if limit < 8.0 * abs(p_max):
            raise GridResolutionError(
                f"grid momentum cutoff {limit:.3g} < 8 * max|p| = {8.0 * abs(p_max):.3g}; "
                "refine dx or shrink the domain"
            )


@dataclass
class GridWavefunction:
    """Complex amplitudes on the uniform grid x_min + i*dx, i = 0..N-1."""

    x_min: float
    x_max: float
    psi: np.ndarray
    t: float = 0.0

    @property
    def n_points(self) -> int:
        return self.psi.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.n_points, self.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return float(np.trapezoid(self.density(), dx=self.dx))


def _check_boundaries(psi: np.ndarray) -> None:
    peak = np.max(np.abs(psi))
    edge = max(abs(psi[0]), abs(psi[-1]))
    if edge > _BOUNDARY_TOL * peak:
        raise GridResolutionError(
            f"boundary amplitude {edge:.3e} exceeds {_BOUNDARY_TOL:.0e} * max|psi| "
            f"= {_BOUNDARY_TOL * peak:.3e}; enlarge the domain"
        )


def init_grid(cfg: GridConfig, initial: Callable[[np.ndarray], np.ndarray]) -> GridWavefunction:
    """Sample an amplitude function on the grid and normalize it.

    Rejects zero-norm input, data leaking into the periodic boundaries and
    data too narrow for the grid (detected through its spectral tail).
    """
    x = cfg.x_min + cfg.dx * np.arange(cfg.n_points)
    psi = np.asarray(initial(x), dtype=np.complex128)
    if psi.shape != x.shape:
        raise ValueError("initial amplitude function must preserve the grid shape")
    if not np.all(np.isfinite(psi)):
        raise ValueError("initial amplitude contains non-finite values")
    norm = np.trapezoid(np.abs(psi) ** 2, dx=cfg.dx)
    if norm <= 0.0:
        raise ValueError("initial amplitude has zero norm on the grid")
    psi = psi / math.sqrt(norm)
    _check_boundaries(psi)
    spectrum = np.abs(np.fft.fft(psi)) ** 2
    k = np.abs(np.fft.fftfreq(cfg.n_points))
    tail = spectrum[k > _TAIL_FRACTION * 0.5].sum() / spectrum.sum()
    if tail > _TAIL_TOL:
        raise GridResolutionError(
            f"spectral tail fraction {tail:.3e} exceeds {_TAIL_TOL:.0e}; "
            "the initial state is not resolved by this grid"
        )
    return GridWavefunction(x_min=cfg.x_min, x_max=cfg.x_max, psi=psi, t=0.0)


class _StepKernel:
    """Precomputed arrays for repeated Strang steps on one grid."""

    def __init__(self, state: GridWavefunction, setup: PhysicalSetup, cfg: GridConfig | None = None):
        self.setup = setup
        self.v = self._potential_array(state.x, setup)
        k = state.wavenumbers
        self.kinetic = setup.hbar * k * k / (2.0 * setup.mass)
        self.dx = state.dx
        self.mask = None
        if cfg is not None and cfg.absorbing_margin > 0.0:
            n = state.n_points
            width = int(round(cfg.absorbing_margin * n))
            mask = np.ones(n)
            if width > 0:
                ramp = np.cos(0.5 * math.pi * np.linspace(0.0, 1.0, width)) ** 0.125
                mask[:width] = ramp[::-1]
                mask[-width:] = ramp
            self.mask = mask

    @staticmethod
    def _potential_array(x: np.ndarray, setup: PhysicalSetup) -> np.ndarray:
        v0, v1, v2 = potential_eval(setup.potential, setup.mass, 0.0)
        # Quadratic family: V(x) = V(0) + V'(0) x + V''(0) x^2 / 2 exactly.
        return v0 + v1 * x + 0.5 * v2 * x * x

    def step(self, psi: np.ndarray, t: float, dt: float) -> np.ndarray:
        gamma, hbar = self.setup.gamma, self.setup.hbar
        t_mid = t + 0.5 * dt
        half_v = np.exp(-0.5j * dt * math.exp(gamma * t_mid) / hbar * self.v)
        full_t = np.exp(-1j * dt * math.exp(-gamma * t_mid) * self.kinetic)
        psi = half_v * psi
        psi = np.fft.ifft(full_t * np.fft.fft(psi))
        psi = half_v * psi
        if self.mask is not None:
            psi = self.mask * psi
        return psi


def split_step(state: GridWavefunction, setup: PhysicalSetup, dt: float) -> GridWavefunction:
    """One Strang step of size dt; advances state.t by dt.

    Raises ``GridInstabilityError`` if the norm drifts by more than 1e-8 in
    the step (the exact evolution is unitary).
    """
    kernel = _StepKernel(state, setup)
    norm_before = state.norm()
    psi = kernel.step(state.psi, state.t, dt)
    out = GridWavefunction(state.x_min, state.x_max, psi, state.t + dt)
    drift = abs(out.norm() - norm_before)
    if drift > _NORM_DRIFT_TOL:
        raise GridInstabilityError(
            f"norm drifted by {drift:.3e} in one step at t = {state.t}"
        )
    return out


def propagate_grid(
    state0: GridWavefunction,
    setup: PhysicalSetup,
    cfg: GridConfig,
    t_end: float,
    record_times: Sequence[float],
) -> list[GridWavefunction]:
    """Propagate to t_end and return snapshots at the requested times.

    Each requested time is mapped to the nearest step; duplicates collapse.
    Time t_end must be an integer number of cfg.dt steps.
    """
    n_steps = int(round(t_end / cfg.dt))
    if abs(n_steps * cfg.dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end must be an integer number of dt steps")
    record_idx = sorted(
        {min(max(int(round(rt / cfg.dt)), 0), n_steps) for rt in record_times}
    )
    kernel = _StepKernel(state0, setup, cfg)
    absorbing = kernel.mask is not None
    snapshots: list[GridWavefunction] = []
    psi = state0.psi
    t0 = state0.t
    norm_prev = state0.norm()
    next_record = 0
    if record_idx and record_idx[0] == 0:
        snapshots.append(GridWavefunction(state0.x_min, state0.x_max, psi.copy(), t0))
        next_record = 1
    for i in range(1, n_steps + 1):
        psi = kernel.step(psi, t0 + (i - 1) * cfg.dt, cfg.dt)
        if i % 256 == 0 or (next_record < len(record_idx) and record_idx[next_record] == i):
            norm_now = float(np.trapezoid(np.abs(psi) ** 2, dx=cfg.dx))
            drift = norm_now - norm_prev
            # With an absorber the norm may only decrease.
            if (absorbing and drift > _NORM_DRIFT_TOL) or (
                not absorbing and abs(drift) > 256 * _NORM_DRIFT_TOL
            ):
                raise GridInstabilityError(
                    f"norm drifted by {drift:.3e} by t = {t0 + i * cfg.dt}"
                )
            norm_prev = norm_now
        if next_record < len(record_idx) and record_idx[next_record] == i:
            snapshots.append(
                GridWavefunction(state0.x_min, state0.x_max, psi.copy(), t0 + i * cfg.dt)
            )
            next_record += 1
    return snapshots


def write_snapshot(state: GridWavefunction, setup: PhysicalSetup, path, extra_header: dict | None = None) -> None:
    """Dump one snapshot as plain text: columns x, Re psi, Im psi, rho.

    The header carries the physical setup and grid geometry as '# key = value'
    lines with locale-independent full-precision formatting.
    """
    header_items = {
        "t": state.t,
        "mass": setup.mass,
        "hbar": setup.hbar,
        "gamma": setup.gamma,
        "potential": repr(setup.potential),
        "x_min": state.x_min,
        "x_max": state.x_max,
        "n_points": state.n_points,
    }
    if extra_header:
        header_items.update(extra_header)
    header = "\n".join(f"{k} = {v!r}" if isinstance(v, str) else f"{k} = {v:.17g}" if isinstance(v, float) else f"{k} = {v}" for k, v in header_items.items())
    header += "\ncolumns = x re_psi im_psi rho"
    data = np.column_stack(
        [state.x, state.psi.real, state.psi.imag, state.density()]
    )
    np.savetxt(path, data, fmt="%.17g", header=header)
