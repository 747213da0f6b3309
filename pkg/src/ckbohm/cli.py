"""Scenario runner and cross-engine comparator.

Runs the bundled scenario presets (or a user config) through up to three
engines, closed-form parameters, the Gaussian-parameter ODE integrator and
the split-step grid solver, writes plain-text observable, trajectory and
density files, and reports pairwise cross-engine errors against tolerances.

Config files are INI documents with one flat table per packet; the schema is
documented in the project README.  Friction values may be given relative to
the oscillator frequency as e.g. ``0.3*omega0`` and are resolved at load
time.  Runs are deterministic: identical config and seed give bit-identical
output files.

Grid feasibility: in a damping medium the canonical-frame wave function
acquires an e^{gamma t} phase chirp and, in a harmonic well, a width that
shrinks like e^{-gamma t / 2}.  Once the chirp or the width falls below what
float64 on the configured lattice can resolve, grid propagation is
physically meaningless; such (gamma, engine) combinations are skipped and
reported as skipped rather than failed.
"""

from __future__ import annotations

import argparse
import configparser
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import (
    FreePotential,
    HarmonicPotential,
    LinearPotential,
    PhysicalSetup,
    SimulationError,
    classify_regime,
)
from .gaussian_ode import (
    GaussianParams,
    OdeConfig,
    gaussian_amplitude,
    initial_packet,
    propagate,
)
from .closed_form import (
    free_params,
    harmonic_params,
    linear_params,
    quasi_eigenstate,
)
from .grid_solver import GridConfig, GridWavefunction, init_grid, propagate_grid, write_snapshot
from .bohm import (
    FunctionField,
    GaussianField,
    GridField,
    SuperpositionField,
    TrajectoryEnsemble,
    integrate_trajectories,
    sample_initial_positions,
)
from .observables import (
    ObservableSeries,
    grid_observable_series,
    observable_series,
    superposition_observables,
    superposition_density,
)

__all__ = [
    "ConfigError",
    "PacketSpec",
    "ScenarioConfig",
    "ComparisonReport",
    "preset_config",
    "load_config",
    "run_scenario",
    "compare_outputs",
    "main",
    "entry",
]

OMEGA0_DEFAULT = 2.0 * math.pi / 10.0

_SCENARIOS = (
    "free",
    "linear",
    "harmonic",
    "free_superposition",
    "harmonic_superposition",
    "quasi_eigenstate",
)
_ENGINES = ("closed", "ode", "grid")

DEFAULT_TOLERANCES = {
    ("closed", "ode"): 1e-8,
    ("closed", "grid"): 5e-3,
    ("ode", "grid"): 5e-3,
    "density": 1e-4,
}


class ConfigError(Exception):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class PacketSpec:
    x0: float
    p0: float
    sigma0: float


@dataclass
class ScenarioConfig:
    name: str
    scenario: str
    mass: float = 1.0
    hbar: float = 1.0
    potential_kind: str = "free"  # free | linear | harmonic
    slope: float = 0.25
    omega0: float = OMEGA0_DEFAULT
    gamma_list: list[float] = field(default_factory=lambda: [0.1])
    packets: list[PacketSpec] = field(default_factory=list)
    eigen_n: int = 0
    engines: list[str] = field(default_factory=lambda: ["closed", "ode"])
    n_traj: int = 15
    sampling: str = "quantile"
    seed: int = 1618
    t_end: float = 20.0
    dt: float = 1e-3
    record_stride: int = 500
    grid: GridConfig | None = None
    snapshot_times: list[float] = field(default_factory=list)
    out_dir: str = "out"
    tolerances: dict = field(default_factory=dict)

    @property
    def record_dt(self) -> float:
        return self.dt * self.record_stride

    def validate(self) -> None:
        if self.scenario not in _SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not self.gamma_list:
            raise ConfigError("gamma_list must not be empty")
        if any(g < 0 for g in self.gamma_list):
            raise ConfigError("gamma values must be non-negative")
        if not self.engines:
            raise ConfigError("at least one engine is required")
        for e in self.engines:
            if e not in _ENGINES:
                raise ConfigError(f"unknown engine {e!r}")
        expected_potential = {
            "free": "free",
            "linear": "linear",
            "harmonic": "harmonic",
            "free_superposition": "free",
            "harmonic_superposition": "harmonic",
            "quasi_eigenstate": "harmonic",
        }[self.scenario]
        if self.potential_kind != expected_potential:
            raise ConfigError(
                f"scenario {self.scenario!r} requires a {expected_potential} potential, "
                f"got {self.potential_kind!r}"
            )
        n_packets = len(self.packets)
        if self.scenario.endswith("_superposition"):
            if n_packets != 2:
                raise ConfigError("superposition scenarios need exactly two packets")
        elif self.scenario == "quasi_eigenstate":
            if self.eigen_n < 0:
                raise ConfigError("eigen_n must be non-negative")
            if "ode" in self.engines:
                raise ConfigError(
                    "the ode engine covers Gaussian packets only; use closed/grid "
                    "for quasi_eigenstate"
                )
        elif n_packets != 1:
            raise ConfigError(f"scenario {self.scenario!r} needs exactly one packet")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be at least 1")
        if self.sampling not in ("quantile", "random"):
            raise ConfigError(f"unknown sampling mode {self.sampling!r}")
        if self.t_end <= 0 or self.dt <= 0 or self.record_stride < 1:
            raise ConfigError("t_end, dt must be positive and record_stride >= 1")
        n_rec = self.t_end / self.record_dt
        if abs(n_rec - round(n_rec)) > 1e-9:
            raise ConfigError("t_end must be a multiple of dt * record_stride")
        # The ODE table backing trajectory fields needs states at twentieths
        # of the record interval; require divisibility.
        table_dt = self.record_dt / 20.0
        if abs(table_dt / self.dt - round(table_dt / self.dt)) > 1e-9:
            raise ConfigError("record_stride must be a multiple of 20")
        if "grid" in self.engines and self.grid is None:
            raise ConfigError("grid engine requested but no [grid] section given")
        if self.grid is not None:
            half_rec = self.record_dt / 2.0
            ratio = half_rec / self.grid.dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError("grid dt must divide half the record interval")
        for ts in self.snapshot_times:
            if ts < 0 or ts > self.t_end:
                raise ConfigError("snapshot times must lie in [0, t_end]")

    def setup_for(self, gamma: float) -> PhysicalSetup:
        if self.potential_kind == "free":
            pot = FreePotential()
        elif self.potential_kind == "linear":
            pot = LinearPotential(self.slope)
        else:
            pot = HarmonicPotential(self.omega0)
        return PhysicalSetup(mass=self.mass, hbar=self.hbar, gamma=gamma, potential=pot)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def preset_config(name: str) -> ScenarioConfig:
    """Built-in scenario presets reproducing the canonical parameter sets."""
    w0 = OMEGA0_DEFAULT
    sigma_coh = math.sqrt(1.0 / (2.0 * w0))  # hbar = m = 1
    if name == "fig1":
        return ScenarioConfig(
            name="fig1",
            scenario="free",
            potential_kind="free",
            gamma_list=[0.025, 0.1, 0.5],
            packets=[PacketSpec(0.0, 2.5, 1.0)],
            engines=["closed", "ode", "grid"],
            t_end=40.0,
            dt=1e-3,
            record_stride=500,
            grid=GridConfig(x_min=-40.0, x_max=60.0, n_points=4096, dt=2.5e-3),
            snapshot_times=[20.0, 40.0],
        )
    if name == "fig2":
        return ScenarioConfig(
            name="fig2",
            scenario="linear",
            potential_kind="linear",
            slope=0.25,
            gamma_list=[0.025, 0.1, 0.5],
            packets=[PacketSpec(50.0, 0.0, 1.0)],
            engines=["closed", "ode"],
            t_end=40.0,
            dt=1e-3,
            record_stride=500,
            grid=GridConfig(x_min=-40.0, x_max=360.0, n_points=16384, dt=2.5e-3),
            snapshot_times=[40.0],
        )
    if name == "fig3":
        return ScenarioConfig(
            name="fig3",
            scenario="harmonic",
            potential_kind="harmonic",
            omega0=w0,
            gamma_list=[0.3 * w0, 2.0 * w0, 4.0 * w0],
            packets=[PacketSpec(5.0, 0.0, sigma_coh)],
            engines=["closed", "ode", "grid"],
            t_end=20.0,
            dt=1e-3,
            record_stride=500,
            grid=GridConfig(x_min=-15.0, x_max=15.0, n_points=2048, dt=2.5e-3),
            snapshot_times=[5.0, 20.0],
        )
    if name == "fig4":
        return ScenarioConfig(
            name="fig4",
            scenario="free_superposition",
            potential_kind="free",
            gamma_list=[0.025, 0.1, 0.5],
            packets=[PacketSpec(5.0, 0.0, 1.0), PacketSpec(-5.0, 0.0, 1.0)],
            engines=["closed", "ode", "grid"],
            t_end=20.0,
            dt=1e-3,
            record_stride=500,
            grid=GridConfig(x_min=-40.0, x_max=40.0, n_points=2048, dt=2.5e-3),
            snapshot_times=[20.0],
        )
    if name == "fig5":
        tau0 = 2.0 * math.pi / w0
        return ScenarioConfig(
            name="fig5",
            scenario="harmonic_superposition",
            potential_kind="harmonic",
            omega0=w0,
            gamma_list=[0.3 * w0, 2.0 * w0, 4.0 * w0],
            packets=[PacketSpec(5.0, 0.0, sigma_coh), PacketSpec(-5.0, 0.0, sigma_coh)],
            engines=["closed", "ode", "grid"],
            t_end=35.0,
            dt=1e-3,
            record_stride=500,
            grid=GridConfig(x_min=-12.0, x_max=12.0, n_points=8192, dt=1e-3),
            snapshot_times=[0.5 * tau0, 1.5 * tau0, 2.5 * tau0, 3.5 * tau0],
        )
    raise ConfigError(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# Config file loading
# ---------------------------------------------------------------------------

_GAMMA_EXPR = re.compile(r"^\s*([0-9.eE+-]+)\s*\*\s*omega0\s*$")


def _resolve_gamma(token: str, omega0: float) -> float:
    token = token.strip()
    match = _GAMMA_EXPR.match(token)
    if match:
        return float(match.group(1)) * omega0
    try:
        return float(token)
    except ValueError as exc:
        raise ConfigError(f"cannot parse gamma entry {token!r}") from exc


def _parse_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def load_config(path) -> ScenarioConfig:
    """Parse an INI scenario config (see README for the schema)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        scen = parser["scenario"]
        setup_sec = parser["setup"] if parser.has_section("setup") else {}
        mass = float(setup_sec.get("mass", 1.0))
        hbar = float(setup_sec.get("hbar", 1.0))
        potential_kind = setup_sec.get("potential", "free").strip()
        omega0 = float(setup_sec.get("omega0", OMEGA0_DEFAULT))
        slope = float(setup_sec.get("slope", 0.25))

        def parse_sigma(raw: str) -> float:
            raw = raw.strip()
            if raw == "coherent":
                return math.sqrt(hbar / (2.0 * mass * omega0))
            return float(raw)

        packets = []
        for sec_name in ("packet", "packet2"):
            if parser.has_section(sec_name):
                sec = parser[sec_name]
                packets.append(
                    PacketSpec(
                        x0=float(sec.get("x0", 0.0)),
                        p0=float(sec.get("p0", 0.0)),
                        sigma0=parse_sigma(sec.get("sigma0", "1.0")),
                    )
                )
        eigen_n = 0
        if parser.has_section("packet") and parser["packet"].get("n") is not None:
            eigen_n = int(parser["packet"]["n"])

        grid_cfg = None
        snapshot_times: list[float] = []
        if parser.has_section("grid"):
            gsec = parser["grid"]
            grid_cfg = GridConfig(
                x_min=float(gsec["x_min"]),
                x_max=float(gsec["x_max"]),
                n_points=int(gsec.get("n_points", 4096)),
                dt=float(gsec.get("dt", 1e-3)),
                absorbing_margin=float(gsec.get("absorbing_margin", 0.0)),
            )
            snapshot_times = [float(tok) for tok in _parse_list(gsec.get("snapshot_times", ""))]

        tolerances: dict = {}
        if parser.has_section("tolerances"):
            for key, raw in parser["tolerances"].items():
                tolerances[key] = float(raw)

        cfg = ScenarioConfig(
            name=scen.get("name", "scenario").strip(),
            scenario=scen["scenario"].strip(),
            mass=mass,
            hbar=hbar,
            potential_kind=potential_kind,
            slope=slope,
            omega0=omega0,
            gamma_list=[_resolve_gamma(tok, omega0) for tok in _parse_list(scen["gamma_list"])],
            packets=packets,
            eigen_n=eigen_n,
            engines=_parse_list(scen.get("engines", "closed, ode")),
            n_traj=int(scen.get("n_traj", 15)),
            sampling=scen.get("sampling", "quantile").strip(),
            seed=int(scen.get("seed", 1618)),
            t_end=float(scen.get("t_end", 20.0)),
            dt=float(scen.get("dt", 1e-3)),
            record_stride=int(scen.get("record_stride", 500)),
            grid=grid_cfg,
            snapshot_times=snapshot_times,
            out_dir=scen.get("out_dir", "out").strip(),
            tolerances=tolerances,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Comparison report
# ---------------------------------------------------------------------------


@dataclass
class ComparisonRow:
    gamma: float
    pair: str
    quantity: str
    max_err: float
    l2_err: float
    tol: float
    passed: bool
    note: str = ""


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def write(self, path) -> None:
        lines = ["# gamma pair quantity max_err l2_err tol status"]
        for r in self.rows:
            status = "pass" if r.passed else "FAIL"
            note = f" [{r.note}]" if r.note else ""
            lines.append(
                f"{r.gamma:.10g} {r.pair} {r.quantity} {r.max_err:.6e} "
                f"{r.l2_err:.6e} {r.tol:.1e} {status}{note}"
            )
        for s in self.skipped:
            lines.append(f"# skipped: {s}")
        lines.append(f"# overall: {'PASS' if self.passed else 'FAIL'}")
        Path(path).write_text("\n".join(lines) + "\n")


def _pair_tolerance(tolerances: dict, a: str, b: str) -> float:
    for key in (f"{a}_{b}", f"{b}_{a}"):
        if key in tolerances:
            return float(tolerances[key])
    return DEFAULT_TOLERANCES.get((a, b)) or DEFAULT_TOLERANCES.get((b, a)) or 1e-6


def _series_errors(sa: ObservableSeries, sb: ObservableSeries, quantity: str):
    key = {"mean_x": "mean_x", "dispersion": "dispersion", "energy": "energy", "norm": "norm"}[
        quantity
    ]
    ta = np.round(sa.times, 9)
    tb = np.round(sb.times, 9)
    common, ia, ib = np.intersect1d(ta, tb, return_indices=True)
    if common.size == 0:
        raise ConfigError("no shared record times between engines")
    va = getattr(sa, key)[ia]
    vb = getattr(sb, key)[ib]
    scale = max(1.0, float(np.max(np.abs(va))))
    diff = np.abs(va - vb) / scale
    return float(diff.max()), float(np.sqrt(np.mean(diff**2)))


def _trajectory_errors(ta: TrajectoryEnsemble, tb: TrajectoryEnsemble):
    ra = np.round(ta.times, 9)
    rb = np.round(tb.times, 9)
    common, ia, ib = np.intersect1d(ra, rb, return_indices=True)
    pa = ta.positions[:, ia]
    pb = tb.positions[:, ib]
    scale = max(1.0, float(np.max(np.abs(pa))))
    diff = np.abs(pa - pb) / scale
    return float(diff.max()), float(np.sqrt(np.mean(diff**2)))


# ---------------------------------------------------------------------------
# Engine plumbing
# ---------------------------------------------------------------------------


class _OdeTable:
    """Exact lookup of ODE states recorded on a uniform fine grid."""

    def __init__(self, states: Sequence[GaussianParams], dt_table: float):
        self.states = list(states)
        self.dt_table = dt_table
        self.t0 = states[0].t

    def __call__(self, t: float) -> GaussianParams:
        idx = int(round((t - self.t0) / self.dt_table))
        if idx < 0 or idx >= len(self.states):
            raise ValueError(f"time {t} outside the tabulated range")
        state = self.states[idx]
        if abs(state.t - t) > 1e-8 * max(1.0, abs(t)):
            raise ValueError(f"time {t} does not sit on the table grid")
        return state


def _closed_provider(cfg: ScenarioConfig, setup: PhysicalSetup, pk: PacketSpec):
    if cfg.scenario in ("free", "free_superposition"):
        return lambda t: free_params(t, pk.x0, pk.p0, pk.sigma0, setup)
    if cfg.scenario == "linear":
        return lambda t: linear_params(t, pk.x0, pk.p0, pk.sigma0, setup)
    alpha0 = 1j * setup.hbar / (4.0 * pk.sigma0**2)
    return lambda t: harmonic_params(t, pk.x0, pk.p0, alpha0, setup)


def _ode_provider(cfg: ScenarioConfig, setup: PhysicalSetup, pk: PacketSpec) -> _OdeTable:
    table_dt = cfg.record_dt / 20.0
    stride = int(round(table_dt / cfg.dt))
    ode_cfg = OdeConfig(dt=cfg.dt, t_end=cfg.t_end, record_stride=stride)
    states = propagate(initial_packet(pk.x0, pk.p0, pk.sigma0, setup), setup, ode_cfg)
    return _OdeTable(states, table_dt)


def _eigenstate_dispersion(cfg: ScenarioConfig, setup: PhysicalSetup, t: np.ndarray):
    regime = classify_regime(setup)
    big_omega = regime.rate
    return np.sqrt((2 * cfg.eigen_n + 1) * setup.hbar / (2.0 * setup.mass * big_omega)) * np.exp(
        -0.5 * setup.gamma * t
    )


def _grid_feasible(cfg: ScenarioConfig, setup: PhysicalSetup) -> tuple[bool, str]:
    """Width and phase-chirp resolvability of a grid run over [0, t_end]."""
    grid = cfg.grid
    assert grid is not None
    min_width = math.inf
    if cfg.potential_kind == "harmonic":
        from .closed_form import harmonic_g  # local import to avoid cycle noise

        if cfg.scenario == "quasi_eigenstate":
            try:
                classify_regime(setup)
                widths = [
                    float(_eigenstate_dispersion(cfg, setup, np.array([t]))[0])
                    for t in np.linspace(0.0, cfg.t_end, 101)
                ]
                min_width = min(widths)
            except ValueError:
                return False, "eigenstates undefined for omega0 <= gamma/2"
        else:
            for pk in cfg.packets:
                alpha0 = 1j * setup.hbar / (4.0 * pk.sigma0**2)
                for t in np.linspace(0.0, cfg.t_end, 201):
                    g = harmonic_g(t, alpha0, setup)
                    im_alpha = g.imag * math.exp(setup.gamma * t)
                    if im_alpha <= 0:
                        return False, "shape parameter leaves the normalizable domain"
                    min_width = min(
                        min_width, math.sqrt(setup.hbar / (4.0 * im_alpha))
                    )
    else:
        min_width = min(pk.sigma0 for pk in cfg.packets)
    if min_width < 4.0 * grid.dx:
        return False, (
            f"min packet width {min_width:.3g} under 4*dx = {4.0 * grid.dx:.3g} "
            "(canonical-frame shrinkage unresolvable)"
        )
    # Potential phase per step must stay well below float64 mod-2pi loss.
    x_ext = max(abs(grid.x_min), abs(grid.x_max))
    if cfg.potential_kind == "harmonic":
        v_ext = 0.5 * setup.mass * cfg.omega0**2 * x_ext**2
    elif cfg.potential_kind == "linear":
        v_ext = setup.mass * cfg.slope * x_ext
    else:
        v_ext = 0.0
    theta = v_ext * math.exp(setup.gamma * cfg.t_end) * grid.dt / setup.hbar
    if theta > 1e10:
        return False, (
            f"potential phase per step reaches {theta:.3g} rad by t_end "
            "(e^{gamma t} chirp beyond float64)"
        )
    return True, ""


def _initial_grid_state(cfg: ScenarioConfig, setup: PhysicalSetup, providers):
    assert cfg.grid is not None
    if cfg.scenario == "quasi_eigenstate":
        return init_grid(cfg.grid, lambda x: quasi_eigenstate(cfg.eigen_n, x, 0.0, setup))
    params0 = [prov(0.0) for prov in providers]
    if len(params0) == 1:
        return init_grid(cfg.grid, lambda x: gaussian_amplitude(x, params0[0], setup.hbar))
    return init_grid(
        cfg.grid,
        lambda x: gaussian_amplitude(x, params0[0], setup.hbar)
        + gaussian_amplitude(x, params0[1], setup.hbar),
    )


@dataclass
class _EngineOutput:
    series: ObservableSeries
    trajectories: TrajectoryEnsemble
    centroid: np.ndarray | None = None
    densities: dict | None = None  # time -> (x, rho)


def _launches(cfg: ScenarioConfig, setup: PhysicalSetup) -> np.ndarray:
    if cfg.scenario == "quasi_eigenstate":
        sigma = float(_eigenstate_dispersion(cfg, setup, np.array([0.0]))[0])
        return sample_initial_positions(0.0, sigma, cfg.n_traj, cfg.sampling, cfg.seed)
    sets = [
        sample_initial_positions(pk.x0, pk.sigma0, cfg.n_traj, cfg.sampling, cfg.seed + i)
        for i, pk in enumerate(cfg.packets)
    ]
    return np.sort(np.concatenate(sets))


def _record_times(cfg: ScenarioConfig) -> np.ndarray:
    n = int(round(cfg.t_end / cfg.record_dt))
    return np.arange(n + 1) * cfg.record_dt


def _param_engine_output(cfg, setup, providers, engine: str) -> _EngineOutput:
    times = _record_times(cfg)
    if cfg.scenario == "quasi_eigenstate":
        disp = _eigenstate_dispersion(cfg, setup, times)
        regime = classify_regime(setup)
        energy = (
            (cfg.eigen_n + 0.5)
            * setup.hbar
            * cfg.omega0**2
            / regime.rate
            * np.exp(-setup.gamma * times)
        )
        series = ObservableSeries(
            times=times,
            mean_x=np.zeros_like(times),
            dispersion=disp,
            energy=energy,
            norm=np.ones_like(times),
        )
        fld = FunctionField(lambda x, t: -0.5 * setup.gamma * np.asarray(x))
        centroid = np.zeros_like(times)
    elif len(providers) == 1:
        states = [providers[0](t) for t in times]
        series = observable_series(states, setup)
        fld = GaussianField(providers[0], setup)
        centroid = series.mean_x
    else:
        rows = [
            superposition_observables(providers[0](t), providers[1](t), setup) for t in times
        ]
        series = ObservableSeries(
            times=times,
            mean_x=np.array([r[0] for r in rows]),
            dispersion=np.array([r[1] for r in rows]),
            energy=np.array([r[2] for r in rows]),
            norm=np.array([r[3] for r in rows]),
        )
        fld = SuperpositionField(providers[0], providers[1], setup)
        centroid = series.mean_x
    traj_dt = cfg.record_dt / 10.0
    ens = integrate_trajectories(
        _launches(cfg, setup), fld, cfg.t_end, traj_dt, record_stride=10
    )
    densities = None
    if cfg.snapshot_times and cfg.grid is not None and cfg.scenario != "quasi_eigenstate":
        xs = cfg.grid.x_min + cfg.grid.dx * np.arange(cfg.grid.n_points)
        densities = {}
        for ts in cfg.snapshot_times:
            if len(providers) == 1:
                amp = gaussian_amplitude(xs, providers[0](ts), setup.hbar)
                rho = np.abs(amp) ** 2
                rho /= np.trapezoid(rho, dx=cfg.grid.dx)
            else:
                rho = superposition_density(xs, providers[0](ts), providers[1](ts), setup)
            densities[ts] = (xs, rho)
    return _EngineOutput(series=series, trajectories=ens, centroid=centroid, densities=densities)


def _grid_engine_output(cfg, setup, providers) -> _EngineOutput:
    assert cfg.grid is not None
    state0 = _initial_grid_state(cfg, setup, providers)
    half_rec = cfg.record_dt / 2.0
    n_half = int(round(cfg.t_end / half_rec))
    field_times = [i * half_rec for i in range(n_half + 1)]
    wanted = sorted(set(field_times) | set(cfg.snapshot_times))
    snaps = propagate_grid(state0, setup, cfg.grid, cfg.t_end, wanted)
    field_snaps = [s for s in snaps if round(s.t, 9) in {round(t, 9) for t in field_times}]
    obs_snaps = [
        s
        for s in field_snaps
        if abs((s.t / cfg.record_dt) - round(s.t / cfg.record_dt)) < 1e-9
    ]
    series = grid_observable_series(obs_snaps, setup)
    fld = GridField(field_snaps, setup)
    traj_dt = cfg.record_dt / 10.0
    ens = integrate_trajectories(
        _launches(cfg, setup), fld, cfg.t_end, traj_dt, record_stride=10
    )
    densities = {}
    for ts in cfg.snapshot_times:
        match = [s for s in snaps if abs(s.t - ts) <= cfg.grid.dt * 0.51 + 1e-12]
        if match:
            densities[ts] = (match[0].x, match[0].density(), match[0])
    return _EngineOutput(series=series, trajectories=ens, centroid=series.mean_x, densities=densities)


# ---------------------------------------------------------------------------
# Scenario runner
# ---------------------------------------------------------------------------


def run_scenario(cfg: ScenarioConfig) -> ComparisonReport:
    """Execute every (gamma, engine) cell, write outputs, compare engines."""
    cfg.validate()
    out_root = Path(cfg.out_dir) / cfg.name
    out_root.mkdir(parents=True, exist_ok=True)
    report = ComparisonReport()
    tolerances = dict(cfg.tolerances)

    for gamma in cfg.gamma_list:
        setup = cfg.setup_for(gamma)
        gdir = out_root / f"gamma_{gamma:.6g}"
        gdir.mkdir(parents=True, exist_ok=True)
        outputs: dict[str, _EngineOutput] = {}

        providers_closed = (
            []
            if cfg.scenario == "quasi_eigenstate"
            else [_closed_provider(cfg, setup, pk) for pk in cfg.packets]
        )
        for engine in cfg.engines:
            if engine == "grid":
                ok, reason = _grid_feasible(cfg, setup)
                if not ok:
                    report.skipped.append(f"gamma={gamma:.6g} grid: {reason}")
                    continue
                outputs[engine] = _grid_engine_output(cfg, setup, providers_closed)
            elif engine == "ode":
                providers = [_ode_provider(cfg, setup, pk) for pk in cfg.packets]
                outputs[engine] = _param_engine_output(cfg, setup, providers, engine)
            else:
                outputs[engine] = _param_engine_output(cfg, setup, providers_closed, engine)

        for engine, out in outputs.items():
            out.series.write(gdir / f"observables_{engine}.dat")
            out.trajectories.write(gdir / f"trajectories_{engine}.dat", centroid=out.centroid)
            if out.densities:
                for ts, payload in sorted(out.densities.items()):
                    path = gdir / f"density_{engine}_t{ts:g}.dat"
                    if engine == "grid":
                        xs, rho, snap = payload
                        write_snapshot(snap, setup, path, extra_header={"scenario": cfg.name})
                    else:
                        xs, rho = payload
                        np.savetxt(
                            path,
                            np.column_stack([xs, rho]),
                            fmt="%.17g",
                            header=f"t = {ts:.17g}\ncolumns = x rho",
                        )

        ran = [e for e in cfg.engines if e in outputs]
        for i, ea in enumerate(ran):
            for eb in ran[i + 1 :]:
                tol = _pair_tolerance(tolerances, ea, eb)
                for quantity in ("mean_x", "dispersion", "energy", "norm"):
                    mx, l2 = _series_errors(outputs[ea].series, outputs[eb].series, quantity)
                    report.rows.append(
                        ComparisonRow(gamma, f"{ea}|{eb}", quantity, mx, l2, tol, mx <= tol)
                    )
                mx, l2 = _trajectory_errors(outputs[ea].trajectories, outputs[eb].trajectories)
                traj_tol = float(tolerances.get("trajectories", tol))
                report.rows.append(
                    ComparisonRow(gamma, f"{ea}|{eb}", "trajectories", mx, l2, traj_tol, mx <= traj_tol)
                )
        if "grid" in outputs and outputs["grid"].densities:
            other = "closed" if "closed" in outputs else ("ode" if "ode" in outputs else None)
            if other is not None and outputs[other].densities:
                dtol = float(tolerances.get("density", DEFAULT_TOLERANCES["density"]))
                for ts, payload in outputs["grid"].densities.items():
                    xs, rho_grid, _ = payload
                    ref = outputs[other].densities.get(ts)
                    if ref is None:
                        continue
                    rho_ref = ref[1]
                    l2 = float(np.sqrt(np.trapezoid((rho_grid - rho_ref) ** 2, xs)))
                    mx = float(np.max(np.abs(rho_grid - rho_ref)))
                    report.rows.append(
                        ComparisonRow(
                            gamma,
                            f"grid|{other}",
                            f"density_L2@t={ts:g}",
                            mx,
                            l2,
                            dtol,
                            l2 <= dtol,
                        )
                    )

    report.write(out_root / "report.txt")
    return report


# ---------------------------------------------------------------------------
# Stand-alone comparator over written outputs
# ---------------------------------------------------------------------------


def compare_outputs(directory, tolerances: dict | None = None) -> ComparisonReport:
    """Re-compare engine outputs previously written by run_scenario."""
    directory = Path(directory)
    tolerances = dict(tolerances or {})
    report = ComparisonReport()
    gamma_dirs = sorted(directory.glob("gamma_*"))
    if not gamma_dirs:
        raise ConfigError(f"no gamma_* directories under {directory}")
    for gdir in gamma_dirs:
        gamma = float(gdir.name.split("_", 1)[1])
        series = {}
        trajs = {}
        for engine in _ENGINES:
            obs = gdir / f"observables_{engine}.dat"
            if obs.exists():
                series[engine] = ObservableSeries.read(obs)
            tr = gdir / f"trajectories_{engine}.dat"
            if tr.exists():
                with open(tr) as fh:
                    names = fh.readline().split("=", 1)[1].split()
                data = np.loadtxt(tr, ndmin=2)
                last = -1 if names[-1] == "x_centroid" else data.shape[1]
                positions = data[:, 1:last].T
                trajs[engine] = TrajectoryEnsemble(
                    launch_positions=positions[:, 0],
                    times=data[:, 0],
                    positions=positions,
                    node_flagged=np.zeros(positions.shape[0], dtype=bool),
                )
        ran = [e for e in _ENGINES if e in series]
        if len(ran) < 2:
            raise ConfigError(f"need at least two engines' outputs in {gdir}")
        for i, ea in enumerate(ran):
            for eb in ran[i + 1 :]:
                tol = _pair_tolerance(tolerances, ea, eb)
                for quantity in ("mean_x", "dispersion", "energy", "norm"):
                    mx, l2 = _series_errors(series[ea], series[eb], quantity)
                    report.rows.append(
                        ComparisonRow(gamma, f"{ea}|{eb}", quantity, mx, l2, tol, mx <= tol)
                    )
                if ea in trajs and eb in trajs:
                    mx, l2 = _trajectory_errors(trajs[ea], trajs[eb])
                    traj_tol = float(tolerances.get("trajectories", tol))
                    report.rows.append(
                        ComparisonRow(
                            gamma, f"{ea}|{eb}", "trajectories", mx, l2, traj_tol, mx <= traj_tol
                        )
                    )
    report.write(directory / "report_compare.txt")
    return report


def _load_tolerance_file(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read tolerance file {path}")
    if not parser.has_section("tolerances"):
        raise ConfigError("tolerance file needs a [tolerances] section")
    return {k: float(v) for k, v in parser["tolerances"].items()}


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckbohm",
        description="Damped wave-packet scenario runner and cross-engine comparator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or config-file scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=["fig1", "fig2", "fig3", "fig4", "fig5"])
    src.add_argument("--config", type=str)
    run.add_argument("--engines", type=str, help="comma list from closed,ode,grid")
    run.add_argument("--traj", type=int, help="trajectories per packet")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=str, help="output directory")
    run.add_argument("--gamma", type=str, help="comma list overriding gamma_list")

    comp = sub.add_parser("compare", help="re-compare written outputs")
    comp.add_argument("--dir", type=str, required=True)
    comp.add_argument("--tol", type=str, help="INI file with a [tolerances] section")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            cfg = preset_config(args.preset) if args.preset else load_config(args.config)
            if args.engines:
                cfg = replace(cfg, engines=_parse_list(args.engines))
            if args.traj:
                cfg = replace(cfg, n_traj=args.traj)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            if args.out:
                cfg = replace(cfg, out_dir=args.out)
            if args.gamma:
                cfg = replace(
                    cfg,
                    gamma_list=[_resolve_gamma(tok, cfg.omega0) for tok in _parse_list(args.gamma)],
                )
            report = run_scenario(cfg)
        else:
            tol = _load_tolerance_file(args.tol) if args.tol else {}
            report = compare_outputs(args.dir, tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    n_fail = sum(1 for r in report.rows if not r.passed)
    print(f"{len(report.rows)} comparisons, {n_fail} failures, {len(report.skipped)} skipped")
    for s in report.skipped:
        print(f"  skipped: {s}")
    if n_fail:
        for r in report.rows:
            if not r.passed:
                print(f"  FAIL {r.pair} {r.quantity} gamma={r.gamma:.6g} max_err={r.max_err:.3e}")
        return 1
    return 0


def entry() -> None:
    sys.exit(main())
