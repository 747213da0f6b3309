"""Dissipative wave-packet dynamics and Bohmian trajectories in a linearly
damped (Caldirola-Kanai) quantum medium.

Three mutually cross-validating layers:

* :mod:`ckbohm.closed_form`, exact solutions for the free, linear-ramp and
  harmonic scenarios,
* :mod:`ckbohm.gaussian_ode`, a fixed-step RK4 integrator for the Gaussian
  wave-packet parameter ODEs,
* :mod:`ckbohm.grid_solver`, a split-step Fourier solver for the full damped
  wave equation.

:mod:`ckbohm.bohm` turns any of the three into Bohmian trajectory ensembles,
:mod:`ckbohm.observables` extracts means, widths, energies and currents, and
:mod:`ckbohm.cli` runs the bundled scenario presets and compares the layers.
"""

from .core import (
    Damping,
    DampingRegime,
    FreePotential,
    HarmonicPotential,
    LinearPotential,
    NonNormalizableError,
    PhysicalSetup,
    PotentialSpec,
    SimulationError,
    SingularStateError,
    classify_regime,
    potential_eval,
)
from .gaussian_ode import GaussianParams, OdeConfig, initial_packet, propagate, rk4_step
from .closed_form import (
    FreeSolution,
    StationaryShape,
    coherent_packet,
    free_solution,
    harmonic_centroid,
    harmonic_g,
    linear_solution,
    quasi_eigenstate,
    stationary_alpha,
)
from .grid_solver import GridConfig, GridWavefunction, init_grid, propagate_grid, split_step
from .bohm import (
    TrajectoryEnsemble,
    analytic_trajectory,
    integrate_trajectories,
    sample_initial_positions,
    velocity_gaussian,
    velocity_grid,
    velocity_superposition,
)
from .observables import (
    ObservableSeries,
    current_density,
    gaussian_observables,
    grid_observables,
    harmonic_energy,
    linear_energy,
    quantum_potential,
)

__version__ = "0.1.0"
