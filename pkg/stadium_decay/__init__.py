"""Damped waves on partially rectangular domains: resolvents, spectra, energy decay."""

from .damping import (
    DampingKind,
    DampingProfile,
    build_smooth_m_damping,
    build_wing_damping,
    constant_damping,
    lemma31_constant,
    x_minorant,
)
from .evolution import CauchyPair, EnergyTrace, WaveStepper, dAk_norm, decay_bound_functional, energy, evolve
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DampingError,
    FieldSizeError,
    FitError,
    HorizonError,
    MeshError,
    RegimeError,
    ResolutionWarning,
    SimulationError,
    SolverError,
    StadiumDecayError,
)
from .fitting import FitReport, fit_decay_with_log, fit_power_law
from .geometry import DomainSpec, GridMesh, Shape, apply_laplacian, build_mesh, build_rectangle, build_stadium
from .mode1d import (
    ModeDecomposition,
    Mode1DProblem,
    high_mode_check,
    r0_operator_norm,
    r0_sweep,
    sine_decompose,
    sine_reconstruct,
    solve_mode_bvp,
)
from .quasimode import QuasimodeSpec, build_quasimode, build_quasimode_mesh, quasimode_residual
from .resolvent2d import generator_resolvent_norm, resolvent_norm, solve_helmholtz, sweep_and_fit
from .spectrum import GeneratorMatrix, SpectrumResult, assemble_generator, compute_spectrum, lower_halfplane_bound_check

__version__ = "0.1.0"
