"""Faddeev solver for a one-dimensional heavy-heavy-light system near
ground- and excited-state heavy-light resonances."""

from .errors import (ConfigurationError, NumericalError, OracleInvalidError, PoleResolutionError,
                     ShapeError, SolverError, TuningError, UnsupportedOperationError)
from .grids import MomentumGrid, build_grid, pole_adapted_grid
from .potentials import PotentialSpec
from .twobody import bound_energies, coordinate_oracle, tune_magnitude, weinberg_solve
from .faddeev import ChannelConfig, MassParams, ThreeBodyProblem, ThreeBodyState, find_states
from .wavefunction import WaveField2D, fidelity, sample_field
from .analysis import SolveSettings, ablation_study, reference_ratios, solve_resonance, universality_sweep

__version__ = "0.1.0"
