"""Spiral-wave defect dynamics in rectangular Neumann domains.

Asymptotic laws of motion for interacting spiral defects (far-field,
near-field, and a uniform composite), the wavenumber selection problem
behind them, and a direct finite-difference simulation of the underlying
field equation so the two can be compared quantitatively.
"""

__version__ = "0.1.0"

from .core_profile import (CoreProfile, compute_c1, default_core_constants,
                           phase_gradient_correction, solve_core_amplitude)
from .errors import (CoreSolveError, GreensError, NumericalError,
                     SimulationError, SpiralwaveError, TrajectoryError,
                     ValidationError, WavenumberError)
from .geometry import RectDomain, Spiral
from .greens import GreensEval, ImageTruncation
from .motion import (EpsilonPolicy, OrbitResult, SpiralState, StepControl,
                     TrajectoryRecord, eval_epsilon, find_periodic_orbit,
                     integrate, velocity_canonical, velocity_near_field,
                     velocity_near_field_bcorrected, velocity_uniform)
from .pde import (FieldGrid, SimParams, SpiralObservation, detect_spirals,
                  estimate_velocity, measure_rotation_rate, rotation_rate,
                  seed_field, simulate, step, track)
from .wavenumber import (SpiralConfig, WavenumberSolution, beta_matrix,
                         near_field_k, solve_canonical, two_spiral_beta_ratio,
                         two_spiral_k_residual, uniform_k)

__all__ = [name for name in dir() if not name.startswith("_")]
