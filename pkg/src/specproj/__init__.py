"""Eigenstate projection by repeated ancilla-controlled evolution and measurement."""

from .annealer import AnnealPlan, AnnealTrace, anneal, ground_fidelity, level_curves, uniform_grid
from .estimator import SpectralProjector
from .hamiltonians import (
    PauliString, PauliSumHamiltonian, build_model, build_tfi, build_xzy, h5_fixture, neel_x_state, product_state,
    split_even_odd,
)
from .imagtime import consecutive_one_statistics, imag_ancilla, next_r, run_imaginary_time_step
from .linalg import ExactPropagator, SpectralDecomposition, eigendecompose, moments, random_hermitian
from .noise import NoiseSpec, depolarize_density, depolarize_trajectory, noisy_projection
from .primitive import (
    AncillaState, apply_primitive, energy_change_closed_form, exponent_operator, outcome_probabilities,
    third_moment_obstruction, variance_change_closed_form,
)
from .projector import (
    ConvergenceCriteria, Schedule, born_statistics, classify_eigenstate, estimate_eigenvalue, exhaust_spectrum,
    make_schedule, run_projection,
)
from .trotter import TrotterPropagator, apply_product_formula, measure_formula_order, validate_formula
from .validation import ConfigError, PreconditionError, ShapeError

__version__ = "0.1.0"
