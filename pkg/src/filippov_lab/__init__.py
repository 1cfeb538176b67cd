"""Planar Filippov systems, Sotomayor-Teixeira regularizations and limit cycles near Σ-polycycles."""
from .expr import parse_expr, eval_expr, diff_expr
from .fields import (FilippovSystem, ScalarField, VectorField2, classify_sigma_point, contact_multiplicity,
                     lie_derivative, sliding_vector)
from .regularize import bump_transition, hermite_transition, phi_integral, regularized_field
from .integrate import IntegratorOptions, Section, filippov_trajectory, flow_to_section
from .scenarios import builtin, load_scenario, validate_scenario
from .maps import estimate_K, estimate_S, return_map_filippov
from .analysis import theorem_a_verdict, theorem_b_verdict, prop1_verdict, epsilon_sweep

__version__ = "0.1.0"
