"""Numerical homogenization of the p-Laplace equation with a periodic
coefficient and a localized defect: correctors, homogenized operator,
exact 1D oscillating solutions and two-scale remainder studies."""

__version__ = "0.1.0"

from .coeffs import (AssumptionViolated, Coefficient, DefectCoefficient,
                     PeriodicCoefficient, constant_coefficient,
                     cosine_coefficient, evaluate, exponential_defect,
                     gaussian_defect, laminate_coefficient,
                     tabulated_coefficient, validate)
from .cell import (CellSolve, PeriodicGrid, corrector_map_diagnostics,
                   homogenized_operator, nondegeneracy_report, solve_cell)
from .defect import (TruncatedDomain, assemble_rhs, continuity_scan,
                     defect_energy, integrability_report, solve_defect)
from .homog import (CorrectorBank, StepFunction, convergence_study,
                    discretize, jensen_check, two_scale_field)
from .ineq import (bregman_gap, bregman_gap_ratio, lower_bound_feasibility,
                   midpoint_gap, monotone_pairing)
from .oned import (Corrector1D, FluxSolution1D, Problem1D, QuadratureSpec,
                   Rhs1D, antiderivative, corrector_1d,
                   homogenized_coefficient_1d, remainder_norms, rhs_linear,
                   rhs_zero, solve_flux_constant, solve_homogenized_1d,
                   table_sweep)
from .optim import NoConvergence

__all__ = [name for name in dir() if not name.startswith("_")]
