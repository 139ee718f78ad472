"""Numerical laboratory for the critical sinh-Gordon gradient flow on the flat unit torus."""

from .errors import (DomainError, FieldError, ParameterError, SinhFlowError,
                     SolvabilityError, SolverError, ValidationError)
from .torus import (Grid, dirichlet_energy, dirichlet_pairing, gradient, integrate,
                    laplacian, resample, solve_poisson)
from .weights import Weight, parse_weight
from .energy import FlowConfig, elliptic_residual, energy_j, euler_lagrange, mt_gap

__version__ = "0.1.0"
