"""Laplace problems on polygonal domains by conformal boundary differences.

Each subdomain is mapped onto the unit disk with a numerical
Schwarz-Christoffel map, potentials are read off boundary traces with
recentred boundary means, and finite differences are used only on Neumann
sides and material interfaces.
"""

from .discretize import NodeSet, discretize, interface_coeffs, residual
from .disk_analysis import (BoundaryTrace, eval_at, eval_center, eval_center_cubic, grad_at,
                            grad_center, mobius_recenter)
from .errors import (CBDMError, DiscretizationError, DomainError, GeometryError,
                     InconsistencyError, InversionError, NonConvergenceError,
                     NumericalFailureError, ParameterProblemError, SingularGradientError)
from .geometry import (EPS0, Dirichlet, Interface, Neumann, Polygon, ProblemSpec, Subdomain,
                       microstrip_fixture, validate_polygon)
from .oracle import GridSolution, fd_reference
from .post import FluxContour, capacitance, export_field, potential_profile, shield_contour
from .scmap import DiskMap, solve_parameters
from .solver import Solution, SolveOptions, SorSchedule, solve, solve_plain, sor_schedule

__version__ = "0.1.0"
