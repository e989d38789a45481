"""Safe zeroth-order log-barrier optimization.

Minimizes a smooth objective under smooth constraints using only (possibly
noisy) function values, keeping every measured point feasible.
"""

from .barrier import (barrier_gradient, barrier_value, duals, local_smoothness,
                      probe_radius, step_size)
from .estimator import (ConfidenceBound, GradientEstimate, batch_size, grad_exact,
                        grad_noisy, ucb)
from .kernels import BACKEND
from .oracle import (GaussianNoise, MeasurementLedger, NoiseModel, Oracle,
                     ProblemSpec, UniformNoise, audit_safety)
from .problems import (disk_quadratic, grid_reference, linear1d, random_instance,
                       turning_eval, turning_problem)
from .solver import (KKTReport, SlackExhausted, SolverConfig, certify_kkt,
                     iteration_budget, solve, solve_subproblem)

__version__ = "0.1.0"
