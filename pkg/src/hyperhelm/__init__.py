"""Numerical lab for radial Helmholtz problems on hyperbolic space and
rotationally symmetric manifolds."""

from .errors import HyperHelmError
from .model import (CoefficientProfile, ConstantProfile, ExpProfile, RadialGeometry,
                    TableProfile, check_hypotheses)
from .odesolver import RadialSolution, find_zeros, ode_residuals, solve_radial_ivp
from .energy import (check_growth_bound, check_two_sided_bounds, energy_trace,
                     fit_decay_exponent)
from .greens import build_kernel, certify_asymptotics, eval_kernel_even, green_limit
from .resolvent import apply_resolvent, bump, convolve_kernel, homogeneous_pair, norm_probe
from .nonlinear import critical_point_search, small_solution
from .normscan import ball_norm_profile, classify_strichartz_threshold
from .config import load_config, parse_config
from .harness import emit_plot_data, run

__version__ = "0.1.0"
