"""Adaptive smoothing Riemannian gradient methods for non-Lipschitz penalties."""

from .bench import SyntheticSpec, generate, metric_for, rate_report
from .composite import CompositeProblem, ProblemInstance, build_problem, make_instance
from .manifolds import ManifoldSpec, project_tangent, random_point, retract
from .smoothing import SMOOTHED_ABS, SMOOTHED_PLUS
from .solvers import AsrgaConfig, RssdConfig, run_asrga, run_naive_adagrad, run_rssd

__version__ = "0.1.0"
