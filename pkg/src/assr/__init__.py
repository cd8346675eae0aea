"""Adaptive spiking sparse recovery.

An integrate-and-fire network whose firing rates settle on critical points of
min_{a >= 0} 1/2 ||s - Phi a||^2 + lam sum g(a_i), together with the
continuous auxiliary dynamics it tracks and classical reference solvers.
"""

from ._backend import BACKEND
from .auxiliary import AuxiliaryConfig, energy, integrate, output_map
from .errors import ASSRError, ConfigError, DomainError, MetricError, NumericalError
from .oracle import ista_l1, kkt_residual, prox_grad_nonconvex
from .penalty import Penalty, validate_rules
from .problem import (Dictionary, NoiseSpec, Problem, make_dictionary, make_sparse_code,
                      nmse, success, synthesize)
from .harness import ExperimentSpec, Method, convergence_curve, run_trials, sweep
from .spiking import SpikingConfig, current_bounds, init_network, run

__version__ = "0.1.0"
