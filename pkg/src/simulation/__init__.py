"""Simulation module for known-truth Monte Carlo experiments."""

from .dgp import DGPS, DgpSpec, draw, efficiency_bound, get_dgp, truth
from .experiment import ExperimentResult, NuisanceMode, run_experiment

__all__ = [
    'DGPS', 'DgpSpec', 'draw', 'efficiency_bound', 'get_dgp', 'truth',
    'ExperimentResult', 'NuisanceMode', 'run_experiment'
]
