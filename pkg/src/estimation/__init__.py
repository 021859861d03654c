"""Estimation module: offset logistic fits, parameters, targeting and inference."""

from .glm import EpsilonFit, OffsetLogisticProblem, SolverConfig, fit_epsilon
from .params import ParameterSpec, ComponentSpec, PARAMETERS, get_parameter, eic_matrix, plug_in
from .nuisance import fit_main_terms, intercept_only_g, intercept_only_q
from .targeting import (
    ClfmSubmodel, StopReason, TargetingConfig, TargetingState, Variant,
    iterate, one_step_ulfm, targeting_step,
)
from .inference import TmleReport, build_report, eic_covariance, wald_ci

__all__ = [
    'EpsilonFit', 'OffsetLogisticProblem', 'SolverConfig', 'fit_epsilon',
    'ParameterSpec', 'ComponentSpec', 'PARAMETERS', 'get_parameter', 'eic_matrix', 'plug_in',
    'fit_main_terms', 'intercept_only_g', 'intercept_only_q',
    'ClfmSubmodel', 'StopReason', 'TargetingConfig', 'TargetingState', 'Variant',
    'iterate', 'one_step_ulfm', 'targeting_step',
    'TmleReport', 'build_report', 'eic_covariance', 'wald_ci'
]
