"""
Tests for the single-coefficient offset logistic solver.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from src.estimation.glm import OffsetLogisticProblem, SolverConfig, expit, fit_epsilon, logit
from src.exceptions import ConfigError, NoInformationError, NonConvergenceError, ValidationError


def _problem(n=400, seed=0, weights=None):
    rng = np.random.default_rng(seed)
    offset = rng.normal(scale=0.5, size=n)
    covariate = rng.uniform(-2, 2, size=n)
    outcome = (rng.random(n) < expit(offset + 0.3 * covariate)).astype(float)
    return OffsetLogisticProblem(outcome, offset, covariate, weights)


def test_fit_matches_score_root():
    """Newton solution matches an independent root of the score."""
    problem = _problem()
    fit = fit_epsilon(problem)

    root = brentq(problem.score, -10, 10, xtol=1e-14)

    assert fit.converged
    assert abs(fit.score_at_solution) <= 1e-10
    assert fit.epsilon == pytest.approx(root, abs=1e-8)


@pytest.mark.parametrize('epsilon', [-1.0, 0.0, 1.5])
def test_score_is_minus_loss_gradient(epsilon):
    """Score agrees with a central difference of the loss."""
    problem = _problem(seed=2)
    h = 1e-5
    slope = (problem.loss(epsilon + h) - problem.loss(epsilon - h)) / (2 * h)
    assert problem.score(epsilon) == pytest.approx(-slope, rel=1e-6)


def test_score_vanishes_at_fitted_epsilon():
    """At the fit both the score and the loss slope are zero."""
    problem = _problem(seed=2)
    fit = fit_epsilon(problem)
    h = 1e-5
    slope = (problem.loss(fit.epsilon + h) - problem.loss(fit.epsilon - h)) / (2 * h)
    assert abs(problem.score(fit.epsilon)) <= 1e-10
    assert abs(slope) <= 1e-8


def test_fit_never_increases_loss():
    """The loss at the fitted epsilon is at most the loss at zero."""
    problem = _problem(seed=3)
    fit = fit_epsilon(problem)
    assert problem.loss(fit.epsilon) <= problem.loss(0.0)


def test_weight_scaling_invariance():
    """Multiplying all weights by a constant leaves epsilon unchanged."""
    rng = np.random.default_rng(5)
    weights = rng.uniform(0.5, 3.0, size=400)
    fit = fit_epsilon(_problem(weights=weights))
    scaled = fit_epsilon(_problem(weights=10.0 * weights))
    assert scaled.epsilon == pytest.approx(fit.epsilon, abs=1e-9)


def test_fractional_outcomes():
    """Quasi-binomial outcomes in [0, 1] are accepted."""
    rng = np.random.default_rng(2)
    outcome = rng.uniform(size=200)
    problem = OffsetLogisticProblem(outcome, np.zeros(200), np.ones(200))
    fit = fit_epsilon(problem)
    assert expit(fit.epsilon) == pytest.approx(outcome.mean(), abs=1e-9)


def test_zero_covariate_has_no_information():
    """An all-zero covariate cannot identify epsilon."""
    problem = OffsetLogisticProblem([0.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(NoInformationError):
        fit_epsilon(problem)


def test_diverging_epsilon_raises_with_best_fit():
    """Separated rows push epsilon past the cap."""
    problem = OffsetLogisticProblem(np.ones(10), np.zeros(10), np.ones(10))
    with pytest.raises(NonConvergenceError) as excinfo:
        fit_epsilon(problem, SolverConfig(max_abs_epsilon=5.0))
    assert excinfo.value.best is not None
    assert not excinfo.value.best.converged
    assert excinfo.value.best.epsilon > 5.0


def test_problem_validation():
    """Mismatched shapes and outcomes outside [0, 1] are rejected."""
    with pytest.raises(ValidationError):
        OffsetLogisticProblem([0.0, 1.0], [0.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        OffsetLogisticProblem([0.0, 2.0], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        OffsetLogisticProblem([0.0, 1.0], [0.0, 0.0], [1.0, 1.0], weights=[0.0, 0.0])


def test_solver_config_validation():
    """Nonpositive tolerances are configuration errors."""
    with pytest.raises(ConfigError):
        SolverConfig(score_tol=0.0)


def test_solver_config_from_config():
    """The glm section overrides defaults."""
    config = SolverConfig.from_config({'glm': {'score_tol': 1e-8, 'max_newton_iter': 7}})
    assert config.score_tol == 1e-8
    assert config.max_newton_iter == 7
    assert config.max_halvings == 30


def test_bounded_link_functions():
    """Bounds clamp before logit and after expit."""
    assert logit(0.0, (0.01, 0.99)) == pytest.approx(np.log(0.01 / 0.99))
    assert expit(100.0, (0.01, 0.99)) == 0.99
    np.testing.assert_allclose(expit(logit(np.array([0.2, 0.7]))), [0.2, 0.7])
