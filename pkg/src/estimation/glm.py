"""
Single-coefficient offset logistic regression.

Fits epsilon in  E[y] = expit(offset + epsilon * covariate)  by weighted
(quasi-)binomial maximum likelihood. Outcomes may be fractional in [0, 1].
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit as _expit
from scipy.special import log_expit
from scipy.special import logit as _logit

from ..exceptions import ConfigError, NoInformationError, NonConvergenceError, ValidationError

logger = logging.getLogger(__name__)

_LOSS_ROUNDING = 1e-15


def expit(x, bounds: Optional[Tuple[float, float]] = None):
    """Inverse logit, optionally clamped into [lo, hi]."""
    p = _expit(x)
    if bounds is not None:
        p = np.clip(p, bounds[0], bounds[1])
    return p


def logit(p, bounds: Optional[Tuple[float, float]] = None):
    """Logit, with p first clamped into [lo, hi] when bounds are given."""
    if bounds is not None:
        p = np.clip(p, bounds[0], bounds[1])
    return _logit(p)


@dataclass(frozen=True)
class SolverConfig:
    """Newton-Raphson settings for ``fit_epsilon``."""

    score_tol: float = 1e-10
    max_newton_iter: int = 50
    max_halvings: int = 30
    max_abs_epsilon: float = 50.0

    def __post_init__(self):
        if self.score_tol <= 0:
            raise ConfigError("score_tol must be positive")
        if self.max_newton_iter < 1 or self.max_halvings < 0:
            raise ConfigError("max_newton_iter must be >= 1 and max_halvings >= 0")
        if self.max_abs_epsilon <= 0:
            raise ConfigError("max_abs_epsilon must be positive")

    @classmethod
    def from_config(cls, cfg: Dict[str, Any]) -> 'SolverConfig':
        section = cfg.get('glm', {}) or {}
        return cls(
            score_tol=float(section.get('score_tol', cls.score_tol)),
            max_newton_iter=int(section.get('max_newton_iter', cls.max_newton_iter)),
            max_halvings=int(section.get('max_halvings', cls.max_halvings)),
            max_abs_epsilon=float(section.get('max_abs_epsilon', cls.max_abs_epsilon)),
        )


@dataclass(frozen=True)
class EpsilonFit:
    """
    Result of a single-coefficient fit.

    Attributes:
        epsilon: Fitted fluctuation coefficient
        score_at_solution: Weighted mean score at epsilon
        converged: Whether |score| <= score_tol was reached
        iterations: Newton iterations used
    """

    epsilon: float
    score_at_solution: float
    converged: bool
    iterations: int


class OffsetLogisticProblem:
    """
    Rows of an offset logistic regression with one free coefficient.

    Args:
        outcome: Outcomes in [0, 1]
        offset: Fixed linear predictor (logit scale)
        covariate: Covariate multiplying epsilon
        weights: Nonnegative observation weights (default all 1)
    """

    def __init__(self, outcome, offset, covariate, weights=None):
        self.outcome = np.asarray(outcome, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.covariate = np.asarray(covariate, dtype=float)
        m = self.outcome.shape[0]
        self.weights = np.ones(m) if weights is None else np.asarray(weights, dtype=float)

        if m < 1:
            raise ValidationError("Offset logistic problem needs at least one row")
        for name, arr in (('offset', self.offset), ('covariate', self.covariate),
                          ('weights', self.weights)):
            if arr.shape != (m,):
                raise ValidationError(f"{name} has shape {arr.shape}, expected ({m},)")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
        if np.any((self.outcome < 0) | (self.outcome > 1)):
            raise ValidationError("outcome must lie in [0, 1]")
        if np.any(self.weights < 0) or not np.any(self.weights > 0):
            raise ValidationError("weights must be nonnegative and not all zero")

        self.total_weight = float(np.sum(self.weights))

    def __len__(self) -> int:
        return self.outcome.shape[0]

    def linear_predictor(self, epsilon: float) -> np.ndarray:
        return self.offset + epsilon * self.covariate

    def loss(self, epsilon: float) -> float:
        """Weighted mean negative log-likelihood at epsilon."""
        eta = self.linear_predictor(epsilon)
        ll = self.outcome * log_expit(eta) + (1.0 - self.outcome) * log_expit(-eta)
        return float(-np.sum(self.weights * ll) / self.total_weight)

    def score(self, epsilon: float) -> float:
        """Weighted mean score (minus the loss derivative) at epsilon."""
        resid = self.outcome - _expit(self.linear_predictor(epsilon))
        return float(np.sum(self.weights * self.covariate * resid) / self.total_weight)

    def information(self, epsilon: float) -> float:
        p = _expit(self.linear_predictor(epsilon))
        return float(np.sum(self.weights * self.covariate ** 2 * p * (1.0 - p)) / self.total_weight)


def fit_epsilon(problem: OffsetLogisticProblem,
                config: Optional[SolverConfig] = None) -> EpsilonFit:
    """
    Maximum-likelihood epsilon by Newton-Raphson with step halving.

    Starts at epsilon = 0 and only accepts steps that do not increase the
    loss, so the returned fit never does worse than epsilon = 0.

    Args:
        problem: Offset logistic rows
        config: Solver settings

    Returns:
        EpsilonFit with converged=True
    """
    config = config or SolverConfig()

    if not np.any(problem.covariate != 0):
        raise NoInformationError("Fluctuation covariate is identically zero")

    eps = 0.0
    loss = problem.loss(eps)
    score = problem.score(eps)

    for iteration in range(config.max_newton_iter + 1):
        if abs(score) <= config.score_tol:
            return EpsilonFit(eps, score, True, iteration)
        if iteration == config.max_newton_iter:
            break

        info = problem.information(eps)
        if not info > 0:
            break
        step = score / info

        # halve until the loss does not go up (beyond rounding)
        slack = _LOSS_ROUNDING * max(1.0, abs(loss))
        candidate = eps + step
        candidate_loss = problem.loss(candidate)
        halvings = 0
        while candidate_loss > loss + slack and halvings < config.max_halvings:
            step /= 2.0
            candidate = eps + step
            candidate_loss = problem.loss(candidate)
            halvings += 1
        if candidate_loss > loss + slack:
            # no descent direction left at machine precision
            break

        eps, loss = candidate, candidate_loss
        score = problem.score(eps)
        logger.debug("newton iter %d: eps=%.6g loss=%.12g score=%.3g",
                     iteration + 1, eps, loss, score)

        if abs(eps) > config.max_abs_epsilon:
            raise NonConvergenceError(
                f"|epsilon| exceeded {config.max_abs_epsilon} (epsilon={eps:.4g}); "
                "check bounds and positivity",
                best=EpsilonFit(eps, score, False, iteration + 1),
            )

    best = EpsilonFit(eps, score, False, iteration)
    raise NonConvergenceError(
        f"Offset logistic fit did not converge: |score|={abs(score):.3g} "
        f"after {iteration} Newton iterations",
        best=best,
    )
