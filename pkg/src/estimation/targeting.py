"""
Targeting along the canonical one-dimensional least favorable submodel.

A single scalar epsilon fluctuates Q (and g when the parameter has a
treatment-residual term) in the direction of the normalised mean EIC:

    logit Q_eps(a,W) = logit Q(a,W) + eps * <H1(a,W), P_n D* / ||P_n D*||>
    logit g_eps(1|W) = logit g(1|W) + eps * <H2(A,W), P_n D* / ||P_n D*||>

``iterate`` refits epsilon by pooled logistic regression until every
component of P_n D* is below sd/n; ``one_step_ulfm`` follows the same
direction with fixed tiny steps instead of regressions.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..data.models import Dataset, NuisanceFits
from ..exceptions import ConfigError, NonConvergenceError, TargetingError
from .glm import EpsilonFit, OffsetLogisticProblem, SolverConfig, expit, fit_epsilon, logit
from .params import ParameterSpec, clever_covariates, eic_matrix, propensity_denominators

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    STANDARD = 'standard'
    WEIGHTED = 'weighted'


class StopReason(str, Enum):
    SOLVED = 'solved'
    MAX_ITER = 'max_iter'
    EPSILON_NEGLIGIBLE = 'epsilon_negligible'
    LOSS_INCREASE = 'loss_increase'
    SOLVER_FAILED = 'solver_failed'


@dataclass(frozen=True)
class TargetingConfig:
    """
    Settings for the targeting loop and the one-step baseline.

    Attributes:
        variant: standard or weighted pooled regression
        max_iter: Maximum number of logistic fluctuations
        micro_step: Fixed epsilon per micro-step (one-step baseline)
        tol_scale: Multiplier on the sd/n stopping threshold
        max_micro_steps: Micro-step limit for the one-step baseline
        epsilon_floor: |epsilon| below which iteration stops
        solver: Settings for the epsilon fit
    """

    variant: Variant = Variant.STANDARD
    max_iter: int = 100
    micro_step: float = 1e-5
    tol_scale: float = 1.0
    max_micro_steps: int = 1_000_000
    epsilon_floor: float = 1e-12
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        try:
            object.__setattr__(self, 'variant', Variant(self.variant))
        except ValueError:
            raise ConfigError(f"Unknown variant: {self.variant}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if not self.micro_step > 0:
            raise ConfigError("micro_step must be positive")
        if not self.tol_scale > 0:
            raise ConfigError("tol_scale must be positive")
        if self.max_micro_steps < 1:
            raise ConfigError("max_micro_steps must be >= 1")

    @classmethod
    def from_config(cls, cfg: Dict[str, Any], **overrides) -> 'TargetingConfig':
        section = cfg.get('targeting', {}) or {}
        values = dict(
            variant=section.get('variant', Variant.STANDARD),
            max_iter=int(section.get('max_iter', 100)),
            micro_step=float(section.get('micro_step', 1e-5)),
            tol_scale=float(section.get('tol_scale', 1.0)),
            max_micro_steps=int(section.get('max_micro_steps', 1_000_000)),
            solver=SolverConfig.from_config(cfg),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class TargetingState:
    """
    Current fits plus the iteration trace.

    The traces hold one entry per evaluated fit (``loss_trace``,
    ``eic_mean_trace``, starting with the initial fit) or one per update
    (``epsilon_trace``, ``covariate_sup_trace``).
    """

    fits: NuisanceFits
    iteration: int = 0
    micro_steps: int = 0
    loss_trace: List[float] = field(default_factory=list)
    eic_mean_trace: List[np.ndarray] = field(default_factory=list)
    epsilon_trace: List[float] = field(default_factory=list)
    covariate_sup_trace: List[float] = field(default_factory=list)
    converged: bool = False
    stop_reason: Optional[StopReason] = None

    def finish(self, reason: StopReason):
        self.stop_reason = reason
        self.converged = reason == StopReason.SOLVED
        logger.info("targeting stopped: %s after %d fits / %d micro-steps",
                    reason.value, self.iteration, self.micro_steps)

    @property
    def eic_means(self) -> np.ndarray:
        return self.eic_mean_trace[-1]

    def trace_dict(self) -> Dict[str, Any]:
        return {
            'loss': [float(v) for v in self.loss_trace],
            'eic_means': [[float(v) for v in m] for m in self.eic_mean_trace],
            'epsilon': [float(v) for v in self.epsilon_trace],
            'covariate_sup': [float(v) for v in self.covariate_sup_trace],
        }


def direction(eic_means: np.ndarray) -> Optional[np.ndarray]:
    """
    Unit vector along the mean EIC.

    Args:
        eic_means: d-vector P_n D*

    Returns:
        eic_means / ||eic_means||, or None when the vector is zero
        (the fit is already targeted)
    """
    eic_means = np.asarray(eic_means, dtype=float)
    norm = float(np.linalg.norm(eic_means))
    if norm == 0.0:
        return None
    return eic_means / norm


def composite_covariate(H: np.ndarray, dir: np.ndarray) -> np.ndarray:
    """Row-wise inner product <H_i, dir>."""
    return np.asarray(H, dtype=float) @ np.asarray(dir, dtype=float)


def stopping_threshold(eic: np.ndarray, tol_scale: float = 1.0) -> np.ndarray:
    """Per-component threshold tol_scale * sd(D*_j) / n."""
    n = eic.shape[0]
    return tol_scale * np.std(eic, axis=0, ddof=1) / n


def stopping_rule(eic: np.ndarray, tol_scale: float = 1.0) -> bool:
    """True when |P_n D*_j| < tol_scale * sd_j / n for every component."""
    means = eic.mean(axis=0)
    if not np.any(means):
        return True
    return bool(np.all(np.abs(means) < stopping_threshold(eic, tol_scale)))


def _common_denominator(spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                        treatment: np.ndarray) -> np.ndarray:
    den = propensity_denominators(spec, fits, data, treatment)
    if not np.allclose(den, den[:, :1], rtol=0.0, atol=1e-14):
        raise TargetingError(
            "Weighted targeting needs a propensity denominator shared by all components"
        )
    return den[:, 0]


def _outcome_weights(spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                     variant: Variant) -> np.ndarray:
    if variant == Variant.WEIGHTED:
        return 1.0 / _common_denominator(spec, fits, data, data.treatment)
    return np.ones(data.n)


def _bernoulli_loss(y: np.ndarray, p: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    ll = y * np.log(p) + (1.0 - y) * np.log1p(-p)
    if weights is not None:
        ll = weights * ll
    return float(-np.sum(ll))


def pooled_loss(spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                variant: Variant = Variant.STANDARD) -> float:
    """
    Empirical pooled log-likelihood loss of the current fits.

    The outcome term carries the weighted-variant weights 1/g_den when
    ``variant`` is weighted; the treatment term always has weight 1.
    """
    weights = _outcome_weights(spec, fits, data, Variant(variant))
    y_loss = _bernoulli_loss(data.outcome, fits.qbar(data.treatment), weights)
    a_loss = _bernoulli_loss(data.treatment.astype(float), fits.g1)
    return (y_loss + a_loss) / data.n


class ClfmSubmodel:
    """
    The one-dimensional least favorable submodel through a set of fits.

    Builds the pooled offset logistic rows (all outcome rows, then all
    treatment rows when H2 is nonzero) and the per-arm update covariates.

    Args:
        spec: Parameter definition
        fits: Fits the submodel passes through at epsilon = 0
        data: Observed data
        variant: standard or weighted outcome rows
        eic: EIC matrix at ``fits`` (recomputed when omitted)
    """

    def __init__(self, spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                 variant: Variant = Variant.STANDARD, eic: Optional[np.ndarray] = None):
        self.spec = spec
        self.fits = fits
        self.data = data
        self.variant = Variant(variant)

        eic = eic_matrix(spec, fits, data) if eic is None else eic
        self.eic_means = eic.mean(axis=0)
        self.direction = direction(self.eic_means)
        if self.direction is None:
            raise TargetingError("Mean EIC is zero; the fit is already targeted")

        treated = np.ones(data.n, dtype=int)
        control = np.zeros(data.n, dtype=int)

        H1, H2 = clever_covariates(spec, fits, data)
        y_covariate = composite_covariate(H1, self.direction)
        update1 = composite_covariate(clever_covariates(spec, fits, data, treated)[0], self.direction)
        update0 = composite_covariate(clever_covariates(spec, fits, data, control)[0], self.direction)
        y_weights = np.ones(data.n)

        if self.variant == Variant.WEIGHTED:
            den = _common_denominator(spec, fits, data, data.treatment)
            y_covariate = den * y_covariate
            y_weights = 1.0 / den
            update1 = _common_denominator(spec, fits, data, treated) * update1
            update0 = _common_denominator(spec, fits, data, control) * update0

        self.y_covariate = y_covariate
        self.a_covariate = composite_covariate(H2, self.direction)
        self.includes_treatment_rows = spec.has_h2 and bool(np.any(self.a_covariate != 0))
        self._update1 = update1
        self._update0 = update0

        outcome = [data.outcome]
        offset = [logit(fits.qbar(data.treatment))]
        covariate = [y_covariate]
        weights = [y_weights]
        if self.includes_treatment_rows:
            outcome.append(data.treatment.astype(float))
            offset.append(logit(fits.g1))
            covariate.append(self.a_covariate)
            weights.append(np.ones(data.n))
            self._fixed_loss = 0.0
        else:
            self._fixed_loss = _bernoulli_loss(data.treatment.astype(float), fits.g1) / data.n

        self.problem = OffsetLogisticProblem(
            outcome=np.concatenate(outcome),
            offset=np.concatenate(offset),
            covariate=np.concatenate(covariate),
            weights=np.concatenate(weights),
        )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.eic_means))

    @property
    def covariate_sup(self) -> float:
        """Sup-norm of the outcome-row regression covariate."""
        return float(np.max(np.abs(self.y_covariate)))

    def loss(self, epsilon: float) -> float:
        """Pooled empirical loss (divided by n) along the submodel."""
        return self.problem.loss(epsilon) * self.problem.total_weight / self.data.n + self._fixed_loss

    def fluctuate(self, epsilon: float) -> NuisanceFits:
        """Fits at ``epsilon`` on the submodel, clamped into their bounds."""
        fits = self.fits
        qbar1 = expit(logit(fits.qbar1) + epsilon * self._update1)
        qbar0 = expit(logit(fits.qbar0) + epsilon * self._update0)
        g1 = None
        if self.includes_treatment_rows:
            g1 = expit(logit(fits.g1) + epsilon * self.a_covariate)
        return fits.replace(qbar0=qbar0, qbar1=qbar1, g1=g1)


def _step(state: TargetingState, spec: ParameterSpec, data: Dataset,
          config: TargetingConfig,
          eic: Optional[np.ndarray] = None) -> Tuple[ClfmSubmodel, NuisanceFits, EpsilonFit]:
    submodel = ClfmSubmodel(spec, state.fits, data, config.variant, eic)
    if not np.any(submodel.problem.covariate != 0):
        raise TargetingError(
            f"Fluctuation covariate is zero while ||P_n D*|| = {submodel.norm:.3g}"
        )
    fit = fit_epsilon(submodel.problem, config.solver)
    return submodel, submodel.fluctuate(fit.epsilon), fit


def targeting_step(state: TargetingState, spec: ParameterSpec, data: Dataset,
                   config: Optional[TargetingConfig] = None) -> Tuple[NuisanceFits, EpsilonFit]:
    """
    One pooled-regression update along the clfm.

    Args:
        state: Current targeting state (its fits are the offset)
        spec: Parameter definition
        data: Observed data
        config: Targeting settings

    Returns:
        Tuple of (updated fits, epsilon fit)
    """
    config = config or TargetingConfig()
    _, fits, fit = _step(state, spec, data, config)
    return fits, fit


def iterate(initial: NuisanceFits, spec: ParameterSpec, data: Dataset,
            config: Optional[TargetingConfig] = None) -> TargetingState:
    """
    Iterate targeting steps until the mean EIC is negligible.

    Stops when |P_n D*_j| < tol_scale * sd_j / n for all j (solved), when
    |epsilon| drops below the floor, or after max_iter fits.

    Args:
        initial: Initial nuisance fits
        spec: Parameter definition
        data: Observed data
        config: Targeting settings

    Returns:
        Final TargetingState; its fits define the targeted distribution
    """
    config = config or TargetingConfig()
    state = TargetingState(fits=initial)
    eic = eic_matrix(spec, initial, data)
    state.loss_trace.append(pooled_loss(spec, initial, data, config.variant))
    state.eic_mean_trace.append(eic.mean(axis=0))

    while True:
        if stopping_rule(eic, config.tol_scale):
            state.finish(StopReason.SOLVED)
            break
        if state.iteration >= config.max_iter:
            state.finish(StopReason.MAX_ITER)
            break

        try:
            submodel, fits, fit = _step(state, spec, data, config, eic)
        except NonConvergenceError as e:
            logger.warning("epsilon fit failed at iteration %d: %s", state.iteration + 1, e)
            state.finish(StopReason.SOLVER_FAILED)
            break
        state.iteration += 1
        state.fits = fits
        state.epsilon_trace.append(fit.epsilon)
        state.covariate_sup_trace.append(submodel.covariate_sup)

        eic = eic_matrix(spec, fits, data)
        state.loss_trace.append(pooled_loss(spec, fits, data, config.variant))
        state.eic_mean_trace.append(eic.mean(axis=0))
        logger.debug("iteration %d: eps=%.6g loss=%.12g ||PnD*||=%.3g",
                     state.iteration, fit.epsilon, state.loss_trace[-1],
                     np.linalg.norm(state.eic_means))

        if abs(fit.epsilon) < config.epsilon_floor:
            solved = stopping_rule(eic, config.tol_scale)
            state.finish(StopReason.SOLVED if solved else StopReason.EPSILON_NEGLIGIBLE)
            break

    return state


def one_step_ulfm(initial: NuisanceFits, spec: ParameterSpec, data: Dataset,
                  config: Optional[TargetingConfig] = None) -> TargetingState:
    """
    One-step baseline: follow the clfm direction with fixed micro-steps.

    Each micro-step recomputes the direction, covariates and EIC at the
    current fits and moves epsilon by ``micro_step`` in the loss-decreasing
    direction. No regression is fit.

    Args:
        initial: Initial nuisance fits
        spec: Parameter definition
        data: Observed data
        config: Targeting settings

    Returns:
        Final TargetingState with ``micro_steps`` counted
    """
    config = config or TargetingConfig()
    state = TargetingState(fits=initial)
    eic = eic_matrix(spec, initial, data)
    loss = pooled_loss(spec, initial, data, config.variant)
    state.loss_trace.append(loss)
    state.eic_mean_trace.append(eic.mean(axis=0))

    while True:
        if stopping_rule(eic, config.tol_scale):
            state.finish(StopReason.SOLVED)
            return state
        if state.micro_steps >= config.max_micro_steps:
            state.finish(StopReason.MAX_ITER)
            raise NonConvergenceError(
                f"One-step targeting exceeded {config.max_micro_steps} micro-steps",
                best=state,
            )

        submodel = ClfmSubmodel(spec, state.fits, data, config.variant, eic)
        # loss decreases along +eps when the score is positive
        step = config.micro_step if submodel.problem.score(0.0) >= 0 else -config.micro_step
        fits = submodel.fluctuate(step)
        new_loss = pooled_loss(spec, fits, data, config.variant)
        if new_loss > loss:
            state.finish(StopReason.LOSS_INCREASE)
            return state

        state.micro_steps += 1
        state.fits = fits
        loss = new_loss
        eic = eic_matrix(spec, fits, data)
        state.epsilon_trace.append(step)
        state.covariate_sup_trace.append(submodel.covariate_sup)
        state.loss_trace.append(loss)
        state.eic_mean_trace.append(eic.mean(axis=0))
