"""
Influence-curve inference: EIC covariance, Wald intervals and the final report.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from ..data.models import Dataset, unscale_estimate
from ..exceptions import ValidationError
from .params import ParameterSpec, eic_matrix, plug_in
from .targeting import TargetingState


def eic_covariance(eic: np.ndarray) -> np.ndarray:
    """
    Sample covariance (n - 1 denominator) of the EIC columns.

    Args:
        eic: n x d EIC matrix

    Returns:
        d x d covariance matrix
    """
    eic = np.asarray(eic, dtype=float)
    if eic.ndim == 1:
        eic = eic.reshape(-1, 1)
    n = eic.shape[0]
    if n < 2:
        raise ValidationError(f"Covariance needs at least 2 observations, got {n}")
    centered = eic - eic.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    return (cov + cov.T) / 2.0


def normal_quantile(alpha: float) -> float:
    """Two-sided standard normal quantile z with P(|Z| <= z) = 1 - alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.ppf(1.0 - alpha / 2.0))


def wald_ci(estimates: np.ndarray, covariance: np.ndarray, n: int,
            alpha: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-component Wald intervals  estimate +/- z * sqrt(cov_jj) / sqrt(n).

    Args:
        estimates: d-vector of point estimates
        covariance: d x d EIC covariance
        n: Sample size
        alpha: Significance level

    Returns:
        Tuple (lower, upper) of d-vectors
    """
    z = normal_quantile(alpha)
    half_width = z * np.sqrt(np.clip(np.diag(np.atleast_2d(covariance)), 0.0, None)) / np.sqrt(n)
    estimates = np.asarray(estimates, dtype=float)
    return estimates - half_width, estimates + half_width


@dataclass
class ContrastEstimate:
    """A delta-method contrast derived from two treatment-specific means."""

    name: str
    estimate: float
    std_error: float
    ci_lower: float
    ci_upper: float
    scale: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'estimate': self.estimate,
            'std_error': self.std_error,
            'ci_lower': self.ci_lower,
            'ci_upper': self.ci_upper,
            'scale': self.scale,
        }


@dataclass
class TmleReport:
    """
    Final estimates with influence-curve based inference.

    Estimates, standard errors, intervals and the EIC covariance are on the
    original outcome scale; ``estimates_scaled`` is on the [0, 1] scale.
    """

    parameter: str
    component_names: List[str]
    estimates: np.ndarray
    estimates_scaled: np.ndarray
    eic_covariance: np.ndarray
    std_errors: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    n: int
    iterations: int
    micro_steps: int
    stop_reason: str
    converged: bool
    eic_means_final: np.ndarray
    variant: str
    contrasts: Dict[str, ContrastEstimate] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'parameter': self.parameter,
            'component_names': list(self.component_names),
            'estimates': [float(v) for v in self.estimates],
            'estimates_scaled': [float(v) for v in self.estimates_scaled],
            'eic_covariance': [[float(v) for v in row] for row in self.eic_covariance],
            'std_errors': [float(v) for v in self.std_errors],
            'ci_lower': [float(v) for v in self.ci_lower],
            'ci_upper': [float(v) for v in self.ci_upper],
            'alpha': float(self.alpha),
            'n': int(self.n),
            'iterations': int(self.iterations),
            'micro_steps': int(self.micro_steps),
            'stop_reason': self.stop_reason,
            'converged': bool(self.converged),
            'eic_means_final': [float(v) for v in self.eic_means_final],
            'variant': self.variant,
            'contrasts': {k: c.to_dict() for k, c in self.contrasts.items()},
        }


def contrasts(estimates: np.ndarray, covariance: np.ndarray, n: int,
              alpha: float = 0.05) -> Dict[str, ContrastEstimate]:
    """
    Delta-method contrasts of a (TSM(1), TSM(0)) pair.

    Risk difference always; log risk ratio when both means are positive and
    log odds ratio when both lie in (0, 1). Ratio intervals are reported
    exponentiated.

    Args:
        estimates: (psi1, psi0) on the original outcome scale
        covariance: 2 x 2 EIC covariance on the same scale
        n: Sample size
        alpha: Significance level

    Returns:
        Dictionary of ContrastEstimate keyed by contrast name
    """
    psi1, psi0 = (float(v) for v in estimates)
    cov = np.asarray(covariance, dtype=float)
    z = normal_quantile(alpha)

    def _delta(grad):
        grad = np.asarray(grad, dtype=float)
        return float(np.sqrt(max(grad @ cov @ grad, 0.0) / n))

    out = {}
    se = _delta([1.0, -1.0])
    rd = psi1 - psi0
    out['risk_difference'] = ContrastEstimate('risk_difference', rd, se, rd - z * se, rd + z * se, 'identity')

    if psi1 > 0 and psi0 > 0:
        log_rr = np.log(psi1) - np.log(psi0)
        se = _delta([1.0 / psi1, -1.0 / psi0])
        out['risk_ratio'] = ContrastEstimate(
            'risk_ratio', float(np.exp(log_rr)), se,
            float(np.exp(log_rr - z * se)), float(np.exp(log_rr + z * se)), 'log'
        )

    if 0 < psi1 < 1 and 0 < psi0 < 1:
        log_or = np.log(psi1 / (1 - psi1)) - np.log(psi0 / (1 - psi0))
        se = _delta([1.0 / (psi1 * (1 - psi1)), -1.0 / (psi0 * (1 - psi0))])
        out['odds_ratio'] = ContrastEstimate(
            'odds_ratio', float(np.exp(log_or)), se,
            float(np.exp(log_or - z * se)), float(np.exp(log_or + z * se)), 'log'
        )

    return out


def build_report(state: TargetingState, spec: ParameterSpec, data: Dataset,
                 alpha: float = 0.05, variant: str = 'standard') -> TmleReport:
    """
    Assemble the report at the targeted fits.

    Args:
        state: Final targeting state
        spec: Parameter definition
        data: Observed data
        alpha: Significance level
        variant: Variant label recorded in the report

    Returns:
        TmleReport
    """
    scale = data.outcome_scale
    eic = eic_matrix(spec, state.fits, data)
    scaled = plug_in(spec, state.fits, data)
    estimates = np.array([
        unscale_estimate(v, scale, c.kind) for v, c in zip(scaled, spec.components)
    ])
    width = scale.width if scale.was_scaled else 1.0
    covariance = eic_covariance(eic) * width ** 2
    lower, upper = wald_ci(estimates, covariance, data.n, alpha)

    report = TmleReport(
        parameter=spec.name,
        component_names=list(spec.component_names),
        estimates=estimates,
        estimates_scaled=scaled,
        eic_covariance=covariance,
        std_errors=np.sqrt(np.diag(covariance)) / np.sqrt(data.n),
        ci_lower=lower,
        ci_upper=upper,
        alpha=alpha,
        n=data.n,
        iterations=state.iteration,
        micro_steps=state.micro_steps,
        stop_reason=state.stop_reason.value if state.stop_reason else 'unknown',
        converged=state.converged,
        eic_means_final=eic.mean(axis=0),
        variant=str(getattr(variant, 'value', variant)),
    )

    if spec.component_names == ('tsm1', 'tsm0'):
        report.contrasts = contrasts(estimates, covariance, data.n, alpha)

    return report
