"""
Initial nuisance estimators: main-terms logistic regressions and intercept-only fits.
"""

import logging
import warnings

import numpy as np
import statsmodels.api as sm

from ..data.models import Bounds, Dataset, NuisanceFits
from ..exceptions import NuisanceFitError

logger = logging.getLogger(__name__)


def _logistic_fit(y: np.ndarray, X: np.ndarray, label: str):
    """Binomial GLM with logit link; y may be fractional in [0, 1]."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            return sm.GLM(y, X, family=sm.families.Binomial()).fit()
    except Exception as e:
        raise NuisanceFitError(f"{label} regression failed: {e}") from e


def fit_main_terms(data: Dataset, q_bounds: Bounds = (1e-5, 1 - 1e-5),
                   g_bounds: Bounds = (0.01, 0.99)) -> NuisanceFits:
    """
    Main-terms logistic fits for Q and g.

    Q is fit separately within each treatment arm (main terms in W), which
    allows a different covariate effect under treatment and control.

    Args:
        data: Observed data
        q_bounds: Bounds for Q predictions
        g_bounds: Bounds for g predictions

    Returns:
        NuisanceFits with fitted predictions
    """
    X = sm.add_constant(data.covariates, has_constant='add')
    qbar = {}
    for arm in (0, 1):
        rows = data.treatment == arm
        if rows.sum() <= X.shape[1]:
            raise NuisanceFitError(
                f"Arm {arm} has {int(rows.sum())} observations for {X.shape[1]} coefficients"
            )
        model = _logistic_fit(data.outcome[rows], X[rows], f"Outcome (arm {arm})")
        qbar[arm] = model.predict(X)

    g_model = _logistic_fit(data.treatment.astype(float), X, 'Propensity')
    fits = NuisanceFits(qbar0=qbar[0], qbar1=qbar[1], g1=g_model.predict(X),
                        q_bounds=q_bounds, g_bounds=g_bounds)
    if fits.clamped:
        logger.info("Clamped %d fitted nuisance values into bounds", fits.clamped)
    return fits


def intercept_only_q(data: Dataset, fits: NuisanceFits) -> NuisanceFits:
    """Replace Q by the marginal outcome mean (a misspecified outcome model)."""
    mean_y = np.full(data.n, float(np.mean(data.outcome)))
    return fits.replace(qbar0=mean_y, qbar1=mean_y)


def intercept_only_g(data: Dataset, fits: NuisanceFits) -> NuisanceFits:
    """Replace g by the marginal treatment rate (a misspecified propensity model)."""
    return fits.replace(g1=np.full(data.n, float(np.mean(data.treatment))))
