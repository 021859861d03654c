"""
Tests for initial nuisance estimators.
"""

import numpy as np
import pytest

from src.data.models import Dataset
from src.estimation.nuisance import fit_main_terms, intercept_only_g, intercept_only_q
from src.exceptions import NuisanceFitError
from src.simulation.dgp import draw, get_dgp


@pytest.fixture(scope='module')
def sample():
    return draw(get_dgp('dgp-a'), 4000, seed=5)


def test_main_terms_close_to_truth(sample):
    """Arm-stratified main terms recover the logistic truth of DGP-A."""
    data, truth = sample
    fits = fit_main_terms(data)

    assert np.mean(np.abs(fits.qbar0 - truth.qbar0)) < 0.05
    assert np.mean(np.abs(fits.qbar1 - truth.qbar1)) < 0.05
    assert np.mean(np.abs(fits.g1 - truth.g1)) < 0.05


def test_main_terms_respects_bounds(sample):
    """Fitted predictions are clamped into the requested bounds."""
    data, _ = sample
    fits = fit_main_terms(data, q_bounds=(0.2, 0.8), g_bounds=(0.3, 0.7))

    assert fits.q_bounds == (0.2, 0.8)
    assert fits.qbar1.min() >= 0.2 and fits.qbar1.max() <= 0.8
    assert fits.g1.min() >= 0.3 and fits.g1.max() <= 0.7
    assert fits.clamped > 0


def test_main_terms_small_arm():
    """An arm with fewer rows than coefficients cannot be fit."""
    data = Dataset(covariates=np.array([[0.1], [0.4], [0.7], [0.9]]),
                   treatment=np.array([1, 0, 0, 0]),
                   outcome=np.array([1.0, 0.0, 1.0, 0.0]))
    with pytest.raises(NuisanceFitError, match='Arm 1'):
        fit_main_terms(data)


def test_intercept_only_fits(sample):
    """Intercept-only replacements use the marginal means."""
    data, truth = sample

    q_only = intercept_only_q(data, truth)
    np.testing.assert_allclose(q_only.qbar0, data.outcome.mean())
    np.testing.assert_array_equal(q_only.qbar1, q_only.qbar0)
    np.testing.assert_array_equal(q_only.g1, truth.g1)

    g_only = intercept_only_g(data, truth)
    np.testing.assert_allclose(g_only.g1, data.treatment.mean())
    np.testing.assert_array_equal(g_only.qbar1, truth.qbar1)
