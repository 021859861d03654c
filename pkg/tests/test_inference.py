"""
Tests for influence-curve inference and the final report.
"""

import numpy as np
import pytest

from src.data.models import Dataset, OutcomeScale
from src.estimation.inference import (
    build_report, contrasts, eic_covariance, normal_quantile, wald_ci,
)
from src.estimation.params import get_parameter
from src.estimation.targeting import iterate
from src.exceptions import ValidationError
from src.simulation.dgp import draw, get_dgp


def test_normal_quantile():
    """Two-sided 95% quantile."""
    assert normal_quantile(0.05) == pytest.approx(1.959963984540054, abs=1e-12)
    with pytest.raises(ValidationError):
        normal_quantile(1.5)


def test_eic_covariance_matches_numpy():
    """Sample covariance with n - 1 in the denominator."""
    rng = np.random.default_rng(0)
    eic = rng.normal(size=(200, 3))
    np.testing.assert_allclose(eic_covariance(eic), np.cov(eic, rowvar=False), atol=1e-12)

    with pytest.raises(ValidationError):
        eic_covariance(np.ones((1, 2)))


def test_wald_ci():
    """Half-width z * sd / sqrt(n) per component."""
    lower, upper = wald_ci(np.array([0.5, 0.2]), np.diag([4.0, 1.0]), n=100, alpha=0.05)
    z = normal_quantile(0.05)
    np.testing.assert_allclose(lower, [0.5 - z * 0.2, 0.2 - z * 0.1])
    np.testing.assert_allclose(upper, [0.5 + z * 0.2, 0.2 + z * 0.1])


def test_wald_width_scales_with_n_and_alpha():
    """Width shrinks as 1/sqrt(n) and grows with confidence."""
    estimates = np.array([0.4, 0.1])
    cov = np.array([[0.25, 0.02], [0.02, 0.09]])

    lo100, hi100 = wald_ci(estimates, cov, n=100)
    lo400, hi400 = wald_ci(estimates, cov, n=400)
    np.testing.assert_allclose((hi100 - lo100) / (hi400 - lo400), [2.0, 2.0], rtol=1e-12)

    lo32, hi32 = wald_ci(estimates, cov, n=100, alpha=0.32)
    assert np.all(hi32 - lo32 < hi100 - lo100)
    assert np.all(lo32 > lo100) and np.all(hi32 < hi100)


def test_contrasts_delta_method():
    """Risk difference, ratio and odds ratio from a TSM pair."""
    cov = np.array([[0.30, 0.05], [0.05, 0.20]])
    out = contrasts(np.array([0.6, 0.4]), cov, n=400)

    rd = out['risk_difference']
    assert rd.estimate == pytest.approx(0.2)
    assert rd.std_error == pytest.approx(np.sqrt((0.30 + 0.20 - 2 * 0.05) / 400))

    rr = out['risk_ratio']
    assert rr.estimate == pytest.approx(1.5)
    grad = np.array([1 / 0.6, -1 / 0.4])
    assert rr.std_error == pytest.approx(np.sqrt(grad @ cov @ grad / 400))
    assert rr.ci_lower < rr.estimate < rr.ci_upper

    odds = out['odds_ratio']
    assert odds.estimate == pytest.approx((0.6 / 0.4) / (0.4 / 0.6))


def test_ratio_contrasts_need_positive_means():
    """Ratios are omitted when a mean is not positive."""
    out = contrasts(np.array([0.5, 0.0]), np.eye(2), n=100)
    assert set(out) == {'risk_difference'}


def test_report_for_tsm_vector():
    """Report carries estimates, covariance and contrasts."""
    data, fits = draw(get_dgp('dgp-a'), 1000, seed=5)
    spec = get_parameter('tsm-vector')
    state = iterate(fits, spec, data)

    report = build_report(state, spec, data)

    assert report.component_names == ['tsm1', 'tsm0']
    assert report.eic_covariance.shape == (2, 2)
    np.testing.assert_allclose(report.eic_covariance, report.eic_covariance.T)
    assert np.all(report.ci_lower < report.estimates)
    assert np.all(report.estimates < report.ci_upper)
    assert report.stop_reason == 'solved'
    assert report.contrasts['risk_difference'].estimate == pytest.approx(
        report.estimates[0] - report.estimates[1])

    payload = report.to_dict()
    assert payload['n'] == 1000
    assert isinstance(payload['estimates'][0], float)
    assert set(payload['contrasts']) >= {'risk_difference', 'risk_ratio', 'odds_ratio'}


def test_report_unscales_estimates():
    """Means and differences map back to the original outcome scale."""
    base, fits = draw(get_dgp('dgp-a'), 500, seed=3)
    scale = OutcomeScale(min=10.0, max=30.0, was_scaled=True)
    data = Dataset(base.covariates, base.treatment, base.outcome, outcome_scale=scale)

    tsm = get_parameter('tsm1')
    tsm_report = build_report(iterate(fits, tsm, data), tsm, data)
    assert tsm_report.estimates[0] == pytest.approx(10.0 + 20.0 * tsm_report.estimates_scaled[0])

    ate = get_parameter('ate')
    ate_report = build_report(iterate(fits, ate, data), ate, data)
    assert ate_report.estimates[0] == pytest.approx(20.0 * ate_report.estimates_scaled[0])
    assert ate_report.std_errors[0] == pytest.approx(np.sqrt(ate_report.eic_covariance[0, 0] / 500))
    assert ate_report.contrasts == {}

    unscaled = build_report(iterate(fits, ate, base), ate, base)
    assert ate_report.eic_covariance[0, 0] == pytest.approx(400.0 * unscaled.eic_covariance[0, 0])


def test_row_permutation_invariance():
    """Reordering rows leaves the estimates unchanged."""
    data, fits = draw(get_dgp('dgp-a'), 800, seed=12)
    spec = get_parameter('tsm-vector')
    perm = np.random.default_rng(0).permutation(data.n)

    original = build_report(iterate(fits, spec, data), spec, data)
    shuffled_data = data.take(perm)
    shuffled = build_report(iterate(fits.take(perm), spec, shuffled_data), spec, shuffled_data)

    np.testing.assert_allclose(shuffled.estimates, original.estimates, atol=1e-10)
    np.testing.assert_allclose(shuffled.eic_covariance, original.eic_covariance, atol=1e-10)
