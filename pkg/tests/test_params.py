"""
Tests for parameter definitions, clever covariates and EIC evaluation.
"""

import numpy as np
import pytest

from src.data.models import Dataset, NuisanceFits
from src.estimation.params import (
    PARAMETERS, ComponentSpec, ParameterSpec, clever_covariates, eic_matrix,
    get_parameter, plug_in, propensity_denominators, tsm_component,
)
from src.simulation.dgp import draw, get_dgp


@pytest.fixture
def sample():
    return draw(get_dgp('dgp-a'), 300, seed=11)


def test_registry_names():
    """Built-in parameters and their components."""
    assert set(PARAMETERS) == {'tsm1', 'tsm0', 'ate', 'tsm-vector'}
    spec = get_parameter('tsm-vector')
    assert spec.d == 2
    assert spec.component_names == ('tsm1', 'tsm0')
    assert not spec.has_h2


def test_unknown_parameter_lists_valid_names():
    """Unknown names report the registry."""
    with pytest.raises(ValueError, match='tsm-vector'):
        get_parameter('att')


def test_tsm_clever_covariates(sample):
    """H1 for TSM(1) is A/g(1|W); H2 is zero."""
    data, fits = sample
    H1, H2 = clever_covariates(get_parameter('tsm1'), fits, data)
    np.testing.assert_allclose(H1[:, 0], data.treatment / fits.g1)
    assert not H2.any()


def test_counterfactual_covariates(sample):
    """Evaluating at A=0 gives -1/(1-g) for the ATE."""
    data, fits = sample
    H1, _ = clever_covariates(get_parameter('ate'), fits, data, np.zeros(data.n, dtype=int))
    np.testing.assert_allclose(H1[:, 0], -1.0 / (1.0 - fits.g1))


def test_plug_in_is_mean_of_q(sample):
    """Plug-ins are empirical means over the observed covariates."""
    data, fits = sample
    estimates = plug_in(get_parameter('tsm-vector'), fits, data)
    assert estimates[0] == pytest.approx(fits.qbar1.mean())
    assert estimates[1] == pytest.approx(fits.qbar0.mean())


def test_ate_eic_is_difference_of_tsm_eics(sample):
    """The EIC is linear across the TSM components."""
    data, fits = sample
    ate = eic_matrix(get_parameter('ate'), fits, data)
    tsm = eic_matrix(get_parameter('tsm-vector'), fits, data)
    np.testing.assert_allclose(ate[:, 0], tsm[:, 0] - tsm[:, 1], atol=1e-12)


def test_eic_centered_term_has_zero_mean(sample):
    """The centered plug-in term has empirical mean zero."""
    data, fits = sample
    spec = get_parameter('tsm1')
    eic = eic_matrix(spec, fits, data)
    residual_part = (data.treatment / fits.g1) * (data.outcome - fits.qbar(data.treatment))
    np.testing.assert_allclose(eic[:, 0].mean(), residual_part.mean(), atol=1e-12)


def test_propensity_denominators_shared(sample):
    """Both TSM components use g(A|W) as denominator."""
    data, fits = sample
    den = propensity_denominators(get_parameter('tsm-vector'), fits, data)
    np.testing.assert_allclose(den[:, 0], fits.g(data.treatment))
    np.testing.assert_allclose(den[:, 1], fits.g(data.treatment))


def test_component_with_treatment_residual(sample):
    """A custom component contributes its H2 term to the EIC."""
    data, fits = sample

    def h1(fits, treatment, covariates):
        return np.zeros(np.shape(treatment)[0])

    def h2(fits, treatment, covariates):
        return np.ones(np.shape(treatment)[0])

    share = ComponentSpec(name='treated_share', h1=h1, h2=h2, f=lambda fits, W: fits.g1)
    spec = ParameterSpec('share', (share,))

    assert spec.has_h2
    eic = eic_matrix(spec, fits, data)
    expected = (data.treatment - fits.g1) + (fits.g1 - fits.g1.mean())
    np.testing.assert_allclose(eic[:, 0], expected, atol=1e-12)


def test_duplicate_component_names_rejected():
    """Component names identify EIC columns and must be unique."""
    with pytest.raises(ValueError):
        ParameterSpec('twice', (tsm_component(1), tsm_component(1)))


@pytest.fixture
def toy():
    data = Dataset(covariates=np.zeros((4, 1)), treatment=[1, 1, 0, 0], outcome=[1.0, 0.0, 1.0, 0.0])
    fits = NuisanceFits(qbar0=np.full(4, 0.4), qbar1=np.full(4, 0.6), g1=np.full(4, 0.5))
    return data, fits


def test_ate_eic_on_toy(toy):
    """Hand arithmetic: H1 = +/-2, residuals (0.4, -0.6, 0.6, -0.4), no centered term."""
    data, fits = toy
    spec = get_parameter('ate')

    H1, _ = clever_covariates(spec, fits, data)
    np.testing.assert_allclose(H1[:, 0], [2.0, 2.0, -2.0, -2.0])
    np.testing.assert_allclose(eic_matrix(spec, fits, data)[:, 0], [0.8, -1.2, -1.2, 0.8], atol=1e-14)
    assert plug_in(spec, fits, data)[0] == pytest.approx(0.2, abs=1e-15)


def test_tsm_vector_eic_on_toy(toy):
    """Each TSM column only carries residuals from its own arm."""
    data, fits = toy
    spec = get_parameter('tsm-vector')

    eic = eic_matrix(spec, fits, data)
    np.testing.assert_allclose(eic[:, 0], [0.8, -1.2, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(eic[:, 1], [0.0, 0.0, 1.2, -0.8], atol=1e-14)
    np.testing.assert_allclose(plug_in(spec, fits, data), [0.6, 0.4], atol=1e-15)


def test_tsm_vector_clever_covariate_row():
    """A treated row with g1 = 0.2 has H1 row (5, 0)."""
    data = Dataset(covariates=np.zeros((2, 1)), treatment=[1, 0], outcome=[1.0, 0.0])
    fits = NuisanceFits(qbar0=np.full(2, 0.5), qbar1=np.full(2, 0.5), g1=np.full(2, 0.2))

    H1, H2 = clever_covariates(get_parameter('tsm-vector'), fits, data)

    np.testing.assert_allclose(H1[0], [5.0, 0.0])
    np.testing.assert_allclose(H1[1], [0.0, 1.25])
    assert not H2.any()


def test_perfect_fit_gives_zero_eic():
    """Y equal to Q and constant f leave nothing in the EIC."""
    data = Dataset(covariates=np.array([[0.0], [1.0]]), treatment=[1, 0], outcome=[0.3, 0.7])
    fits = NuisanceFits(qbar0=np.full(2, 0.7), qbar1=np.full(2, 0.3), g1=np.full(2, 0.5))

    for name in ('tsm1', 'tsm0', 'ate', 'tsm-vector'):
        eic = eic_matrix(get_parameter(name), fits, data)
        np.testing.assert_allclose(eic, 0.0, atol=1e-15)
