"""
Parameter definitions: clever covariates, efficient influence curves, plug-ins.

Every component j of a d-dimensional parameter has an EIC of the form

    D*_j = H1_j(A,W) (Y - Q(A,W)) + H2_j(A,W) (A - g(1|W)) + (f_j(W) - Psi_j)

with Psi_j the empirical mean of f_j. Functions are vectorised: they take the
current NuisanceFits, a treatment vector (observed or counterfactual) and the
covariate matrix, and return one value per row.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..data.models import Dataset, NuisanceFits

CovariateFn = Callable[[NuisanceFits, np.ndarray, np.ndarray], np.ndarray]
TargetFn = Callable[[NuisanceFits, np.ndarray], np.ndarray]


def _zero(fits: NuisanceFits, treatment: np.ndarray, covariates: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(treatment)[0])


def _propensity_of_treatment(fits: NuisanceFits, treatment: np.ndarray,
                             covariates: np.ndarray) -> np.ndarray:
    return fits.g(treatment)


@dataclass(frozen=True)
class ComponentSpec:
    """
    One component of a parameter.

    Attributes:
        name: Component identifier
        h1: Outcome-residual clever covariate H1_j
        f: Function whose empirical mean is the plug-in value
        h2: Treatment-residual clever covariate H2_j (zero for built-ins)
        g_den: Propensity denominator of H1_j, used by the weighted variant
        kind: 'mean' or 'difference' (controls unscaling)
        plug_in: Optional override of the empirical-mean plug-in
    """

    name: str
    h1: CovariateFn
    f: TargetFn
    h2: CovariateFn = _zero
    g_den: CovariateFn = _propensity_of_treatment
    kind: str = 'mean'
    plug_in: Optional[Callable[[NuisanceFits, Dataset], float]] = None

    def evaluate_plug_in(self, fits: NuisanceFits, data: Dataset) -> float:
        if self.plug_in is not None:
            return float(self.plug_in(fits, data))
        return float(np.mean(self.f(fits, data.covariates)))


@dataclass(frozen=True)
class ParameterSpec:
    """A named d-dimensional parameter built from ComponentSpecs."""

    name: str
    components: Tuple[ComponentSpec, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("A parameter needs at least one component")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError(f"Component names must be unique: {names}")

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def component_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.components)

    @property
    def has_h2(self) -> bool:
        return any(c.h2 is not _zero for c in self.components)


def tsm_component(arm: int) -> ComponentSpec:
    """Treatment-specific mean E[Q(arm, W)]."""
    if arm not in (0, 1):
        raise ValueError(f"Treatment arm must be 0 or 1, got {arm}")

    def h1(fits, treatment, covariates):
        treatment = np.asarray(treatment)
        return (treatment == arm) / fits.g(np.full(treatment.shape, arm))

    def f(fits, covariates):
        return fits.qbar1 if arm == 1 else fits.qbar0

    return ComponentSpec(name=f"tsm{arm}", h1=h1, f=f)


def ate_component() -> ComponentSpec:
    """Average treatment effect E[Q(1,W) - Q(0,W)]."""

    def h1(fits, treatment, covariates):
        treatment = np.asarray(treatment)
        return treatment / fits.g1 - (1 - treatment) / (1.0 - fits.g1)

    def f(fits, covariates):
        return fits.qbar1 - fits.qbar0

    return ComponentSpec(name='ate', h1=h1, f=f, kind='difference')


PARAMETERS: Dict[str, Callable[[], ParameterSpec]] = {
    'tsm1': lambda: ParameterSpec('tsm1', (tsm_component(1),)),
    'tsm0': lambda: ParameterSpec('tsm0', (tsm_component(0),)),
    'ate': lambda: ParameterSpec('ate', (ate_component(),)),
    'tsm-vector': lambda: ParameterSpec('tsm-vector', (tsm_component(1), tsm_component(0))),
}


def get_parameter(name: str) -> ParameterSpec:
    """
    Look up a built-in parameter by name.

    Args:
        name: One of tsm1, tsm0, ate, tsm-vector

    Returns:
        ParameterSpec instance
    """
    try:
        return PARAMETERS[name.lower()]()
    except KeyError:
        raise ValueError(
            f"Unknown parameter '{name}'. Valid names: {', '.join(PARAMETERS)}"
        )


def _stack(fns, fits: NuisanceFits, treatment: np.ndarray, covariates: np.ndarray) -> np.ndarray:
    return np.column_stack([np.asarray(fn(fits, treatment, covariates), dtype=float) for fn in fns])


def clever_covariates(spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                      treatment: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate H1 and H2 for every observation and component.

    Args:
        spec: Parameter definition
        fits: Current nuisance fits
        data: Observed data
        treatment: Treatment vector to evaluate at (default: observed A)

    Returns:
        Tuple (H1, H2) of n x d matrices
    """
    treatment = data.treatment if treatment is None else np.asarray(treatment)
    H1 = _stack([c.h1 for c in spec.components], fits, treatment, data.covariates)
    H2 = _stack([c.h2 for c in spec.components], fits, treatment, data.covariates)
    return H1, H2


def propensity_denominators(spec: ParameterSpec, fits: NuisanceFits, data: Dataset,
                            treatment: Optional[np.ndarray] = None) -> np.ndarray:
    """n x d matrix of the H1 propensity denominators g_j(A|W)."""
    treatment = data.treatment if treatment is None else np.asarray(treatment)
    return _stack([c.g_den for c in spec.components], fits, treatment, data.covariates)


def plug_in(spec: ParameterSpec, fits: NuisanceFits, data: Dataset) -> np.ndarray:
    """d-vector of plug-in estimates at the given fits."""
    return np.array([c.evaluate_plug_in(fits, data) for c in spec.components])


def eic_matrix(spec: ParameterSpec, fits: NuisanceFits, data: Dataset) -> np.ndarray:
    """
    Efficient influence curve evaluated at every observation.

    Args:
        spec: Parameter definition
        fits: Current nuisance fits
        data: Observed data

    Returns:
        n x d matrix, row i / column j = D*_j(O_i)
    """
    H1, H2 = clever_covariates(spec, fits, data)
    y_resid = data.outcome - fits.qbar(data.treatment)
    a_resid = data.treatment - fits.g1
    targets = np.column_stack([np.asarray(c.f(fits, data.covariates), dtype=float)
                               for c in spec.components])
    centered = targets - plug_in(spec, fits, data)
    return H1 * y_resid[:, None] + H2 * a_resid[:, None] + centered
