"""
Known-truth data-generating processes for point-treatment simulations.

Random numbers come from numpy's PCG64 generator seeded through
``numpy.random.SeedSequence``; a seed may be an int or a SeedSequence.
"""

from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from ..data.models import Dataset, NuisanceFits
from ..estimation.glm import expit
from ..estimation.params import ParameterSpec, eic_matrix
from ..estimation.inference import eic_covariance

Seed = Union[int, np.random.SeedSequence]


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator from an int seed or a SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class CovariateLaw:
    """
    Marginal law of one covariate.

    Attributes:
        distribution: 'uniform' (a=low, b=high) or 'normal' (a=mean, b=sd)
        a: First parameter
        b: Second parameter
    """

    distribution: str
    a: float
    b: float

    def __post_init__(self):
        if self.distribution not in ('uniform', 'normal'):
            raise ValueError(f"Unknown covariate distribution: {self.distribution}")
        if self.distribution == 'uniform' and not self.b > self.a:
            raise ValueError("Uniform law needs high > low")
        if self.distribution == 'normal' and not self.b > 0:
            raise ValueError("Normal law needs sd > 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.distribution == 'uniform':
            return rng.uniform(self.a, self.b, size=n)
        return rng.normal(self.a, self.b, size=n)

    def to_dict(self) -> dict:
        return {'distribution': self.distribution, 'a': self.a, 'b': self.b}


@dataclass(frozen=True)
class DgpSpec:
    """
    Logistic propensity and outcome truth over independent covariates.

    g0(1|W) = expit(c0 + c'W) truncated into [b, 1 - b]
    Q0(a,W) = expit(beta0 + beta_a a + beta_W'W + a beta_aW'W)

    Attributes:
        name: Identifier
        w_law: One CovariateLaw per covariate
        g0_coefficients: (c0, c_1..c_p)
        q0_coefficients: (beta0, beta_a, beta_W (p), beta_aW (p))
        positivity_bound: Truncation level b of g0
    """

    name: str
    w_law: Tuple[CovariateLaw, ...]
    g0_coefficients: Tuple[float, ...]
    q0_coefficients: Tuple[float, ...]
    positivity_bound: float

    def __post_init__(self):
        p = self.p
        if p < 1:
            raise ValueError("A DGP needs at least one covariate")
        if len(self.g0_coefficients) != p + 1:
            raise ValueError(f"g0_coefficients needs {p + 1} entries")
        if len(self.q0_coefficients) != 2 * p + 2:
            raise ValueError(f"q0_coefficients needs {2 * p + 2} entries")
        if not 0.0 < self.positivity_bound < 0.5:
            raise ValueError("positivity_bound must lie in (0, 0.5)")

    @property
    def p(self) -> int:
        return len(self.w_law)

    def sample_covariates(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack([law.sample(rng, n) for law in self.w_law])

    def g0(self, W: np.ndarray) -> np.ndarray:
        c = np.asarray(self.g0_coefficients)
        b = self.positivity_bound
        return np.clip(expit(c[0] + W @ c[1:]), b, 1.0 - b)

    def qbar0(self, a, W: np.ndarray) -> np.ndarray:
        beta = np.asarray(self.q0_coefficients)
        p = self.p
        a = np.broadcast_to(np.asarray(a, dtype=float), (W.shape[0],))
        eta = beta[0] + beta[1] * a + W @ beta[2:2 + p] + a * (W @ beta[2 + p:])
        return expit(eta)

    def true_fits(self, W: np.ndarray) -> NuisanceFits:
        """Truth evaluated at W, with bounds wide enough to leave it untouched."""
        return NuisanceFits(
            qbar0=self.qbar0(0, W), qbar1=self.qbar0(1, W), g1=self.g0(W),
            q_bounds=(1e-10, 1 - 1e-10), g_bounds=(1e-10, 1 - 1e-10),
        )

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'w_law': [law.to_dict() for law in self.w_law],
            'g0_coefficients': list(self.g0_coefficients),
            'q0_coefficients': list(self.q0_coefficients),
            'positivity_bound': self.positivity_bound,
        }


_W_LAW = (CovariateLaw('uniform', -1.0, 1.0), CovariateLaw('normal', 0.0, 1.0))

DGPS: Dict[str, DgpSpec] = {
    # well-behaved: g0 within [0.2, 0.8]
    'dgp-a': DgpSpec(
        name='dgp-a',
        w_law=_W_LAW,
        g0_coefficients=(0.2, 0.6, -0.4),
        q0_coefficients=(-0.3, 0.5, 0.8, -0.5, 0.4, 0.3),
        positivity_bound=0.2,
    ),
    # near positivity violation: g0 truncated at 0.01
    'dgp-b': DgpSpec(
        name='dgp-b',
        w_law=_W_LAW,
        g0_coefficients=(-1.5, 2.5, 1.5),
        q0_coefficients=(-0.3, 0.5, 0.8, -0.5, 0.4, 0.3),
        positivity_bound=0.01,
    ),
    # no treatment effect
    'dgp-null': DgpSpec(
        name='dgp-null',
        w_law=_W_LAW,
        g0_coefficients=(0.2, 0.6, -0.4),
        q0_coefficients=(-0.3, 0.0, 0.8, -0.5, 0.0, 0.0),
        positivity_bound=0.2,
    ),
}


def get_dgp(name: str) -> DgpSpec:
    try:
        return DGPS[name.lower()]
    except KeyError:
        raise ValueError(f"Unknown DGP '{name}'. Valid names: {', '.join(DGPS)}")


def draw(dgp: DgpSpec, n: int, seed: Seed,
         q_bounds: Tuple[float, float] = (1e-5, 1 - 1e-5),
         g_bounds: Tuple[float, float] = (0.01, 0.99)) -> Tuple[Dataset, NuisanceFits]:
    """
    Draw n observations with the true nuisance values attached.

    Args:
        dgp: Data-generating process
        n: Sample size
        seed: Int seed or SeedSequence
        q_bounds: Bounds applied to the attached Q truth
        g_bounds: Bounds applied to the attached g truth

    Returns:
        Tuple (Dataset, NuisanceFits holding the truth at the drawn W)
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rng = make_rng(seed)
    W = dgp.sample_covariates(rng, n)
    g1 = dgp.g0(W)
    A = (rng.random(n) < g1).astype(int)
    Y = (rng.random(n) < dgp.qbar0(A, W)).astype(float)

    data = Dataset(covariates=W, treatment=A, outcome=Y,
                   covariate_names=tuple(f"W{j + 1}" for j in range(dgp.p)))
    fits = NuisanceFits(qbar0=dgp.qbar0(0, W), qbar1=dgp.qbar0(1, W), g1=g1,
                        q_bounds=q_bounds, g_bounds=g_bounds)
    return data, fits


@dataclass(frozen=True)
class TruthValue:
    """Monte Carlo value of a parameter under a DGP."""

    value: np.ndarray
    std_error: np.ndarray


def truth(dgp: DgpSpec, spec: ParameterSpec, mc_n: int = 1_000_000,
          seed: Seed = 0) -> TruthValue:
    """
    Monte Carlo plug-in of the true Q over fresh covariate draws.

    Args:
        dgp: Data-generating process
        spec: Parameter definition
        mc_n: Number of covariate draws (at least 1e5)
        seed: Int seed or SeedSequence

    Returns:
        TruthValue with value and Monte Carlo standard error per component
    """
    if mc_n < 100_000:
        raise ValueError(f"mc_n must be >= 100000, got {mc_n}")
    W = dgp.sample_covariates(make_rng(seed), mc_n)
    fits = dgp.true_fits(W)
    targets = np.column_stack([np.asarray(c.f(fits, W), dtype=float) for c in spec.components])
    return TruthValue(
        value=targets.mean(axis=0),
        std_error=targets.std(axis=0, ddof=1) / np.sqrt(mc_n),
    )


def efficiency_bound(dgp: DgpSpec, spec: ParameterSpec, mc_n: int = 1_000_000,
                     seed: Seed = 0) -> np.ndarray:
    """
    Monte Carlo Var(D*(P_0)) per component (the variance bound times n).

    Args:
        dgp: Data-generating process
        spec: Parameter definition
        mc_n: Number of observations drawn
        seed: Int seed or SeedSequence

    Returns:
        d-vector of EIC variances at the truth
    """
    rng = make_rng(seed)
    W = dgp.sample_covariates(rng, mc_n)
    fits = dgp.true_fits(W)
    A = (rng.random(mc_n) < fits.g1).astype(int)
    Y = (rng.random(mc_n) < fits.qbar(A)).astype(float)
    data = Dataset(covariates=W, treatment=A, outcome=Y)
    return np.diag(eic_covariance(eic_matrix(spec, fits, data))).copy()
