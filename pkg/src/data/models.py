"""
Observed-data and nuisance-fit models for point-treatment data O = (W, A, Y).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DegeneracyError, ValidationError

logger = logging.getLogger(__name__)

Bounds = Tuple[float, float]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def check_bounds(bounds: Bounds, name: str) -> Bounds:
    """
    Validate a (lo, hi) pair with 0 < lo < hi < 1.

    Args:
        bounds: Candidate bounds
        name: Label used in the error message

    Returns:
        Bounds as a tuple of floats
    """
    lo, hi = (float(b) for b in bounds)
    if not 0.0 < lo < hi < 1.0:
        raise ValidationError(f"{name} must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")
    return lo, hi


@dataclass(frozen=True)
class OutcomeScale:
    """Affine map between the original outcome range and [0, 1]."""

    min: float = 0.0
    max: float = 1.0
    was_scaled: bool = False

    @classmethod
    def fit(cls, outcome: np.ndarray,
            outcome_range: Optional[Bounds] = None) -> 'OutcomeScale':
        """
        Choose a scale for an outcome vector.

        Outcomes already inside [0, 1] are left alone unless an explicit
        range is given; otherwise the sample min/max is used.

        Args:
            outcome: Raw outcome values
            outcome_range: Optional declared (min, max) of the outcome

        Returns:
            OutcomeScale instance
        """
        if outcome_range is not None:
            lo, hi = (float(v) for v in outcome_range)
            if not hi > lo:
                raise ValidationError(f"Outcome range must have max > min, got ({lo}, {hi})")
            outside = np.flatnonzero((outcome < lo) | (outcome > hi))
            if outside.size:
                row = int(outside[0])
                raise ValidationError(
                    f"Outcome at row {row} ({outcome[row]}) outside declared range [{lo}, {hi}]"
                )
            return cls(min=lo, max=hi, was_scaled=(lo, hi) != (0.0, 1.0))

        lo, hi = float(np.min(outcome)), float(np.max(outcome))
        if lo >= 0.0 and hi <= 1.0:
            return cls()
        if hi == lo:
            raise DegeneracyError(
                f"Outcome is constant at {lo:g} outside [0, 1]; pass an outcome range to scale it"
            )
        return cls(min=lo, max=hi, was_scaled=True)

    @property
    def width(self) -> float:
        return self.max - self.min

    def scale(self, values: np.ndarray) -> np.ndarray:
        """Map original-scale values into [0, 1]."""
        if not self.was_scaled:
            return np.asarray(values, dtype=float)
        return (np.asarray(values, dtype=float) - self.min) / self.width

    def unscale(self, values: np.ndarray) -> np.ndarray:
        """Map [0, 1]-scale values back to the original outcome scale."""
        if not self.was_scaled:
            return np.asarray(values, dtype=float)
        return np.asarray(values, dtype=float) * self.width + self.min

    def to_dict(self) -> dict:
        return {'min': self.min, 'max': self.max, 'was_scaled': self.was_scaled}


def unscale_estimate(value: float, scale: OutcomeScale, kind: str = 'mean') -> float:
    """
    Map a [0, 1]-scale parameter estimate back to the outcome scale.

    Args:
        value: Estimate on the [0, 1] scale
        scale: Outcome scale recorded at load time
        kind: 'mean' for level parameters, 'difference' for contrasts

    Returns:
        Estimate on the original outcome scale
    """
    if kind not in ('mean', 'difference'):
        raise ValueError(f"Unknown estimate kind: {kind}")
    if not scale.was_scaled:
        return float(value)
    if kind == 'difference':
        return float(value) * scale.width
    return float(value) * scale.width + scale.min


@dataclass(frozen=True)
class Dataset:
    """
    Validated observations O = (W, A, Y) with Y on the [0, 1] scale.

    Arrays are stored read-only, so a Dataset can be shared between threads.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    outcome_scale: OutcomeScale = field(default_factory=OutcomeScale)
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self):
        W = np.asarray(self.covariates, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        A = np.asarray(self.treatment, dtype=float)
        Y = np.asarray(self.outcome, dtype=float)

        if W.ndim != 2:
            raise ValidationError("Covariates must be an n x p matrix")
        n, p = W.shape
        if A.shape != (n,) or Y.shape != (n,):
            raise ValidationError(
                f"Length mismatch: covariates {n}, treatment {A.shape}, outcome {Y.shape}"
            )
        if n < 2:
            raise ValidationError(f"Need at least 2 observations, got {n}")
        if p < 1:
            raise ValidationError("Need at least one covariate")

        for label, arr in (('covariates', W), ('treatment', A), ('outcome', Y)):
            bad = ~np.isfinite(arr)
            if bad.any():
                row = int(np.argwhere(bad)[0][0])
                raise ValidationError(f"Missing or non-finite {label} value at row {row}")

        non_binary = np.flatnonzero((A != 0) & (A != 1))
        if non_binary.size:
            row = int(non_binary[0])
            raise ValidationError(f"Treatment must be 0/1; row {row} has {A[row]:g}")

        outside = np.flatnonzero((Y < 0) | (Y > 1))
        if outside.size:
            row = int(outside[0])
            raise ValidationError(f"Stored outcome must lie in [0, 1]; row {row} has {Y[row]}")

        n_treated = int(A.sum())
        if n_treated == 0 or n_treated == n:
            raise DegeneracyError(
                f"Treatment has no variance: {n_treated} treated out of {n}"
            )

        names = tuple(self.covariate_names) or tuple(f"W{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValidationError(f"Expected {p} covariate names, got {len(names)}")

        object.__setattr__(self, 'covariates', _frozen_array(W))
        object.__setattr__(self, 'treatment', _frozen_array(A, dtype=int))
        object.__setattr__(self, 'outcome', _frozen_array(Y))
        object.__setattr__(self, 'covariate_names', names)

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def take(self, index: Sequence[int]) -> 'Dataset':
        """Return a Dataset restricted (or permuted) to the given rows."""
        index = np.asarray(index, dtype=int)
        return Dataset(
            covariates=self.covariates[index],
            treatment=self.treatment[index],
            outcome=self.outcome[index],
            outcome_scale=self.outcome_scale,
            covariate_names=self.covariate_names,
        )

    def __repr__(self) -> str:
        return (f"Dataset(n={self.n}, p={self.p}, treated={int(self.treatment.sum())}, "
                f"scaled={self.outcome_scale.was_scaled})")


@dataclass(frozen=True)
class NuisanceFits:
    """
    Bounded per-observation predictions Q(0,W), Q(1,W) and g(1|W).

    Attributes:
        qbar0: Outcome regression under control
        qbar1: Outcome regression under treatment
        g1: Propensity score P(A=1|W)
        q_bounds: (lo, hi) bounds for qbar0/qbar1
        g_bounds: (lo, hi) bounds for g1
        clamped: Number of values moved into bounds at construction
    """

    qbar0: np.ndarray
    qbar1: np.ndarray
    g1: np.ndarray
    q_bounds: Bounds = (1e-5, 1 - 1e-5)
    g_bounds: Bounds = (0.01, 0.99)
    clamped: int = 0

    def __post_init__(self):
        q_lo, q_hi = check_bounds(self.q_bounds, 'q_bounds')
        g_lo, g_hi = check_bounds(self.g_bounds, 'g_bounds')

        q0 = np.asarray(self.qbar0, dtype=float)
        q1 = np.asarray(self.qbar1, dtype=float)
        g1 = np.asarray(self.g1, dtype=float)
        if not (q0.ndim == 1 and q0.shape == q1.shape == g1.shape):
            raise ValidationError("qbar0, qbar1 and g1 must be 1-d arrays of equal length")
        for label, arr in (('qbar0', q0), ('qbar1', q1), ('g1', g1)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"Non-finite values in {label}")

        clamped = int(
            np.count_nonzero((q0 < q_lo) | (q0 > q_hi))
            + np.count_nonzero((q1 < q_lo) | (q1 > q_hi))
            + np.count_nonzero((g1 < g_lo) | (g1 > g_hi))
        )

        object.__setattr__(self, 'q_bounds', (q_lo, q_hi))
        object.__setattr__(self, 'g_bounds', (g_lo, g_hi))
        object.__setattr__(self, 'qbar0', _frozen_array(np.clip(q0, q_lo, q_hi)))
        object.__setattr__(self, 'qbar1', _frozen_array(np.clip(q1, q_lo, q_hi)))
        object.__setattr__(self, 'g1', _frozen_array(np.clip(g1, g_lo, g_hi)))
        object.__setattr__(self, 'clamped', self.clamped + clamped)

    @property
    def n(self) -> int:
        return self.g1.shape[0]

    def qbar(self, treatment: np.ndarray) -> np.ndarray:
        """Q(a_i, W_i) for a treatment vector (observed or counterfactual)."""
        return np.where(np.asarray(treatment) == 1, self.qbar1, self.qbar0)

    def g(self, treatment: np.ndarray) -> np.ndarray:
        """g(a_i | W_i) for a treatment vector."""
        return np.where(np.asarray(treatment) == 1, self.g1, 1.0 - self.g1)

    def replace(self, qbar0=None, qbar1=None, g1=None) -> 'NuisanceFits':
        """Return new fits with some predictions replaced (and re-clamped)."""
        return NuisanceFits(
            qbar0=self.qbar0 if qbar0 is None else qbar0,
            qbar1=self.qbar1 if qbar1 is None else qbar1,
            g1=self.g1 if g1 is None else g1,
            q_bounds=self.q_bounds,
            g_bounds=self.g_bounds,
        )

    def take(self, index: Sequence[int]) -> 'NuisanceFits':
        index = np.asarray(index, dtype=int)
        return NuisanceFits(self.qbar0[index], self.qbar1[index], self.g1[index],
                            self.q_bounds, self.g_bounds)

    def within_bounds(self) -> bool:
        q_lo, q_hi = self.q_bounds
        g_lo, g_hi = self.g_bounds
        return bool(
            np.all((self.qbar0 >= q_lo) & (self.qbar0 <= q_hi))
            and np.all((self.qbar1 >= q_lo) & (self.qbar1 <= q_hi))
            and np.all((self.g1 >= g_lo) & (self.g1 <= g_hi))
        )
