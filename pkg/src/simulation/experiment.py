"""
Monte Carlo experiments: repeated draw -> initial fits -> targeting -> CI.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ..data.models import Bounds, Dataset, NuisanceFits
from ..estimation.inference import build_report
from ..estimation.nuisance import fit_main_terms, intercept_only_g, intercept_only_q
from ..estimation.params import ParameterSpec
from ..estimation.targeting import TargetingConfig, Variant, iterate, one_step_ulfm
from ..exceptions import TmleError
from .dgp import DgpSpec, draw, efficiency_bound, truth

logger = logging.getLogger(__name__)

# SeedSequence spawn keys separating replication and truth streams
_REPLICATION_STREAM = 0
_TRUTH_STREAM = 1


class NuisanceMode(str, Enum):
    ORACLE = 'oracle'
    FITTED = 'fitted'
    MISSPECIFIED_G = 'misspecified-g'
    MISSPECIFIED_Q = 'misspecified-q'


def initial_fits(mode: NuisanceMode, data: Dataset, true_fits: NuisanceFits) -> NuisanceFits:
    """
    Initial nuisance fits for a replication.

    Args:
        mode: oracle (truth), fitted (main-terms logistic), or a fitted run
            with one factor replaced by its intercept-only fit
        data: Drawn dataset
        true_fits: Truth at the drawn covariates (carries the bounds)

    Returns:
        NuisanceFits
    """
    mode = NuisanceMode(mode)
    if mode == NuisanceMode.ORACLE:
        return true_fits
    fits = fit_main_terms(data, true_fits.q_bounds, true_fits.g_bounds)
    if mode == NuisanceMode.MISSPECIFIED_G:
        return intercept_only_g(data, fits)
    if mode == NuisanceMode.MISSPECIFIED_Q:
        return intercept_only_q(data, fits)
    return fits


@dataclass
class ReplicationOutcome:
    """Per-replication estimates, intervals and solver diagnostics."""

    estimates: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    iterations: int
    micro_steps: int
    solved: bool
    covariate_sup: float
    within_bounds: bool


def run_replication(dgp: DgpSpec, spec: ParameterSpec, n: int,
                    seed: np.random.SeedSequence, mode: NuisanceMode,
                    config: TargetingConfig, alpha: float = 0.05,
                    solver: str = 'iterative', q_bounds: Bounds = (1e-5, 1 - 1e-5),
                    g_bounds: Bounds = (0.01, 0.99)) -> Optional[ReplicationOutcome]:
    """
    Run one replication; returns None when it fails.
    """
    try:
        data, true_fits = draw(dgp, n, seed, q_bounds, g_bounds)
        start = initial_fits(mode, data, true_fits)
        if solver == 'one-step':
            state = one_step_ulfm(start, spec, data, config)
        else:
            state = iterate(start, spec, data, config)
        report = build_report(state, spec, data, alpha, config.variant.value)
    except TmleError as e:
        logger.warning("Replication %s failed: %s", seed.spawn_key, e)
        return None

    return ReplicationOutcome(
        estimates=report.estimates,
        ci_lower=report.ci_lower,
        ci_upper=report.ci_upper,
        iterations=state.iteration,
        micro_steps=state.micro_steps,
        solved=state.converged,
        covariate_sup=max(state.covariate_sup_trace, default=0.0),
        within_bounds=state.fits.within_bounds(),
    )


def _floats(values) -> List[Optional[float]]:
    return [None if not np.isfinite(v) else float(v) for v in np.atleast_1d(values)]


@dataclass
class ExperimentResult:
    """Aggregate Monte Carlo summary for one experiment cell."""

    dgp: str
    parameter: str
    component_names: List[str]
    n: int
    reps: int
    nuisance_mode: str
    variant: str
    solver: str
    truth: np.ndarray
    truth_std_error: np.ndarray
    mean_estimate: np.ndarray
    bias: np.ndarray
    empirical_variance: np.ndarray
    cr_bound_variance: np.ndarray
    coverage: np.ndarray
    mean_ci_width: np.ndarray
    mean_iterations: float
    mean_micro_steps: float
    solved_rate: float
    max_covariate_sup: float
    bounds_violations: int
    failures: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dgp': self.dgp,
            'parameter': self.parameter,
            'component_names': list(self.component_names),
            'n': int(self.n),
            'reps': int(self.reps),
            'nuisance_mode': self.nuisance_mode,
            'variant': self.variant,
            'solver': self.solver,
            'truth': _floats(self.truth),
            'truth_std_error': _floats(self.truth_std_error),
            'mean_estimate': _floats(self.mean_estimate),
            'bias': _floats(self.bias),
            'empirical_variance': _floats(self.empirical_variance),
            'cr_bound_variance': _floats(self.cr_bound_variance),
            'coverage': _floats(self.coverage),
            'mean_ci_width': _floats(self.mean_ci_width),
            'mean_iterations': _floats(self.mean_iterations)[0],
            'mean_micro_steps': _floats(self.mean_micro_steps)[0],
            'solved_rate': _floats(self.solved_rate)[0],
            'max_covariate_sup': _floats(self.max_covariate_sup)[0],
            'bounds_violations': int(self.bounds_violations),
            'failures': int(self.failures),
        }


def run_experiment(dgp: DgpSpec, spec: ParameterSpec, n: int, reps: int,
                   nuisance_mode: NuisanceMode = NuisanceMode.ORACLE,
                   variant: Variant = Variant.STANDARD, seed: int = 0,
                   config: Optional[TargetingConfig] = None, alpha: float = 0.05,
                   solver: str = 'iterative', truth_mc_n: int = 1_000_000,
                   threads: int = 1, progress: bool = False,
                   q_bounds: Bounds = (1e-5, 1 - 1e-5),
                   g_bounds: Bounds = (0.01, 0.99)) -> ExperimentResult:
    """
    Run ``reps`` replications and aggregate bias, variance and coverage.

    Replication seeds are spawned from the master seed, and aggregation runs
    over replication index, so results do not depend on ``threads``.

    Args:
        dgp: Data-generating process
        spec: Parameter definition
        n: Sample size per replication
        reps: Number of replications
        nuisance_mode: How initial fits are built
        variant: Targeting variant
        seed: Master seed
        config: Targeting settings (variant overridden by ``variant``)
        alpha: Significance level of the intervals
        solver: 'iterative' or 'one-step'
        truth_mc_n: Monte Carlo size for the true value and variance bound
        threads: Worker threads
        progress: Show a tqdm progress bar
        q_bounds: Bounds for Q (initial and targeted)
        g_bounds: Bounds for g

    Returns:
        ExperimentResult
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    if solver not in ('iterative', 'one-step'):
        raise ValueError(f"Unknown solver: {solver}")
    mode = NuisanceMode(nuisance_mode)
    variant = Variant(variant)
    base = config or TargetingConfig()
    config = TargetingConfig(
        variant=variant, max_iter=base.max_iter, micro_step=base.micro_step,
        tol_scale=base.tol_scale, max_micro_steps=base.max_micro_steps,
        epsilon_floor=base.epsilon_floor, solver=base.solver,
    )

    master = np.random.SeedSequence(seed)
    rep_seeds = np.random.SeedSequence(master.entropy, spawn_key=(_REPLICATION_STREAM,)).spawn(reps)
    truth_seed = np.random.SeedSequence(master.entropy, spawn_key=(_TRUTH_STREAM,))

    jobs = (delayed(run_replication)(dgp, spec, n, s, mode, config, alpha, solver, q_bounds, g_bounds)
            for s in tqdm(rep_seeds, desc=f"{dgp.name}/{spec.name}/n={n}", disable=not progress))
    outcomes = Parallel(n_jobs=threads, backend='threading')(jobs)

    done = [o for o in outcomes if o is not None]
    failures = reps - len(done)
    d = spec.d

    psi = truth(dgp, spec, truth_mc_n, truth_seed)
    bound = efficiency_bound(dgp, spec, truth_mc_n, truth_seed) / n

    if done:
        est = np.vstack([o.estimates for o in done])
        lower = np.vstack([o.ci_lower for o in done])
        upper = np.vstack([o.ci_upper for o in done])
        mean_estimate = est.mean(axis=0)
        empirical_variance = est.var(axis=0, ddof=1) if len(done) > 1 else np.full(d, np.nan)
        coverage = ((lower <= psi.value) & (psi.value <= upper)).mean(axis=0)
        mean_ci_width = (upper - lower).mean(axis=0)
        mean_iterations = float(np.mean([o.iterations for o in done]))
        mean_micro_steps = float(np.mean([o.micro_steps for o in done]))
        solved_rate = float(np.mean([o.solved for o in done]))
        max_sup = float(max(o.covariate_sup for o in done))
        violations = sum(not o.within_bounds for o in done)
    else:
        mean_estimate = empirical_variance = coverage = mean_ci_width = np.full(d, np.nan)
        mean_iterations = mean_micro_steps = solved_rate = max_sup = float('nan')
        violations = 0

    result = ExperimentResult(
        dgp=dgp.name,
        parameter=spec.name,
        component_names=list(spec.component_names),
        n=n,
        reps=reps,
        nuisance_mode=mode.value,
        variant=variant.value,
        solver=solver,
        truth=psi.value,
        truth_std_error=psi.std_error,
        mean_estimate=mean_estimate,
        bias=mean_estimate - psi.value,
        empirical_variance=empirical_variance,
        cr_bound_variance=bound,
        coverage=coverage,
        mean_ci_width=mean_ci_width,
        mean_iterations=mean_iterations,
        mean_micro_steps=mean_micro_steps,
        solved_rate=solved_rate,
        max_covariate_sup=max_sup,
        bounds_violations=violations,
        failures=failures,
    )
    logger.info("experiment %s/%s n=%d reps=%d: coverage=%s failures=%d",
                dgp.name, spec.name, n, reps, np.round(coverage, 3), failures)
    return result
