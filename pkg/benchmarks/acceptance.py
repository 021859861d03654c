"""
Acceptance experiments for clfm-TMLE.

Long-running Monte Carlo checks of solving, coverage, efficiency and solver
cost. Run from the project root:  python -m benchmarks.acceptance
"""

import json
import time
from pathlib import Path
from typing import Dict, List

import numpy as np

from src.estimation.nuisance import intercept_only_q
from src.estimation.params import eic_matrix, get_parameter, plug_in
from src.estimation.targeting import StopReason, TargetingConfig, Variant, iterate, one_step_ulfm
from src.simulation.dgp import draw, get_dgp
from src.simulation.experiment import NuisanceMode, run_experiment
from .reference_tmle import classic_ate_tmle

SEED = 20240501


class AcceptanceBenchmark:
    """Runs the acceptance experiments and collects their summaries."""

    def __init__(self, seed: int = SEED, truth_mc_n: int = 1_000_000, threads: int = 1):
        self.seed = seed
        self.truth_mc_n = truth_mc_n
        self.threads = threads
        self.results = {}

    def _seeds(self, count: int) -> List[np.random.SeedSequence]:
        return np.random.SeedSequence(self.seed).spawn(count)

    def eic_solving(self, reps: int = 100, n: int = 1000) -> Dict:
        """
        Oracle fits on DGP-A, tsm-vector: every run solved, loss non-increasing.

        Args:
            reps: Number of datasets
            n: Sample size

        Returns:
            Dictionary with solved count, loss violations and timing
        """
        print("EIC solving (DGP-A, tsm-vector, oracle)...")
        spec = get_parameter('tsm-vector')
        solved = violations = 0
        times = []
        for seed in self._seeds(reps):
            data, fits = draw(get_dgp('dgp-a'), n, seed)
            start = time.time()
            state = iterate(fits, spec, data)
            times.append(time.time() - start)
            eic = eic_matrix(spec, state.fits, data)
            if (state.stop_reason == StopReason.SOLVED
                    and np.all(np.abs(eic.mean(axis=0)) < eic.std(axis=0, ddof=1) / n)):
                solved += 1
            violations += int(np.sum(np.diff(state.loss_trace) > 1e-10))

        result = {'reps': reps, 'solved': solved, 'loss_violations': violations,
                  'max_seconds': max(times), 'mean_seconds': float(np.mean(times))}
        print(f"  Solved: {solved}/{reps}, loss violations: {violations}, "
              f"max time: {result['max_seconds']:.3f}s")
        self.results['eic_solving'] = result
        return result

    def classic_equivalence(self, reps: int = 50, n: int = 500) -> Dict:
        """One-component ATE against the classic unnormalised TMLE."""
        print("Classic TMLE equivalence (DGP-A, ate)...")
        spec = get_parameter('ate')
        differences = []
        for i, seed in enumerate(self._seeds(reps)):
            data, fits = draw(get_dgp('dgp-a'), n, seed)
            start = intercept_only_q(data, fits) if i % 2 else fits
            ours = plug_in(spec, iterate(start, spec, data).fits, data)[0]
            theirs = classic_ate_tmle(data.outcome, data.treatment, start.qbar0, start.qbar1,
                                      start.g1, start.q_bounds)['estimate']
            differences.append(abs(ours - theirs))

        result = {'reps': reps, 'max_abs_difference': float(max(differences))}
        print(f"  Max |difference|: {result['max_abs_difference']:.3g}")
        self.results['classic_equivalence'] = result
        return result

    def coverage(self, n: int = 1000, reps: int = 500) -> Dict:
        """Per-component Wald coverage with oracle fits."""
        print(f"Coverage (DGP-A, n={n}, reps={reps})...")
        result = {}
        for param in ('tsm-vector', 'ate'):
            start = time.time()
            experiment = run_experiment(get_dgp('dgp-a'), get_parameter(param), n, reps,
                                        seed=self.seed, truth_mc_n=self.truth_mc_n,
                                        threads=self.threads)
            for name, value in zip(experiment.component_names, experiment.coverage):
                result[name] = float(value)
                print(f"  {name}: {value:.3f}")
            result[f"{param}_seconds"] = time.time() - start
        self.results['coverage'] = result
        return result

    def efficiency(self, n: int = 5000, reps: int = 500) -> Dict:
        """Empirical variance relative to the Monte Carlo variance bound."""
        print(f"Efficiency (DGP-A, n={n}, reps={reps})...")
        experiment = run_experiment(get_dgp('dgp-a'), get_parameter('tsm-vector'), n, reps,
                                    seed=self.seed, truth_mc_n=self.truth_mc_n,
                                    threads=self.threads)
        ratio = experiment.empirical_variance / experiment.cr_bound_variance
        result = {name: float(r) for name, r in zip(experiment.component_names, ratio)}
        for name, r in result.items():
            print(f"  {name}: variance / bound = {r:.3f}")
        self.results['efficiency'] = result
        return result

    def solver_cost(self, reps: int = 20, n: int = 1000) -> Dict:
        """Regression fits of the iterative solver against one-step micro-steps."""
        print("Iterative vs one-step (DGP-A, ate)...")
        spec = get_parameter('ate')
        config = TargetingConfig(tol_scale=0.01, micro_step=1e-5)
        rows = []
        for seed in self._seeds(reps):
            data, fits = draw(get_dgp('dgp-a'), n, seed)
            start = intercept_only_q(data, fits)
            iterative = iterate(start, spec, data, config)
            stepped = one_step_ulfm(start, spec, data, config)
            rows.append({
                'fits': iterative.iteration,
                'micro_steps': stepped.micro_steps,
                'difference': abs(plug_in(spec, iterative.fits, data)[0]
                                  - plug_in(spec, stepped.fits, data)[0]),
            })

        result = {
            'max_fits': max(r['fits'] for r in rows),
            'min_micro_steps': min(r['micro_steps'] for r in rows),
            'max_abs_difference': float(max(r['difference'] for r in rows)),
        }
        print(f"  Max fits: {result['max_fits']}, min micro-steps: {result['min_micro_steps']}, "
              f"max |difference|: {result['max_abs_difference']:.3g}")
        self.results['solver_cost'] = result
        return result

    def weighted_variant(self, reps: int = 100, n: int = 1000) -> Dict:
        """Covariate sup-norm and solve rate of both variants on DGP-B."""
        print("Weighted vs standard (DGP-B, tsm1)...")
        result = {}
        for variant in Variant:
            experiment = run_experiment(get_dgp('dgp-b'), get_parameter('tsm1'), n, reps,
                                        variant=variant, seed=self.seed,
                                        truth_mc_n=self.truth_mc_n, threads=self.threads)
            result[variant.value] = {
                'max_covariate_sup': experiment.max_covariate_sup,
                'solved_rate': experiment.solved_rate,
                'coverage': float(experiment.coverage[0]),
            }
            print(f"  {variant.value}: sup={experiment.max_covariate_sup:.3g}, "
                  f"solved={experiment.solved_rate:.2f}")
        self.results['weighted_variant'] = result
        return result

    def double_robustness(self, sizes: List[int] = (250, 1000, 4000), reps: int = 200) -> Dict:
        """Bias with one nuisance factor misspecified, across sample sizes."""
        print("Double robustness (DGP-A, ate)...")
        result = {}
        for mode in (NuisanceMode.FITTED, NuisanceMode.MISSPECIFIED_G, NuisanceMode.MISSPECIFIED_Q):
            result[mode.value] = []
            for n in sizes:
                experiment = run_experiment(get_dgp('dgp-a'), get_parameter('ate'), n, reps,
                                            nuisance_mode=mode, seed=self.seed,
                                            truth_mc_n=self.truth_mc_n, threads=self.threads)
                result[mode.value].append({'n': n, 'bias': float(experiment.bias[0]),
                                           'coverage': float(experiment.coverage[0])})
                print(f"  {mode.value} n={n}: bias={experiment.bias[0]:+.4f}")
        self.results['double_robustness'] = result
        return result

    def save_results(self, filepath: str):
        """
        Save results to JSON file.

        Args:
            filepath: Path to save results
        """
        with open(filepath, 'w') as f:
            json.dump(self.results, f, indent=2, sort_keys=True)
        print(f"Results saved to: {filepath}")


def main():
    """Run acceptance experiments."""
    benchmark = AcceptanceBenchmark()

    benchmark.eic_solving()
    benchmark.classic_equivalence()
    benchmark.coverage()
    benchmark.efficiency()
    benchmark.solver_cost()
    benchmark.weighted_variant()
    benchmark.double_robustness()

    Path("benchmarks/results").mkdir(parents=True, exist_ok=True)
    benchmark.save_results("benchmarks/results/acceptance_results.json")

    print("\n" + "=" * 60)
    print("Acceptance run complete!")


if __name__ == '__main__':
    main()
