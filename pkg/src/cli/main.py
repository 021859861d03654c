"""
Command-line interface for clfm-TMLE.
"""

import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click

from ..config import load_config, setup_logging
from ..data.dataset_loader import CsvSchema, DatasetLoader
from ..data.models import Bounds, check_bounds
from ..estimation.inference import build_report
from ..estimation.nuisance import fit_main_terms
from ..estimation.params import PARAMETERS, get_parameter
from ..estimation.targeting import TargetingConfig, Variant, iterate, one_step_ulfm
from ..exceptions import ConfigError, NonConvergenceError, TmleError, ValidationError
from ..simulation.dgp import DGPS, get_dgp
from ..simulation.experiment import NuisanceMode, run_experiment

logger = logging.getLogger(__name__)

SOLVERS = ('iterative', 'one-step')

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_PARTIAL_FAILURE = 3


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def dump_json(payload: Any, indent: Optional[int] = 2) -> str:
    """Serialise with sorted keys; floats use the shortest round-trip repr."""
    return json.dumps(payload, indent=indent, sort_keys=True)


def _check_bounds(bounds, name: str) -> Bounds:
    try:
        return check_bounds(bounds, name)
    except ValidationError as e:
        raise ConfigError(str(e))


@dataclass(frozen=True)
class EstimateCommandConfig:
    """
    Settings of one ``estimate`` run.

    Attributes:
        input_path: CSV file to analyse
        schema: Column mapping
        param: Parameter name
        variant: standard or weighted targeting
        alpha: Significance level of the intervals
        q_bounds: Bounds for Q predictions
        g_bounds: Bounds for g predictions
        tol_scale: Multiplier on the sd/n stopping threshold
        max_iter: Maximum number of logistic fluctuations
        solver: iterative or one-step
        output: Output path; None writes to stdout
        timestamp: Whether to stamp the report
    """

    input_path: str
    schema: CsvSchema = field(default_factory=CsvSchema)
    param: str = 'ate'
    variant: Variant = Variant.STANDARD
    alpha: float = 0.05
    q_bounds: Bounds = (1e-5, 1 - 1e-5)
    g_bounds: Bounds = (0.01, 0.99)
    tol_scale: float = 1.0
    max_iter: int = 100
    solver: str = 'iterative'
    output: Optional[str] = None
    timestamp: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, 'variant', Variant(self.variant))
        except ValueError:
            raise ConfigError(f"Unknown variant: {self.variant}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, 'q_bounds', _check_bounds(self.q_bounds, 'q_bounds'))
        object.__setattr__(self, 'g_bounds', _check_bounds(self.g_bounds, 'g_bounds'))
        if not self.tol_scale > 0:
            raise ConfigError("tol_scale must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.solver not in SOLVERS:
            raise ConfigError(f"Unknown solver '{self.solver}'. Valid solvers: {', '.join(SOLVERS)}")

    @classmethod
    def from_config(cls, cfg: Dict[str, Any], input_path: str, **overrides) -> 'EstimateCommandConfig':
        """Defaults from the config file; overrides that are None are ignored."""
        bounds = cfg.get('bounds', {}) or {}
        values = dict(
            variant=(cfg.get('targeting', {}) or {}).get('variant', Variant.STANDARD),
            alpha=float((cfg.get('inference', {}) or {}).get('alpha', 0.05)),
            q_bounds=tuple(bounds.get('q_bounds', (1e-5, 1 - 1e-5))),
            g_bounds=tuple(bounds.get('g_bounds', (0.01, 0.99))),
            tol_scale=float((cfg.get('targeting', {}) or {}).get('tol_scale', 1.0)),
            max_iter=int((cfg.get('targeting', {}) or {}).get('max_iter', 100)),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(input_path=input_path, **values)


def cmd_estimate(config: EstimateCommandConfig,
                 cfg: Optional[Dict[str, Any]] = None) -> Tuple[int, Dict[str, Any]]:
    """
    Load a CSV, target the parameter and build the JSON report.

    Uses the nuisance columns when present, otherwise main-terms logistic
    fits. Input problems raise (TmleError, ValueError, FileNotFoundError).

    Args:
        config: Command settings
        cfg: Full configuration (solver and targeting defaults)

    Returns:
        Tuple (exit code, report payload); exit code 2 when not solved
    """
    cfg = cfg if cfg is not None else load_config()
    spec = get_parameter(config.param)
    data, fits = DatasetLoader.load_csv(config.input_path, config.schema,
                                        config.q_bounds, config.g_bounds)
    source = 'provided'
    if fits is None:
        fits = fit_main_terms(data, config.q_bounds, config.g_bounds)
        source = 'fitted'

    targeting = TargetingConfig.from_config(cfg, variant=config.variant,
                                            max_iter=config.max_iter,
                                            tol_scale=config.tol_scale)
    if config.solver == 'one-step':
        try:
            state = one_step_ulfm(fits, spec, data, targeting)
        except NonConvergenceError as e:
            logger.warning("%s", e)
            state = e.best
    else:
        state = iterate(fits, spec, data, targeting)

    report = build_report(state, spec, data, config.alpha, config.variant.value)
    payload = report.to_dict()
    payload.update({
        'trace': state.trace_dict(),
        'solver': config.solver,
        'nuisance_source': source,
        'clamped': int(fits.clamped),
        'q_bounds': list(config.q_bounds),
        'g_bounds': list(config.g_bounds),
        'outcome_scale': data.outcome_scale.to_dict(),
        'timestamp': _timestamp() if config.timestamp else None,
    })
    return (EXIT_OK if state.converged else EXIT_NOT_CONVERGED), payload


@dataclass(frozen=True)
class SimulateGridConfig:
    """
    Cartesian grid of experiment cells plus shared settings.

    Every cell uses the same master seed, so cells differing only in
    variant or solver see the same datasets.
    """

    dgps: Tuple[str, ...]
    params: Tuple[str, ...]
    sizes: Tuple[int, ...]
    nuisance_modes: Tuple[str, ...] = ('oracle',)
    variants: Tuple[str, ...] = ('standard',)
    solvers: Tuple[str, ...] = ('iterative',)
    reps: int = 100
    seed: int = 0
    alpha: float = 0.05
    threads: int = 1
    truth_mc_n: int = 1_000_000
    progress: bool = False
    timestamp: bool = True

    def __post_init__(self):
        for label, attr, valid in (
            ('DGP', 'dgps', tuple(DGPS)),
            ('parameter', 'params', tuple(PARAMETERS)),
            ('nuisance mode', 'nuisance_modes', tuple(m.value for m in NuisanceMode)),
            ('variant', 'variants', tuple(v.value for v in Variant)),
            ('solver', 'solvers', SOLVERS),
        ):
            values = tuple(v.lower() for v in getattr(self, attr))
            if not values:
                raise ConfigError(f"At least one {label} is required")
            unknown = [v for v in getattr(self, attr) if v.lower() not in valid]
            if unknown:
                raise ConfigError(
                    f"Unknown {label} '{unknown[0]}'. Valid names: {', '.join(valid)}"
                )
            object.__setattr__(self, attr, values)
        if not self.sizes or min(self.sizes) < 2:
            raise ConfigError("Sample sizes must be >= 2")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")

    def cells(self) -> List[Dict[str, Any]]:
        keys = ('dgp', 'param', 'n', 'nuisance_mode', 'variant', 'solver')
        grid = itertools.product(self.dgps, self.params, self.sizes,
                                 self.nuisance_modes, self.variants, self.solvers)
        return [dict(zip(keys, values)) for values in grid]


def cmd_simulate(grid: SimulateGridConfig,
                 cfg: Optional[Dict[str, Any]] = None) -> Tuple[int, List[Dict[str, Any]]]:
    """
    Run ``run_experiment`` for every grid cell, in cell order.

    Args:
        grid: Grid and shared settings
        cfg: Full configuration (targeting and solver defaults)

    Returns:
        Tuple (exit code, one record per cell); exit code 3 when any cell failed
    """
    cfg = cfg if cfg is not None else load_config()
    base = TargetingConfig.from_config(cfg)
    bounds = cfg.get('bounds', {}) or {}
    records = []

    for index, cell in enumerate(grid.cells()):
        record = {'cell': index, **cell, 'dgp_spec': get_dgp(cell['dgp']).to_dict(),
                  'reps': grid.reps, 'seed': grid.seed,
                  'status': 'ok', 'error': None, 'result': None,
                  'timestamp': _timestamp() if grid.timestamp else None}
        try:
            result = run_experiment(
                get_dgp(cell['dgp']), get_parameter(cell['param']), cell['n'], grid.reps,
                nuisance_mode=cell['nuisance_mode'], variant=cell['variant'],
                seed=grid.seed, config=base, alpha=grid.alpha, solver=cell['solver'],
                truth_mc_n=grid.truth_mc_n, threads=grid.threads, progress=grid.progress,
                q_bounds=tuple(bounds.get('q_bounds', (1e-5, 1 - 1e-5))),
                g_bounds=tuple(bounds.get('g_bounds', (0.01, 0.99))),
            )
            record['result'] = result.to_dict()
            if result.failures == grid.reps:
                record['status'] = 'failed'
                record['error'] = 'every replication failed'
        except (TmleError, ValueError) as e:
            logger.warning("Cell %d failed: %s", index, e)
            record['status'] = 'failed'
            record['error'] = str(e)
        records.append(record)

    failed = sum(r['status'] != 'ok' for r in records)
    return (EXIT_PARTIAL_FAILURE if failed else EXIT_OK), records


def _write(text: str, output: Optional[str]):
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        with open(output, 'w') as f:
            f.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.option('--config', '-c', 'config_path', default=None, help='YAML file overriding config/default.yaml')
@click.option('--log-level', default=None,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Override the configured log level')
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: Optional[str]):
    """Targeted maximum likelihood estimation on the canonical least favorable submodel."""
    try:
        cfg = load_config(config_path)
        if log_level:
            cfg.setdefault('logging', {})['level'] = log_level
        setup_logging(cfg)
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_INPUT_ERROR)
    ctx.obj = cfg


@cli.command()
@click.option('--input', '-i', 'input_path', required=True, help='CSV file with W columns, A and Y')
@click.option('--treatment-col', default='A', help='Treatment column name')
@click.option('--outcome-col', default='Y', help='Outcome column name')
@click.option('--covariates', default=None, help='Comma-separated covariate columns (default: all others)')
@click.option('--outcome-range', nargs=2, type=float, default=None, help='Declared outcome min and max')
@click.option('--param', default='ate', help=f"Parameter: {', '.join(PARAMETERS)}")
@click.option('--variant', type=click.Choice([v.value for v in Variant]), default=None,
              help='Targeting variant')
@click.option('--alpha', type=float, default=None, help='Significance level')
@click.option('--q-bounds', nargs=2, type=float, default=None, help='Bounds for Q predictions')
@click.option('--g-bounds', nargs=2, type=float, default=None, help='Bounds for g predictions')
@click.option('--tol-scale', type=float, default=None, help='Multiplier on the sd/n stopping threshold')
@click.option('--max-iter', type=int, default=None, help='Maximum logistic fluctuations')
@click.option('--solver', type=click.Choice(SOLVERS), default='iterative', help='Targeting solver')
@click.option('--output', '-o', default=None, help='Output file for the report (JSON); default stdout')
@click.option('--no-timestamp', is_flag=True, help='Omit the timestamp for byte-identical reruns')
@click.pass_context
def estimate(ctx: click.Context, input_path: str, treatment_col: str, outcome_col: str,
             covariates: Optional[str], outcome_range: Optional[Tuple[float, float]],
             param: str, variant: Optional[str], alpha: Optional[float],
             q_bounds: Optional[Tuple[float, float]], g_bounds: Optional[Tuple[float, float]],
             tol_scale: Optional[float], max_iter: Optional[int], solver: str,
             output: Optional[str], no_timestamp: bool):
    """Estimate a parameter from a CSV file."""
    cfg = ctx.obj
    started = time.time()
    try:
        schema = CsvSchema(
            treatment=treatment_col,
            outcome=outcome_col,
            covariates=tuple(c.strip() for c in covariates.split(',')) if covariates else None,
            outcome_range=tuple(outcome_range) if outcome_range else None,
        )
        config = EstimateCommandConfig.from_config(
            cfg, input_path, schema=schema, param=param, variant=variant, alpha=alpha,
            q_bounds=tuple(q_bounds) if q_bounds else None,
            g_bounds=tuple(g_bounds) if g_bounds else None,
            tol_scale=tol_scale, max_iter=max_iter, solver=solver,
            output=output, timestamp=not no_timestamp,
        )
        code, payload = cmd_estimate(config, cfg)
    except (TmleError, ValueError, FileNotFoundError) as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_INPUT_ERROR)

    _write(dump_json(payload) + '\n', output)

    if output:
        click.echo(f"Parameter: {payload['parameter']} ({payload['variant']}, {payload['solver']})")
        for j, name in enumerate(payload['component_names']):
            click.echo(f"  {name}: {payload['estimates'][j]:.6f} "
                       f"[{payload['ci_lower'][j]:.6f}, {payload['ci_upper'][j]:.6f}]")
        click.echo(f"  Stop reason: {payload['stop_reason']} after {payload['iterations']} fits"
                   f" / {payload['micro_steps']} micro-steps")
        click.echo(f"  Time: {time.time() - started:.2f} seconds")
        click.echo(f"Report saved to: {output}")

    if code == EXIT_NOT_CONVERGED:
        click.echo(f"Warning: targeting stopped with '{payload['stop_reason']}'", err=True)
    ctx.exit(code)


@cli.command()
@click.option('--dgp', 'dgps', multiple=True, help=f"DGP (repeatable): {', '.join(DGPS)}")
@click.option('--param', 'params', multiple=True, help=f"Parameter (repeatable): {', '.join(PARAMETERS)}")
@click.option('--n', 'sizes', multiple=True, type=int, help='Sample size (repeatable)')
@click.option('--nuisance-mode', 'nuisance_modes', multiple=True,
              help=f"Initial fits (repeatable): {', '.join(m.value for m in NuisanceMode)}")
@click.option('--variant', 'variants', multiple=True, help='Targeting variant (repeatable)')
@click.option('--solver', 'solvers', multiple=True, help='Solver (repeatable): iterative, one-step')
@click.option('--reps', type=int, default=None, help='Replications per cell')
@click.option('--seed', type=int, default=None, envvar='CLFM_TMLE_SEED', help='Master seed')
@click.option('--alpha', type=float, default=None, help='Significance level')
@click.option('--threads', type=int, default=None, help='Worker threads per cell')
@click.option('--truth-mc-n', type=int, default=None, help='Monte Carlo draws for the true value')
@click.option('--output', '-o', default=None, help='Output file (JSON lines); default stdout')
@click.option('--no-timestamp', is_flag=True, help='Omit timestamps for byte-identical reruns')
@click.option('--progress/--no-progress', default=False, help='Show a progress bar')
@click.pass_context
def simulate(ctx: click.Context, dgps: Sequence[str], params: Sequence[str], sizes: Sequence[int],
             nuisance_modes: Sequence[str], variants: Sequence[str], solvers: Sequence[str],
             reps: Optional[int], seed: Optional[int], alpha: Optional[float],
             threads: Optional[int], truth_mc_n: Optional[int], output: Optional[str],
             no_timestamp: bool, progress: bool):
    """Run Monte Carlo experiments over a grid of cells."""
    cfg = ctx.obj
    sim = cfg.get('simulation', {}) or {}
    try:
        grid = SimulateGridConfig(
            dgps=tuple(dgps) or (sim.get('dgp', 'dgp-a'),),
            params=tuple(params) or (sim.get('param', 'tsm-vector'),),
            sizes=tuple(sizes) or (int(sim.get('n', 1000)),),
            nuisance_modes=tuple(nuisance_modes) or (sim.get('nuisance_mode', 'oracle'),),
            variants=tuple(variants) or ((cfg.get('targeting', {}) or {}).get('variant', 'standard'),),
            solvers=tuple(solvers) or ('iterative',),
            reps=reps if reps is not None else int(sim.get('reps', 100)),
            seed=seed if seed is not None else int(sim.get('seed', 0)),
            alpha=alpha if alpha is not None else float((cfg.get('inference', {}) or {}).get('alpha', 0.05)),
            threads=threads if threads is not None else int(sim.get('threads', 1)),
            truth_mc_n=truth_mc_n if truth_mc_n is not None else int(sim.get('truth_mc_n', 1_000_000)),
            progress=progress,
            timestamp=not no_timestamp,
        )
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_INPUT_ERROR)

    code, records = cmd_simulate(grid, cfg)
    _write(''.join(dump_json(r, indent=None) + '\n' for r in records), output)

    if output:
        click.echo(f"{len(records)} cell(s) written to: {output}")
    failed = [r['cell'] for r in records if r['status'] != 'ok']
    if failed:
        click.echo(f"Warning: cell(s) {', '.join(map(str, failed))} failed", err=True)
    ctx.exit(code)


@cli.command()
@click.pass_context
def info(ctx: click.Context):
    """Display configuration, parameters and data-generating processes."""
    cfg = ctx.obj
    click.echo("clfm-TMLE Information")
    click.echo("=" * 60)

    bounds = cfg.get('bounds', {})
    targeting = cfg.get('targeting', {})
    click.echo("\nConfiguration:")
    click.echo(f"  Q bounds: {bounds.get('q_bounds')}")
    click.echo(f"  g bounds: {bounds.get('g_bounds')}")
    click.echo(f"  Variant: {targeting.get('variant')}")
    click.echo(f"  Max iterations: {targeting.get('max_iter')}")
    click.echo(f"  Tolerance scale: {targeting.get('tol_scale')}")
    click.echo(f"  Alpha: {cfg.get('inference', {}).get('alpha')}")

    click.echo("\nParameters:")
    for name in PARAMETERS:
        click.echo(f"  {name}: {', '.join(get_parameter(name).component_names)}")

    click.echo("\nData-generating processes:")
    for name, dgp in DGPS.items():
        click.echo(f"  {name}: p={dgp.p}, g0 truncated at {dgp.positivity_bound}")


if __name__ == '__main__':
    cli()
