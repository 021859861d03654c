"""
Tests for the command-line interface.
"""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli.main import cli
from src.data.dataset_loader import DatasetLoader
from src.simulation.dgp import draw, get_dgp

REPORT_KEYS = {
    'parameter', 'component_names', 'estimates', 'estimates_scaled', 'eic_covariance',
    'std_errors', 'ci_lower', 'ci_upper', 'alpha', 'n', 'iterations', 'micro_steps',
    'stop_reason', 'converged', 'eic_means_final', 'variant', 'contrasts', 'trace',
    'solver', 'nuisance_source', 'clamped', 'q_bounds', 'g_bounds', 'outcome_scale',
    'timestamp',
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def oracle_csv(tmp_path):
    data, fits = draw(get_dgp('dgp-a'), 500, seed=21)
    path = tmp_path / 'oracle.csv'
    DatasetLoader.save_csv(data, path, fits=fits)
    return path


@pytest.fixture
def plain_csv(tmp_path):
    data, _ = draw(get_dgp('dgp-a'), 500, seed=22)
    path = tmp_path / 'plain.csv'
    DatasetLoader.save_csv(data, path)
    return path


def _estimate(runner, csv, output, *extra):
    args = ['estimate', '--input', str(csv), '--output', str(output), '--no-timestamp', *extra]
    result = runner.invoke(cli, args)
    report = json.loads(output.read_text()) if output.exists() else None
    return result, report


def test_estimate_with_provided_nuisances(runner, oracle_csv, tmp_path):
    """Oracle nuisance columns give a solved report."""
    result, report = _estimate(runner, oracle_csv, tmp_path / 'report.json', '--param', 'tsm-vector')

    assert result.exit_code == 0
    assert set(report) == REPORT_KEYS
    assert report['stop_reason'] == 'solved'
    assert report['nuisance_source'] == 'provided'
    assert report['timestamp'] is None
    assert len(report['trace']['loss']) == report['iterations'] + 1
    assert 'risk_difference' in report['contrasts']


def test_estimate_fits_nuisances_when_absent(runner, plain_csv, tmp_path):
    """Without nuisance columns main-terms fits are used."""
    result, report = _estimate(runner, plain_csv, tmp_path / 'report.json')

    assert result.exit_code == 0
    assert report['nuisance_source'] == 'fitted'
    assert report['parameter'] == 'ate'


def test_estimate_is_reproducible(runner, oracle_csv, tmp_path):
    """Repeated runs write byte-identical reports."""
    first = tmp_path / 'first.json'
    second = tmp_path / 'second.json'
    _estimate(runner, oracle_csv, first)
    _estimate(runner, oracle_csv, second)
    assert first.read_bytes() == second.read_bytes()


def test_estimate_solvers_agree(runner, oracle_csv, tmp_path):
    """One-step and iterative solvers give the same estimate."""
    _, iterative = _estimate(runner, oracle_csv, tmp_path / 'it.json', '--tol-scale', '0.01')
    result, stepped = _estimate(runner, oracle_csv, tmp_path / 'os.json',
                                '--tol-scale', '0.01', '--solver', 'one-step')

    assert result.exit_code == 0
    assert stepped['solver'] == 'one-step'
    assert stepped['estimates'][0] == pytest.approx(iterative['estimates'][0], abs=1e-4)
    assert iterative['micro_steps'] == 0
    assert stepped['iterations'] == 0
    assert stepped['micro_steps'] >= iterative['iterations']


def test_estimate_non_binary_treatment(runner, oracle_csv, tmp_path):
    """Invalid treatment values exit 1 naming the row."""
    frame = pd.read_csv(oracle_csv)
    frame.loc[3, 'A'] = 2
    bad = tmp_path / 'bad.csv'
    frame.to_csv(bad, index=False)

    result, report = _estimate(runner, bad, tmp_path / 'report.json')

    assert result.exit_code == 1
    assert 'row 3' in result.output
    assert report is None


def test_estimate_unknown_parameter(runner, oracle_csv, tmp_path):
    """Unknown parameter names exit 1 listing the valid ones."""
    result, _ = _estimate(runner, oracle_csv, tmp_path / 'report.json', '--param', 'att')
    assert result.exit_code == 1
    assert 'tsm-vector' in result.output


def test_estimate_missing_file(runner, tmp_path):
    """A missing input file is an input error."""
    result, _ = _estimate(runner, tmp_path / 'nope.csv', tmp_path / 'report.json')
    assert result.exit_code == 1


def test_estimate_not_converged_exit_code(runner, oracle_csv, tmp_path):
    """Stopping at the iteration cap exits 2 and still writes the report."""
    result, report = _estimate(runner, oracle_csv, tmp_path / 'report.json',
                               '--param', 'tsm-vector', '--max-iter', '1', '--tol-scale', '1e-12')
    assert result.exit_code == 2
    assert report['stop_reason'] == 'max_iter'
    assert report['converged'] is False


def _simulate(runner, output, *extra, env=None):
    args = ['simulate', '--dgp', 'dgp-a', '--param', 'ate', '--reps', '1',
            '--truth-mc-n', '100000', '--no-timestamp', '--output', str(output), *extra]
    result = runner.invoke(cli, args, env=env)
    records = [json.loads(line) for line in output.read_text().splitlines()] if output.exists() else []
    return result, records


def test_simulate_smoke(runner, tmp_path):
    """A one-replication grid writes one record per cell."""
    result, records = _simulate(runner, tmp_path / 'sim.jsonl', '--n', '200', '--seed', '3')

    assert result.exit_code == 0
    assert len(records) == 1
    record = records[0]
    assert record['cell'] == 0
    assert record['status'] == 'ok'
    assert record['seed'] == 3
    assert record['dgp_spec']['name'] == 'dgp-a'
    assert len(record['dgp_spec']['w_law']) == 2
    assert record['dgp_spec']['positivity_bound'] == 0.2
    for key in ('coverage', 'bias', 'empirical_variance', 'cr_bound_variance', 'truth'):
        assert key in record['result']


def test_simulate_is_reproducible(runner, tmp_path):
    """Reruns with the same seed produce identical bytes."""
    first, second = tmp_path / 'a.jsonl', tmp_path / 'b.jsonl'
    _simulate(runner, first, '--n', '200', '--n', '300', '--seed', '9')
    _simulate(runner, second, '--n', '200', '--n', '300', '--seed', '9')
    assert first.read_bytes() == second.read_bytes()


def test_simulate_seed_from_environment(runner, tmp_path):
    """CLFM_TMLE_SEED sets the default seed."""
    _, records = _simulate(runner, tmp_path / 'sim.jsonl', '--n', '200', env={'CLFM_TMLE_SEED': '7'})
    assert records[0]['seed'] == 7


def test_simulate_unknown_parameter(runner, tmp_path):
    """Invalid grid names exit 1 listing the valid ones."""
    result, records = _simulate(runner, tmp_path / 'sim.jsonl', '--param', 'att')
    assert result.exit_code == 1
    assert 'Valid names' in result.output
    assert records == []


def test_simulate_grid_names_ignore_case(runner, tmp_path):
    """Upper-case grid names run as their registered lower-case forms."""
    result, records = _simulate(runner, tmp_path / 'sim.jsonl', '--n', '200',
                                '--nuisance-mode', 'ORACLE', '--variant', 'Weighted',
                                '--solver', 'ITERATIVE', '--dgp', 'DGP-A')

    assert result.exit_code == 0
    assert [r['status'] for r in records] == ['ok', 'ok']
    assert {r['dgp'] for r in records} == {'dgp-a'}
    assert records[0]['nuisance_mode'] == 'oracle'
    assert records[0]['variant'] == 'weighted'
    assert records[0]['solver'] == 'iterative'


def test_simulate_partial_failure(runner, tmp_path):
    """A failing cell exits 3 with per-cell status."""
    result, records = _simulate(runner, tmp_path / 'sim.jsonl', '--n', '3', '--n', '200',
                                '--nuisance-mode', 'fitted', '--reps', '2')

    assert result.exit_code == 3
    assert [r['status'] for r in records] == ['failed', 'ok']
    assert records[0]['error']


def test_info(runner):
    """Info lists parameters and processes."""
    result = runner.invoke(cli, ['info'])
    assert result.exit_code == 0
    assert 'tsm-vector' in result.output
    assert 'dgp-b' in result.output


def test_missing_config_file(runner, tmp_path):
    """A named config file that does not exist exits 1."""
    result = runner.invoke(cli, ['--config', str(tmp_path / 'absent.yaml'), 'info'])
    assert result.exit_code == 1
