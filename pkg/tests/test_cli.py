"""Tests for the command line interface"""

import csv
import json

import pytest
from click.testing import CliRunner

from skewsim.cli import EXIT_DOMAIN, EXIT_USAGE, barrier_grid, main
from skewsim.kernels.density import SkewParams
from skewsim.utils.errors import DomainError


@pytest.fixture
def runner():
    return CliRunner()


def _read_json(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def _read_csv(path):
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.reader(line for line in f if not line.startswith('#')))


def _comment_blocks(text):
    blocks = {}
    for line in text.splitlines():
        if line.startswith('# '):
            key, _, value = line[2:].partition(': ')
            blocks[key] = json.loads(value)
    return blocks


def test_banner_without_command(runner):
    result = runner.invoke(main, [])
    assert result.exit_code == 0
    assert 'density' in result.output


def test_version(runner):
    result = runner.invoke(main, ['--version'])
    assert result.exit_code == 0
    assert '0.1.0' in result.output


class TestDensity:
    def test_gaussian_peak_csv(self, runner, tmp_path):
        out = tmp_path / 'density.csv'
        result = runner.invoke(main, ['density', '--beta1', '0', '--beta2', '0', '--x', '0',
                                      '--ymin', '-1', '--ymax', '1', '--ysteps', '3',
                                      '--out', str(out)])
        assert result.exit_code == 0, result.output
        rows = _read_csv(out)
        assert rows[0] == ['y', 'density', 'error_bound', 'terms']
        # z1 = 0 is replaced by rows at -eps and +eps
        assert len(rows) == 5
        assert float(rows[2][1]) == pytest.approx(0.3989422804, abs=1e-9)

    def test_barrier_rows_show_the_jump(self, runner, tmp_path):
        out = tmp_path / 'density.json'
        result = runner.invoke(main, ['density', '--format', 'json', '--ysteps', '11',
                                      '--out', str(out)])
        assert result.exit_code == 0, result.output
        data = _read_json(out)
        by_y = {row['y']: row['density'] for row in data['data']}
        assert by_y[1e-9] / by_y[-1e-9] == pytest.approx(3.0, rel=1e-6)
        assert data['config']['params']['beta1'] == 0.5
        assert data['stats']['vbar'] == pytest.approx(3.0)

    def test_drift_density(self, runner, tmp_path):
        out = tmp_path / 'drift.json'
        result = runner.invoke(main, ['density', '--beta1', '0.4', '--beta2', '0.2', '--mu', '1',
                                      '--ysteps', '5', '--format', 'json', '--out', str(out)])
        assert result.exit_code == 0, result.output
        stats = _read_json(out)['stats']
        assert stats['rigorous_bound'] is False
        assert 'vbar' not in stats

    def test_drift_csv_flags_heuristic_bound(self, runner, tmp_path):
        out = tmp_path / 'drift.csv'
        result = runner.invoke(main, ['density', '--beta1', '0.4', '--beta2', '0.2', '--mu', '1',
                                      '--ysteps', '5', '--out', str(out)])
        assert result.exit_code == 0, result.output
        stats = _comment_blocks(out.read_text(encoding='utf-8'))['stats']
        assert stats['exact_formula'] is False
        assert stats['rigorous_bound'] is False

    def test_unsupported_regime_exit_code(self, runner):
        result = runner.invoke(main, ['density', '--beta1', '-0.4', '--beta2', '0.2', '--mu', '1'])
        assert result.exit_code == EXIT_DOMAIN
        assert '"UnsupportedRegimeError"' in result.output

    def test_divergent_params_exit_code(self, runner):
        result = runner.invoke(main, ['density', '--beta1', '1', '--beta2', '-1'])
        assert result.exit_code == EXIT_DOMAIN
        assert '"DivergentBoundError"' in result.output

    def test_malformed_config_exit_code(self, runner, tmp_path):
        cfg = tmp_path / 'bad.yaml'
        cfg.write_text('model: [unclosed\n', encoding='utf-8')
        result = runner.invoke(main, ['density', '--config', str(cfg)])
        assert result.exit_code == EXIT_USAGE
        assert '"ConfigurationError"' in result.output

    def test_out_of_range_config_value_exit_code(self, runner, tmp_path):
        cfg = tmp_path / 'range.yaml'
        cfg.write_text('model:\n  beta1: 2.0\n', encoding='utf-8')
        result = runner.invoke(main, ['density', '--config', str(cfg)])
        assert result.exit_code == EXIT_DOMAIN
        assert '"DomainError"' in result.output

    def test_config_file(self, runner, tmp_path):
        cfg = tmp_path / 'cfg.yaml'
        cfg.write_text('model:\n  beta1: 0.0\n  beta2: 0.0\n', encoding='utf-8')
        out = tmp_path / 'density.json'
        result = runner.invoke(main, ['density', '--config', str(cfg), '--format', 'json',
                                      '--ysteps', '3', '--out', str(out)])
        assert result.exit_code == 0, result.output
        assert _read_json(out)['stats']['exact_formula'] is True


class TestSample:
    def test_reproducible_and_rerunnable(self, runner, tmp_path):
        first, second, third = (tmp_path / f'{name}.json' for name in ('a', 'b', 'c'))
        args = ['sample', '--n', '30', '--seed', '5', '--format', 'json']
        assert runner.invoke(main, args + ['--out', str(first)]).exit_code == 0
        assert runner.invoke(main, args + ['--out', str(second)]).exit_code == 0
        result = runner.invoke(main, ['sample', '--from-config', str(first), '--out', str(third)])
        assert result.exit_code == 0, result.output

        a, b, c = _read_json(first), _read_json(second), _read_json(third)
        assert a['data'] == b['data'] == c['data']
        assert len(a['data']) == 30
        assert a['stats']['seed'] == 5
        assert a['stats']['exact_fraction'] == 1.0
        assert a['stats']['delta_nmax'] == pytest.approx(0.25 ** 11)

    def test_csv_column(self, runner, tmp_path):
        out = tmp_path / 'samples.csv'
        result = runner.invoke(main, ['sample', '--n', '5', '--shards', '2', '--out', str(out)])
        assert result.exit_code == 0, result.output
        rows = _read_csv(out)
        assert rows[0] == ['sample']
        assert len(rows) == 6

    def test_csv_carries_stats_and_config(self, runner, tmp_path):
        out = tmp_path / 'samples.csv'
        result = runner.invoke(main, ['sample', '--n', '20', '--seed', '5', '--out', str(out)])
        assert result.exit_code == 0, result.output
        blocks = _comment_blocks(out.read_text(encoding='utf-8'))
        assert blocks['config']['seed'] == 5
        stats = blocks['stats']
        assert stats['n_samples'] == 20
        for key in ('mean_decision_index', 'n_rej', 'exact_fraction', 'acceptance_rate', 'seed'):
            assert key in stats
        assert len(_read_csv(out)) == 21

    def test_drift_is_rejected(self, runner):
        result = runner.invoke(main, ['sample', '--mu', '0.5', '--n', '3'])
        assert result.exit_code == EXIT_DOMAIN
        assert '"error"' in result.output

    def test_wrong_embedded_command(self, runner, tmp_path):
        out = tmp_path / 'bounds.json'
        runner.invoke(main, ['bounds', '--format', 'json', '--out', str(out)])
        result = runner.invoke(main, ['sample', '--from-config', str(out)])
        assert result.exit_code == EXIT_USAGE


class TestPathAndBounds:
    def test_path(self, runner, tmp_path):
        out = tmp_path / 'path.csv'
        result = runner.invoke(main, ['path', '--x0', '0.5', '--dt', '0.1', '--horizon', '1',
                                      '--seed', '3', '--out', str(out)])
        assert result.exit_code == 0, result.output
        rows = _read_csv(out)
        assert rows[0] == ['t', 'x']
        assert len(rows) == 12
        assert float(rows[1][1]) == 0.5

    def test_bounds_values(self, runner, tmp_path):
        out = tmp_path / 'bounds.json'
        result = runner.invoke(main, ['bounds', '--beta1', '0.3', '--beta2', '-0.7',
                                      '--format', 'json', '--out', str(out)])
        assert result.exit_code == 0, result.output
        data = _read_json(out)
        assert data['stats']['vbar'] == pytest.approx(2.7975, rel=1e-3)
        assert data['data'][10]['delta'] == pytest.approx(3.5e-8, rel=1e-2)
        assert len(data['data']) == 11


class TestValidate:
    def test_transmission_suite(self, runner, tmp_path):
        out = tmp_path / 'report.json'
        result = runner.invoke(main, ['validate', '--suite', 'transmission', '--out', str(out)])
        assert result.exit_code == 0, result.output
        data = _read_json(out)
        assert data['stats']['passed'] is True
        assert data['data']['checks'][0]['name'] == 'transmission'

    def test_unknown_suite(self, runner):
        result = runner.invoke(main, ['validate', '--suite', 'nope'])
        assert result.exit_code == 2

    def test_ks_suite_with_drift(self, runner):
        result = runner.invoke(main, ['validate', '--suite', 'ks', '--mu', '1',
                                      '--beta1', '0.4', '--beta2', '0.2'])
        assert result.exit_code == EXIT_DOMAIN


def test_barrier_grid():
    grid = barrier_grid(-1.0, 2.0, 4, SkewParams(), 1e-9)
    assert list(grid) == [-1.0, -1e-9, 1e-9, 1.0 - 1e-9, 1.0 + 1e-9, 2.0]
    with pytest.raises(DomainError):
        barrier_grid(1.0, 0.0, 4, SkewParams(), 1e-9)
