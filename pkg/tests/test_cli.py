import json

import numpy as np
import pytest

from periodic_chain.cli import main
from periodic_chain.solver.runspec import parse_config
from periodic_chain.solver.spectral import series_solve
from periodic_chain.solver.writers import read_harmonics


@pytest.fixture
def config_file(tmp_path, toml_text):
    path = tmp_path / 'chain.toml'
    path.write_text(toml_text)
    return path


def test_gap_prints_the_radius(config_file, capsys):
    assert main(['gap', '--config', str(config_file)]) == 0
    out = capsys.readouterr().out
    assert 'delta*      = 1\n' in out
    assert 'nu0         = 0.5\n' in out


def test_missing_config_is_a_configuration_error(tmp_path):
    assert main(['solve']) == 2
    assert main(['solve', '--config', str(tmp_path / 'absent.toml')]) == 2


def test_resonant_forcing_exits_with_three(tmp_path, toml_text):
    path = tmp_path / 'resonant.toml'
    path.write_text(toml_text.replace('omega = 3.0', 'omega = 1.8'))
    assert main(['solve', '--config', str(path), '--out', str(tmp_path / 'out')]) == 3


def test_solve_writes_harmonics_and_report(config_file, toml_text, tmp_path):
    out = tmp_path / 'out'
    assert main(['solve', '--config', str(config_file), '--method', 'both', '--out', str(out)]) == 0
    spec = parse_config(toml_text)
    expected, _ = series_solve(spec.cfg)
    loaded = read_harmonics(out / 'solution.csv', spec.cfg.omega)
    np.testing.assert_array_equal(loaded.coefficients, expected.field.coefficients)
    report = json.loads((out / 'report.json').read_text())
    assert report['agreement'] < 1e-9
    assert set(report['reports']) == {'series', 'fixed'}
    assert 'wall_time' not in report['reports']['series']
    assert (out / 'solution-fixed.csv').exists()


def test_integrate_against_a_saved_solution(config_file, tmp_path):
    out = tmp_path / 'out'
    assert main(['solve', '--config', str(config_file), '--out', str(out)]) == 0
    assert main(['integrate', '--config', str(config_file), '--out', str(out),
                 '--solution', str(out / 'solution.csv'), '--periods', '3', '--steps', '256']) == 0
    result = json.loads((out / 'integrate.json').read_text())
    assert result['periods'] == 3
    assert result['energy_balance_residual'] < 1e-6
    strobe = (out / 'strobe.csv').read_text().splitlines()
    assert strobe[0] == 'k,t,distance'
    assert len(strobe) == 5


def test_integrate_rejects_a_mismatched_solution(config_file, toml_text, tmp_path):
    small = tmp_path / 'small.toml'
    small.write_text(toml_text.replace('N = 4', 'N = 2'))
    out = tmp_path / 'out'
    assert main(['solve', '--config', str(small), '--out', str(out)]) == 0
    assert main(['integrate', '--config', str(config_file), '--out', str(out),
                 '--solution', str(out / 'solution.csv'), '--periods', '1', '--steps', '256']) == 2


def test_diagnose_prints_the_report(config_file, tmp_path, capsys):
    assert main(['diagnose', '--config', str(config_file), '--out', str(tmp_path / 'out')]) == 0
    assert capsys.readouterr().out.startswith('work W_N')
    assert (tmp_path / 'out' / 'diagnostics.json').exists()


def test_greens_dump_layout(config_file, tmp_path):
    out = tmp_path / 'out'
    assert main(['greens-dump', '--config', str(config_file), '--out', str(out)]) == 0
    lines = (out / 'kernels.csv').read_text().splitlines()
    assert lines[0] == 'm,x,y,re,im'
    assert len(lines) == 1 + 17 * 9 * 9
    assert lines[1].startswith('0,-4,-4,')


@pytest.mark.slow
def test_sweep_is_independent_of_workers(tmp_path, toml_text):
    path = tmp_path / 'sweep.toml'
    path.write_text(toml_text + '\n[sweep]\nparameters = { "chain.nu" = [0.0, 0.05, 0.1], "chain.gamma" = [0.3, 0.5, 0.7] }\n')
    serial, parallel = tmp_path / 'serial', tmp_path / 'parallel'
    assert main(['sweep', '--config', str(path), '--workers', '1', '--out', str(serial)]) == 0
    assert main(['sweep', '--config', str(path), '--workers', '8', '--out', str(parallel)]) == 0
    assert (serial / 'sweep.json').read_bytes() == (parallel / 'sweep.json').read_bytes()
    assert len(json.loads((serial / 'sweep.json').read_text())['points']) == 9
    for index in range(9):
        point = f'point-{index:04d}'
        assert ((serial / point / 'solution.csv').read_bytes()
                == (parallel / point / 'solution.csv').read_bytes())


def test_sweep_reports_failing_points(tmp_path, toml_text):
    path = tmp_path / 'sweep.toml'
    path.write_text(toml_text + '\n[sweep]\nparameters = { "chain.omega" = [3.0, 1.8] }\n')
    out = tmp_path / 'out'
    assert main(['sweep', '--config', str(path), '--out', str(out)]) == 3
    points = json.loads((out / 'sweep.json').read_text())['points']
    assert [p['status'] for p in points] == ['success', 'error']


def test_selftest_passes(capsys):
    assert main(['selftest', '--seed', '7']) == 0
    assert 'FAIL' not in capsys.readouterr().out
