import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from wltransceiver.cli import main


def scenario(k=0.0, N=16, **extra):
    obj = {"T": 1.0, "grid": {"B_times_T": 0.625, "N": N},
           "source": {"power": 1.0, "k": k},
           "channel": {"type": "flat", "gain": 1.0},
           "noise": {"N0": 1.0, "interferers": [
               {"rolloff": 0.25, "EsN0_dB": 10, "rate_divisor": 1,
                "shift": 0.3}]},
           "power": {"EsN0_dB": 5}}
    obj.update(extra)
    return obj


@pytest.fixture
def write(tmp_path):
    def _write(obj, name='sc.json'):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)
    return _write


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_optimize_outputs(write, tmp_path, capsys):
    out = tmp_path / 'out'
    assert main(['optimize', write(scenario()), '--out-dir', str(out),
                 '--matrix-mse']) == 0
    sol = json.loads((out / 'solution.json').read_text())
    assert sol['mse_form_residual'] <= 1e-10
    assert abs(sol['power_residual']) <= 1e-9
    assert sol['grid']['L'] == 1
    header, rows = read_csv(out / 'spectra.csv')
    assert header == ['xi_hz', 'S_sq', 'W1_sq', 'W2_sq', 'interference_psd']
    assert np.all(np.diff(rows[:, 0]) > 0)
    assert np.all(rows[:, 3] <= 1e-20)  # proper source: no conjugate branch
    man = json.loads((out / 'manifest.json').read_text())
    assert man['exit_code'] == 0 and man['subcommand'] == 'optimize'
    assert len(man['scenario_hash']) == 64
    assert sorted(man['outputs']) == man['outputs']
    printed = json.loads(capsys.readouterr().out)
    assert printed['mse'] == pytest.approx(sol['mse'])


def test_flat_scenario_flat_spectrum(write, tmp_path):
    obj = scenario(grid={"B_times_T": 0.5, "N": 8})
    obj['noise']['interferers'] = []
    assert main(['optimize', write(obj), '--out-dir', str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / 'spectra.csv')
    np.testing.assert_allclose(rows[:, 1], rows[0, 1], rtol=1e-9)


def test_improper_uses_conjugate_branch(write, tmp_path):
    assert main(['optimize', write(scenario(k=0.8)), '--out-dir',
                 str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / 'spectra.csv')
    assert rows[:, 3].max() > 1e-6


def test_rerun_is_byte_identical(write, tmp_path):
    p = write(scenario(k=0.5))
    for d in ('a', 'b'):
        assert main(['optimize', p, '--out-dir', str(tmp_path / d)]) == 0
    for f in ('spectra.csv', 'solution.json'):
        assert ((tmp_path / 'a' / f).read_bytes()
                == (tmp_path / 'b' / f).read_bytes())


def test_grid_override(write, tmp_path):
    assert main(['optimize', write(scenario()), '--grid-n', '8',
                 '--out-dir', str(tmp_path)]) == 0
    assert json.loads((tmp_path / 'solution.json').read_text())[
        'grid']['N'] == 8


@pytest.mark.parametrize('mutate, field', [
    (lambda o: o['grid'].pop('B_times_T'), 'B_times_T'),
    (lambda o: o['noise'].update(N0='one'), 'N0'),
    (lambda o: o.update(power={}), 'power'),
    (lambda o: o['source'].update(k=2.0), 'k'),
])
def test_malformed_scenario(write, tmp_path, capsys, mutate, field):
    obj = scenario()
    mutate(obj)
    assert main(['optimize', write(obj), '--out-dir', str(tmp_path)]) == 1
    assert field in capsys.readouterr().err
    assert not (tmp_path / 'manifest.json').exists()


def test_invalid_json(write, tmp_path, capsys):
    assert main(['optimize', write('{"grid": '), '--out-dir',
                 str(tmp_path)]) == 1
    assert 'JSON' in capsys.readouterr().err


def test_dead_channel_is_numeric_failure(write, tmp_path):
    obj = scenario(channel={"type": "flat", "gain": 0.0})
    assert main(['optimize', write(obj), '--out-dir', str(tmp_path)]) == 2
    man = json.loads((tmp_path / 'manifest.json').read_text())
    assert man['exit_code'] == 2


def test_invariant_failure(write, tmp_path):
    assert main(['optimize', write(scenario()), '--tol-kkt', '-1',
                 '--out-dir', str(tmp_path)]) == 3
    assert (tmp_path / 'solution.json').exists()


def test_sweep_k_monotone(write, tmp_path):
    assert main(['sweep', write(scenario()), '--axis', 'k', '--values',
                 '0,0.25,0.5,0.75,1', '--out-dir', str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / 'mse_curve.csv')
    assert header == ['axis_value', 'analytic_mse']
    assert np.all(np.diff(rows[:, 1]) <= 1e-12)


def test_single_point_sweep_equals_optimize(write, tmp_path):
    p = write(scenario(k=0.4))
    assert main(['sweep', p, '--axis', 'esn0', '--values', '5',
                 '--out-dir', str(tmp_path / 's')]) == 0
    assert main(['optimize', p, '--out-dir', str(tmp_path / 'o')]) == 0
    _, rows = read_csv(tmp_path / 's' / 'mse_curve.csv')
    sol = json.loads((tmp_path / 'o' / 'solution.json').read_text())
    assert rows[0, 1] == pytest.approx(sol['mse'], rel=1e-12)


def test_sweep_esn0_decreasing_and_bad_values(write, tmp_path):
    p = write(scenario())
    assert main(['sweep', p, '--axis', 'esn0', '--values', '0,10,20',
                 '--out-dir', str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / 'mse_curve.csv')
    assert np.all(np.diff(rows[:, 1]) < 0)
    assert main(['sweep', p, '--axis', 'k', '--values', 'a,b',
                 '--out-dir', str(tmp_path)]) == 1
    assert main(['sweep', p, '--axis', 'k', '--values', '1.5',
                 '--out-dir', str(tmp_path)]) == 1


def test_simulate(write, tmp_path):
    assert main(['simulate', write(scenario(k=0.8)), '--num-symbols',
                 '20000', '--seed', '4', '--out-dir', str(tmp_path)]) == 0
    rep = json.loads((tmp_path / 'sim_report.json').read_text())
    assert abs(rep['empirical_mse'] - rep['analytic_mse']) \
        <= 3 * rep['std_err']
    assert rep['seed'] == 4


def test_sweep_with_simulation(write, tmp_path):
    assert main(['sweep', write(scenario()), '--axis', 'k', '--values',
                 '0,1', '--simulate', '--num-symbols', '5000',
                 '--out-dir', str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / 'mse_curve.csv')
    assert header[2:] == ['empirical_mse', 'std_err', 'empirical_power']
    assert rows.shape == (2, 5)


def test_check(write, tmp_path):
    assert main(['check', write(scenario(k=0.7)), '--random', '3',
                 '--out-dir', str(tmp_path)]) == 0
    rep = json.loads((tmp_path / 'check_report.json').read_text())
    assert rep['passed'] and rep['n_scenarios'] == 4
    assert {e['invariant'] for e in rep['checks']} >= {
        'mse_form_residual', 'stationarity', 'gain_residual',
        'receiver_gap'}


def test_check_nothing(tmp_path):
    assert main(['check', '--out-dir', str(tmp_path)]) == 0
    rep = json.loads((tmp_path / 'check_report.json').read_text())
    assert rep == {'passed': True, 'n_scenarios': 0, 'checks': []}


def test_module_entry_point(write, tmp_path):
    r = subprocess.run([sys.executable, '-m', 'wltransceiver', 'optimize',
                        write(scenario()), '--out-dir', str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, '-m', 'wltransceiver', '--version'],
                       capture_output=True, text=True)
    assert r.stdout.strip()
