import pandas as pd
import pytest
import yaml

from cran_uad.cli import build_parser, main
from cran_uad.harness import CSV_COLUMNS

SMALL = """\
N: 8
M: 8
R: 1
p: 0.25
snr_db: 10.0
b: [2, 4]
schemes: [qf, dtf]
thresholds: {start: -5.0, stop: 5.0, num: 5}
trials: 3
calibration_trials: 2
seed: 1
max_failure_rate: 1.0
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'small.yaml'
    path.write_text(SMALL)
    return str(path)


def test_roc_writes_csv_and_meta(config_file, tmp_path, capsys):
    out = tmp_path / 'roc.csv'
    assert main(['--log-level', 'WARNING', 'roc', '--config', config_file, '--out', str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 4 * 5
    assert (tmp_path / 'roc.meta.yaml').exists()
    assert 'ROC data written' in capsys.readouterr().out


def test_roc_seed_override(config_file, tmp_path):
    main(['roc', '--config', config_file, '--seed', '9', '--trials', '2', '--out', str(tmp_path / 'a.csv')])
    frame = pd.read_csv(tmp_path / 'a.csv')
    assert set(frame['seed']) == {9}
    assert frame['trials'].max() <= 2


def test_simulate_dumps_per_ue_records(config_file, tmp_path):
    assert main(['simulate', '--config', config_file, '--trials', '1', '--out', str(tmp_path / 'sim.csv')]) == 0
    records = pd.read_csv(tmp_path / 'sim.trials.csv')
    assert len(records) == 4 * 8
    assert list(records.columns) == ['scheme', 'seed', 'trial', 'M', 'R', 'b', 'ue', 'lambda', 'llr']


def test_calibrate_writes_quantizers(config_file, tmp_path):
    assert main(['calibrate', '--config', config_file, '--out', str(tmp_path / 'cal.csv')]) == 0
    payload = yaml.safe_load((tmp_path / 'cal.calibration.yaml').read_text())
    assert payload['M8_R1'][2]['levels'] == 4
    assert payload['M8_R1'][4]['levels'] == 16


def test_bad_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / 'bad.yaml'
    path.write_text('N: 8\nwhatever: 1\n')
    assert main(['roc', '--config', str(path)]) == 1
    assert 'whatever' in capsys.readouterr().out


def test_missing_config_exits_nonzero(tmp_path):
    assert main(['roc', '--config', str(tmp_path / 'nope.yaml')]) == 1


def test_oracle_check_reduced(tmp_path, capsys):
    code = main(['oracle-check', '--grid', '40', '--trials', '4', '--out', str(tmp_path / 'oracle.csv')])
    table = pd.read_csv(tmp_path / 'oracle.csv')
    assert len(table) == 7
    assert code == (0 if table['passed'].all() else 1)


def test_subcommand_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


class TestOracleCheckConfig:
    @pytest.fixture
    def captured(self, monkeypatch):
        calls = {}

        def fake_checks(**kwargs):
            calls.update(kwargs)
            return pd.DataFrame({'check': ['truncated_moments'], 'metric': ['max abs error'], 'value': [0.0],
                                 'threshold': [1e-8], 'passed': [True]})

        monkeypatch.setattr('cran_uad.cli.run_oracle_checks', fake_checks)
        return calls

    def test_config_supplies_seed_trials_and_gamp_options(self, tmp_path, captured):
        path = tmp_path / 'gamp.yaml'
        path.write_text(SMALL + "gamp: {damping: 0.7, max_iter: 30}\n")
        assert main(['oracle-check', '--config', str(path), '--grid', '8']) == 0
        assert (captured['seed'], captured['n_instances'], captured['n_grid']) == (1, 3, 8)
        assert captured['opts'].damping == 0.7
        assert captured['opts'].max_iter == 30

    def test_command_line_overrides_config(self, config_file, captured):
        assert main(['oracle-check', '--config', config_file, '--seed', '9', '--trials', '5']) == 0
        assert (captured['seed'], captured['n_instances']) == (9, 5)

    def test_defaults_without_config(self, captured):
        assert main(['oracle-check']) == 0
        assert (captured['seed'], captured['n_instances'], captured['n_grid']) == (0, 200, 10_000)
