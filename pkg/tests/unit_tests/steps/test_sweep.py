##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
import pytest

from subband_shake import ConfigError, ConsistencyError
from subband_shake.steps.sweep import sweep
from tests.conftest import write_runs
from tests.unit_tests.steps.conftest import RUNS, TRAIN, VALID, offset_curves


class Test_sweep():

    def test_single_model(self, config):
        write_runs(config, 'test', offset_curves([0, 0, 0, 0]))
        config.patience = [1, 3]

        result = sweep(config)

        assert result.models == ['test']
        # patience 1 stops after the dip, 3 runs to the end of the curve
        assert result.mean_ua('test', 1) == 50.0
        assert result.mean_gap('test', 1) == 20.0
        assert result.mean_ua('test', 3) == 52.0
        assert all(s.truncated for s in result.selections['test'][3].values())

    def test_outputs(self, two_models):
        config = two_models
        result = sweep(config)

        assert result.models == ['a', 'b']
        assert result.mean_ua('b', 1) == 53.5
        assert result.mean_gap('b', 1) == 16.5

        csv_lines = (config.run_dir / 'sweep.csv').read_text().splitlines()
        assert csv_lines[0] == 'metric,model,1,3'
        assert csv_lines[2] == 'ua,b,53.50,55.50'

        text = (config.run_dir / 'sweep.txt').read_text()
        assert '53.50*!' in text
        assert 'seed 0, train - validation UA gap (%)' in text
        assert 'b: smaller gap than a at patience 3 in 2 of 2 seeds' in text

    def test_baseline(self, two_models):
        config = two_models
        config.baseline = 'b'
        sweep(config)

        text = (config.run_dir / 'sweep.txt').read_text()
        assert '*' not in text
        assert 'a: smaller gap than b at patience 3 in 0 of 2 seeds' in text

    def test_grid_mismatch(self, two_models):
        config = two_models
        write_runs(config, 'c', {key: (VALID, TRAIN) for key in RUNS[:3]})
        config.models = ['a', 'c']

        with pytest.raises(ConsistencyError, match="model 'c' has runs"):
            sweep(config)

    def test_missing_run_name(self, two_models):
        config = two_models
        config.models = ['a', 'nosuch']

        with pytest.raises(ConfigError, match='no report.jsonl files'):
            sweep(config)
