# ##############################################################################
#  (c) Crown copyright Met Office. All rights reserved.
#  For further details please refer to the file COPYRIGHT
#  which you should have received as part of this distribution
# ##############################################################################

'''
This module tests the ExperimentConfig class.
'''

import json
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from textwrap import dedent
from unittest import mock

import pytest

from subband_shake import ConfigError
from subband_shake.experiment_config import ExperimentConfig, read_config_file


class TestReadConfigFile:

    def test_values(self, tmp_path):
        fpath = tmp_path / 'exp.conf'
        fpath.write_text(dedent('''
            # shallow baseline
            name = shallow-none
            model = shallow   # trailing comment
            batch-size = 32
            seeds = 0, 1, 2
        '''))

        assert read_config_file(fpath) == {
            'name': 'shallow-none', 'model': 'shallow', 'batch_size': '32', 'seeds': '0, 1, 2'}

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match='config file not found'):
            read_config_file(tmp_path / 'nosuch.conf')

    def test_unknown_key(self, tmp_path):
        fpath = tmp_path / 'exp.conf'
        fpath.write_text('name = a\ncolour = blue\n')
        with pytest.raises(ConfigError, match="line 2: unknown key 'colour'"):
            read_config_file(fpath)

    def test_malformed(self, tmp_path):
        fpath = tmp_path / 'exp.conf'
        fpath.write_text('name\n')
        with pytest.raises(ConfigError, match="line 1: expected 'key = value'"):
            read_config_file(fpath)


class TestExperimentConfig:

    def test_defaults(self, tmp_path):
        config = ExperimentConfig(workspace=tmp_path)
        assert config.name == 'experiment'
        assert config.model == 'shallow'
        assert config.mode == 'none'
        assert config.granularity == 'frame'
        assert config.lr == 0.001
        assert config.batch_size == 64
        assert config.epochs == 200
        assert config.seeds == [0, 1, 2]
        assert config.patience == [9, 11, 13, 15, 17, 19, 21, 26, 31, 36, 41, 46, 51]
        assert config.run_folds == []
        assert config.normalize_unshaken is False

    def test_parses_strings(self, tmp_path):
        config = ExperimentConfig(workspace=str(tmp_path), mode='Both', granularity='sample',
                                  lr='0.01', seeds='3, 4', force='yes', stats_patience='none')
        assert config.workspace == tmp_path.resolve()
        assert config.mode == 'both'
        assert config.granularity == 'sample'
        assert config.lr == 0.01
        assert config.seeds == [3, 4]
        assert config.force is True
        assert config.stats_patience is None

    def test_defaults_not_shared(self, tmp_path):
        a = ExperimentConfig(workspace=tmp_path)
        a.seeds.append(9)
        assert ExperimentConfig(workspace=tmp_path).seeds == [0, 1, 2]

    @pytest.mark.parametrize('values,message', [
        (dict(colour='blue'), 'unknown config keys: colour'),
        (dict(model='huge'), "bad value for 'model'"),
        (dict(mode='sideways'), "bad value for 'mode'"),
        (dict(epochs='ten'), "bad value for 'epochs'"),
        (dict(force='maybe'), "bad value for 'force'"),
        (dict(seeds=''), 'seed list must not be empty'),
        (dict(batch_size=0), "'batch_size' must be at least 1"),
        (dict(folds=1), "'folds' must be at least 2"),
        (dict(lr=0.0), "'lr' must be positive"),
        (dict(run_folds='0, 4'), r'fold indices \[4\] are outside 0..3'),
    ])
    def test_bad_values(self, tmp_path, values, message):
        with pytest.raises(ConfigError, match=message):
            ExperimentConfig(workspace=tmp_path, **values)

    @mock.patch.dict('os.environ', {'SUBBAND_SHAKE_WORKSPACE': '/SHAKE', 'SUBBAND_SHAKE_SEED': '17'})
    def test_environment(self):
        config = ExperimentConfig(name='exp')
        assert config.workspace == Path('/SHAKE')
        assert config.run_dir == Path('/SHAKE/exp')
        assert config.root_seed == 17
        assert ExperimentConfig(seed=2).root_seed == 2

    def test_paths(self, tmp_path):
        config = ExperimentConfig(name='exp', workspace=tmp_path)
        assert config.manifest_path == tmp_path / 'corpus' / 'manifest.csv'
        assert config.metrics_folder == tmp_path / 'exp' / 'metrics'
        assert config.job_dir(2, 1) == tmp_path / 'exp' / 'fold2' / 'seed1'
        assert config.job_dir(0, 0, name='other') == tmp_path / 'other' / 'fold0' / 'seed0'

    def test_require(self, tmp_path):
        config = ExperimentConfig(workspace=tmp_path)
        assert config.require(tmp_path, 'workspace') == tmp_path
        with pytest.raises(ConfigError, match='manifest not found'):
            config.require(tmp_path / 'nosuch.csv', 'manifest')

    def test_from_sources(self, tmp_path):
        fpath = tmp_path / 'exp.conf'
        fpath.write_text('name = from-file\nepochs = 5\nbatch_size = 16\n')

        config = ExperimentConfig.from_sources(fpath, {'epochs': '7', 'batch_size': None,
                                                       'workspace': str(tmp_path)})
        assert config.name == 'from-file'
        assert config.epochs == 7
        assert config.batch_size == 16

    def test_echo_reads_back(self, tmp_path):
        config = ExperimentConfig(name='echoed', workspace=tmp_path, seeds='1, 2', baseline='shallow-none')
        fpath = tmp_path / 'echo' / 'config.txt'
        config.echo(fpath)

        text = fpath.read_text()
        assert text.startswith('# resolved config, root seed 0\n')
        assert 'seeds = 1, 2\n' in text
        assert 'stats_patience = none\n' in text

        again = ExperimentConfig(**read_config_file(fpath))
        assert again.values() == config.values()


class TestContext:

    def test_run_log_and_metrics(self, tmp_path):
        shake_logger = logging.getLogger('subband_shake')

        with ExperimentConfig(name='ctx', workspace=tmp_path) as config:
            handlers = [h for h in shake_logger.handlers if isinstance(h, RotatingFileHandler)]
            assert len(handlers) == 1
            logging.getLogger('subband_shake.experiment.test').info('inside the run')

        assert not [h for h in shake_logger.handlers if isinstance(h, RotatingFileHandler)]
        assert 'inside the run' in (config.run_dir / 'log.txt').read_text()
        assert read_config_file(config.run_dir / 'config.txt')['name'] == 'ctx'

        metrics = json.loads((config.metrics_folder / 'metrics.json').read_text())
        assert metrics['run']['label'] == 'ctx'
        assert metrics['run']['time taken'] >= 0

    def test_verbose_run_log(self, tmp_path, caplog):
        caplog.set_level(logging.DEBUG, logger='subband_shake')
        with ExperimentConfig(name='ctx', workspace=tmp_path, verbose=True) as config:
            logging.getLogger('subband_shake.experiment.test').debug('fine detail')
        assert 'fine detail' in (config.run_dir / 'log.txt').read_text()

        with ExperimentConfig(name='ctx', workspace=tmp_path) as config:
            logging.getLogger('subband_shake.experiment.test').debug('hidden detail')
        assert 'hidden detail' not in (config.run_dir / 'log.txt').read_text()
