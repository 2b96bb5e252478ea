import os
import argparse

import pytest

from coldrec.errors import ConfigError
from coldrec.settings import RunConfig

NAME = 'Run Configuration'


def test_defaults():
    config = RunConfig()
    cfg = config.train_config()

    assert config.get('model') == 'fbsm'
    assert config.get('fractions') == (0.6, 0.2, 0.2)
    assert config.get('features') is None
    assert cfg.h == 5
    assert cfg.mu_m == cfg.mu_w
    assert cfg.debug is False

def test_load_settings_file(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text('# data\nfeatures = data/features.tsv\n\n# model\nmodel = UFSM\nl = 3  # three functions\nmu_w = 0.5\nfractions = 0.8, 0.1, 0.1\n'
        'check_workspace = yes\n')

    config = RunConfig()
    config.load(str(path))

    assert config.source == str(path)
    assert config.get('features') == os.path.abspath('data/features.tsv')
    assert config.get('model') == 'ufsm'
    assert config.get('l') == 3
    assert config.get('fractions') == (0.8, 0.1, 0.1)

    cfg = config.train_config()
    assert cfg.mu_m == 0.5
    assert cfg.debug is True

def test_bad_settings(tmp_path):
    config = RunConfig()

    with pytest.raises(ConfigError):
        config.set('learning_rate', '0.1')

    with pytest.raises(ConfigError):
        config.get('learning_rate')

    with pytest.raises(ConfigError):
        config.set('h', 'five')

    with pytest.raises(ConfigError):
        config.set('model', 'svd')

    with pytest.raises(ConfigError):
        config.set('fractions', '0.5 0.5')

    path = tmp_path / 'unknown.ini'
    path.write_text('speed = 11\n')

    with pytest.raises(ConfigError):
        config.load(str(path))

    with pytest.raises(FileNotFoundError):
        config.load(str(tmp_path / 'missing.ini'))

def test_environment_applies_to_paths_only(tmp_path):
    config = RunConfig()
    config.apply_environment({'COLDREC_TRAIN': str(tmp_path / 'train.tsv'), 'COLDREC_H': '9', 'COLDREC_VAL': ''})

    assert config.get('train') == str(tmp_path / 'train.tsv')
    assert config.get('h') == 5
    assert config.get('val') is None

def test_switches_win(tmp_path):
    path = tmp_path / 'run.ini'
    path.write_text('h = 7\nalpha_d = 0.2\n')

    config = RunConfig()
    config.load(str(path))
    config.apply_args(argparse.Namespace(h=2, alpha_d=None, seed=4, unrelated='x'))

    assert config.get('h') == 2
    assert config.get('alpha_d') == 0.2
    assert config.get('seed') == 4

def test_validate_paths(tmp_path):
    present = tmp_path / 'features.tsv'
    present.write_text('a\t0\t1\n')

    config = RunConfig()
    config.set('features', str(present))
    config.validate_paths(['features'])

    with pytest.raises(ConfigError):
        config.validate_paths(['train'])

    config.set('train', str(tmp_path / 'absent.tsv'))

    with pytest.raises(FileNotFoundError):
        config.validate_paths(['features', 'train'])

def test_cosim_has_no_training():
    config = RunConfig()
    config.set('model', 'cosim')

    with pytest.raises(ConfigError):
        config.train_config()

def test_dumps():
    config = RunConfig()
    config.set('h', 3)
    lines = config.dumps()

    assert lines == sorted(lines)
    assert 'h = 3' in lines
    assert 'fractions = 0.6, 0.2, 0.2' in lines
    assert not any(line.startswith('mu_m') for line in lines)
