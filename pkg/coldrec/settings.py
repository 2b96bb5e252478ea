# MIT License
# 
# Copyright (c) 2023 coldrec contributors
# 
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
# 
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
# 
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

'''Run configuration shared by the command line commands.

Settings come from three places, in increasing order of precedence:
    1. Settings file (--config)
    2. Environment variables `COLDREC_<KEY>` (path settings only)
    3. Command line switches

The settings file is line oriented, one `key = value` per line with `#` comments. Unknown keys are rejected.

Example settings file:

```
# data
features = data/features.tsv
train = data/train.tsv
val = data/val.tsv

# model
model = fbsm
h = 5
lambda_v = 0.25
beta_d = 10
seed = 1
```

Typical usage example:

    ```
    config = RunConfig()
    config.load('coldrec.ini')
    config.apply_args(args)
    config.validate_paths(['features', 'train', 'val'])
    cfg = config.train_config()
    ```
'''

__docformat__ = 'google'


import os
import logging
import configparser

from coldrec.errors import ConfigError
from coldrec.trainer import TrainConfig, MODEL_KINDS


_log = logging.getLogger(__name__)

ENVIRONMENT_PREFIX = 'COLDREC_'

PATH_KEYS = ('terms', 'sparse_features', 'features', 'vocabulary', 'prefs', 'train', 'val', 'test', 'manifest', 'model_file', 'output', 'report')


def _parse_bool(value):
    if isinstance(value, bool):
        return value

    text = str(value).strip().lower()

    if text in ('true', 'yes', '1', 'on'):
        return True
    elif text in ('false', 'no', '0', 'off'):
        return False

    raise ValueError('not a boolean')

def _parse_optional_float(value):
    if value is None or str(value).strip().lower() in ('none', ''):
        return None

    return float(value)

def _parse_fractions(value):
    if isinstance(value, str):
        value = [part for part in value.replace(',', ' ').split()]

    fractions = tuple(float(f) for f in value)

    if len(fractions) != 3:
        raise ValueError('expected three fractions')

    return fractions

def _parse_model(value):
    value = str(value).strip().lower()

    if value not in MODEL_KINDS:
        raise ValueError('expected one of {}'.format(', '.join(MODEL_KINDS)))

    return value

def _parse_path(value):
    return os.path.abspath(os.path.expanduser(str(value).strip()))


class RunConfig:
    '''Resolved run configuration.

    Values are read with *get()* and changed with *set()*. Each key has a parser that converts file, environment, and command line strings to a Python value.
    '''

    def __init__(self):
        '''Initialize run configuration with default values.'''
        self.source = None
        '''str: Path of the loaded settings file, or None'''

        self._settings_map = {
            # paths
            'terms': _parse_path,
            'sparse_features': _parse_path,
            'features': _parse_path,
            'vocabulary': _parse_path,
            'prefs': _parse_path,
            'train': _parse_path,
            'val': _parse_path,
            'test': _parse_path,
            'manifest': _parse_path,
            'model_file': _parse_path,
            'output': _parse_path,
            'report': _parse_path,
            # model
            'model': _parse_model,
            # feature pipeline
            'min_df': int,
            'max_frac': float,
            'smooth_idf': _parse_bool,
            'normalize': _parse_bool,
            # preferences and splits
            'binarize_threshold': float,
            'keep_negatives': _parse_bool,
            'fractions': _parse_fractions,
            'split_seed': int,
            # training
            'h': int,
            'l': int,
            'alpha_d': float,
            'alpha_v': float,
            'lambda_v': float,
            'beta_d': float,
            'mu_w': float,
            'mu_m': _parse_optional_float,
            'max_epochs': int,
            'patience': int,
            'tolerance': float,
            'convergence_epochs': int,
            'rejection_cap': int,
            'cache_user_factors': _parse_bool,
            'seed': int,
            'log_timing': _parse_bool,
            # evaluation
            'n': int,
            'conventional_recall': _parse_bool,
            'json_lines': _parse_bool,
            'workers': int,
            'check_workspace': _parse_bool
        }

        defaults = TrainConfig()

        self._values = {
            'model': defaults.model,
            'min_df': 20,
            'max_frac': 0.2,
            'smooth_idf': False,
            'normalize': False,
            'binarize_threshold': 3.0,
            'keep_negatives': False,
            'fractions': (0.6, 0.2, 0.2),
            'split_seed': 1,
            'h': defaults.h,
            'l': defaults.l,
            'alpha_d': defaults.alpha_d,
            'alpha_v': defaults.alpha_v,
            'lambda_v': defaults.lambda_v,
            'beta_d': defaults.beta_d,
            'mu_w': defaults.mu_w,
            'mu_m': None,
            'max_epochs': defaults.max_epochs,
            'patience': defaults.patience,
            'tolerance': defaults.tolerance,
            'convergence_epochs': defaults.convergence_epochs,
            'rejection_cap': defaults.rejection_cap,
            'cache_user_factors': defaults.cache_user_factors,
            'seed': defaults.seed,
            'log_timing': True,
            'n': defaults.eval_n,
            'conventional_recall': defaults.conventional_recall,
            'json_lines': False,
            'workers': defaults.workers,
            'check_workspace': defaults.debug
        }

    def keys(self):
        '''Get all known setting keys.

        Returns:
            list: Setting keys
        '''
        return list(self._settings_map)

    def get(self, key):
        '''Get a setting value.

        Args:
            key (str): Setting key

        Returns:
            object: Setting value, None if unset

        Raises:
            ConfigError: Unknown key
        '''
        if key not in self._settings_map:
            raise ConfigError('Unknown setting \'{}\''.format(key))

        return self._values.get(key)

    def set(self, key, value):
        '''Set a setting value.

        Args:
            key (str): Setting key
            value (str or object): Raw string or already typed value

        Raises:
            ConfigError: Unknown key or invalid value
        '''
        if key not in self._settings_map:
            raise ConfigError('Unknown setting \'{}\''.format(key))

        try:
            self._values[key] = self._settings_map[key](value)
        except (TypeError, ValueError) as e:
            raise ConfigError('Invalid value \'{}\' for setting \'{}\': {}'.format(value, key, e)) from None

    def load(self, settings_path):
        '''Load settings from file.

        Args:
            settings_path (str): Relative or absolute path to settings file

        Raises:
            FileNotFoundError: Settings file not found
            ConfigError: Unknown key or invalid value
        '''
        settings_path = os.path.abspath(os.path.expanduser(settings_path))

        if not os.path.exists(settings_path):
            raise FileNotFoundError('Specified settings file not found: {}'.format(settings_path))

        with open(settings_path, 'r', encoding='utf-8') as fd:
            text = fd.read()

        # settings files have no sections, parse as one implicit section
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=('#',), inline_comment_prefixes=('#',))
        parser.optionxform = lambda option: option

        try:
            parser.read_string('[coldrec]\n' + text, source=settings_path)
        except configparser.Error as e:
            raise ConfigError('Cannot parse settings file {}: {}'.format(settings_path, e)) from None

        for key, value in parser['coldrec'].items():
            self.set(key, value)

        self.source = settings_path
        _log.debug('Loaded settings from %s', settings_path)

    def apply_environment(self, environ=None):
        '''Apply `COLDREC_<KEY>` environment variables to path settings.

        Args:
            environ (dict): Environment, defaults to None (*os.environ*)
        '''
        environ = environ if environ is not None else os.environ

        for key in PATH_KEYS:
            value = environ.get(ENVIRONMENT_PREFIX + key.upper())

            if value:
                self.set(key, value)

    def apply_args(self, args):
        '''Apply command line switches, which win over file and environment settings.

        Switches that were not given (value None) are ignored.

        Args:
            args (argparse.Namespace): Parsed command line arguments
        '''
        for key in self._settings_map:
            value = getattr(args, key, None)

            if value is not None:
                self.set(key, value)

    def validate_paths(self, keys):
        '''Check that input files exist before work starts.

        Args:
            keys (list): Path setting keys that are required inputs

        Raises:
            ConfigError: A required path is not set
            FileNotFoundError: A required file does not exist
        '''
        for key in keys:
            path = self.get(key)

            if path is None:
                raise ConfigError('Setting \'{}\' is required'.format(key))

            if not os.path.exists(path):
                raise FileNotFoundError('{} file not found: {}'.format(key.capitalize(), path))

    def train_config(self):
        '''Build the training configuration.

        Returns:
            coldrec.trainer.TrainConfig: Validated training configuration

        Raises:
            ConfigError: Invalid training setting
        '''
        return TrainConfig(
            model=self.get('model'),
            h=self.get('h'),
            l=self.get('l'),
            alpha_d=self.get('alpha_d'),
            alpha_v=self.get('alpha_v'),
            lambda_v=self.get('lambda_v'),
            beta_d=self.get('beta_d'),
            mu_w=self.get('mu_w'),
            mu_m=self.get('mu_m'),
            max_epochs=self.get('max_epochs'),
            patience=self.get('patience'),
            seed=self.get('seed'),
            eval_n=self.get('n'),
            conventional_recall=self.get('conventional_recall'),
            tolerance=self.get('tolerance'),
            convergence_epochs=self.get('convergence_epochs'),
            rejection_cap=self.get('rejection_cap'),
            cache_user_factors=self.get('cache_user_factors'),
            debug=self.get('check_workspace'),
            workers=self.get('workers'))

    def dumps(self):
        '''Echo the resolved configuration.

        Returns:
            list: `key = value` lines in sorted key order, unset settings omitted
        '''
        lines = []

        for key in sorted(self._values):
            value = self._values[key]

            if value is None:
                continue

            if isinstance(value, tuple):
                value = ', '.join(repr(v) for v in value)

            lines.append('{} = {}'.format(key, value))

        return lines
