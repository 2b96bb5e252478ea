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

'''coldrec command line interface (CLI).

Try `python -m coldrec --help` or `python -m coldrec <command> --help` for switch options.

Order of precedence for settings:
    1. Command line switch settings
    2. Environment variables `COLDREC_<KEY>` (paths only)
    3. Settings loaded from specified settings file (--config)

| Command | Purpose |
| -------- | -------- |
| prep | Build TF-IDF features from item terms, or normalize a sparse feature file |
| split | Split preferences by items into train, validation, and test files plus a manifest |
| train | Train FBSM or UFSM with early stopping on the validation items |
| evaluate | Evaluate FBSM, UFSM, or CoSim on held-out items |
| aggregate | Average reports of several split seeds |
| compare | Compare two reports user by user |
| interactions | List the strongest learned feature interactions of an FBSM model |
| gradcheck | Verify the fast relative rank path and the analytic gradients |
| bench | Time the per-triplet kernels over a grid of sizes |

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure.
'''

__docformat__ = 'google'


import os
import sys
import logging
import argparse

import psutil

import coldrec
from coldrec import dataio, evaluator, trainer, gradcheck, bench
from coldrec.errors import ColdrecError, ConfigError, GradientCheckError
from coldrec.settings import RunConfig
from coldrec.baselines import CosimScorer
from coldrec.fbsm import FbsmModel, top_interactions


_log = logging.getLogger('coldrec')

DEFAULT_LOG_PATH = '~/coldrec.log'


def enable_logging(debug=False, log_path=None):
    '''Attach console and file log handlers to the coldrec logger.

    Args:
        debug (bool): Print debug records to the console, defaults to False (warnings only)
        log_path (str): Append all records to this file, defaults to None (no log file)
    '''
    _log.setLevel(logging.DEBUG)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if debug else logging.WARNING)
    console.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    _log.addHandler(console)

    if log_path is not None:
        handler = logging.FileHandler(os.path.expanduser(log_path), encoding='utf-8')
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        _log.addHandler(handler)


class CommandParser(argparse.ArgumentParser):
    '''Argument parser that exits with the configuration error code on usage errors.'''

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, '{}: error: {}\n'.format(self.prog, message))


def _load_config(args):
    config = RunConfig()

    if args.config:
        config.load(args.config)

    config.apply_environment()
    config.apply_args(args)

    cpus = psutil.cpu_count() or 1

    if config.get('workers') > cpus:
        _log.warning('Limiting workers from %d to %d CPUs', config.get('workers'), cpus)
        config.set('workers', cpus)

    return config

def _output_path(config, name):
    output = config.get('output')

    if output is None:
        raise ConfigError('Setting \'output\' is required')

    os.makedirs(output, exist_ok=True)
    return os.path.join(output, name)

def _load_features(config):
    return dataio.load_sparse_features(config.get('features'))

def _load_vocabulary(config):
    return dataio.load_vocabulary(config.get('vocabulary')) if config.get('vocabulary') else None

def _load_prefs(config, key, features, user_index=None):
    return dataio.load_preferences(config.get(key), config.get('binarize_threshold'), config.get('keep_negatives'),
        item_index=features.item_index(), user_index=user_index)

def _user_index(prefs):
    return {user_id: u for u, user_id in enumerate(prefs.user_ids)}

def _load_split(config, features):
    return dataio.load_split_manifest(config.get('manifest'), features.item_index())

def cmd_prep(args):
    '''Build item features.

    Writes `features.tsv` (and `vocabulary.tsv` when built from terms) into the output directory and prints the number of items, features, and the density.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)

    if config.get('terms') is not None:
        config.validate_paths(['terms'])
        bags = dataio.load_term_features(config.get('terms'))
        vocabulary, features = dataio.build_tfidf(bags, config.get('min_df'), config.get('max_frac'), config.get('smooth_idf'), config.get('normalize'))
        dataio.write_vocabulary(_output_path(config, 'vocabulary.tsv'), vocabulary)
    elif config.get('sparse_features') is not None:
        config.validate_paths(['sparse_features'])
        features = dataio.load_sparse_features(config.get('sparse_features'))

        if config.get('normalize'):
            features = features.l2_normalized()
    else:
        raise ConfigError('Either \'terms\' or \'sparse_features\' is required')

    dataio.write_sparse_features(_output_path(config, 'features.tsv'), features)
    cells = features.n_items * features.n_features
    print('items: {}'.format(features.n_items))
    print('features: {}'.format(features.n_features))
    print('density: {:.6g}'.format(features.nnz() / cells if cells > 0 else 0.0))
    return 0

def cmd_split(args):
    '''Split preferences by items.

    Writes `train.tsv`, `val.tsv`, `test.tsv` and `manifest.tsv` into the output directory.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)
    config.validate_paths(['prefs'])
    features = None
    item_index = None

    if config.get('features') is not None:
        config.validate_paths(['features'])
        features = _load_features(config)
        item_index = features.item_index()

    prefs = dataio.load_preferences(config.get('prefs'), config.get('binarize_threshold'), config.get('keep_negatives'), item_index=item_index)

    if features is not None:
        _log.info('Dataset: ' + ', '.join('{} {:.6g}'.format(key, value) for key, value in dataio.dataset_stats(prefs, features).items()))

    train, val, test, split = dataio.split_by_items(prefs, config.get('fractions'), config.get('split_seed'))

    for name, part in (('train', train), ('val', val), ('test', test)):
        dataio.write_preferences(_output_path(config, name + '.tsv'), part)

    dataio.write_split_manifest(_output_path(config, 'manifest.tsv'), split, prefs.item_ids)

    for label, items in split.partitions():
        print('{}: {} items'.format(label, len(items)))

    return 0

def cmd_train(args):
    '''Train a model and write the best model and the training log.

    The model is written to *model_file* and the log to *model_file* + `.log`.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)
    cfg = config.train_config()
    config.validate_paths(['features', 'train', 'val', 'manifest'])

    if config.get('model_file') is None:
        raise ConfigError('Setting \'model_file\' is required')

    features = _load_features(config)
    vocabulary = _load_vocabulary(config)
    prefs_train = _load_prefs(config, 'train', features)
    prefs_val = _load_prefs(config, 'val', features, _user_index(prefs_train))
    split = _load_split(config, features)
    model, log = trainer.train(prefs_train, prefs_val, features, cfg, train_items=split.train_items, val_items=split.validation_items)
    dataio.save_model(config.get('model_file'), model, dataio.feature_space_hash(features, vocabulary))
    log.write(config.get('model_file') + '.log', header='\n'.join(config.dumps()), timing=config.get('log_timing'))

    best = log.records[log.best_epoch]
    print('stopped: {} after {} epochs'.format(log.stop_reason, len(log.records) - 1))
    print('best epoch: {}'.format(log.best_epoch))
    print('val Rec@{}: {:.4f}'.format(cfg.eval_n, best.val_rec))
    print('val DCG@{}: {:.4f}'.format(cfg.eval_n, best.val_dcg))
    return 0

def cmd_evaluate(args):
    '''Evaluate a model on held-out items and write a report.

    CoSim needs no model file.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)
    config.validate_paths(['features', 'train', 'test', 'manifest'])
    features = _load_features(config)

    if config.get('model') == 'cosim':
        scorer = CosimScorer(features)
    else:
        config.validate_paths(['model_file'])
        vocabulary = _load_vocabulary(config)
        scorer, _ = dataio.load_model(config.get('model_file'), features.n_features, dataio.feature_space_hash(features, vocabulary))

    prefs_train = _load_prefs(config, 'train', features)
    prefs_test = _load_prefs(config, 'test', features, _user_index(prefs_train))
    split = _load_split(config, features)
    n = config.get('n')

    report = evaluator.evaluate(scorer, features, prefs_train, prefs_test, n, candidates=split.test_items,
        conventional_recall=config.get('conventional_recall'), workers=config.get('workers'))

    if config.get('report') is not None:
        evaluator.write_report(config.get('report'), report, prefs_test.user_ids, config.get('json_lines'))

    print('users: {}'.format(report.n_users_evaluated))
    print('Rec@{}: {:.4f}'.format(n, report.mean_rec))
    print('DCG@{}: {:.4f}'.format(n, report.mean_dcg))
    return 0

def cmd_aggregate(args):
    '''Print the mean Rec@n and DCG@n of several reports.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    for path in args.reports:
        if not os.path.exists(path):
            raise FileNotFoundError('Report file not found: {}'.format(path))

    reports = [evaluator.read_report(path) for path in args.reports]
    aggregate = evaluator.aggregate_reports(reports)
    n = reports[0].n if reports[0].n is not None else ''
    print('reports: {}'.format(aggregate.n_reports))
    print('Rec@{}: {:.4f}'.format(n, aggregate.mean_rec))
    print('DCG@{}: {:.4f}'.format(n, aggregate.mean_dcg))
    return 0

def cmd_compare(args):
    '''Print the user level comparison of two reports.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)
    config.validate_paths(['features', 'train'])

    for path in (args.report_a, args.report_b):
        if not os.path.exists(path):
            raise FileNotFoundError('Report file not found: {}'.format(path))

    features = _load_features(config)
    prefs_train = _load_prefs(config, 'train', features)
    summary = evaluator.compare_reports(evaluator.read_report(args.report_a), evaluator.read_report(args.report_b), prefs_train)

    print('{:<8} {:>7} {:>7} {:>15} {:>15}'.format('group', 'users', 'items', 'avg_user_prefs', 'avg_item_prefs'))

    for name, group in summary.items():
        print('{:<8} {:>7} {:>7} {:>15.2f} {:>15.2f}'.format(name, group.users, group.items, group.avg_user_preferences, group.avg_item_preferences))

    return 0

def cmd_interactions(args):
    '''Print the strongest learned feature pairs of an FBSM model.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    config = _load_config(args)
    config.validate_paths(['model_file'])
    vocabulary = _load_vocabulary(config)
    model, _ = dataio.load_model(config.get('model_file'), len(vocabulary) if vocabulary is not None else None)

    if not isinstance(model, FbsmModel):
        raise ConfigError('Feature interactions are only learned by FBSM models')

    for p, q, weight in top_interactions(model, args.k, vocabulary):
        print('{}\t{}\t{:.6g}'.format(p, q, weight))

    return 0

def cmd_gradcheck(args):
    '''Run the gradient and fast path verification suites.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code

    Raises:
        GradientCheckError: A suite failed
    '''
    summary = gradcheck.run_suite(seed=args.seed if args.seed is not None else 1, trials=args.trials, n_features=args.check_n_features,
        h=args.check_h, nnz=args.check_nnz, flip_sign=args.flip_sign)

    print('trials: {}'.format(summary.trials))
    print('max gradient error: {:.3g}'.format(summary.max_grad_error))
    print('max UFSM gradient error: {:.3g}'.format(summary.max_linear_grad_error))
    print('max fast path error: {:.3g}'.format(summary.max_fast_path_error))

    if not summary.passed:
        raise GradientCheckError('Gradient check failed')

    print('pass')
    return 0

def cmd_bench(args):
    '''Time the per-triplet kernels and print the timing table.

    Args:
        args (argparse.Namespace): Parsed command line arguments

    Returns:
        int: Exit code
    '''
    info = bench.host_info()
    print('host: {} CPUs ({} logical), {:.0f} MB resident'.format(info['cpus'], info['logical_cpus'], info['rss_mb']))
    rows = bench.run_grid(args.grid_n_features, args.grid_h, args.grid_nnz, args.repeats, args.seed if args.seed is not None else 1)

    for line in bench.format_table(rows):
        print(line)

    for key in ('n_features', 'h', 'nnz'):
        slope = bench.fit_slope(rows, key)
        ops_slope = bench.fit_slope(rows, key, 'ops')

        if slope is not None:
            print('log-log slope vs {}: time {:.2f}, ops {:.2f}'.format(key, slope, ops_slope))

    return 0

def _add_data_switches(parser, *keys):
    helps = {
        'features': 'Sparse item feature file',
        'vocabulary': 'Vocabulary file (feature names)',
        'train': 'Training preference file',
        'val': 'Validation preference file',
        'test': 'Test preference file',
        'manifest': 'Split manifest file (candidate items of each split, required by train and evaluate)',
        'model_file': 'Model file',
        'output': 'Output directory'
    }

    for key in keys:
        parser.add_argument('--' + key.replace('_', '-'), dest=key, help=helps[key])

def _add_preference_switches(parser):
    parser.add_argument('--binarize-threshold', dest='binarize_threshold', type=float, help='Smallest rating treated as a positive, defaults to 3')
    parser.add_argument('--keep-negatives', dest='keep_negatives', action='store_const', const=True, help='Keep ratings below the threshold as explicit negatives')

def build_parser():
    '''Build the command line parser.

    Returns:
        CommandParser: Parser with one sub-parser per command
    '''
    program = 'python -m coldrec'
    help_epilog = 'Settings file keys match the long switch names with dashes replaced by underscores. Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numerical failure.'
    parser = CommandParser(prog=program, description='coldrec cold-start item recommendation', epilog=help_epilog)
    parser.add_argument('--version', action='version', version='coldrec ' + coldrec.__version__)
    parser.add_argument('--config', help='Settings file path')
    parser.add_argument('--debug', action='store_const', const=True, help='Print debug messages to the console')
    parser.add_argument('--log', nargs='?', const=DEFAULT_LOG_PATH, help='Append log messages to file, defaults to {}'.format(DEFAULT_LOG_PATH))
    parser.add_argument('--workers', type=int, help='Evaluation threads, defaults to 1')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    prep = commands.add_parser('prep', help='Build item features')
    prep.add_argument('--terms', help='Item term file (item, term, count)')
    prep.add_argument('--sparse-features', dest='sparse_features', help='Precomputed sparse feature file (item, feature_id, value)')
    prep.add_argument('--min-df', dest='min_df', type=int, help='Drop terms found in fewer items, defaults to 20')
    prep.add_argument('--max-frac', dest='max_frac', type=float, help='Drop terms found in a larger fraction of items, defaults to 0.2')
    prep.add_argument('--smooth-idf', dest='smooth_idf', action='store_const', const=True, help='Add 1 to every idf')
    prep.add_argument('--normalize', action='store_const', const=True, help='Scale every item vector to unit length')
    _add_data_switches(prep, 'output')
    prep.set_defaults(func=cmd_prep)

    split = commands.add_parser('split', help='Split preferences by items')
    split.add_argument('--prefs', help='Preference file (user, item[, rating])')
    split.add_argument('--fractions', type=float, nargs=3, help='Train, validation, and test fractions, defaults to 0.6 0.2 0.2')
    split.add_argument('--split-seed', dest='split_seed', type=int, help='Split seed, defaults to 1')
    _add_preference_switches(split)
    _add_data_switches(split, 'features', 'output')
    split.set_defaults(func=cmd_split)

    train = commands.add_parser('train', help='Train FBSM or UFSM')
    train.add_argument('--model', help='Model kind: fbsm or ufsm, defaults to fbsm')
    train.add_argument('--h', type=int, help='FBSM latent dimension, 0 for the diagonal-only model, defaults to 5')
    train.add_argument('--l', type=int, help='UFSM number of global similarity functions, defaults to 1')
    train.add_argument('--alpha-d', dest='alpha_d', type=float, help='Learning rate of d and of the UFSM parameters, defaults to 0.01')
    train.add_argument('--alpha-v', dest='alpha_v', type=float, help='Learning rate of V, defaults to 0.001')
    train.add_argument('--lambda', dest='lambda_v', type=float, help='Regularization weight of V, defaults to 0.01')
    train.add_argument('--beta', dest='beta_d', type=float, help='Regularization weight of d, defaults to 0.01')
    train.add_argument('--mu-w', dest='mu_w', type=float, help='UFSM regularization of the global weights, defaults to 0.01')
    train.add_argument('--mu-m', dest='mu_m', type=float, help='UFSM regularization of the memberships, defaults to mu-w')
    train.add_argument('--max-epochs', dest='max_epochs', type=int, help='Maximum number of epochs, defaults to 100')
    train.add_argument('--patience', type=int, help='Epochs without validation improvement before stopping, defaults to 10')
    train.add_argument('--tolerance', type=float, help='Relative loss change regarded as converged, defaults to 1e-5')
    train.add_argument('--seed', type=int, help='Training seed, defaults to 1')
    train.add_argument('--n', type=int, help='Validation Rec@n cutoff, defaults to 10')
    train.add_argument('--cache-user-factors', dest='cache_user_factors', action='store_const', const=True, help='Reuse V f_u per user within an epoch (approximate)')
    train.add_argument('--check-workspace', dest='check_workspace', action='store_const', const=True, help='Verify cached triplet quantities on every update')
    train.add_argument('--no-log-timing', dest='log_timing', action='store_const', const=False, help='Leave the wall time column out of the training log')
    _add_preference_switches(train)
    _add_data_switches(train, 'features', 'vocabulary', 'train', 'val', 'manifest', 'model_file')
    train.set_defaults(func=cmd_train)

    evaluate = commands.add_parser('evaluate', help='Evaluate a model on held-out items')
    evaluate.add_argument('--model', help='Model kind: fbsm, ufsm, or cosim, defaults to fbsm')
    evaluate.add_argument('--n', type=int, help='Top-n cutoff, defaults to 10')
    evaluate.add_argument('--report', help='Report output file')
    evaluate.add_argument('--json-lines', dest='json_lines', action='store_const', const=True, help='Write the report as JSON lines')
    evaluate.add_argument('--conventional-recall', dest='conventional_recall', action='store_const', const=True, help='Divide hits by the number of liked items')
    _add_preference_switches(evaluate)
    _add_data_switches(evaluate, 'features', 'vocabulary', 'train', 'test', 'manifest', 'model_file')
    evaluate.set_defaults(func=cmd_evaluate)

    aggregate = commands.add_parser('aggregate', help='Average several reports')
    aggregate.add_argument('reports', nargs='+', help='Report files')
    aggregate.set_defaults(func=cmd_aggregate)

    compare = commands.add_parser('compare', help='Compare two reports user by user')
    compare.add_argument('report_a', help='Report of model A')
    compare.add_argument('report_b', help='Report of model B')
    _add_preference_switches(compare)
    _add_data_switches(compare, 'features', 'train')
    compare.set_defaults(func=cmd_compare)

    interactions = commands.add_parser('interactions', help='List learned feature interactions')
    interactions.add_argument('--k', type=int, default=10, help='Number of feature pairs, defaults to 10')
    _add_data_switches(interactions, 'vocabulary', 'model_file')
    interactions.set_defaults(func=cmd_interactions)

    check = commands.add_parser('gradcheck', help='Verify gradients and the fast relative rank')
    check.add_argument('--seed', type=int, help='Random seed, defaults to 1')
    check.add_argument('--trials', type=int, default=100, help='Random instances, defaults to 100')
    check.add_argument('--n-features', dest='check_n_features', type=int, default=32, help='Number of features, defaults to 32')
    check.add_argument('--h', dest='check_h', type=int, default=4, help='Latent dimension, defaults to 4')
    check.add_argument('--nnz', dest='check_nnz', type=int, default=8, help='Nonzero entries per item vector, defaults to 8')
    check.add_argument('--flip-sign', dest='flip_sign', action='store_true', help=argparse.SUPPRESS)
    check.set_defaults(func=cmd_gradcheck)

    timing = commands.add_parser('bench', help='Time the per-triplet kernels')
    timing.add_argument('--seed', type=int, help='Random seed, defaults to 1')
    timing.add_argument('--n-features', dest='grid_n_features', type=int, nargs='+', default=[256, 512, 1024], help='Feature counts, defaults to 256 512 1024')
    timing.add_argument('--h', dest='grid_h', type=int, nargs='+', default=[4, 8, 16], help='Latent dimensions, defaults to 4 8 16')
    timing.add_argument('--nnz', dest='grid_nnz', type=int, nargs='+', default=[16, 32], help='Nonzero entries per item vector, defaults to 16 32')
    timing.add_argument('--repeats', type=int, default=200, help='Triplets timed per grid point, defaults to 200')
    timing.set_defaults(func=cmd_bench)

    return parser

def main(argv=None):
    '''Run the command line interface.

    Args:
        argv (list): Arguments, defaults to None (*sys.argv*)

    Returns:
        int: Exit code
    '''
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help, --version, and usage errors
        return e.code if isinstance(e.code, int) else 0

    enable_logging(bool(args.debug), args.log)

    try:
        return args.func(args)
    except ColdrecError as e:
        print('error: {}'.format(e), file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print('error: {}'.format(e), file=sys.stderr)
        return 1
    finally:
        for handler in list(_log.handlers):
            _log.removeHandler(handler)
            handler.close()


if __name__ == '__main__':
    sys.exit(main())
