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

'''BPR training of FBSM and UFSM by stochastic gradient descent.

Each major iteration (epoch) draws as many (user, positive item, negative item) triplets as there are positive preferences in the training data, picking users in proportion to the size of their profile. Every triplet updates the parameters with

    D   = D   + alpha_d (tau * grad_D r_uij   - 2 beta D)
    v_p = v_p + alpha_v (tau * grad_v_p r_uij - 2 lambda v_p)

where *tau = sigmoid(-r_uij)*. The regularization decay of factor columns that a triplet does not touch is deferred until the column is next read, which gives the same result as decaying every column at every step.

After each epoch the model is evaluated on the validation items; the best model by validation Rec@n is returned.

Typical usage example:

    ```
    cfg = TrainConfig(h=5, lambda_v=0.25, beta_d=10, max_epochs=50)
    model, log = train(prefs_train, prefs_val, features, cfg)
    log.write('train.log')
    ```
'''

__docformat__ = 'google'


import math
import time
import logging
import dataclasses
from collections import namedtuple

import numpy as np
from scipy.special import expit

from coldrec import evaluator
from coldrec.errors import ConfigError, DivergenceError
from coldrec.sparse import ProfileCache, factor_times_sparse, sparse_sub
from coldrec.fbsm import FbsmModel, TripletWorkspace, relative_rank, grad_d, grad_V
from coldrec.baselines import LinearSimilarityModel, linear_relative_rank, linear_gradients


_log = logging.getLogger(__name__)

MODEL_KINDS = ('fbsm', 'ufsm', 'cosim')
'''Model kinds known to the command line interface (cosim has no training)'''


@dataclasses.dataclass
class TrainConfig:
    '''Training hyperparameters.

    Attributes:
        model (str): 'fbsm' or 'ufsm', defaults to 'fbsm'
        h (int): FBSM latent dimension, 0 for the diagonal-only model, defaults to 5
        l (int): UFSM number of global similarity functions, defaults to 1
        alpha_d (float): Learning rate of d (and of the UFSM weights and memberships), defaults to 0.01
        alpha_v (float): Learning rate of V, defaults to 0.001
        lambda_v (float): Regularization weight of V, defaults to 0.01
        beta_d (float): Regularization weight of D, defaults to 0.01
        mu_w (float): UFSM regularization weight of the global weight vectors, defaults to 0.01
        mu_m (float): UFSM regularization weight of the memberships, defaults to None (same as *mu_w*)
        max_epochs (int): Maximum number of epochs, defaults to 100
        patience (int): Epochs without validation improvement before stopping, defaults to 10
        seed (int): Random seed, defaults to 1
        eval_n (int): Cutoff of the validation Rec@n, defaults to 10
        conventional_recall (bool): Divide validation hits by the number of relevant items, defaults to False
        tolerance (float): Relative loss change regarded as converged, defaults to 1e-5
        convergence_epochs (int): Consecutive converged epochs before stopping, defaults to 3
        rejection_cap (int): Rejection sampling attempts before enumerating negatives, defaults to 64
        cache_user_factors (bool): Reuse V f_u per user within an epoch (approximate), defaults to False
        debug (bool): Verify workspace coherence on every triplet, defaults to False
        workers (int): Threads used for validation scoring, defaults to 1
    '''
    model: str = 'fbsm'
    h: int = 5
    l: int = 1
    alpha_d: float = 0.01
    alpha_v: float = 0.001
    lambda_v: float = 0.01
    beta_d: float = 0.01
    mu_w: float = 0.01
    mu_m: float = None
    max_epochs: int = 100
    patience: int = 10
    seed: int = 1
    eval_n: int = 10
    conventional_recall: bool = False
    tolerance: float = 1e-5
    convergence_epochs: int = 3
    rejection_cap: int = 64
    cache_user_factors: bool = False
    debug: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.model not in ('fbsm', 'ufsm'):
            if self.model == 'cosim':
                raise ConfigError('cosim has no training, use it directly for evaluation')
            raise ConfigError('Unknown model kind \'{}\''.format(self.model))

        if self.mu_m is None:
            self.mu_m = self.mu_w

        for name in ('alpha_d', 'alpha_v', 'lambda_v', 'beta_d', 'mu_w', 'mu_m', 'tolerance'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError('{} must be a finite non-negative number, got {}'.format(name, value))

        if self.h < 0:
            raise ConfigError('h must be >= 0')
        if self.l < 1:
            raise ConfigError('l must be >= 1')
        if self.patience < 1:
            raise ConfigError('patience must be >= 1')
        if self.max_epochs < 0:
            raise ConfigError('max_epochs must be >= 0')
        if self.eval_n < 1:
            raise ConfigError('eval_n must be >= 1')
        if self.workers < 1:
            raise ConfigError('workers must be >= 1')


Triplet = namedtuple('Triplet', ['user', 'pos', 'neg'])
Triplet.__doc__ = '''Training triplet: *pos* is in R_u+, *neg* is not.'''

EpochStats = namedtuple('EpochStats', ['loss', 'triplets', 'skipped'])
EpochStats.__doc__ = '''Result of one SGD epoch: summed BPR loss of the processed triplets (before each update), processed and skipped triplet counts.'''

EpochRecord = namedtuple('EpochRecord', ['epoch', 'loss', 'val_rec', 'val_dcg', 'seconds'])


def _triplet_rank(model, workspace, user, debug=False):
    if isinstance(model, LinearSimilarityModel):
        return linear_relative_rank(model, workspace, user)

    return relative_rank(model, workspace, debug=debug)

def _workspace(model, f_u, f_i, f_j):
    if isinstance(model, LinearSimilarityModel):
        return TripletWorkspace(f_u, f_i, f_j, sparse_sub(f_i, f_j), None, None, None)

    return TripletWorkspace.build(model, f_u, f_i, f_j)

def bpr_loss(model, prefs, features, sample, profiles=None):
    '''BPR loss of a sample of triplets.

    Computes *-sum ln sigmoid(r_uij)* as *sum log(1 + exp(-r_uij))* in a form that stays finite for large |r_uij|.

    Args:
        model (FbsmModel or LinearSimilarityModel): Model parameters
        prefs (PreferenceData): Training preferences
        features (ItemFeatureMatrix): Item features
        sample (list): *Triplet* objects
        profiles (coldrec.sparse.ProfileCache): Cache of f_u, defaults to None

    Returns:
        float: Loss
    '''
    profiles = profiles if profiles is not None else ProfileCache(features, prefs)
    loss = 0.0

    for triplet in sample:
        workspace = _workspace(model, profiles.vector(triplet.user), features.row(triplet.pos), features.row(triplet.neg))
        loss += float(np.logaddexp(0.0, -_triplet_rank(model, workspace, triplet.user)))

    return loss

def sample_triplet(prefs, user, rng, train_items=None, rejection_cap=64):
    '''Sample a training triplet for a user.

    The positive item is uniform over R_u+. The negative item is uniform over the user's explicit negatives when there are any, otherwise uniform over the training items not in R_u+ (rejection sampling first, then enumeration).

    Args:
        prefs (PreferenceData): Training preferences
        user (int): Dense user id
        rng (numpy.random.Generator): Random generator
        train_items (numpy.ndarray): Sorted training item ids, defaults to None (all items)
        rejection_cap (int): Rejection attempts before enumerating, defaults to 64

    Returns:
        Triplet: Sampled triplet, or None if the user has no positive or no valid negative (skip)
    '''
    positives = prefs.positives[user]

    if train_items is not None:
        positives = positives[np.isin(positives, train_items)]

    if len(positives) == 0:
        return None

    pos = int(positives[rng.integers(len(positives))])
    negatives = prefs.explicit_negatives(user)

    if train_items is not None and len(negatives) > 0:
        negatives = negatives[np.isin(negatives, train_items)]

    if len(negatives) > 0:
        return Triplet(user, pos, int(negatives[rng.integers(len(negatives))]))

    candidates = np.arange(prefs.n_items) if train_items is None else train_items
    liked = prefs.positive_set(user)

    for _ in range(rejection_cap):
        neg = int(candidates[rng.integers(len(candidates))])

        if neg not in liked:
            return Triplet(user, pos, neg)

    candidates = np.setdiff1d(candidates, prefs.positives[user], assume_unique=True)

    if len(candidates) == 0:
        return None

    return Triplet(user, pos, int(candidates[rng.integers(len(candidates))]))


class _LazyDecay:
    '''Deferred multiplicative decay of factor columns.

    Column p has been brought up to date through step *last[p]*; reading it at step *t* first multiplies it by *factor ** (t - last[p])*.
    '''

    def __init__(self, n_features, factor):
        self.factor = factor
        self.step = 0
        self.last = np.zeros(n_features, dtype=np.int64)

    def sync(self, V, columns):
        if self.factor == 1.0 or len(columns) == 0:
            return

        lag = self.step - self.last[columns]
        stale = lag > 0

        if np.any(stale):
            stale_columns = columns[stale]
            V[:, stale_columns] *= self.factor ** lag[stale]
            self.last[stale_columns] = self.step

    def touch(self, columns):
        self.last[columns] = self.step + 1

    def advance(self):
        self.step += 1

    def flush(self, V):
        self.sync(V, np.arange(V.shape[1]))


def _check_finite(model, triplet, cfg, rank):
    if not (math.isfinite(rank) and model.is_finite()):
        raise DivergenceError('Non-finite parameters after triplet (u={}, i={}, j={}) with alpha_d={}, alpha_v={}'.format(
            triplet.user, triplet.pos, triplet.neg, cfg.alpha_d, cfg.alpha_v))

def _fbsm_step(model, triplet, workspace, cfg, decay):
    rank = relative_rank(model, workspace, debug=cfg.debug)
    tau = float(expit(-rank))
    g_d = grad_d(workspace)
    g_V = grad_V(workspace)

    model.d *= 1.0 - 2.0 * cfg.alpha_d * cfg.beta_d
    model.d[g_d.indices] += cfg.alpha_d * tau * g_d.values

    if model.h > 0:
        columns = g_V.columns
        model.V[:, columns] = (1.0 - 2.0 * cfg.alpha_v * cfg.lambda_v) * model.V[:, columns] + cfg.alpha_v * tau * g_V.values
        decay.touch(columns)

    decay.advance()
    return rank

def _ufsm_step(model, triplet, workspace, cfg):
    rank = linear_relative_rank(model, workspace, triplet.user)
    tau = float(expit(-rank))
    g = linear_gradients(model, workspace, triplet.user)

    model.W *= 1.0 - 2.0 * cfg.alpha_d * cfg.mu_w
    model.W[:, g.columns] += cfg.alpha_d * tau * g.w_values

    if model.l > 1 and 0 <= triplet.user < model.n_users:
        model.M[triplet.user] = (1.0 - 2.0 * cfg.alpha_d * cfg.mu_m) * model.M[triplet.user] + cfg.alpha_d * tau * g.m_values

    return rank

def sgd_epoch(model, prefs, features, cfg, rng, train_items=None, profiles=None):
    '''Run one major SGD iteration.

    Draws as many triplets as there are positive training preferences; users are picked in proportion to their number of positives and each contributes one sampled (i, j) pair per draw.

    Args:
        model (FbsmModel or LinearSimilarityModel): Parameters, updated in place
        prefs (PreferenceData): Training preferences
        features (ItemFeatureMatrix): Item features
        cfg (TrainConfig): Hyperparameters
        rng (numpy.random.Generator): Random generator
        train_items (numpy.ndarray): Sorted training item ids, defaults to None (all items)
        profiles (coldrec.sparse.ProfileCache): Cache of f_u, defaults to None

    Returns:
        EpochStats: Loss estimate and triplet counts

    Raises:
        DivergenceError: A parameter became non-finite
    '''
    model.check_features(features)
    profiles = profiles if profiles is not None else ProfileCache(features, prefs)
    counts = np.array([len(items) for items in prefs.positives], dtype=np.float64)
    n_draws = int(counts.sum())

    if n_draws == 0:
        return EpochStats(0.0, 0, 0)

    users = rng.choice(prefs.n_users, size=n_draws, p=counts / counts.sum())
    is_fbsm = isinstance(model, FbsmModel)
    decay = _LazyDecay(model.n_features, 1.0 - 2.0 * cfg.alpha_v * cfg.lambda_v) if is_fbsm else None
    user_factors = {}
    loss = 0.0
    processed = 0
    skipped = 0

    for user in users:
        triplet = sample_triplet(prefs, int(user), rng, train_items, cfg.rejection_cap)

        if triplet is None:
            skipped += 1
            continue

        f_u = profiles.vector(triplet.user)
        f_i = features.row(triplet.pos)
        f_j = features.row(triplet.neg)

        if is_fbsm:
            decay.sync(model.V, np.union1d(np.union1d(f_u.indices, f_i.indices), f_j.indices))

            if cfg.cache_user_factors:
                Vf_u = user_factors.get(triplet.user)
                if Vf_u is None:
                    Vf_u = user_factors[triplet.user] = factor_times_sparse(model.V, f_u)
                delta = sparse_sub(f_i, f_j)
                workspace = TripletWorkspace(f_u, f_i, f_j, delta, Vf_u, factor_times_sparse(model.V, f_i), factor_times_sparse(model.V, delta))
            else:
                workspace = TripletWorkspace.build(model, f_u, f_i, f_j)

            rank = _fbsm_step(model, triplet, workspace, cfg, decay)
        else:
            rank = _ufsm_step(model, triplet, _workspace(model, f_u, f_i, f_j), cfg)

        _check_finite(model, triplet, cfg, rank)
        loss += float(np.logaddexp(0.0, -rank))
        processed += 1

    if is_fbsm:
        decay.flush(model.V)

    if skipped > 0:
        _log.debug('Skipped %d of %d draws without a valid triplet', skipped, n_draws)

    return EpochStats(loss, processed, skipped)


class TrainingLog:
    '''Per-epoch training record.

    Epoch 0 is the initial model before any update.

    Attributes:
        records (list): *EpochRecord* per epoch
        best_epoch (int): Epoch of the returned model
        stop_reason (str): 'max_epochs', 'patience', or 'converged'
    '''

    def __init__(self):
        self.records = []
        self.best_epoch = 0
        self.stop_reason = None

    def append(self, record):
        '''Add an epoch record.

        Args:
            record (EpochRecord): Epoch record
        '''
        self.records.append(record)

    def lines(self, timing=True):
        '''Format records as tab-separated lines.

        Args:
            timing (bool): Include the wall time column, defaults to True

        Returns:
            list: Lines without trailing newlines
        '''
        lines = []

        for record in self.records:
            fields = [str(record.epoch), repr(float(record.loss)), repr(float(record.val_rec)), repr(float(record.val_dcg))]

            if timing:
                fields.append('{:.3f}'.format(record.seconds))

            lines.append('\t'.join(fields))

        return lines

    def write(self, path, header=None, timing=True):
        '''Write the log file.

        Format: optional `# ...` header lines, then `epoch loss val_rec val_dcg seconds` per line. Without timing the seconds column is left out and records of identical runs are byte-identical.

        Args:
            path (str): Output file path
            header (str): Text echoed as comment lines, defaults to None
            timing (bool): Include the wall time column, defaults to True
        '''
        with open(path, 'w', encoding='utf-8') as fd:
            if header:
                for line in header.splitlines():
                    fd.write('# ' + line + '\n')

            columns = ['epoch', 'loss', 'val_rec', 'val_dcg'] + (['seconds'] if timing else [])
            fd.write('# ' + '\t'.join(columns) + '\n')

            for line in self.lines(timing):
                fd.write(line + '\n')


def initialize_model(cfg, features, n_users, rng):
    '''Create the initial model for a training run.

    Args:
        cfg (TrainConfig): Hyperparameters
        features (ItemFeatureMatrix): Item features
        n_users (int): Number of users
        rng (numpy.random.Generator): Random generator

    Returns:
        FbsmModel or LinearSimilarityModel: Initial model
    '''
    if cfg.model == 'ufsm':
        return LinearSimilarityModel.initialize(features.n_features, n_users, cfg.l, rng)

    return FbsmModel.initialize(features.n_features, cfg.h, rng)

def _items_of(prefs):
    items = [items for items in prefs.positives]

    if prefs.negatives is not None:
        items.extend(prefs.negatives)

    if len(items) == 0:
        return np.zeros(0, dtype=np.int64)

    return np.unique(np.concatenate(items))

def train(prefs_train, prefs_val, features, cfg, train_items=None, val_items=None, model=None):
    '''Train a model with early stopping on validation Rec@n.

    The model is evaluated on the validation items before training (epoch 0) and after every epoch, and a snapshot is kept whenever validation Rec@n strictly improves. Training stops after *max_epochs*, after *patience* epochs without improvement, or when the relative change of the epoch loss stays below *tolerance* for *convergence_epochs* epochs.

    Args:
        prefs_train (PreferenceData): Training preferences
        prefs_val (PreferenceData): Validation preferences
        features (ItemFeatureMatrix): Item features
        cfg (TrainConfig): Hyperparameters
        train_items (array-like): Training item ids, defaults to None (items with training preferences)
        val_items (array-like): All validation items, defaults to None (items with validation preferences, which drops split items nobody rated)
        model (FbsmModel or LinearSimilarityModel): Initial model, defaults to None (initialized from *cfg.seed*)

    Returns:
        tuple: (best model, *TrainingLog*)

    Raises:
        ConfigError: No user has a validation positive
        DivergenceError: A parameter became non-finite
    '''
    if len(prefs_val.active_users()) == 0:
        raise ConfigError('Validation split has no user with a positive preference')

    rng = np.random.default_rng(cfg.seed)
    train_items = _items_of(prefs_train) if train_items is None else np.unique(np.asarray(train_items, dtype=np.int64))
    if val_items is None:
        _log.warning('No validation items given, ranking only items with validation preferences')
        val_items = _items_of(prefs_val)
    else:
        val_items = np.unique(np.asarray(val_items, dtype=np.int64))

    if model is None:
        model = initialize_model(cfg, features, prefs_train.n_users, rng)

    model.check_features(features)
    profiles = ProfileCache(features, prefs_train)
    log = TrainingLog()

    start = time.time()
    report = evaluator.evaluate(model, features, prefs_train, prefs_val, cfg.eval_n, candidates=val_items,
        conventional_recall=cfg.conventional_recall, workers=cfg.workers, profiles=profiles)
    log.append(EpochRecord(0, float('nan'), report.mean_rec, report.mean_dcg, time.time() - start))
    best_model = model.copy()
    best_rec = report.mean_rec
    since_best = 0
    converged_epochs = 0
    previous_loss = None
    log.stop_reason = 'max_epochs'

    for epoch in range(1, cfg.max_epochs + 1):
        start = time.time()
        stats = sgd_epoch(model, prefs_train, features, cfg, rng, train_items, profiles)
        report = evaluator.evaluate(model, features, prefs_train, prefs_val, cfg.eval_n, candidates=val_items,
            conventional_recall=cfg.conventional_recall, workers=cfg.workers, profiles=profiles)
        seconds = time.time() - start
        log.append(EpochRecord(epoch, stats.loss, report.mean_rec, report.mean_dcg, seconds))
        _log.info('epoch %d: loss %.6g, val Rec@%d %.4f, val DCG@%d %.4f (%.2f s)', epoch, stats.loss, cfg.eval_n, report.mean_rec,
            cfg.eval_n, report.mean_dcg, seconds)

        if report.mean_rec > best_rec:
            best_rec = report.mean_rec
            best_model = model.copy()
            log.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1

        if previous_loss is not None and abs(stats.loss - previous_loss) <= cfg.tolerance * max(abs(previous_loss), 1e-300):
            converged_epochs += 1
        else:
            converged_epochs = 0

        previous_loss = stats.loss

        if since_best >= cfg.patience:
            log.stop_reason = 'patience'
            break

        if converged_epochs >= cfg.convergence_epochs:
            log.stop_reason = 'converged'
            break

    _log.info('Training stopped (%s), best epoch %d with val Rec@%d %.4f', log.stop_reason, log.best_epoch, cfg.eval_n, best_rec)
    return best_model, log
