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

'''Baseline similarity models: cosine similarity (CoSim) and the user-specific linear feature similarity model (UFSM).

CoSim scores an item by summing its cosine similarity to the items in the user's profile and has no parameters. UFSM learns *l* global linear similarity functions, each a weight vector over features, and mixes them per user with membership coefficients.

Both scorers share the scoring interface of *coldrec.fbsm.FbsmModel*: *profile_cache()* and *score_items()*.
'''

__docformat__ = 'google'


import logging
from collections import namedtuple

import numpy as np

from coldrec.errors import DataError, DimensionError
from coldrec.sparse import ProfileCache, accumulate_user_vector, sparse_dot, sparse_sub, weighted_hadamard_dot, SparseVector
from coldrec.fbsm import grad_d


_log = logging.getLogger(__name__)


def cosim_score(features, prefs, user, item):
    '''Summed cosine similarity of an item to the user's other preferred items.

    The cosine of two vectors is 0 when either of them has no features.

    Args:
        features (ItemFeatureMatrix): Item features (not necessarily normalized)
        prefs (PreferenceData): Preferences defining R_u+
        user (int): Dense user id
        item (int): Dense item id

    Returns:
        float: Sum of cos(f_i, f_j) over R_u+ without *item*
    '''
    f_i = features.row(item).l2_normalized()

    if not 0 <= user < prefs.n_users:
        return 0.0

    profile = [features.row(int(j)).l2_normalized() for j in prefs.positives[user] if j != item]
    total = 0.0

    for f_j in profile:
        total += sparse_dot(f_i, f_j)

    return total


class CosimScorer:
    '''Cosine similarity scorer.

    Feature rows are L2-normalized once, after which the score of an item is the dot product of its normalized features with the sum of the user's normalized item features (minus the item itself when it is in the profile).

    Attributes:
        features (ItemFeatureMatrix): Row-normalized item features
    '''

    kind = 'cosim'

    def __init__(self, features):
        '''Initialize cosine scorer.

        Args:
            features (ItemFeatureMatrix): Item features
        '''
        self.features = features.l2_normalized()
        self._source = features

    def _normalized(self, features):
        if features is self._source or features is self.features:
            return self.features

        return features.l2_normalized()

    def profile_cache(self, features, prefs):
        '''Create a cache of normalized user aggregates.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining each profile

        Returns:
            coldrec.sparse.ProfileCache: Cache over the normalized features
        '''
        return ProfileCache(self._normalized(features), prefs)

    def score(self, prefs, user, item, profiles=None):
        '''Score one item for one user.

        Args:
            prefs (PreferenceData): Preferences defining R_u+
            user (int): Dense user id
            item (int): Dense item id
            profiles (coldrec.sparse.ProfileCache): Cache from *profile_cache()*, defaults to None

        Returns:
            float: Summed cosine similarity to R_u+ without *item*
        '''
        f_i = self.features.row(item)

        if profiles is not None:
            f_u = profiles.vector(user)
        elif 0 <= user < prefs.n_users:
            f_u = accumulate_user_vector(self.features, prefs.positives[user])
        else:
            f_u = SparseVector()

        if prefs.is_positive(user, item):
            f_u = sparse_sub(f_u, f_i)

        return sparse_dot(f_i, f_u)

    def score_items(self, features, prefs, user, items, profiles=None):
        '''Score many items for one user.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining R_u+
            user (int): Dense user id
            items (array-like): Dense item ids
            profiles (coldrec.sparse.ProfileCache): Cache from *profile_cache()*, defaults to None

        Returns:
            numpy.ndarray: Score of each item
        '''
        normalized = self._normalized(features)
        profiles = profiles if profiles is not None else ProfileCache(normalized, prefs)
        items = np.asarray(items, dtype=np.int64)
        f_u = profiles.vector(user).to_dense(normalized.n_features)
        F = normalized.csr()[items]
        scores = np.asarray(F @ f_u, dtype=np.float64).reshape(-1)

        if 0 <= user < prefs.n_users and len(prefs.positives[user]) > 0:
            own = np.isin(items, prefs.positives[user])

            if np.any(own):
                scores[own] -= np.asarray(F[own].multiply(F[own]).sum(axis=1)).reshape(-1)

        return scores


LinearGradient = namedtuple('LinearGradient', ['columns', 'w_values', 'm_values'])
LinearGradient.__doc__ = '''Relative rank gradients of a UFSM triplet.

Attributes:
    columns (numpy.ndarray): Feature ids where the weight gradient can be nonzero
    w_values (numpy.ndarray): l x len(columns) gradient of the global weight vectors
    m_values (numpy.ndarray): Gradient of the user's l membership coefficients
'''


class LinearSimilarityModel:
    '''User-specific linear feature similarity model (UFSM).

    The similarity of items i and j for user u is *sum_d m_ud w_d^T (f_i * f_j)*. With a single global function (l = 1) the membership coefficient is fixed to 1 and the model reduces to one learned feature weight vector.

    Attributes:
        W (numpy.ndarray): l x n_F global similarity weight vectors
        M (numpy.ndarray): n_users x l membership coefficients
    '''

    kind = 'ufsm'

    def __init__(self, W, M):
        '''Initialize model parameters.

        Args:
            W (array-like): l x n_F weight vectors
            M (array-like): n_users x l membership coefficients

        Raises:
            DimensionError: *W* and *M* disagree on l, or l < 1
            DataError: A parameter is not finite
        '''
        self.W = np.array(W, dtype=np.float64, ndmin=2)
        self.M = np.array(M, dtype=np.float64, ndmin=2)

        if self.W.shape[0] < 1:
            raise DimensionError('UFSM needs at least one global similarity function')

        if self.M.shape[1] != self.W.shape[0]:
            raise DimensionError('Membership matrix has {} columns for {} similarity functions'.format(self.M.shape[1], self.W.shape[0]))

        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.M))):
            raise DataError('UFSM parameters must be finite')

        if self.l == 1:
            self.M[:] = 1.0

    @classmethod
    def initialize(cls, n_features, n_users, l, rng):
        '''Create a model with unit weights.

        With l > 1 the weights and memberships are perturbed slightly so the global functions can diverge during training.

        Args:
            n_features (int): Number of features n_F
            n_users (int): Number of users
            l (int): Number of global similarity functions
            rng (numpy.random.Generator): Random generator

        Returns:
            LinearSimilarityModel: Initialized model
        '''
        if l == 1:
            return cls(np.ones((1, n_features)), np.ones((n_users, 1)))

        W = 1.0 + rng.uniform(-0.01, 0.01, size=(l, n_features))
        M = 1.0 / l + rng.uniform(-0.01, 0.01, size=(n_users, l))
        return cls(W, M)

    @property
    def l(self):
        '''int: Number of global similarity functions'''
        return self.W.shape[0]

    @property
    def n_features(self):
        '''int: Number of features n_F'''
        return self.W.shape[1]

    @property
    def n_users(self):
        '''int: Number of users with membership coefficients'''
        return self.M.shape[0]

    def copy(self):
        '''Get an independent copy of the parameters.

        Returns:
            LinearSimilarityModel: Copied model
        '''
        return LinearSimilarityModel(self.W.copy(), self.M.copy())

    def is_finite(self):
        '''Check all parameters for NaN and infinity.

        Returns:
            bool: True if every parameter is finite
        '''
        return bool(np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.M)))

    def check_features(self, features):
        '''Check that an item feature matrix matches the model.

        Args:
            features (ItemFeatureMatrix): Item features

        Raises:
            DimensionError: Feature counts differ
        '''
        if features.n_features != self.n_features:
            raise DimensionError('Model has {} features but the feature matrix has {}'.format(self.n_features, features.n_features))

    def membership(self, user):
        '''Get the membership coefficients of a user.

        Users unseen during training get the mean coefficients of all users.

        Args:
            user (int): Dense user id

        Returns:
            numpy.ndarray: Length l coefficients
        '''
        if self.l == 1:
            return np.ones(1)

        if 0 <= user < self.n_users:
            return self.M[user]

        return self.M.mean(axis=0)

    def profile_cache(self, features, prefs):
        '''Create a cache of user aggregates.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining each profile

        Returns:
            coldrec.sparse.ProfileCache: Profile cache
        '''
        return ProfileCache(features, prefs)

    def score_items(self, features, prefs, user, items, profiles=None, estimation_constraint=True):
        '''Score many items for one user.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining R_u+
            user (int): Dense user id
            items (array-like): Dense item ids
            profiles (coldrec.sparse.ProfileCache): Cache of f_u, defaults to None
            estimation_constraint (bool): Exclude an item from its own profile, defaults to True

        Returns:
            numpy.ndarray: Score of each item
        '''
        self.check_features(features)
        profiles = profiles if profiles is not None else ProfileCache(features, prefs)
        items = np.asarray(items, dtype=np.int64)
        f_u = profiles.vector(user).to_dense(self.n_features)
        F = features.csr()[items]
        m = self.membership(user)
        own = None

        if estimation_constraint and 0 <= user < prefs.n_users and len(prefs.positives[user]) > 0:
            own = np.isin(items, prefs.positives[user])
            own = own if np.any(own) else None

        scores = None

        for d in range(self.l):
            s = np.asarray(F @ (self.W[d] * f_u), dtype=np.float64).reshape(-1)

            if own is not None:
                s[own] -= np.asarray(F[own].multiply(F[own]) @ self.W[d]).reshape(-1)

            scores = m[d] * s if scores is None else scores + m[d] * s

        return scores


def linear_score(model, features, prefs, user, item, estimation_constraint=True, profiles=None):
    '''Estimated preference of a user for an item under UFSM.

    Args:
        model (LinearSimilarityModel): Model parameters
        features (ItemFeatureMatrix): Item features
        prefs (PreferenceData): Preferences defining R_u+
        user (int): Dense user id
        item (int): Dense item id
        estimation_constraint (bool): Exclude *item* from its own profile, defaults to True
        profiles (coldrec.sparse.ProfileCache): Cache of f_u, defaults to None

    Returns:
        float: Estimated preference r_ui
    '''
    model.check_features(features)
    f_i = features.row(item)

    if profiles is not None:
        f_u = profiles.vector(user)
    elif 0 <= user < prefs.n_users:
        f_u = accumulate_user_vector(features, prefs.positives[user])
    else:
        f_u = SparseVector()

    if estimation_constraint and prefs.is_positive(user, item):
        f_u = sparse_sub(f_u, f_i)

    m = model.membership(user)
    scores = np.array([weighted_hadamard_dot(f_i, f_u, model.W[d]) for d in range(model.l)])
    return float(np.dot(m, scores))

def linear_relative_rank(model, workspace, user):
    '''Relative rank r_uij of a triplet under UFSM.

    Args:
        model (LinearSimilarityModel): Model parameters
        workspace (coldrec.fbsm.TripletWorkspace): Triplet workspace (only the sparse vectors are read)
        user (int): Dense user id

    Returns:
        float: Relative rank
    '''
    g = grad_d(workspace)
    per_function = model.W[:, g.indices] @ g.values
    return float(np.dot(model.membership(user), per_function))

def linear_gradients(model, workspace, user):
    '''Gradients of the UFSM relative rank of a triplet.

    With *g = delta * f_u - f_i * f_i*, the gradient for *w_d* is *m_ud g* and the gradient for *m_ud* is *w_d^T g*.

    Args:
        model (LinearSimilarityModel): Model parameters
        workspace (coldrec.fbsm.TripletWorkspace): Triplet workspace
        user (int): Dense user id

    Returns:
        LinearGradient: Weight and membership gradients
    '''
    g = grad_d(workspace)
    m = model.membership(user)
    w_values = np.outer(m, g.values)
    m_values = model.W[:, g.indices] @ g.values
    return LinearGradient(g.indices, w_values, m_values)
