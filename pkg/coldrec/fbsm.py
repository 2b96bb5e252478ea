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

'''Factorized bilinear similarity model (FBSM).

The similarity of two items is *f_i^T W f_j* with *W = D + V^T V*, where *D = diag(d)* weights each feature on its own and the h x n_F factor matrix *V* captures interactions between pairs of features. A user's preference for an item is the summed similarity of the item to the items the user liked.

The relative rank of a training triplet (u, i, j) and its gradients are computed from a *TripletWorkspace* holding *V f_u*, *V f_i* and *V delta_ij*, so that the cost does not depend on the size of the user's profile once *f_u* is known. *dense_oracle_relative_rank()* keeps the direct expansion around as a test oracle.

Typical usage example:

    ```
    model = FbsmModel.initialize(features.n_features, h=5, rng=numpy.random.default_rng(1))
    workspace = TripletWorkspace.build(model, f_u, features[i], features[j])
    relative_rank(model, workspace)
    grad_d(workspace)
    grad_V(workspace)
    ```
'''

__docformat__ = 'google'


import math
import heapq
import logging
from collections import namedtuple

import numpy as np

from coldrec.errors import DimensionError, DataError, WorkspaceError
from coldrec.sparse import (SparseVector, ProfileCache, accumulate_user_vector, check_factor_matrix, factor_times_sparse,
    sparse_hadamard, sparse_sub, weighted_hadamard_dot, _count)


_log = logging.getLogger(__name__)

ORACLE_FEATURE_CAP = 512
'''Largest n_F for which *dense_oracle_relative_rank()* will materialize W'''
INIT_SCALE = 0.01
'''Factor entries are initialized uniformly in +/- INIT_SCALE / sqrt(h)'''


class FbsmModel:
    '''FBSM parameters: diagonal weights *d* and factor matrix *V*.

    A model with *h = 0* is the pure diagonal (linear) model.

    Attributes:
        d (numpy.ndarray): Diagonal of D, length n_F
        V (numpy.ndarray): h x n_F factor matrix, column p is the latent factor of feature p
    '''

    kind = 'fbsm'

    def __init__(self, d, V):
        '''Initialize model parameters.

        Args:
            d (array-like): Diagonal weights
            V (array-like): h x n_F factor matrix

        Raises:
            DimensionError: *d* and *V* disagree on n_F
            DataError: A parameter is not finite
        '''
        d = np.array(d, dtype=np.float64).reshape(-1)

        if not np.all(np.isfinite(d)):
            raise DataError('Diagonal weights must be finite')

        self.d = d
        self.V = np.array(check_factor_matrix(V, len(d)), dtype=np.float64)

    @classmethod
    def initialize(cls, n_features, h, rng):
        '''Create a model with d = 1 and small random factors.

        Starting from d = 1 and V near 0 makes the initial model close to the cosine-like sum of feature overlaps.

        Args:
            n_features (int): Number of features n_F
            h (int): Latent dimension, 0 for the diagonal-only model
            rng (numpy.random.Generator): Random generator

        Returns:
            FbsmModel: Initialized model
        '''
        bound = INIT_SCALE / math.sqrt(h) if h > 0 else 0.0
        return cls(np.ones(n_features), rng.uniform(-bound, bound, size=(h, n_features)))

    @property
    def n_features(self):
        '''int: Number of features n_F'''
        return len(self.d)

    @property
    def h(self):
        '''int: Latent dimension'''
        return self.V.shape[0]

    def copy(self):
        '''Get an independent copy of the parameters.

        Returns:
            FbsmModel: Copied model
        '''
        return FbsmModel(self.d.copy(), self.V.copy())

    def is_finite(self):
        '''Check all parameters for NaN and infinity.

        Returns:
            bool: True if every parameter is finite
        '''
        return bool(np.all(np.isfinite(self.d)) and np.all(np.isfinite(self.V)))

    def check_features(self, features):
        '''Check that an item feature matrix matches the model.

        Args:
            features (ItemFeatureMatrix): Item features

        Raises:
            DimensionError: Feature counts differ
        '''
        if features.n_features != self.n_features:
            raise DimensionError('Model has {} features but the feature matrix has {}'.format(self.n_features, features.n_features))

    def profile_cache(self, features, prefs):
        '''Create a cache of user aggregates f_u.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining each profile

        Returns:
            ProfileCache: Profile cache
        '''
        return ProfileCache(features, prefs)

    def dense_W(self, cap=ORACLE_FEATURE_CAP):
        '''Materialize W = diag(d) + V^T V.

        Args:
            cap (int): Largest n_F allowed, defaults to ORACLE_FEATURE_CAP

        Returns:
            numpy.ndarray: Symmetric n_F x n_F matrix

        Raises:
            DimensionError: n_F exceeds *cap*
        '''
        if self.n_features > cap:
            raise DimensionError('Refusing to materialize W for {} features (cap {})'.format(self.n_features, cap))

        return np.diag(self.d) + self.V.T @ self.V

    def score_items(self, features, prefs, user, items, profiles=None, estimation_constraint=True):
        '''Score many items for one user at once.

        Used for ranking candidate items. Scores are computed as *F_c (d * f_u) + (F_c V^T)(V f_u)* over the candidate rows F_c, and items in R_u+ have their own contribution removed when *estimation_constraint* is set.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining the user profile
            user (int): Dense user id
            items (array-like): Dense ids of the items to score
            profiles (ProfileCache): Cache of f_u, defaults to None (computed on the fly)
            estimation_constraint (bool): Exclude an item from its own profile, defaults to True

        Returns:
            numpy.ndarray: Score of each item in *items*
        '''
        self.check_features(features)
        items = np.asarray(items, dtype=np.int64)
        f_u = _user_vector(features, prefs, user, profiles).to_dense(self.n_features)
        F = features.csr()[items]
        scores = F @ (self.d * f_u)

        if self.h > 0:
            FV = np.asarray(F @ self.V.T)
            scores = scores + FV @ (self.V @ f_u)

        if estimation_constraint and 0 <= user < prefs.n_users and len(prefs.positives[user]) > 0:
            own = np.isin(items, prefs.positives[user])

            if np.any(own):
                F_own = F[own]
                self_sim = np.asarray(F_own.multiply(F_own) @ self.d).reshape(-1)

                if self.h > 0:
                    self_sim = self_sim + np.sum(FV[own] ** 2, axis=1)

                scores[own] -= self_sim

        return np.asarray(scores, dtype=np.float64).reshape(-1)


def _user_vector(features, prefs, user, profiles):
    if profiles is not None:
        return profiles.vector(user)

    if 0 <= user < prefs.n_users:
        return accumulate_user_vector(features, prefs.positives[user])

    return SparseVector()

def similarity(model, f_i, f_j):
    '''Bilinear similarity f_i^T (D + V^T V) f_j.

    The full V^T V is used, including the self-interaction terms of each feature.

    Args:
        model (FbsmModel): Model parameters
        f_i (SparseVector): First item feature vector
        f_j (SparseVector): Second item feature vector

    Returns:
        float: Similarity of the two items

    Raises:
        DimensionError: A vector is indexed beyond n_F
    '''
    linear = weighted_hadamard_dot(f_i, f_j, model.d)
    return linear + float(np.dot(factor_times_sparse(model.V, f_i), factor_times_sparse(model.V, f_j)))

def score(model, prefs, features, user, item, estimation_constraint=True, profiles=None):
    '''Estimated preference of a user for an item.

    With *estimation_constraint* set the item is excluded from the user's profile, so the score is the summed similarity to R_u+ without *item*. For a cold item (not in R_u+) both forms coincide.

    Args:
        model (FbsmModel): Model parameters
        prefs (PreferenceData): Preferences defining R_u+
        features (ItemFeatureMatrix): Item features
        user (int): Dense user id, unknown users have an empty profile
        item (int): Dense item id
        estimation_constraint (bool): Exclude *item* from its own profile, defaults to True
        profiles (ProfileCache): Cache of f_u, defaults to None

    Returns:
        float: Estimated preference r_ui
    '''
    model.check_features(features)
    f_i = features.row(item)
    f_u = _user_vector(features, prefs, user, profiles)

    if estimation_constraint and prefs.is_positive(user, item):
        f_u = sparse_sub(f_u, f_i)

    return similarity(model, f_i, f_u)


class TripletWorkspace:
    '''Cached quantities of one training triplet (u, i, j).

    Attributes:
        f_u (SparseVector): User aggregate, sum of the feature vectors of R_u+
        f_i (SparseVector): Positive item feature vector
        f_j (SparseVector): Negative item feature vector
        delta (SparseVector): f_i - f_j
        Vf_u (numpy.ndarray): V f_u
        Vf_i (numpy.ndarray): V f_i
        Vdelta (numpy.ndarray): V delta
    '''

    __slots__ = ('f_u', 'f_i', 'f_j', 'delta', 'Vf_u', 'Vf_i', 'Vdelta')

    def __init__(self, f_u, f_i, f_j, delta, Vf_u, Vf_i, Vdelta):
        self.f_u = f_u
        self.f_i = f_i
        self.f_j = f_j
        self.delta = delta
        self.Vf_u = Vf_u
        self.Vf_i = Vf_i
        self.Vdelta = Vdelta

    @classmethod
    def build(cls, model, f_u, f_i, f_j):
        '''Compute the cached quantities of a triplet.

        Args:
            model (FbsmModel): Current parameters (only V is read)
            f_u (SparseVector): User aggregate including f_i
            f_i (SparseVector): Positive item feature vector
            f_j (SparseVector): Negative item feature vector

        Returns:
            TripletWorkspace: Coherent workspace
        '''
        return cls.build_from_factors(model.V, f_u, f_i, f_j)

    @classmethod
    def build_from_factors(cls, V, f_u, f_i, f_j):
        '''Compute the cached quantities of a triplet from a bare factor matrix.

        Args:
            V (numpy.ndarray): h x n_F factor matrix
            f_u (SparseVector): User aggregate including f_i
            f_i (SparseVector): Positive item feature vector
            f_j (SparseVector): Negative item feature vector

        Returns:
            TripletWorkspace: Coherent workspace
        '''
        delta = sparse_sub(f_i, f_j)
        return cls(f_u, f_i, f_j, delta, factor_times_sparse(V, f_u), factor_times_sparse(V, f_i), factor_times_sparse(V, delta))

    def check(self, V):
        '''Verify that the cached products match the factor matrix.

        Args:
            V (numpy.ndarray): Current h x n_F factor matrix

        Raises:
            WorkspaceError: A cached product is stale
        '''
        for name, vector, cached in (('V f_u', self.f_u, self.Vf_u), ('V f_i', self.f_i, self.Vf_i), ('V delta', self.delta, self.Vdelta)):
            if not np.array_equal(factor_times_sparse(V, vector), cached):
                raise WorkspaceError('Stale triplet workspace: cached {} does not match V'.format(name))


class ColumnGradient(namedtuple('ColumnGradient', ['columns', 'values'])):
    '''Gradient with respect to V, stored for the columns where it can be nonzero.

    Attributes:
        columns (numpy.ndarray): Sorted feature ids p
        values (numpy.ndarray): h x len(columns) matrix, column k is the gradient for v_p with p = columns[k]
    '''

    __slots__ = ()

    def to_dense(self, n_features):
        '''Expand to a dense h x n_F matrix.

        Args:
            n_features (int): Number of features n_F

        Returns:
            numpy.ndarray: Dense gradient
        '''
        dense = np.zeros((self.values.shape[0], n_features))
        dense[:, self.columns] = self.values
        return dense


def relative_rank(model, workspace, debug=False):
    '''Relative rank r_uij = r_ui - r_uj of a triplet.

    Computed as *(delta^T D f_u - f_i^T D f_i) + ((V delta)^T (V f_u) - (V f_i)^T (V f_i))*, where the score of the positive item obeys the estimation constraint and the score of the negative item uses the whole profile.

    Args:
        model (FbsmModel): Model parameters
        workspace (TripletWorkspace): Workspace built from the current V
        debug (bool): Verify workspace coherence first, defaults to False

    Returns:
        float: Relative rank

    Raises:
        WorkspaceError: *debug* is set and the workspace is stale
    '''
    if debug:
        workspace.check(model.V)

    diagonal = weighted_hadamard_dot(workspace.delta, workspace.f_u, model.d) - weighted_hadamard_dot(workspace.f_i, workspace.f_i, model.d)
    _count('dense', 2 * len(workspace.Vf_u))
    low_rank = float(np.dot(workspace.Vdelta, workspace.Vf_u)) - float(np.dot(workspace.Vf_i, workspace.Vf_i))
    return diagonal + low_rank

def grad_d(workspace):
    '''Gradient of the relative rank with respect to the diagonal weights.

    Args:
        workspace (TripletWorkspace): Triplet workspace

    Returns:
        SparseVector: delta * f_u - f_i * f_i (elementwise), supported on the supports of delta and f_i
    '''
    return sparse_sub(sparse_hadamard(workspace.delta, workspace.f_u), sparse_hadamard(workspace.f_i, workspace.f_i))

def _values_on(vector, columns):
    positions = np.searchsorted(vector.indices, columns)
    positions = np.minimum(positions, max(len(vector.indices) - 1, 0))
    values = np.zeros(len(columns))

    if len(vector.indices) > 0:
        hit = vector.indices[positions] == columns
        values[hit] = vector.values[positions[hit]]

    return values

def grad_V(workspace):
    '''Gradient of the relative rank with respect to the factor matrix.

    Column p of the gradient is *delta_p (V f_u) + f_u,p (V delta) - 2 f_i,p (V f_i)*. It is nonzero only for features in the supports of delta, f_u and f_i, which are the columns returned.

    Args:
        workspace (TripletWorkspace): Triplet workspace

    Returns:
        ColumnGradient: Gradient columns
    '''
    columns = np.union1d(np.union1d(workspace.delta.indices, workspace.f_u.indices), workspace.f_i.indices)
    _count('merge', len(workspace.delta) + len(workspace.f_u) + len(workspace.f_i))
    _count('dense', 3 * len(columns) * len(workspace.Vf_u))
    values = (np.outer(workspace.Vf_u, _values_on(workspace.delta, columns))
        + np.outer(workspace.Vdelta, _values_on(workspace.f_u, columns))
        - 2.0 * np.outer(workspace.Vf_i, _values_on(workspace.f_i, columns)))
    return ColumnGradient(columns, values)

def dense_oracle_relative_rank(model, prefs, features, user, i, j, cap=ORACLE_FEATURE_CAP):
    '''Relative rank by direct summation over the user's profile.

    Materializes W = diag(d) + V^T V and sums *f_i^T W f_q* over R_u+ without i, minus *f_j^T W f_q* over R_u+. Intended for verifying the fast path on small instances.

    Args:
        model (FbsmModel): Model parameters
        prefs (PreferenceData): Preferences defining R_u+
        features (ItemFeatureMatrix): Item features
        user (int): Dense user id
        i (int): Positive item id
        j (int): Negative item id
        cap (int): Largest n_F allowed, defaults to ORACLE_FEATURE_CAP

    Returns:
        float: Relative rank

    Raises:
        DimensionError: n_F exceeds *cap*
    '''
    W = model.dense_W(cap)
    f_i = features.row(i).to_dense(model.n_features)
    f_j = features.row(j).to_dense(model.n_features)
    r_ui = 0.0
    r_uj = 0.0

    for q in prefs.positives[user]:
        f_q = features.row(int(q)).to_dense(model.n_features)

        if q != i:
            r_ui += f_i @ W @ f_q

        if q != j:
            r_uj += f_j @ W @ f_q

    return float(r_ui - r_uj)

def top_interactions(model, k=10, vocabulary=None, block_size=1024):
    '''Strongest learned interactions between pairs of distinct features.

    Scans V^T V one block of columns at a time, so n_F x n_F is never held in memory at once.

    Args:
        model (FbsmModel): Model parameters
        k (int): Number of pairs to return, defaults to 10
        vocabulary (coldrec.dataio.VocabularyMap): Feature names, defaults to None (ids only)
        block_size (int): Columns per block, defaults to 1024

    Returns:
        list: `[(p, q, weight), ...]` with p < q sorted by decreasing weight, or `[(term_p, term_q, weight), ...]` if *vocabulary* is given
    '''
    if model.h == 0 or k <= 0:
        return []

    n_features = model.n_features
    best = []

    for start in range(0, n_features, block_size):
        stop = min(start + block_size, n_features)
        block = model.V[:, start:stop].T @ model.V
        rows, cols = np.triu_indices(stop - start, k=1, m=n_features - start)
        weights = block[:, start:][rows, cols]

        if len(weights) > k:
            top = np.argpartition(-weights, k - 1)[:k]
        else:
            top = np.arange(len(weights))

        for t in top:
            entry = (float(weights[t]), -(start + int(rows[t])), -(start + int(cols[t])))

            if len(best) < k:
                heapq.heappush(best, entry)
            else:
                heapq.heappushpop(best, entry)

    pairs = [(-p, -q, w) for w, p, q in sorted(best, reverse=True)]

    if vocabulary is not None:
        pairs = [(vocabulary.terms[p], vocabulary.terms[q], w) for p, q, w in pairs]

    return pairs
