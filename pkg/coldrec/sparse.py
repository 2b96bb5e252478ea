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

'''Sparse vector and matrix primitives shared by every model.

Item feature vectors are stored as sorted (index, value) coordinate lists, one per item, so that every kernel is either a merge-join of two sorted index lists or a gather of factor matrix columns. All values are 64-bit floats.

Kernels optionally report the work they perform to an *OpCounter* (see *counting()*), which is how the complexity of the fast relative rank path is checked without relying on wall clock time.

Typical usage example:

    ```
    a = SparseVector([0, 2], [1.0, 3.0])
    b = SparseVector([2], [2.0])
    sparse_dot(a, b)    # 6.0

    with counting() as counter:
        factor_times_sparse(V, a)
    counter.total()
    ```
'''

__docformat__ = 'google'


import math
import logging
import threading
import contextlib
from collections import Counter

import numpy as np
import scipy.sparse

from coldrec.errors import DimensionError, DataError


_log = logging.getLogger(__name__)
_counters = threading.local()


class OpCounter:
    '''Work counter for sparse and dense kernels.

    Counts are abstract units: one unit per sorted index visited during a merge-join and one unit per multiply-add of a dense gather.

    Attributes:
        counts (collections.Counter): Units by kernel name
    '''

    def __init__(self):
        self.counts = Counter()

    def add(self, kernel, units):
        '''Add work units for a kernel.

        Args:
            kernel (str): Kernel name
            units (int): Work units performed
        '''
        self.counts[kernel] += int(units)

    def total(self):
        '''Get total work units.

        Returns:
            int: Sum of units over all kernels
        '''
        return sum(self.counts.values())


@contextlib.contextmanager
def counting(counter=None):
    '''Count kernel work performed by the current thread inside a *with* block.

    Args:
        counter (OpCounter): Counter to accumulate into, defaults to a new counter

    Yields:
        OpCounter: Active counter
    '''
    counter = OpCounter() if counter is None else counter
    previous = getattr(_counters, 'active', None)
    _counters.active = counter

    try:
        yield counter
    finally:
        _counters.active = previous

def _count(kernel, units):
    counter = getattr(_counters, 'active', None)

    if counter is not None:
        counter.add(kernel, units)


class SparseVector:
    '''Immutable sparse vector of sorted unique feature ids and their values.

    Exact zeros are pruned at construction; values that are merely close to zero are kept.

    Attributes:
        indices (numpy.ndarray): Strictly increasing int64 feature ids (read-only)
        values (numpy.ndarray): float64 values aligned with *indices* (read-only)
    '''

    __slots__ = ('indices', 'values')

    def __init__(self, indices=(), values=()):
        '''Initialize sparse vector.

        Args:
            indices (iterable): Strictly increasing non-negative feature ids
            values (iterable): Values aligned with *indices*

        Raises:
            DataError: Lengths differ, ids are not strictly increasing or negative, or a value is not finite
        '''
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)

        if len(indices) != len(values):
            raise DataError('Sparse vector has {} indices but {} values'.format(len(indices), len(values)))

        if len(indices) > 0:
            if indices[0] < 0:
                raise DataError('Sparse vector feature ids must be non-negative')
            if np.any(np.diff(indices) <= 0):
                raise DataError('Sparse vector feature ids must be strictly increasing')
            if not np.all(np.isfinite(values)):
                raise DataError('Sparse vector values must be finite')

        keep = values != 0.0

        if not np.all(keep):
            indices = indices[keep]
            values = values[keep]

        indices.flags.writeable = False
        values.flags.writeable = False
        self.indices = indices
        self.values = values

    @classmethod
    def from_pairs(cls, pairs):
        '''Create a sparse vector from unordered (index, value) pairs.

        Values of repeated indices are summed.

        Args:
            pairs (iterable): (int, float) tuples

        Returns:
            SparseVector: Constructed vector
        '''
        merged = {}

        for index, value in pairs:
            merged[int(index)] = merged.get(int(index), 0.0) + float(value)

        keys = sorted(merged)
        return cls(keys, [merged[key] for key in keys])

    @classmethod
    def from_dense(cls, dense):
        '''Create a sparse vector from a dense array.

        Args:
            dense (array-like): One-dimensional values

        Returns:
            SparseVector: Vector holding the nonzero entries of *dense*
        '''
        dense = np.asarray(dense, dtype=np.float64).reshape(-1)
        indices = np.flatnonzero(dense)
        return cls(indices, dense[indices])

    def to_dense(self, n_features):
        '''Expand to a dense array.

        Args:
            n_features (int): Length of the dense array

        Returns:
            numpy.ndarray: Dense float64 array

        Raises:
            DimensionError: A stored index is not less than *n_features*
        '''
        _check_bound(self, n_features)
        dense = np.zeros(n_features)
        dense[self.indices] = self.values
        return dense

    def nnz(self):
        '''Get the number of stored entries.

        Returns:
            int: Number of nonzero entries
        '''
        return len(self.indices)

    def max_index(self):
        '''Get the largest stored feature id.

        Returns:
            int: Largest feature id, or -1 if the vector is empty
        '''
        return int(self.indices[-1]) if len(self.indices) > 0 else -1

    def get(self, index):
        '''Get the value of a feature.

        Args:
            index (int): Feature id

        Returns:
            float: Stored value, or 0.0 if *index* is not stored
        '''
        position = np.searchsorted(self.indices, index)

        if position < len(self.indices) and self.indices[position] == index:
            return float(self.values[position])

        return 0.0

    def norm(self):
        '''Get the Euclidean norm.

        Returns:
            float: L2 norm
        '''
        return math.sqrt(float(np.dot(self.values, self.values)))

    def scale(self, alpha):
        '''Multiply every value by a scalar.

        Args:
            alpha (float): Scale factor

        Returns:
            SparseVector: Scaled vector
        '''
        return SparseVector(self.indices, self.values * alpha)

    def l2_normalized(self):
        '''Divide by the Euclidean norm.

        Returns:
            SparseVector: Unit-length vector, or the empty vector if the norm is zero
        '''
        norm = self.norm()

        if norm == 0.0:
            return SparseVector()

        return SparseVector(self.indices, self.values / norm)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented

        return np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values)

    def __repr__(self):
        pairs = ', '.join('({}, {!r})'.format(int(i), float(v)) for i, v in zip(self.indices, self.values))
        return 'SparseVector([' + pairs + '])'


def _check_bound(vector, n_features):
    if vector.max_index() >= n_features:
        raise DimensionError('Feature id {} out of range for {} features'.format(vector.max_index(), n_features))

def _intersect(a, b):
    _count('merge', len(a.indices) + len(b.indices))
    return np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)

def sparse_dot(a, b):
    '''Dot product of two sparse vectors.

    Args:
        a (SparseVector): First vector
        b (SparseVector): Second vector

    Returns:
        float: Sum of products over shared indices, 0.0 for disjoint supports
    '''
    _, ia, ib = _intersect(a, b)
    return float(np.dot(a.values[ia], b.values[ib]))

def weighted_hadamard_dot(a, b, w, n_features=None):
    '''Weighted dot product *sum_k w_k a_k b_k* of two sparse vectors.

    Sparse vectors do not store n_F. Without *n_features*, *w* only has to cover the stored indices of *a* and *b*.

    Args:
        a (SparseVector): First vector
        b (SparseVector): Second vector
        w (numpy.ndarray): Dense weights of length n_F
        n_features (int): Expected length of *w*, defaults to None (not checked)

    Returns:
        float: Weighted sum of products over shared indices

    Raises:
        DimensionError: *w* is not one-dimensional, its length differs from *n_features*, or it is shorter than a stored index requires
    '''
    w = np.asarray(w, dtype=np.float64)

    if w.ndim != 1:
        raise DimensionError('Weight vector must be one-dimensional')

    if n_features is not None and len(w) != n_features:
        raise DimensionError('Weight vector has length {} but {} features were expected'.format(len(w), n_features))

    _check_bound(a, len(w))
    _check_bound(b, len(w))
    common, ia, ib = _intersect(a, b)
    return float(np.dot(w[common] * a.values[ia], b.values[ib]))

def _combine(a, b, sign):
    _count('merge', len(a.indices) + len(b.indices))
    union = np.union1d(a.indices, b.indices)
    values = np.zeros(len(union))
    values[np.searchsorted(union, a.indices)] += a.values

    if sign > 0:
        values[np.searchsorted(union, b.indices)] += b.values
    else:
        values[np.searchsorted(union, b.indices)] -= b.values

    return SparseVector(union, values)

def sparse_add(a, b):
    '''Sum of two sparse vectors with exact zeros pruned.

    Args:
        a (SparseVector): First vector
        b (SparseVector): Second vector

    Returns:
        SparseVector: a + b
    '''
    return _combine(a, b, 1)

def sparse_sub(a, b):
    '''Difference of two sparse vectors with exact zeros pruned.

    Args:
        a (SparseVector): Minuend
        b (SparseVector): Subtrahend

    Returns:
        SparseVector: a - b
    '''
    return _combine(a, b, -1)

def sparse_hadamard(a, b):
    '''Elementwise product of two sparse vectors.

    Args:
        a (SparseVector): First vector
        b (SparseVector): Second vector

    Returns:
        SparseVector: Vector supported on the shared indices
    '''
    common, ia, ib = _intersect(a, b)
    return SparseVector(common, a.values[ia] * b.values[ib])

def check_factor_matrix(V, n_features=None):
    '''Validate a dense h x n_F latent factor matrix.

    Column *p* of the matrix is the latent factor of feature *p*.

    Args:
        V (array-like): Factor matrix
        n_features (int): Expected number of columns, defaults to None (not checked)

    Returns:
        numpy.ndarray: *V* as a two-dimensional float64 array

    Raises:
        DimensionError: *V* is not two-dimensional or has the wrong number of columns
        DataError: *V* contains non-finite entries
    '''
    V = np.asarray(V, dtype=np.float64)

    if V.ndim != 2:
        raise DimensionError('Factor matrix must be two-dimensional, got shape {}'.format(V.shape))

    if n_features is not None and V.shape[1] != n_features:
        raise DimensionError('Factor matrix has {} columns, expected {}'.format(V.shape[1], n_features))

    if not np.all(np.isfinite(V)):
        raise DataError('Factor matrix entries must be finite')

    return V

def factor_times_sparse(V, x):
    '''Product of a dense h x n_F factor matrix and a sparse vector.

    Gathers the columns of *V* in the support of *x*, scales them by the values of *x* and accumulates them, at a cost of nnz(x) * h multiply-adds.

    Args:
        V (numpy.ndarray): h x n_F factor matrix
        x (SparseVector): Sparse vector indexed against the columns of *V*

    Returns:
        numpy.ndarray: Dense vector of length h

    Raises:
        DimensionError: A stored index of *x* is not a column of *V*
    '''
    _check_bound(x, V.shape[1])
    _count('gather', len(x.indices) * V.shape[0])
    return V[:, x.indices] @ x.values


class ItemFeatureMatrix:
    '''Item feature matrix F, one sparse row per item.

    Attributes:
        n_items (int): Number of items (rows)
        n_features (int): Number of features n_F (columns)
        rows (tuple): *SparseVector* feature vector of each item
        item_ids (tuple): External string id of each item, or None
    '''

    def __init__(self, rows, n_features, item_ids=None):
        '''Initialize item feature matrix.

        Args:
            rows (iterable): *SparseVector* per item
            n_features (int): Number of features
            item_ids (iterable): External string id per item, defaults to None

        Raises:
            DimensionError: A row index is not less than *n_features*, or the number of ids does not match the number of rows
        '''
        self.rows = tuple(rows)
        self.n_items = len(self.rows)
        self.n_features = int(n_features)
        self.item_ids = tuple(item_ids) if item_ids is not None else None
        self._csr = None
        self._item_index = None
        self._lock = threading.Lock()

        if self.n_features < 0:
            raise DimensionError('Number of features must be non-negative')

        for row in self.rows:
            _check_bound(row, self.n_features)

        if self.item_ids is not None and len(self.item_ids) != self.n_items:
            raise DimensionError('{} item ids given for {} rows'.format(len(self.item_ids), self.n_items))

    def __getitem__(self, item):
        return self.rows[item]

    def __len__(self):
        return self.n_items

    def row(self, item):
        '''Get the feature vector of an item.

        Args:
            item (int): Dense item id

        Returns:
            SparseVector: Feature vector f_i

        Raises:
            DimensionError: Invalid item id
        '''
        if not 0 <= item < self.n_items:
            raise DimensionError('Item id {} out of range for {} items'.format(item, self.n_items))

        return self.rows[item]

    def item_index(self):
        '''Get the mapping of external item ids to dense item ids.

        Returns:
            dict: *{item_id: dense_id, ...}*, empty if the matrix has no external ids
        '''
        if self._item_index is None:
            self._item_index = {item_id: i for i, item_id in enumerate(self.item_ids or ())}

        return self._item_index

    def nnz(self):
        '''Get the number of stored entries.

        Returns:
            int: Total nonzero entries over all rows
        '''
        return sum(len(row) for row in self.rows)

    def empty_rows(self):
        '''Get items without any features.

        Returns:
            list: Dense ids of items with an empty feature vector
        '''
        return [i for i, row in enumerate(self.rows) if len(row) == 0]

    def l2_normalized(self):
        '''Normalize every row to unit length.

        Returns:
            ItemFeatureMatrix: Row-normalized copy (empty rows stay empty)
        '''
        return ItemFeatureMatrix([row.l2_normalized() for row in self.rows], self.n_features, self.item_ids)

    def csr(self):
        '''Get the matrix as a scipy CSR matrix.

        The CSR matrix is built once and cached.

        Returns:
            scipy.sparse.csr_matrix: n_items x n_features matrix
        '''
        with self._lock:
            if self._csr is None:
                indptr = np.zeros(self.n_items + 1, dtype=np.int64)
                indptr[1:] = np.cumsum([len(row) for row in self.rows])

                if self.n_items > 0:
                    indices = np.concatenate([row.indices for row in self.rows])
                    data = np.concatenate([row.values for row in self.rows])
                else:
                    indices = np.zeros(0, dtype=np.int64)
                    data = np.zeros(0)

                self._csr = scipy.sparse.csr_matrix((data, indices, indptr), shape=(self.n_items, self.n_features))

            return self._csr


def accumulate_user_vector(features, items):
    '''Sum the feature vectors of a set of items.

    This is the user aggregate f_u when *items* is the user's set of preferred items.

    Args:
        features (ItemFeatureMatrix): Item features
        items (iterable): Dense item ids

    Returns:
        SparseVector: Elementwise sum of the item feature vectors

    Raises:
        DimensionError: Invalid item id
    '''
    rows = [features.row(int(item)) for item in items]

    if len(rows) == 0:
        return SparseVector()

    if len(rows) == 1:
        return rows[0]

    indices = np.concatenate([row.indices for row in rows])
    values = np.concatenate([row.values for row in rows])
    _count('merge', len(indices))
    union, inverse = np.unique(indices, return_inverse=True)
    return SparseVector(union, np.bincount(inverse.reshape(-1), weights=values, minlength=len(union)))


class PreferenceData:
    '''Binary user x item preference matrix R.

    Only membership is stored: *positives[u]* is R_u+ and *negatives[u]* holds the items user *u* explicitly did not like (if explicit negatives were kept).

    Attributes:
        n_users (int): Number of users
        n_items (int): Number of items
        positives (tuple): Sorted int64 array of preferred item ids per user
        negatives (tuple): Sorted int64 array of explicitly disliked item ids per user, or None
        user_ids (tuple): External string id of each user, or None
        item_ids (tuple): External string id of each item, or None
    '''

    def __init__(self, n_users, n_items, positives, negatives=None, user_ids=None, item_ids=None):
        '''Initialize preference data.

        Args:
            n_users (int): Number of users
            n_items (int): Number of items
            positives (iterable): Preferred item ids per user
            negatives (iterable): Explicit negative item ids per user, defaults to None
            user_ids (iterable): External user ids, defaults to None
            item_ids (iterable): External item ids, defaults to None

        Raises:
            DimensionError: Item id out of range or per-user list count does not match *n_users*
            DataError: A user's positives and explicit negatives overlap
        '''
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.positives = tuple(_item_array(items, self.n_items) for items in positives)
        self.negatives = None if negatives is None else tuple(_item_array(items, self.n_items) for items in negatives)
        self.user_ids = tuple(user_ids) if user_ids is not None else None
        self.item_ids = tuple(item_ids) if item_ids is not None else None
        self._positive_sets = None

        if len(self.positives) != self.n_users:
            raise DimensionError('{} positive lists given for {} users'.format(len(self.positives), self.n_users))

        if self.negatives is not None:
            if len(self.negatives) != self.n_users:
                raise DimensionError('{} negative lists given for {} users'.format(len(self.negatives), self.n_users))

            for u in range(self.n_users):
                if len(np.intersect1d(self.positives[u], self.negatives[u], assume_unique=True)) > 0:
                    raise DataError('Positive and negative items overlap for user {}'.format(u))

    def positive_set(self, user):
        '''Get R_u+ as a set.

        Args:
            user (int): Dense user id

        Returns:
            frozenset: Preferred item ids
        '''
        if self._positive_sets is None:
            self._positive_sets = tuple(frozenset(int(i) for i in items) for items in self.positives)

        return self._positive_sets[user]

    def is_positive(self, user, item):
        '''Check whether a user liked an item.

        Args:
            user (int): Dense user id
            item (int): Dense item id

        Returns:
            bool: True if *item* is in R_u+
        '''
        if not 0 <= user < self.n_users:
            return False

        return item in self.positive_set(user)

    def explicit_negatives(self, user):
        '''Get the explicit negatives of a user.

        Args:
            user (int): Dense user id

        Returns:
            numpy.ndarray: Sorted item ids, empty if explicit negatives were not kept
        '''
        if self.negatives is None:
            return np.zeros(0, dtype=np.int64)

        return self.negatives[user]

    def n_preferences(self):
        '''Get the number of positive preferences.

        Returns:
            int: Total size of all R_u+
        '''
        return sum(len(items) for items in self.positives)

    def active_users(self):
        '''Get users with at least one positive preference.

        Users without positives are kept in the data but are not evaluated.

        Returns:
            list: Dense user ids
        '''
        return [u for u in range(self.n_users) if len(self.positives[u]) > 0]

    def restrict_items(self, items):
        '''Keep only preferences on the given items.

        The user and item id spaces are unchanged.

        Args:
            items (iterable): Dense item ids to keep

        Returns:
            PreferenceData: Column-restricted preference data
        '''
        keep = np.zeros(self.n_items, dtype=bool)
        keep[np.asarray(list(items), dtype=np.int64)] = True
        positives = [p[keep[p]] for p in self.positives]
        negatives = None if self.negatives is None else [n[keep[n]] for n in self.negatives]
        return PreferenceData(self.n_users, self.n_items, positives, negatives, self.user_ids, self.item_ids)


def _item_array(items, n_items):
    items = np.unique(np.asarray(list(items), dtype=np.int64))

    if len(items) > 0 and (items[0] < 0 or items[-1] >= n_items):
        raise DimensionError('Item id out of range for {} items'.format(n_items))

    items.flags.writeable = False
    return items


class ProfileCache:
    '''Per-user cache of the aggregate feature vector f_u.

    Item features are static, so cached vectors are never invalidated. The cache is safe to share between threads.
    '''

    def __init__(self, features, prefs):
        '''Initialize profile cache.

        Args:
            features (ItemFeatureMatrix): Item features
            prefs (PreferenceData): Preferences defining each R_u+
        '''
        self.features = features
        self.prefs = prefs
        self._vectors = {}
        self._lock = threading.Lock()

    def vector(self, user):
        '''Get f_u, computing it on first use.

        Args:
            user (int): Dense user id, users outside the preference data have an empty profile

        Returns:
            SparseVector: Sum of the feature vectors of R_u+
        '''
        with self._lock:
            cached = self._vectors.get(user)

        if cached is not None:
            return cached

        if 0 <= user < self.prefs.n_users:
            vector = accumulate_user_vector(self.features, self.prefs.positives[user])
        else:
            vector = SparseVector()

        with self._lock:
            self._vectors[user] = vector

        return vector
