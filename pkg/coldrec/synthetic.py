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

'''Synthetic data for verification, benchmarks, and examples.

Two generators are provided:

- *random_instance()* builds a small random model, profile, and triplet for gradient and fast path checks.
- *planted_dataset()* builds a recommendation dataset whose preferences follow a known factorized similarity: features are grouped into topics, every item carries one topic feature plus a few noise features, and users like items of one topic. Items of the same topic rarely share a feature, so only a model that learns interactions between different features of a topic can rank them well.

Typical usage example:

    ```
    features, prefs, truth = planted_dataset(seed=1)
    train, val, test, split = split_by_items(prefs, seed=1)
    ```
'''

__docformat__ = 'google'


from collections import namedtuple

import numpy as np

from coldrec.sparse import SparseVector, ItemFeatureMatrix, PreferenceData
from coldrec.fbsm import FbsmModel


Instance = namedtuple('Instance', ['model', 'prefs', 'features', 'user', 'pos', 'neg'])
Instance.__doc__ = '''Random triplet instance: *pos* is in the profile of *user*, *neg* is not.'''


def random_sparse_vector(rng, n_features, nnz):
    '''Draw a sparse vector with *nnz* nonzero standard normal values.

    Args:
        rng (numpy.random.Generator): Random generator
        n_features (int): Number of features
        nnz (int): Number of nonzero entries, capped at *n_features*

    Returns:
        coldrec.sparse.SparseVector: Random vector
    '''
    nnz = min(nnz, n_features)
    indices = np.sort(rng.choice(n_features, size=nnz, replace=False))
    values = rng.standard_normal(nnz)
    values[values == 0.0] = 1.0
    return SparseVector(indices, values)

def random_instance(rng, n_features=32, h=4, nnz=8, n_profile=5, scale=0.5):
    '''Draw a random model and triplet.

    The user likes items 0 .. n_profile - 1; the positive item is one of them and the negative item is item *n_profile*.

    Args:
        rng (numpy.random.Generator): Random generator
        n_features (int): Number of features, defaults to 32
        h (int): Latent dimension, defaults to 4
        nnz (int): Nonzero entries per item vector, defaults to 8
        n_profile (int): Size of the user profile, defaults to 5
        scale (float): Standard deviation of the model parameters, defaults to 0.5

    Returns:
        Instance: Model, preferences, features, and triplet
    '''
    rows = [random_sparse_vector(rng, n_features, int(rng.integers(1, nnz + 1))) for _ in range(n_profile + 1)]
    features = ItemFeatureMatrix(rows, n_features)
    prefs = PreferenceData(1, n_profile + 1, [range(n_profile)])
    model = FbsmModel(1.0 + scale * rng.standard_normal(n_features), scale * rng.standard_normal((h, n_features)))
    return Instance(model, prefs, features, 0, int(rng.integers(n_profile)), n_profile)

def random_features(rng, n_items, n_features, nnz):
    '''Draw an item feature matrix with *nnz* nonnegative entries per row.

    Args:
        rng (numpy.random.Generator): Random generator
        n_items (int): Number of items
        n_features (int): Number of features
        nnz (int): Nonzero entries per row

    Returns:
        coldrec.sparse.ItemFeatureMatrix: Random features with item ids `i0`, `i1`, ...
    '''
    rows = []

    for _ in range(n_items):
        indices = np.sort(rng.choice(n_features, size=min(nnz, n_features), replace=False))
        rows.append(SparseVector(indices, rng.uniform(0.5, 2.0, size=len(indices))))

    return ItemFeatureMatrix(rows, n_features, ['i{}'.format(i) for i in range(n_items)])

def planted_dataset(seed=1, n_topics=3, topic_size=12, n_noise=14, n_items=200, n_users=100, noise_per_item=2, positive_fraction=0.05, score_noise=0.5):
    '''Generate a dataset with planted feature interactions.

    The ground truth similarity is W* = D* + V*^T V* with one latent dimension per topic: *V*[t, p] = 1* for every feature *p* of topic *t* and *D* = 0.1 I*. Each user is assigned a topic and scores an item by *f_i^T W* g_u* plus Gaussian noise, where *g_u* is the indicator of the user's topic features. The top *positive_fraction* of all noisy scores become positive preferences.

    Args:
        seed (int): Random seed, defaults to 1
        n_topics (int): Number of topics, defaults to 3
        topic_size (int): Features per topic, defaults to 12
        n_noise (int): Features shared at random by all topics, defaults to 14
        n_items (int): Number of items, defaults to 200
        n_users (int): Number of users, defaults to 100
        noise_per_item (int): Noise features per item, defaults to 2
        positive_fraction (float): Fraction of user-item pairs that are positives, defaults to 0.05
        score_noise (float): Standard deviation of the score noise, defaults to 0.5

    Returns:
        tuple: (coldrec.sparse.ItemFeatureMatrix, coldrec.sparse.PreferenceData, coldrec.fbsm.FbsmModel ground truth)
    '''
    rng = np.random.default_rng(seed)
    n_features = n_topics * topic_size + n_noise
    item_topics = rng.integers(n_topics, size=n_items)
    rows = []

    for i in range(n_items):
        topic_feature = item_topics[i] * topic_size + int(rng.integers(topic_size))
        noise = n_topics * topic_size + rng.choice(n_noise, size=noise_per_item, replace=False)
        rows.append(SparseVector.from_pairs([(topic_feature, 1.0)] + [(int(p), 1.0) for p in noise]))

    features = ItemFeatureMatrix(rows, n_features, ['i{}'.format(i) for i in range(n_items)])

    V = np.zeros((n_topics, n_features))

    for t in range(n_topics):
        V[t, t * topic_size:(t + 1) * topic_size] = 1.0

    truth = FbsmModel(np.full(n_features, 0.1), V)

    user_topics = rng.integers(n_topics, size=n_users)
    G = np.zeros((n_users, n_features))

    for u in range(n_users):
        G[u, user_topics[u] * topic_size:(user_topics[u] + 1) * topic_size] = 1.0

    W = np.diag(truth.d) + V.T @ V
    F = features.csr()
    scores = np.asarray(F @ W @ G.T).T + score_noise * rng.standard_normal((n_users, n_items))
    threshold = np.quantile(scores, 1.0 - positive_fraction)
    positives = [np.flatnonzero(scores[u] >= threshold) for u in range(n_users)]
    prefs = PreferenceData(n_users, n_items, positives, user_ids=['u{}'.format(u) for u in range(n_users)], item_ids=features.item_ids)
    return features, prefs, truth
