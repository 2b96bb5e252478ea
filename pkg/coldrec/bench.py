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

'''Timing and operation counts of the relative rank and gradient kernels.

For every point of a grid of (n_F, h, nnz) the workspace construction, *relative_rank()*, *grad_d()* and *grad_V()* of random triplets are timed, and the kernel work of one triplet is counted with *coldrec.sparse.counting()*. Counts are deterministic, so complexity can be asserted on them instead of on wall time.

Typical usage example:

    ```
    rows = run_grid(n_features=[256, 512, 1024], h=[4, 8], nnz=[16])
    for line in format_table(rows):
        print(line)
    print(fit_slope(rows, 'n_features'))
    ```
'''

__docformat__ = 'google'


import time
import logging
import itertools
from collections import namedtuple

import numpy as np
import psutil

from coldrec.sparse import OpCounter, counting
from coldrec.fbsm import FbsmModel, TripletWorkspace, relative_rank, grad_d, grad_V
from coldrec.synthetic import random_sparse_vector


_log = logging.getLogger(__name__)

BenchRow = namedtuple('BenchRow', ['n_features', 'h', 'nnz', 'seconds', 'ops'])
BenchRow.__doc__ = '''One grid point: mean seconds per triplet and kernel operations per triplet.'''


def host_info():
    '''Describe the benchmark host.

    Returns:
        dict: cpus, logical_cpus, rss_mb of the current process
    '''
    return {
        'cpus': psutil.cpu_count(logical=False) or psutil.cpu_count(),
        'logical_cpus': psutil.cpu_count(),
        'rss_mb': psutil.Process().memory_info().rss / 2**20
    }

def triplet_kernels(model, f_u, f_i, f_j):
    '''Run the per-triplet kernels once.

    Args:
        model (coldrec.fbsm.FbsmModel): Model parameters
        f_u (coldrec.sparse.SparseVector): User aggregate
        f_i (coldrec.sparse.SparseVector): Positive item features
        f_j (coldrec.sparse.SparseVector): Negative item features

    Returns:
        float: Relative rank
    '''
    workspace = TripletWorkspace.build(model, f_u, f_i, f_j)
    rank = relative_rank(model, workspace)
    grad_d(workspace)
    grad_V(workspace)
    return rank

def count_ops(model, f_u, f_i, f_j):
    '''Count the kernel work of one triplet.

    Args:
        model (coldrec.fbsm.FbsmModel): Model parameters
        f_u (coldrec.sparse.SparseVector): User aggregate
        f_i (coldrec.sparse.SparseVector): Positive item features
        f_j (coldrec.sparse.SparseVector): Negative item features

    Returns:
        int: Total operations
    '''
    with counting(OpCounter()) as counter:
        triplet_kernels(model, f_u, f_i, f_j)

    return counter.total()

def bench_point(n_features, h, nnz, repeats=200, seed=1, profile_factor=4):
    '''Time one grid point.

    Args:
        n_features (int): Number of features
        h (int): Latent dimension
        nnz (int): Nonzero entries per item vector
        repeats (int): Triplets timed, defaults to 200
        seed (int): Random seed, defaults to 1
        profile_factor (int): User aggregate nnz as a multiple of *nnz*, defaults to 4

    Returns:
        BenchRow: Timing and operation count
    '''
    rng = np.random.default_rng(seed)
    model = FbsmModel.initialize(n_features, h, rng)
    model.V += rng.standard_normal(model.V.shape)
    triplets = [(random_sparse_vector(rng, n_features, profile_factor * nnz), random_sparse_vector(rng, n_features, nnz), random_sparse_vector(rng, n_features, nnz)) for _ in range(repeats)]

    start = time.perf_counter()

    for f_u, f_i, f_j in triplets:
        triplet_kernels(model, f_u, f_i, f_j)

    seconds = (time.perf_counter() - start) / max(repeats, 1)
    ops = count_ops(model, *triplets[0]) if repeats > 0 else 0
    return BenchRow(n_features, h, nnz, seconds, ops)

def run_grid(n_features=(256, 512, 1024), h=(4, 8, 16), nnz=(16, 32), repeats=200, seed=1):
    '''Time every point of a grid.

    Args:
        n_features (iterable): Feature counts, defaults to (256, 512, 1024)
        h (iterable): Latent dimensions, defaults to (4, 8, 16)
        nnz (iterable): Nonzero entries per item vector, defaults to (16, 32)
        repeats (int): Triplets timed per point, defaults to 200
        seed (int): Random seed, defaults to 1

    Returns:
        list: *BenchRow* per grid point
    '''
    rows = []

    for n_f, dim, k in itertools.product(n_features, h, nnz):
        row = bench_point(n_f, dim, k, repeats, seed)
        _log.debug('n_F=%d h=%d nnz=%d: %.3g s, %d ops', n_f, dim, k, row.seconds, row.ops)
        rows.append(row)

    return rows

def fit_slope(rows, key, value='seconds'):
    '''Fit the log-log slope of a measurement against one grid dimension.

    Rows are grouped by the other two dimensions and the slope is averaged over groups with at least two distinct values of *key*.

    Args:
        rows (list): *BenchRow* objects
        key (str): 'n_features', 'h' or 'nnz'
        value (str): 'seconds' or 'ops', defaults to 'seconds'

    Returns:
        float: Mean slope, or None if no group spans two values of *key*
    '''
    others = [name for name in ('n_features', 'h', 'nnz') if name != key]
    groups = {}

    for row in rows:
        groups.setdefault(tuple(getattr(row, name) for name in others), []).append(row)

    slopes = []

    for group in groups.values():
        x = np.array([getattr(row, key) for row in group], dtype=np.float64)
        y = np.array([getattr(row, value) for row in group], dtype=np.float64)

        if len(np.unique(x)) < 2 or np.any(x <= 0) or np.any(y <= 0):
            continue

        slopes.append(np.polyfit(np.log(x), np.log(y), 1)[0])

    return float(np.mean(slopes)) if len(slopes) > 0 else None

def format_table(rows):
    '''Format benchmark rows as a text table.

    Args:
        rows (list): *BenchRow* objects

    Returns:
        list: Table lines, header first
    '''
    lines = ['{:>10} {:>4} {:>5} {:>14} {:>10}'.format('n_F', 'h', 'nnz', 'us/triplet', 'ops')]

    for row in rows:
        lines.append('{:>10} {:>4} {:>5} {:>14.2f} {:>10}'.format(row.n_features, row.h, row.nnz, row.seconds * 1e6, row.ops))

    return lines
