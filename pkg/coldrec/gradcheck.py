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

'''Verification of the relative rank fast path and its gradients.

Three suites run on random instances (see *coldrec.synthetic.random_instance()*):

- FBSM gradients: *grad_d()* and *grad_V()* against central finite differences of *relative_rank()*
- FBSM fast path: *relative_rank()* against *dense_oracle_relative_rank()*
- UFSM gradients: *linear_gradients()* against central finite differences of *linear_relative_rank()*

Gradient errors are reported as *max|analytic - numeric| / max(1, max|numeric|)*. Fast path errors are reported as *|fast - oracle| / (1 + |oracle|)*.

Typical usage example:

    ```
    summary = run_suite(seed=1, trials=100)
    print(summary.passed, summary.max_grad_error, summary.max_fast_path_error)
    ```
'''

__docformat__ = 'google'


import logging
from collections import namedtuple

import numpy as np

from coldrec.sparse import accumulate_user_vector
from coldrec.fbsm import TripletWorkspace, relative_rank, grad_d, grad_V, dense_oracle_relative_rank
from coldrec.baselines import LinearSimilarityModel, linear_relative_rank, linear_gradients
from coldrec.synthetic import random_instance


_log = logging.getLogger(__name__)

FD_STEP = 1e-6
GRAD_TOLERANCE = 1e-5
FAST_PATH_TOLERANCE = 1e-9

Summary = namedtuple('Summary', ['trials', 'max_grad_error', 'max_fast_path_error', 'max_linear_grad_error', 'passed'])
Summary.__doc__ = '''Result of the verification suites.'''


def finite_difference(func, x, columns=None, step=FD_STEP):
    '''Central finite difference gradient of a scalar function of an array.

    The array is perturbed in place and restored after each evaluation.

    Args:
        func (callable): Function of no arguments reading *x*
        x (numpy.ndarray): Parameter array (1D or 2D)
        columns (numpy.ndarray): Last-axis indices to differentiate, defaults to None (all)
        step (float): Step size, defaults to 1e-6

    Returns:
        numpy.ndarray: Gradient over *x[..., columns]*
    '''
    columns = np.arange(x.shape[-1]) if columns is None else columns
    view = x.reshape(-1, x.shape[-1])
    grad = np.zeros((view.shape[0], len(columns)))

    for r in range(view.shape[0]):
        for k, p in enumerate(columns):
            original = view[r, p]
            view[r, p] = original + step
            f_plus = func()
            view[r, p] = original - step
            f_minus = func()
            view[r, p] = original
            grad[r, k] = (f_plus - f_minus) / (2.0 * step)

    return grad.reshape(x.shape[:-1] + (len(columns),))

def _relative_error(analytic, numeric):
    if analytic.size == 0:
        return 0.0

    return float(np.max(np.abs(analytic - numeric)) / max(1.0, float(np.max(np.abs(numeric)))))

def _triplet_vectors(instance):
    f_u = accumulate_user_vector(instance.features, instance.prefs.positives[instance.user])
    return f_u, instance.features.row(instance.pos), instance.features.row(instance.neg)

def check_fbsm_gradients(instance, flip_sign=False):
    '''Compare the analytic FBSM gradients of one instance with finite differences.

    Only the columns in the supports of f_u, f_i and f_j are differentiated; every other column has an exactly zero gradient, which is checked directly.

    Args:
        instance (coldrec.synthetic.Instance): Random instance
        flip_sign (bool): Negate the analytic gradients (harness self test), defaults to False

    Returns:
        float: Largest relative error of the d and V gradients
    '''
    model = instance.model
    f_u, f_i, f_j = _triplet_vectors(instance)
    support = np.union1d(np.union1d(f_u.indices, f_i.indices), f_j.indices)

    def rank():
        return relative_rank(model, TripletWorkspace.build(model, f_u, f_i, f_j))

    workspace = TripletWorkspace.build(model, f_u, f_i, f_j)
    sign = -1.0 if flip_sign else 1.0
    analytic_d = sign * grad_d(workspace).to_dense(model.n_features)
    analytic_V = sign * grad_V(workspace).to_dense(model.n_features)

    outside = np.setdiff1d(np.arange(model.n_features), support)
    error = 0.0

    if len(outside) > 0 and (np.any(analytic_d[outside] != 0.0) or np.any(analytic_V[:, outside] != 0.0)):
        error = float('inf')

    error = max(error, _relative_error(analytic_d[support], finite_difference(rank, model.d, support)))

    if model.h > 0:
        error = max(error, _relative_error(analytic_V[:, support], finite_difference(rank, model.V, support)))

    return error

def check_fast_path(instance):
    '''Compare the fast relative rank of one instance with the dense oracle.

    Args:
        instance (coldrec.synthetic.Instance): Random instance

    Returns:
        float: |fast - oracle| / (1 + |oracle|)
    '''
    f_u, f_i, f_j = _triplet_vectors(instance)
    fast = relative_rank(instance.model, TripletWorkspace.build(instance.model, f_u, f_i, f_j))
    oracle = dense_oracle_relative_rank(instance.model, instance.prefs, instance.features, instance.user, instance.pos, instance.neg)
    return abs(fast - oracle) / (1.0 + abs(oracle))

def check_linear_gradients(instance, l, rng, flip_sign=False):
    '''Compare the analytic UFSM gradients of one instance with finite differences.

    Args:
        instance (coldrec.synthetic.Instance): Random instance (its features and profile are used)
        l (int): Number of global similarity functions
        rng (numpy.random.Generator): Random generator for the UFSM parameters
        flip_sign (bool): Negate the analytic gradients, defaults to False

    Returns:
        float: Largest relative error of the weight and membership gradients
    '''
    n_features = instance.features.n_features
    model = LinearSimilarityModel(1.0 + 0.5 * rng.standard_normal((l, n_features)), 1.0 + 0.5 * rng.standard_normal((1, l)))
    f_u, f_i, f_j = _triplet_vectors(instance)
    workspace = TripletWorkspace.build_from_factors(np.zeros((0, n_features)), f_u, f_i, f_j)

    def rank():
        return linear_relative_rank(model, workspace, instance.user)

    sign = -1.0 if flip_sign else 1.0
    g = linear_gradients(model, workspace, instance.user)
    error = _relative_error(sign * g.w_values, finite_difference(rank, model.W, g.columns))

    if l > 1:
        numeric_m = finite_difference(rank, model.M)[instance.user]
        error = max(error, _relative_error(sign * g.m_values, numeric_m))

    return error

def run_suite(seed=1, trials=100, n_features=32, h=4, nnz=8, n_profile=5, fast_path_trials=None, l=2, flip_sign=False):
    '''Run all verification suites.

    Args:
        seed (int): Random seed, defaults to 1
        trials (int): Gradient check instances, defaults to 100
        n_features (int): Number of features, defaults to 32
        h (int): Latent dimension, defaults to 4
        nnz (int): Largest number of nonzero entries per item vector, defaults to 8
        n_profile (int): User profile size, defaults to 5
        fast_path_trials (int): Fast path instances, defaults to None (10 x *trials*)
        l (int): UFSM global similarity functions, defaults to 2
        flip_sign (bool): Negate analytic gradients so the suite must fail, defaults to False

    Returns:
        Summary: Largest errors and overall result
    '''
    rng = np.random.default_rng(seed)
    fast_path_trials = fast_path_trials if fast_path_trials is not None else 10 * trials
    grad_error = 0.0
    linear_error = 0.0
    fast_error = 0.0

    for _ in range(trials):
        instance = random_instance(rng, n_features, h, nnz, n_profile)
        grad_error = max(grad_error, check_fbsm_gradients(instance, flip_sign))
        linear_error = max(linear_error, check_linear_gradients(instance, l, rng, flip_sign))

    for _ in range(fast_path_trials):
        fast_error = max(fast_error, check_fast_path(random_instance(rng, n_features, h, nnz, n_profile)))

    passed = grad_error <= GRAD_TOLERANCE and linear_error <= GRAD_TOLERANCE and fast_error <= FAST_PATH_TOLERANCE
    _log.info('Gradient check: %d trials, max gradient error %.3g, max UFSM gradient error %.3g, max fast path error %.3g', trials, grad_error, linear_error, fast_error)
    return Summary(trials, grad_error, fast_error, linear_error, passed)
