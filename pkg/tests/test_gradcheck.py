import numpy as np
import pytest

from coldrec.gradcheck import (GRAD_TOLERANCE, FAST_PATH_TOLERANCE, finite_difference, check_fbsm_gradients, check_fast_path,
    run_suite)
from coldrec.synthetic import random_instance

NAME = 'Gradient Check'


def test_finite_difference_of_quadratic():
    x = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, -1.5]])
    grad = finite_difference(lambda: float(np.sum(x ** 2)), x)

    assert np.allclose(grad, 2.0 * x, rtol=0, atol=1e-8)
    assert np.array_equal(x, [[1.0, -2.0, 0.5], [3.0, 0.0, -1.5]])

    partial = finite_difference(lambda: float(np.sum(x ** 2)), x, columns=np.array([2]))
    assert partial.shape == (2, 1)
    assert np.allclose(partial[:, 0], 2.0 * x[:, 2], rtol=0, atol=1e-8)

def test_suite_passes():
    summary = run_suite(seed=1, trials=20)

    assert summary.passed
    assert summary.trials == 20
    assert summary.max_grad_error <= GRAD_TOLERANCE
    assert summary.max_linear_grad_error <= GRAD_TOLERANCE
    assert summary.max_fast_path_error <= FAST_PATH_TOLERANCE

def test_suite_passes_for_diagonal_model():
    assert run_suite(seed=2, trials=10, h=0).passed

def test_flipped_gradients_fail():
    summary = run_suite(seed=3, trials=5, flip_sign=True)

    assert not summary.passed
    assert summary.max_grad_error > GRAD_TOLERANCE
    assert summary.max_linear_grad_error > GRAD_TOLERANCE

@pytest.mark.parametrize('h', [0, 1, 8])
def test_single_instances(h):
    rng = np.random.default_rng(60 + h)

    for _ in range(10):
        instance = random_instance(rng, 16, h, 6)
        assert check_fbsm_gradients(instance) <= GRAD_TOLERANCE
        assert check_fast_path(instance) <= FAST_PATH_TOLERANCE
