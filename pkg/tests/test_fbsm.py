import numpy as np
import pytest

from coldrec.errors import DimensionError, WorkspaceError
from coldrec.sparse import SparseVector, ItemFeatureMatrix, PreferenceData, ProfileCache, counting, sparse_dot, weighted_hadamard_dot
from coldrec.fbsm import (FbsmModel, TripletWorkspace, similarity, score, relative_rank, grad_d, grad_V,
    dense_oracle_relative_rank, top_interactions)
from coldrec.synthetic import random_instance, random_features

NAME = 'FBSM Model'


def vec(*pairs):
    return SparseVector.from_pairs(pairs)

def naive_score(model, features, prefs, user, item):
    W = model.dense_W()
    f_i = features.row(item).to_dense(model.n_features)
    return sum(f_i @ W @ features.row(int(j)).to_dense(model.n_features) for j in prefs.positives[user] if j != item)

def random_model(rng, n_features, h):
    return FbsmModel(1.0 + 0.3 * rng.standard_normal(n_features), 0.3 * rng.standard_normal((h, n_features)))

def test_similarity_reductions():
    f_i = vec((0, 1), (3, 2))
    f_j = vec((0, 0.5), (1, 4), (3, 1))

    cosine_kernel = FbsmModel(np.ones(4), np.zeros((2, 4)))
    assert similarity(cosine_kernel, f_i, f_j) == sparse_dot(f_i, f_j)

    zero = FbsmModel(np.zeros(4), np.zeros((2, 4)))
    assert similarity(zero, f_i, f_j) == 0.0

def test_similarity_dense_oracle():
    model = FbsmModel([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(model.dense_W(), 2.0 * np.eye(2))
    assert similarity(model, vec((0, 1), (1, 2)), vec((0, 3), (1, 4))) == pytest.approx(22.0, abs=1e-12)

def test_similarity_symmetric():
    rng = np.random.default_rng(3)
    model = random_model(rng, 20, 4)
    features = random_features(rng, 30, 20, 5)

    for _ in range(50):
        i, j = rng.integers(30, size=2)
        assert similarity(model, features[i], features[j]) == pytest.approx(similarity(model, features[j], features[i]), rel=1e-12, abs=1e-12)

    W = model.dense_W()
    assert np.array_equal(W, W.T)

def test_h0_is_diagonal_model():
    rng = np.random.default_rng(4)
    d = rng.standard_normal(12)
    model = FbsmModel(d, np.zeros((0, 12)))
    assert model.h == 0
    assert np.array_equal(model.dense_W(), np.diag(d))

    features = random_features(rng, 10, 12, 4)
    prefs = PreferenceData(1, 10, [[0, 1, 2]])

    for item in range(10):
        expected = sum(weighted_hadamard_dot(features[item], features[j], d) for j in (0, 1, 2) if j != item)
        assert score(model, prefs, features, 0, item) == pytest.approx(expected, rel=1e-12, abs=1e-12)

def test_score_estimation_constraint():
    rng = np.random.default_rng(5)
    model = random_model(rng, 16, 3)
    features = random_features(rng, 4, 16, 5)

    only_i = PreferenceData(1, 4, [[0]])
    assert score(model, only_i, features, 0, 0) == 0.0
    assert score(model, only_i, features, 0, 0, estimation_constraint=False) == pytest.approx(similarity(model, features[0], features[0]))

    only_j = PreferenceData(1, 4, [[1]])
    assert score(model, only_j, features, 0, 2) == pytest.approx(similarity(model, features[2], features[1]), rel=1e-12)

def test_score_unknown_user_is_zero():
    rng = np.random.default_rng(6)
    model = random_model(rng, 8, 2)
    features = random_features(rng, 3, 8, 3)
    prefs = PreferenceData(1, 3, [[0]])
    assert score(model, prefs, features, 4, 1) == 0.0

def test_score_naive_loop_oracle():
    rng = np.random.default_rng(8)
    model = random_model(rng, 24, 4)
    features = random_features(rng, 40, 24, 6)
    prefs = PreferenceData(3, 40, [rng.choice(40, size=8, replace=False) for _ in range(3)])
    profiles = ProfileCache(features, prefs)

    for user in range(3):
        for item in range(40):
            expected = naive_score(model, features, prefs, user, item)
            assert score(model, prefs, features, user, item, profiles=profiles) == pytest.approx(expected, rel=1e-10, abs=1e-10)

def test_score_items_matches_score():
    rng = np.random.default_rng(9)
    model = random_model(rng, 30, 5)
    features = random_features(rng, 50, 30, 6)
    prefs = PreferenceData(2, 50, [rng.choice(50, size=10, replace=False) for _ in range(2)])
    items = np.arange(50)

    for user in range(2):
        batch = model.score_items(features, prefs, user, items)

        for item in items:
            assert batch[item] == pytest.approx(score(model, prefs, features, user, int(item)), rel=1e-10, abs=1e-10)

def test_dimension_mismatch():
    model = FbsmModel(np.ones(5), np.zeros((1, 5)))
    features = ItemFeatureMatrix([vec((0, 1))], 4)
    prefs = PreferenceData(1, 1, [[0]])

    with pytest.raises(DimensionError):
        score(model, prefs, features, 0, 0)

    with pytest.raises(DimensionError):
        model.score_items(features, prefs, 0, [0])

    with pytest.raises(DimensionError):
        FbsmModel(np.ones(5), np.zeros((1, 4)))

def test_initialize():
    rng = np.random.default_rng(10)
    model = FbsmModel.initialize(100, 4, rng)
    assert np.array_equal(model.d, np.ones(100))
    assert model.V.shape == (4, 100)
    assert np.max(np.abs(model.V)) <= 0.01 / 2.0
    assert FbsmModel.initialize(10, 0, rng).V.shape == (0, 10)

def test_relative_rank_equal_items():
    rng = np.random.default_rng(11)
    model = random_model(rng, 10, 3)
    f_i = vec((1, 1.5), (4, -2), (7, 0.5))
    f_u = vec((1, 2.0), (4, -1), (9, 3))
    workspace = TripletWorkspace.build(model, f_u, f_i, f_i)
    expected = -similarity(model, f_i, f_i)
    assert relative_rank(model, workspace) == pytest.approx(expected, rel=1e-12)

def test_relative_rank_cosine_kernel():
    features = ItemFeatureMatrix([vec((0, 1), (1, 2)), vec((1, 1), (2, 3))], 3)
    prefs = PreferenceData(1, 2, [[0]])
    model = FbsmModel(np.ones(3), np.zeros((2, 3)))
    workspace = TripletWorkspace.build(model, features[0], features[0], features[1])

    # the positive item is alone in the profile, so only the negative item scores
    expected = -sparse_dot(features[1], features[0])
    assert relative_rank(model, workspace) == pytest.approx(expected, abs=1e-15)
    assert dense_oracle_relative_rank(model, prefs, features, 0, 0, 1) == pytest.approx(expected, abs=1e-15)

def test_fast_path_matches_dense_oracle():
    rng = np.random.default_rng(12)

    for _ in range(1000):
        n_features = int(rng.integers(8, 65))
        h = int(rng.integers(0, 9))
        nnz = int(rng.integers(1, 17))
        instance = random_instance(rng, n_features, h, nnz, n_profile=int(rng.integers(1, 8)))
        profiles = ProfileCache(instance.features, instance.prefs)
        workspace = TripletWorkspace.build(instance.model, profiles.vector(0), instance.features[instance.pos], instance.features[instance.neg])

        fast = relative_rank(instance.model, workspace)
        oracle = dense_oracle_relative_rank(instance.model, instance.prefs, instance.features, 0, instance.pos, instance.neg)
        assert abs(fast - oracle) <= 1e-9 * (1.0 + abs(oracle))

def test_fast_path_matches_scores():
    rng = np.random.default_rng(13)
    instance = random_instance(rng, 20, 3, 6)
    model, prefs, features = instance.model, instance.prefs, instance.features
    workspace = TripletWorkspace.build(model, ProfileCache(features, prefs).vector(0), features[instance.pos], features[instance.neg])

    expected = score(model, prefs, features, 0, instance.pos) - score(model, prefs, features, 0, instance.neg)
    assert relative_rank(model, workspace) == pytest.approx(expected, rel=1e-10, abs=1e-10)

def test_stale_workspace_detected():
    rng = np.random.default_rng(14)
    instance = random_instance(rng, 12, 2, 4)
    model = instance.model
    workspace = TripletWorkspace.build(model, instance.features[0], instance.features[instance.pos], instance.features[instance.neg])
    relative_rank(model, workspace, debug=True)

    model.V += 1.0

    with pytest.raises(WorkspaceError):
        relative_rank(model, workspace, debug=True)

def test_grad_d_cases():
    f_u = vec((0, 2), (1, 1), (3, 4))
    f_i = vec((0, 1), (3, -2))
    model = FbsmModel(np.ones(5), np.zeros((1, 5)))

    same = grad_d(TripletWorkspace.build(model, f_u, f_i, f_i))
    assert same == SparseVector([0, 3], [-1.0, -4.0])

    empty_negative = grad_d(TripletWorkspace.build(model, f_u, f_i, SparseVector()))
    # delta = f_i: f_i * f_u - f_i * f_i
    assert empty_negative == SparseVector([0, 3], [2.0 - 1.0, -8.0 - 4.0])

def test_grad_V_zero_factors():
    model = FbsmModel(np.ones(6), np.zeros((3, 6)))
    workspace = TripletWorkspace.build(model, vec((0, 1), (2, 2)), vec((0, 1)), vec((4, 1)))
    gradient = grad_V(workspace)
    assert np.array_equal(gradient.to_dense(6), np.zeros((3, 6)))

def test_grad_V_scalar_case():
    # h = 1, cached products evaluated by hand
    model = FbsmModel([0.0, 0.0], [[3.0, 2.0]])
    f_u = vec((0, 2), (1, 1))
    f_i = vec((0, 1))
    f_j = vec((1, 1))
    gradient = grad_V(TripletWorkspace.build(model, f_u, f_i, f_j)).to_dense(2)

    Vf_u = 3.0 * 2 + 2.0 * 1
    Vdelta = 3.0 * 1 - 2.0 * 1
    Vf_i = 3.0
    expected = np.array([[1 * Vf_u + 2 * Vdelta - 2 * 1 * Vf_i, -1 * Vf_u + 1 * Vdelta - 0.0]])
    assert np.allclose(gradient, expected, rtol=0, atol=1e-12)

def test_gradient_support():
    rng = np.random.default_rng(15)
    instance = random_instance(rng, 40, 3, 5)
    f_u = ProfileCache(instance.features, instance.prefs).vector(0)
    f_i = instance.features[instance.pos]
    f_j = instance.features[instance.neg]
    workspace = TripletWorkspace.build(instance.model, f_u, f_i, f_j)
    support = set(np.union1d(np.union1d(f_u.indices, f_i.indices), f_j.indices).tolist())

    assert set(grad_d(workspace).indices.tolist()) <= support
    assert set(grad_V(workspace).columns.tolist()) <= support

def test_dense_oracle_cap():
    model = FbsmModel(np.ones(600), np.zeros((1, 600)))

    with pytest.raises(DimensionError):
        model.dense_W()

    assert model.dense_W(cap=600).shape == (600, 600)

def test_op_counts_independent_of_profile_size():
    rng = np.random.default_rng(16)
    indices = np.arange(8)
    rows = [SparseVector(indices, rng.uniform(0.5, 2.0, size=8)) for _ in range(61)]
    rows.append(SparseVector([20, 21], [1.0, 1.0]))
    features = ItemFeatureMatrix(rows, 32)
    model = random_model(rng, 32, 4)
    counts = []

    for profile_size in (2, 10, 60):
        prefs = PreferenceData(1, len(rows), [range(profile_size)])
        f_u = ProfileCache(features, prefs).vector(0)
        workspace = TripletWorkspace.build(model, f_u, features[0], features[61])

        with counting() as counter:
            relative_rank(model, workspace)
            grad_d(workspace)
            grad_V(workspace)

        counts.append(counter.total())

    assert counts[0] == counts[1] == counts[2]

def test_top_interactions():
    model = FbsmModel(np.zeros(4), [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 2.0]])
    expected = [(2, 3, 2.0), (0, 1, 1.0)]

    assert top_interactions(model, k=2) == expected
    assert top_interactions(model, k=2, block_size=1) == expected
    assert top_interactions(model, k=3, block_size=3)[:2] == expected
    assert top_interactions(FbsmModel(np.ones(4), np.zeros((0, 4)))) == []

def test_copy_is_independent():
    model = FbsmModel(np.ones(3), np.ones((1, 3)))
    copy = model.copy()
    copy.d[0] = 5.0
    copy.V[0, 0] = 5.0
    assert model.d[0] == 1.0
    assert model.V[0, 0] == 1.0
