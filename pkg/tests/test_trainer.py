import math

import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import chisquare

from coldrec.errors import ConfigError
from coldrec.sparse import SparseVector, ItemFeatureMatrix, PreferenceData, ProfileCache
from coldrec.fbsm import FbsmModel, TripletWorkspace, relative_rank, grad_d, grad_V
from coldrec.baselines import LinearSimilarityModel
from coldrec.trainer import TrainConfig, Triplet, EpochRecord, TrainingLog, bpr_loss, sample_triplet, sgd_epoch, train
from coldrec.dataio import split_by_items
from coldrec.synthetic import planted_dataset

NAME = 'BPR Training'


def vec(*pairs):
    return SparseVector.from_pairs(pairs)

def two_item_problem():
    # feature 3 appears in no item
    features = ItemFeatureMatrix([vec((0, 1.0), (1, 2.0)), vec((1, 1.0), (2, 3.0))], 4)
    prefs = PreferenceData(1, 2, [[0]], [[1]])
    return features, prefs

def planted_split(seed=2, n_items=60, n_users=30):
    features, prefs, _ = planted_dataset(seed=seed, n_items=n_items, n_users=n_users)
    train_prefs, val_prefs, test_prefs, split = split_by_items(prefs, seed=seed)
    return features, train_prefs, val_prefs, test_prefs, split

def test_single_step_matches_dense_update():
    features, prefs = two_item_problem()
    rng = np.random.default_rng(41)
    model = FbsmModel(rng.uniform(0.5, 1.5, size=4), rng.standard_normal((2, 4)))
    before = model.copy()
    cfg = TrainConfig(h=2, alpha_d=0.05, alpha_v=0.02, lambda_v=0.1, beta_d=0.2)

    stats = sgd_epoch(model, prefs, features, cfg, np.random.default_rng(0))

    f_u = ProfileCache(features, prefs).vector(0)
    workspace = TripletWorkspace.build(before, f_u, features.row(0), features.row(1))
    r = relative_rank(before, workspace)
    tau = expit(-r)
    expected_d = before.d + cfg.alpha_d * (tau * grad_d(workspace).to_dense(4) - 2.0 * cfg.beta_d * before.d)
    expected_V = before.V + cfg.alpha_v * (tau * grad_V(workspace).to_dense(4) - 2.0 * cfg.lambda_v * before.V)

    assert stats.triplets == 1
    assert stats.skipped == 0
    assert stats.loss == pytest.approx(float(np.logaddexp(0.0, -r)), rel=1e-12)
    assert np.allclose(model.d, expected_d, rtol=0, atol=1e-12)
    assert np.allclose(model.V, expected_V, rtol=0, atol=1e-12)
    assert model.V[0, 3] != before.V[0, 3]

def test_zero_rates_leave_model_unchanged():
    features, prefs = two_item_problem()
    rng = np.random.default_rng(42)
    model = FbsmModel(rng.uniform(0.5, 1.5, size=4), rng.standard_normal((2, 4)))
    before = model.copy()
    cfg = TrainConfig(alpha_d=0.0, alpha_v=0.0)

    sgd_epoch(model, prefs, features, cfg, np.random.default_rng(0))
    assert np.array_equal(model.d, before.d)
    assert np.array_equal(model.V, before.V)

def test_bpr_loss_of_zero_model():
    features, prefs = two_item_problem()
    model = FbsmModel(np.zeros(4), np.zeros((0, 4)))
    sample = [Triplet(0, 0, 1)] * 5
    assert bpr_loss(model, prefs, features, sample) == pytest.approx(5 * math.log(2.0), rel=1e-12)

def test_bpr_loss_saturation():
    # f_2 == f_0, so the relative rank of (0, 0, 1) is d_0
    features = ItemFeatureMatrix([vec((0, 1.0)), vec((1, 1.0)), vec((0, 1.0))], 2)
    prefs = PreferenceData(1, 3, [[0, 2]])
    sample = [Triplet(0, 0, 1)]

    confident = FbsmModel(np.array([1e6, 1.0]), np.zeros((0, 2)))
    assert bpr_loss(confident, prefs, features, sample) == pytest.approx(0.0, abs=1e-12)

    wrong = FbsmModel(np.array([-1e6, 1.0]), np.zeros((0, 2)))
    loss = bpr_loss(wrong, prefs, features, sample)
    assert math.isfinite(loss)
    assert loss == pytest.approx(1e6, rel=1e-12)

def test_sample_triplet():
    rng = np.random.default_rng(43)
    prefs = PreferenceData(1, 3, [[0, 1]])

    for _ in range(20):
        triplet = sample_triplet(prefs, 0, rng)
        assert triplet.user == 0
        assert triplet.pos in (0, 1)
        assert triplet.neg == 2

def test_sample_triplet_without_negative():
    prefs = PreferenceData(2, 3, [[0, 1, 2], []])
    rng = np.random.default_rng(44)
    assert sample_triplet(prefs, 0, rng, rejection_cap=4) is None
    assert sample_triplet(prefs, 1, rng) is None

def test_sample_triplet_prefers_explicit_negatives():
    prefs = PreferenceData(1, 5, [[0]], [[3]])
    rng = np.random.default_rng(45)
    assert all(sample_triplet(prefs, 0, rng).neg == 3 for _ in range(20))

def test_sample_triplet_restricted_to_training_items():
    prefs = PreferenceData(1, 6, [[0, 4]])
    rng = np.random.default_rng(46)
    train_items = np.array([0, 1, 2])

    for _ in range(20):
        triplet = sample_triplet(prefs, 0, rng, train_items=train_items)
        assert triplet.pos == 0
        assert triplet.neg in (1, 2)

def test_negative_sampling_uniform():
    prefs = PreferenceData(1, 10, [[0, 1]])
    rng = np.random.default_rng(47)
    counts = np.zeros(10)

    for _ in range(10000):
        counts[sample_triplet(prefs, 0, rng).neg] += 1

    assert counts[0] == 0
    assert counts[1] == 0
    assert chisquare(counts[2:]).pvalue > 0.001

def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(model='cosim')

    with pytest.raises(ConfigError):
        TrainConfig(model='svd')

    with pytest.raises(ConfigError):
        TrainConfig(alpha_d=-0.1)

    with pytest.raises(ConfigError):
        TrainConfig(lambda_v=float('nan'))

    with pytest.raises(ConfigError):
        TrainConfig(h=-1)

    assert TrainConfig(mu_w=0.5).mu_m == 0.5
    assert TrainConfig(alpha_d=0.0, alpha_v=0.0).alpha_v == 0.0

def test_patience_stops_training():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(alpha_d=0.0, alpha_v=0.0, patience=1)
    _, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert len(log.records) == 2
    assert log.stop_reason == 'patience'
    assert log.best_epoch == 0
    assert math.isnan(log.records[0].loss)

def test_max_epochs():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(max_epochs=2, patience=10, tolerance=0.0)
    _, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert [record.epoch for record in log.records] == [0, 1, 2]
    assert log.stop_reason == 'max_epochs'

def test_training_deterministic():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(h=3, alpha_d=0.05, alpha_v=0.05, max_epochs=5, patience=10)

    model_a, log_a = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)
    model_b, log_b = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert log_a.lines(timing=False) == log_b.lines(timing=False)
    assert log_a.best_epoch == log_b.best_epoch
    assert np.array_equal(model_a.d, model_b.d)
    assert np.array_equal(model_a.V, model_b.V)

def test_cached_user_factors_train():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(h=3, alpha_d=0.05, alpha_v=0.05, max_epochs=3, cache_user_factors=True)
    model, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert model.is_finite()
    assert len(log.records) >= 2

def test_ufsm_training():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(model='ufsm', l=2, alpha_d=0.05, max_epochs=3)
    model, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert isinstance(model, LinearSimilarityModel)
    assert model.W.shape == (2, features.n_features)
    assert model.M.shape == (train_prefs.n_users, 2)
    assert model.is_finite()
    assert all(math.isfinite(record.loss) for record in log.records[1:])

def test_training_stable_for_small_rates():
    features, train_prefs, val_prefs, _, split = planted_split()
    cfg = TrainConfig(h=4, alpha_d=0.01, alpha_v=0.01, max_epochs=100, patience=100, tolerance=0.0)
    model, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert model.is_finite()
    assert all(math.isfinite(record.loss) for record in log.records[1:])

def test_loss_decreases():
    features, train_prefs, val_prefs, _, split = planted_split(seed=1, n_items=200, n_users=100)
    cfg = TrainConfig(h=5, alpha_d=0.05, alpha_v=0.05, lambda_v=0.001, beta_d=0.001, max_epochs=10, patience=20, tolerance=0.0)
    _, log = train(train_prefs, val_prefs, features, cfg, split.train_items, split.validation_items)

    assert len(log.records) == 11
    assert log.records[10].loss < log.records[1].loss

def test_empty_validation_rejected():
    features, prefs = two_item_problem()
    empty = PreferenceData(1, 2, [[]])

    with pytest.raises(ConfigError):
        train(prefs, empty, features, TrainConfig(h=2))

def test_training_log_file(tmp_path):
    log = TrainingLog()
    log.append(EpochRecord(0, float('nan'), 0.1, 0.05, 0.5))
    log.append(EpochRecord(1, 0.5, 0.2, 0.1, 1.2344))
    path = tmp_path / 'train.log'
    log.write(str(path), header='model = fbsm\nh = 5')

    lines = path.read_text().splitlines()
    assert lines[0] == '# model = fbsm'
    assert lines[1] == '# h = 5'
    assert lines[2] == '# epoch\tloss\tval_rec\tval_dcg\tseconds'
    assert lines[3] == '0\tnan\t0.1\t0.05\t0.500'
    assert lines[4] == '1\t0.5\t0.2\t0.1\t1.234'
    assert log.lines(timing=False)[1] == '1\t0.5\t0.2\t0.1'
