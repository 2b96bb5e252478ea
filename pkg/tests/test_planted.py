import numpy as np
import pytest

from coldrec import evaluator
from coldrec.baselines import CosimScorer
from coldrec.dataio import split_by_items
from coldrec.synthetic import planted_dataset
from coldrec.trainer import TrainConfig, train

NAME = 'Planted Interactions'

SEEDS = (1, 2, 3)


def fbsm_config(seed):
    return TrainConfig(h=5, alpha_d=0.05, alpha_v=0.05, lambda_v=0.001, beta_d=0.001, max_epochs=30, patience=8, seed=seed)

def diagonal_config(seed):
    return TrainConfig(h=0, alpha_d=0.05, beta_d=0.001, max_epochs=30, patience=8, seed=seed)

@pytest.fixture(scope='module')
def recall():
    values = {'fbsm': [], 'diagonal': [], 'cosim': []}

    for seed in SEEDS:
        features, prefs, _ = planted_dataset(seed=seed)
        prefs_train, prefs_val, prefs_test, split = split_by_items(prefs, seed=seed)

        for name, cfg in (('fbsm', fbsm_config(seed)), ('diagonal', diagonal_config(seed))):
            model, _ = train(prefs_train, prefs_val, features, cfg, split.train_items, split.validation_items)
            report = evaluator.evaluate(model, features, prefs_train, prefs_test, 10, candidates=split.test_items)
            values[name].append(report.mean_rec)

        report = evaluator.evaluate(CosimScorer(features), features, prefs_train, prefs_test, 10, candidates=split.test_items)
        values['cosim'].append(report.mean_rec)

    return {name: float(np.mean(runs)) for name, runs in values.items()}

def test_fbsm_beats_diagonal_model(recall):
    assert recall['fbsm'] >= 1.15 * recall['diagonal']

def test_trained_models_beat_cosim(recall):
    assert recall['fbsm'] > recall['cosim']
    assert recall['diagonal'] > recall['cosim']
