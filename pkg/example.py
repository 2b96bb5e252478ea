import sys
import logging

import coldrec
from coldrec import dataio, evaluator, synthetic
from coldrec.baselines import CosimScorer
from coldrec.fbsm import top_interactions
from coldrec.trainer import TrainConfig, train

# print training progress
logging.basicConfig(level=logging.INFO, format='\t%(message)s')
logging.getLogger('coldrec.dataio').setLevel(logging.WARNING)

# train and evaluate one model kind on one split
def run_model(name, cfg, features, prefs_train, prefs_val, prefs_test, split):
    print('\n--- Training {}'.format(name))
    model, log = train(prefs_train, prefs_val, features, cfg, split.train_items, split.validation_items)
    print('\tstopped ({}), best epoch {}'.format(log.stop_reason, log.best_epoch))
    report = evaluator.evaluate(model, features, prefs_train, prefs_test, 10, candidates=split.test_items)
    return model, report

# evaluate the untrained cosine baseline
def run_cosim(features, prefs_train, prefs_test, split):
    return evaluator.evaluate(CosimScorer(features), features, prefs_train, prefs_test, 10, candidates=split.test_items)


seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

# items carry one topic feature and two noise features, users like one topic
features, prefs, truth = synthetic.planted_dataset(seed=seed)
stats = dataio.dataset_stats(prefs, features)
print('coldrec {}'.format(coldrec.__version__))
print('Dataset: {users} users, {items} items, {features} features, {preferences} preferences'.format(**stats))

prefs_train, prefs_val, prefs_test, split = dataio.split_by_items(prefs, seed=seed)

fbsm_cfg = TrainConfig(h=5, alpha_d=0.05, alpha_v=0.05, lambda_v=0.001, beta_d=0.001, max_epochs=30, patience=8, seed=seed)
linear_cfg = TrainConfig(h=0, alpha_d=0.05, beta_d=0.001, max_epochs=30, patience=8, seed=seed)

fbsm, fbsm_report = run_model('FBSM (h=5)', fbsm_cfg, features, prefs_train, prefs_val, prefs_test, split)
linear, linear_report = run_model('diagonal model (h=0)', linear_cfg, features, prefs_train, prefs_val, prefs_test, split)
cosim_report = run_cosim(features, prefs_train, prefs_test, split)

print('\n--- Test results')
print('\t{:<22} {:>8} {:>8}'.format('model', 'Rec@10', 'DCG@10'))

for name, report in (('FBSM (h=5)', fbsm_report), ('diagonal (h=0)', linear_report), ('CoSim', cosim_report)):
    print('\t{:<22} {:>8.4f} {:>8.4f}'.format(name, report.mean_rec, report.mean_dcg))

# learned interactions should pair features of the same topic
print('\n--- Strongest learned feature pairs (12 features per topic)')

for p, q, weight in top_interactions(fbsm, k=10):
    same = 'same topic' if p // 12 == q // 12 and q < 36 else ''
    print('\t{:>3} {:>3} {:>10.4f}  {}'.format(p, q, weight, same))
