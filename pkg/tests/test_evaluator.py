import math

import numpy as np
import pytest

from coldrec.errors import ParseError, EmptyDataError
from coldrec.sparse import PreferenceData
from coldrec.evaluator import (EvalReport, top_n, recall_at_n, dcg_at_n, dcg_upper_bound, evaluate, write_report, read_report,
    aggregate_reports, compare_reports)
from coldrec.synthetic import planted_dataset

NAME = 'Evaluation Metrics'


class TableScorer:
    '''Scorer returning fixed scores per (user, item).'''

    def __init__(self, scores):
        self.scores = np.asarray(scores, dtype=np.float64)

    def profile_cache(self, features, prefs):
        return None

    def score_items(self, features, prefs, user, items, profiles=None):
        return self.scores[user, np.asarray(items, dtype=np.int64)]


class TransformedScorer(TableScorer):
    def score_items(self, features, prefs, user, items, profiles=None):
        return np.exp(super().score_items(features, prefs, user, items, profiles)) * 3.0 + 1.0


TEN = list(range(10, 20))

# (top-n list, relevant items, n, Rec@n, DCG@n)
METRIC_CASES = [
    (TEN, {10}, 10, 0.1, 0.1),
    (TEN, {11}, 10, 0.1, 0.1),
    (TEN, {10, 13}, 10, 0.2, 0.15),
    (TEN, {12}, 10, 0.1, 0.1 / math.log2(3)),
    (TEN, {19}, 10, 0.1, 0.1 / math.log2(10)),
    (TEN, set(), 10, 0.0, 0.0),
    (TEN, {99}, 10, 0.0, 0.0),
    (TEN, set(TEN), 10, 1.0, dcg_upper_bound(10)),
    (TEN, {10, 11, 12}, 10, 0.3, 0.1 + 0.1 + 0.1 / math.log2(3)),
    (TEN, {15, 16, 17}, 10, 0.3, 0.1 / math.log2(6) + 0.1 / math.log2(7) + 0.1 / 3.0),
    (TEN, {10, 11}, 10, 0.2, 0.2),
    (TEN, {10, 50, 60}, 10, 0.1, 0.1),
    ([5], {5}, 1, 1.0, 1.0),
    ([5], {6}, 1, 0.0, 0.0),
    ([1, 2, 3, 4, 5], {2, 4}, 5, 0.4, 0.2 + 0.2 / 2.0),
    ([1, 2, 3], {3}, 5, 1.0 / 3.0, 0.2 / math.log2(3)),
    ([1, 2, 3, 4, 5], {4, 5}, 3, 0.0, 0.0),
    ([7, 8], {7, 8}, 2, 1.0, 1.0),
    ([1, 2, 3, 4], {4}, 4, 0.25, 0.125),
    (list(range(8)), set(range(8)), 8, 1.0, dcg_upper_bound(8))
]


def test_metric_oracle():
    assert len(METRIC_CASES) == 20

    for topn, relevant, n, rec, dcg in METRIC_CASES:
        assert recall_at_n(topn, relevant, n) == pytest.approx(rec, abs=1e-15)
        assert dcg_at_n(topn, relevant, n) == pytest.approx(dcg, abs=1e-15)

def test_conventional_recall():
    assert recall_at_n(TEN, {10, 50, 60}, 10, conventional=True) == pytest.approx(1.0 / 3.0)
    assert recall_at_n(TEN, {10, 50, 60}, 10) == pytest.approx(0.1)
    assert recall_at_n(TEN, set(), 10, conventional=True) == 0.0

def test_empty_list():
    assert recall_at_n([], {1}, 10) == 0.0
    assert dcg_at_n([], {1}, 10) == 0.0

def test_dcg_upper_bound():
    assert dcg_upper_bound(1) == 1.0
    assert dcg_upper_bound(2) == pytest.approx(1.0)
    assert dcg_upper_bound(10) == pytest.approx((1.0 + sum(1.0 / math.log2(p) for p in range(2, 11))) / 10.0)

    for topn, relevant, n, _, _ in METRIC_CASES:
        assert dcg_at_n(topn, relevant, n) <= dcg_upper_bound(n) + 1e-15

def test_metrics_monotone_in_relevant_items():
    rng = np.random.default_rng(31)

    for _ in range(50):
        topn = list(rng.permutation(30)[:10])
        relevant = set(int(i) for i in rng.choice(30, size=5, replace=False))
        extra = next(int(i) for i in topn if int(i) not in relevant) if not set(topn) <= relevant else None

        if extra is None:
            continue

        more = relevant | {extra}
        assert recall_at_n(topn, more, 10) >= recall_at_n(topn, relevant, 10)
        assert dcg_at_n(topn, more, 10) >= dcg_at_n(topn, relevant, 10)

def test_top_n_ties_broken_by_item_id():
    scorer = TableScorer(np.zeros((1, 20)))
    assert top_n(scorer, None, None, [9, 3, 14, 0, 7, 1], 0, 3) == [0, 1, 3]

def test_top_n_single_candidate():
    scorer = TableScorer(np.arange(5.0)[np.newaxis, :])
    ranked = top_n(scorer, None, None, [2], 0, 10)
    assert ranked == [2]
    assert ranked.truncated

def test_top_n_sort_oracle():
    rng = np.random.default_rng(32)
    scores = rng.integers(0, 6, size=(1, 50)).astype(float)
    scorer = TableScorer(scores)
    candidates = rng.choice(50, size=30, replace=False)

    expected = sorted((int(i) for i in candidates), key=lambda i: (-scores[0, i], i))[:10]
    ranked = top_n(scorer, None, None, candidates, 0, 10)
    assert ranked == expected
    assert not ranked.truncated

def test_top_n_invariant_to_increasing_transform():
    rng = np.random.default_rng(33)
    scores = rng.standard_normal((4, 40))
    candidates = np.arange(40)

    for user in range(4):
        assert top_n(TableScorer(scores), None, None, candidates, user, 10) == top_n(TransformedScorer(scores), None, None, candidates, user, 10)

def test_evaluate_ground_truth_scorer():
    rng = np.random.default_rng(34)
    n_users, n_items = 30, 40
    positives = [rng.choice(n_items, size=int(rng.integers(0, 15)), replace=False) for _ in range(n_users)]
    prefs_eval = PreferenceData(n_users, n_items, positives)
    prefs_train = PreferenceData(n_users, n_items, [[] for _ in range(n_users)])
    truth = np.zeros((n_users, n_items))

    for u, items in enumerate(positives):
        truth[u, items] = 1.0

    report = evaluate(TableScorer(truth), None, prefs_train, prefs_eval, 10, candidates=np.arange(n_items))
    active = [u for u in range(n_users) if len(positives[u]) > 0]
    expected = np.mean([min(len(positives[u]), 10) / 10.0 for u in active])

    assert report.n_users_evaluated == len(active)
    assert set(report.per_user) == set(active)
    assert report.mean_rec == pytest.approx(expected, abs=1e-12)

def test_evaluate_random_scorer():
    rng = np.random.default_rng(35)
    n_users, n_items = 200, 100
    prefs_eval = PreferenceData(n_users, n_items, [rng.choice(n_items, size=20, replace=False) for _ in range(n_users)])
    prefs_train = PreferenceData(n_users, n_items, [[] for _ in range(n_users)])

    report = evaluate(TableScorer(rng.standard_normal((n_users, n_items))), None, prefs_train, prefs_eval, 10, candidates=np.arange(n_items))
    assert report.mean_rec == pytest.approx(20 / 100, abs=0.05)
    assert all(dcg <= dcg_upper_bound(10) + 1e-15 for _, dcg in report.per_user.values())

def test_evaluate_ranks_unrated_split_items():
    prefs_eval = PreferenceData(1, 3, [[0]])
    prefs_train = PreferenceData(1, 3, [[]])
    scorer = TableScorer([[0.0, 0.5, 1.0]])

    report = evaluate(scorer, None, prefs_train, prefs_eval, 1, candidates=[0, 1, 2])
    assert report.per_user[0] == (0.0, 0.0)

def test_evaluate_warns_when_candidates_are_inferred(caplog):
    prefs_eval = PreferenceData(1, 3, [[0]])
    prefs_train = PreferenceData(1, 3, [[]])

    with caplog.at_level('WARNING', logger='coldrec.evaluator'):
        report = evaluate(TableScorer([[0.0, 0.5, 1.0]]), None, prefs_train, prefs_eval, 1)

    assert report.per_user[0] == (1.0, 1.0)
    assert 'No candidate items given' in caplog.text

def test_evaluate_single_user():
    prefs_eval = PreferenceData(1, 3, [[2]])
    prefs_train = PreferenceData(1, 3, [[]])
    report = evaluate(TableScorer([[0.0, 0.0, 1.0]]), None, prefs_train, prefs_eval, 1, candidates=[2])
    assert report.per_user[0][0] in (0.0, 1.0)
    assert report.per_user[0] == (1.0, 1.0)

def test_evaluate_without_users_is_flagged():
    prefs = PreferenceData(2, 3, [[], []])
    report = evaluate(TableScorer(np.zeros((2, 3))), None, prefs, prefs, 10, candidates=[0, 1, 2])

    assert report.flagged
    assert report.n_users_evaluated == 0
    assert report.mean_rec == 0.0
    assert report.mean_dcg == 0.0

def test_evaluate_independent_of_workers():
    features, prefs, truth = planted_dataset(seed=3, n_items=80, n_users=40)
    eval_items = np.arange(40, 80)
    prefs_train = prefs.restrict_items(range(40))
    prefs_eval = prefs.restrict_items(eval_items)

    single = evaluate(truth, features, prefs_train, prefs_eval, 10, candidates=eval_items, workers=1)
    threaded = evaluate(truth, features, prefs_train, prefs_eval, 10, candidates=eval_items, workers=4)

    assert single.per_user == threaded.per_user
    assert single.mean_rec == threaded.mean_rec
    assert single.mean_dcg == threaded.mean_dcg

def test_report_files(tmp_path):
    report = EvalReport(10, {0: (0.2, 0.15), 1: (0.1, 0.05)})
    user_ids = ('alice', 'bob')

    tsv = tmp_path / 'report.tsv'
    write_report(str(tsv), report, user_ids)
    lines = tsv.read_text().splitlines()
    assert lines[0] == '# n=10'
    assert lines[1] == 'alice\t0.2\t0.15'
    assert lines[-1].startswith('MEAN\t')

    loaded = read_report(str(tsv))
    assert loaded.n == 10
    assert loaded.per_user == {'alice': (0.2, 0.15), 'bob': (0.1, 0.05)}
    assert loaded.mean_rec == report.mean_rec
    assert loaded.mean_dcg == report.mean_dcg

    jsonl = tmp_path / 'report.jsonl'
    write_report(str(jsonl), report, user_ids, json_lines=True)
    loaded = read_report(str(jsonl))
    assert loaded.n == 10
    assert loaded.per_user['bob'] == (0.1, 0.05)
    assert loaded.mean_rec == report.mean_rec

def test_read_report_errors(tmp_path):
    no_mean = tmp_path / 'no_mean.tsv'
    no_mean.write_text('# n=10\nalice\t0.1\t0.1\n')

    with pytest.raises(EmptyDataError):
        read_report(str(no_mean))

    malformed = tmp_path / 'malformed.tsv'
    malformed.write_text('# n=10\nalice\t0.1\n')

    with pytest.raises(ParseError) as e:
        read_report(str(malformed))

    assert e.value.line_number == 2

def test_aggregate_reports():
    reports = [EvalReport(10, {0: (rec, rec / 2)}) for rec in (0.1, 0.2, 0.3)]
    aggregate = aggregate_reports(reports)

    assert aggregate.n_reports == 3
    assert aggregate.mean_rec == pytest.approx(0.2)
    assert aggregate.mean_dcg == pytest.approx(0.1)

    with pytest.raises(EmptyDataError):
        aggregate_reports([])

def test_compare_reports():
    prefs_train = PreferenceData(3, 5, [[0, 1], [1, 2, 3], [4]], user_ids=['a', 'b', 'c'])
    report_a = EvalReport(10, {'a': (0.3, 0.1), 'b': (0.1, 0.1), 'c': (0.2, 0.1), 'z': (0.5, 0.1)})
    report_b = EvalReport(10, {'a': (0.1, 0.1), 'b': (0.1, 0.1), 'c': (0.4, 0.1), 'z': (0.1, 0.1)})
    summary = compare_reports(report_a, report_b, prefs_train)

    # user z has no training preferences
    assert summary['BETTER'].users == 2
    assert summary['BETTER'].items == 2
    assert summary['BETTER'].avg_user_preferences == pytest.approx(1.0)
    assert summary['SAME'].users == 1
    assert summary['SAME'].items == 3
    assert summary['SAME'].avg_item_preferences == pytest.approx(4 / 3)
    assert summary['WORSE'].users == 1
    assert summary['WORSE'].avg_user_preferences == pytest.approx(1.0)
