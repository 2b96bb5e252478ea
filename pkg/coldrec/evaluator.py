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

'''Top-n recommendation of cold items and its evaluation metrics.

For every user with at least one preferred item in the evaluated split, all items of the split are scored against the user's training profile, the *n* best are kept (ties broken by ascending item id), and two metrics are computed:

    Rec@n = |liked items in top-n| / |top-n|
    DCG@n = imp_1 + sum_{p=2..n} imp_p / log2(p),  imp_p = 1/n if the item at rank p is liked, else 0

Rec@n deliberately divides by the length of the list; *conventional_recall* switches the denominator to the number of liked items. Metrics are averaged over the evaluated users.

Typical usage example:

    ```
    report = evaluate(model, features, prefs_train, prefs_test, n=10, candidates=split.test_items)
    print(report.mean_rec, report.mean_dcg)
    write_report('test.report', report, user_ids=prefs_test.user_ids)
    ```
'''

__docformat__ = 'google'


import json
import math
import logging
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from coldrec.errors import ParseError, EmptyDataError


_log = logging.getLogger(__name__)


class RankedList(list):
    '''Top-n item ids in rank order.

    Attributes:
        truncated (bool): True if fewer than *n* candidates were available
    '''

    def __init__(self, items, truncated=False):
        super().__init__(items)
        self.truncated = truncated


class EvalReport:
    '''Per-user and averaged evaluation results.

    Attributes:
        n (int): Cutoff
        per_user (dict): *{user: (rec, dcg), ...}*
        mean_rec (float): Mean Rec@n over the evaluated users
        mean_dcg (float): Mean DCG@n over the evaluated users
        n_users_evaluated (int): Number of evaluated users
        flagged (bool): True if no user could be evaluated
    '''

    def __init__(self, n, per_user):
        self.n = n
        self.per_user = dict(per_user)
        self.n_users_evaluated = len(self.per_user)
        self.flagged = self.n_users_evaluated == 0

        if self.flagged:
            self.mean_rec = 0.0
            self.mean_dcg = 0.0
        else:
            self.mean_rec = math.fsum(rec for rec, _ in self.per_user.values()) / self.n_users_evaluated
            self.mean_dcg = math.fsum(dcg for _, dcg in self.per_user.values()) / self.n_users_evaluated

    def __repr__(self):
        return 'EvalReport(n={}, users={}, mean_rec={:.6f}, mean_dcg={:.6f})'.format(self.n, self.n_users_evaluated, self.mean_rec, self.mean_dcg)


def top_n(scorer, features, prefs_train, candidate_items, user, n, profiles=None):
    '''Rank candidate items for a user and keep the best *n*.

    Args:
        scorer (object): Model with a *score_items()* method (FBSM, UFSM, or CoSim)
        features (ItemFeatureMatrix): Item features
        prefs_train (PreferenceData): Training preferences defining the user profile
        candidate_items (array-like): Dense ids of the cold items to rank
        user (int): Dense user id
        n (int): List length
        profiles (coldrec.sparse.ProfileCache): Cache from *scorer.profile_cache()*, defaults to None

    Returns:
        RankedList: Best items first, ties broken by ascending item id
    '''
    items = np.asarray(candidate_items, dtype=np.int64)

    if len(items) == 0:
        return RankedList([], truncated=n > 0)

    scores = scorer.score_items(features, prefs_train, user, items, profiles=profiles)
    order = np.lexsort((items, -scores))
    return RankedList((int(i) for i in items[order[:n]]), truncated=n > len(items))

def recall_at_n(topn, relevant, n, conventional=False):
    '''Recall at n as hits divided by the length of the top-n list.

    Args:
        topn (list): Ranked item ids, only the first *n* are used
        relevant (collection): Liked item ids
        n (int): Cutoff
        conventional (bool): Divide by the number of liked items instead, defaults to False

    Returns:
        float: Rec@n in [0, 1]
    '''
    topn = list(topn)[:n]

    if len(topn) == 0:
        _log.warning('Empty top-n list, Rec@%d is 0', n)
        return 0.0

    relevant = set(int(i) for i in relevant)
    hits = sum(1 for item in topn if int(item) in relevant)

    if conventional:
        return hits / len(relevant) if len(relevant) > 0 else 0.0

    return hits / len(topn)

def dcg_at_n(topn, relevant, n):
    '''Discounted cumulative gain at n.

    Each liked item in the list contributes 1/n, the one at rank 1 undiscounted and the one at rank p >= 2 divided by log2(p).

    Args:
        topn (list): Ranked item ids, only the first *n* are used
        relevant (collection): Liked item ids
        n (int): Cutoff

    Returns:
        float: DCG@n in [0, 1]
    '''
    relevant = set(int(i) for i in relevant)
    total = 0.0

    for rank, item in enumerate(list(topn)[:n], start=1):
        if int(item) in relevant:
            total += (1.0 / n) / (1.0 if rank == 1 else math.log2(rank))

    return total

def dcg_upper_bound(n):
    '''Largest possible DCG@n, reached when every listed item is liked.

    Args:
        n (int): Cutoff

    Returns:
        float: (1/n)(1 + sum_{p=2..n} 1/log2(p))
    '''
    return (1.0 + sum(1.0 / math.log2(p) for p in range(2, n + 1))) / n

def _items_of(prefs):
    items = list(prefs.positives)

    if prefs.negatives is not None:
        items.extend(prefs.negatives)

    items = [i for i in items if len(i) > 0]

    if len(items) == 0:
        return np.zeros(0, dtype=np.int64)

    return np.unique(np.concatenate(items))

def evaluate(scorer, features, prefs_train, prefs_eval, n, candidates=None, conventional_recall=False, workers=1, profiles=None):
    '''Evaluate a scorer on a split of cold items.

    Only users with at least one liked item in *prefs_eval* are evaluated. Scoring is spread over *workers* threads; results do not depend on the number of workers.

    Args:
        scorer (object): Model with *score_items()* and *profile_cache()* methods
        features (ItemFeatureMatrix): Item features
        prefs_train (PreferenceData): Training preferences defining user profiles
        prefs_eval (PreferenceData): Preferences of the evaluated split
        n (int): Cutoff
        candidates (array-like): All items of the evaluated split, defaults to None (items with preferences in *prefs_eval*, which drops split items nobody rated)
        conventional_recall (bool): Divide hits by the number of liked items, defaults to False
        workers (int): Scoring threads, defaults to 1
        profiles (coldrec.sparse.ProfileCache): Cache from *scorer.profile_cache()*, defaults to None

    Returns:
        EvalReport: Evaluation results
    '''
    if candidates is None:
        _log.warning('No candidate items given, ranking only items with evaluation preferences')
        candidates = _items_of(prefs_eval)
    else:
        candidates = np.unique(np.asarray(candidates, dtype=np.int64))

    profiles = profiles if profiles is not None else scorer.profile_cache(features, prefs_train)
    users = prefs_eval.active_users()

    def user_metrics(user):
        ranked = top_n(scorer, features, prefs_train, candidates, user, n, profiles=profiles)
        relevant = prefs_eval.positives[user]
        rec = recall_at_n(ranked, relevant, n, conventional=conventional_recall)
        dcg = dcg_at_n(ranked, relevant, n)
        return user, (rec, dcg)

    if workers > 1 and len(users) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(user_metrics, users))
    else:
        results = [user_metrics(user) for user in users]

    report = EvalReport(n, results)

    if report.flagged:
        _log.warning('No user has a liked item in the evaluated split')

    return report

def write_report(path, report, user_ids=None, json_lines=False):
    '''Write an evaluation report.

    The tab-separated format is a `# n=<n>` header, one `user rec dcg` line per user and a trailing `MEAN` line. The JSON-lines format writes one object per line with the same fields.

    Args:
        path (str): Output file path
        report (EvalReport): Report to write
        user_ids (tuple): External user ids indexed by dense id, defaults to None (dense ids are written)
        json_lines (bool): Write JSON lines instead of tab-separated text, defaults to False
    '''
    def name(user):
        return str(user_ids[user]) if user_ids is not None and isinstance(user, int) else str(user)

    with open(path, 'w', encoding='utf-8') as fd:
        if json_lines:
            fd.write(json.dumps({'n': report.n}) + '\n')

            for user, (rec, dcg) in report.per_user.items():
                fd.write(json.dumps({'user': name(user), 'rec': rec, 'dcg': dcg}) + '\n')

            fd.write(json.dumps({'user': 'MEAN', 'rec': report.mean_rec, 'dcg': report.mean_dcg}) + '\n')
        else:
            fd.write('# n={}\n'.format(report.n))

            for user, (rec, dcg) in report.per_user.items():
                fd.write('{}\t{!r}\t{!r}\n'.format(name(user), float(rec), float(dcg)))

            fd.write('MEAN\t{!r}\t{!r}\n'.format(float(report.mean_rec), float(report.mean_dcg)))

def read_report(path):
    '''Read an evaluation report written by *write_report()*.

    Users are keyed by the ids found in the file.

    Args:
        path (str): Report file path

    Returns:
        EvalReport: Report with string user keys

    Raises:
        ParseError: Malformed line
        EmptyDataError: File has no MEAN line
    '''
    n = None
    per_user = {}
    mean = None

    with open(path, 'r', encoding='utf-8') as fd:
        for line_number, line in enumerate(fd, start=1):
            line = line.strip()

            if len(line) == 0:
                continue

            try:
                if line.startswith('{'):
                    record = json.loads(line)

                    if 'n' in record:
                        n = int(record['n'])
                        continue

                    user, rec, dcg = str(record['user']), float(record['rec']), float(record['dcg'])
                elif line.startswith('#'):
                    if line[1:].strip().startswith('n='):
                        n = int(line[1:].strip()[2:])
                    continue
                else:
                    user, rec, dcg = line.split('\t')
                    rec, dcg = float(rec), float(dcg)
            except (ValueError, KeyError) as e:
                raise ParseError('Malformed report line', path, line_number) from e

            if user == 'MEAN':
                mean = (rec, dcg)
            else:
                per_user[user] = (rec, dcg)

    if mean is None:
        raise EmptyDataError('Report {} has no MEAN line'.format(path))

    report = EvalReport(n, per_user)
    report.mean_rec, report.mean_dcg = mean
    return report


Aggregate = namedtuple('Aggregate', ['mean_rec', 'mean_dcg', 'n_reports'])

def aggregate_reports(reports):
    '''Average the per-split means of several reports (ex. one per split seed).

    Args:
        reports (list): *EvalReport* objects

    Returns:
        Aggregate: Mean of the mean Rec@n and of the mean DCG@n

    Raises:
        EmptyDataError: No reports given
    '''
    reports = list(reports)

    if len(reports) == 0:
        raise EmptyDataError('No reports to aggregate')

    return Aggregate(math.fsum(r.mean_rec for r in reports) / len(reports), math.fsum(r.mean_dcg for r in reports) / len(reports), len(reports))


GroupSummary = namedtuple('GroupSummary', ['users', 'items', 'avg_user_preferences', 'avg_item_preferences'])

def compare_reports(report_a, report_b, prefs_train, tolerance=1e-12):
    '''Compare two models user by user.

    Users evaluated in both reports are grouped by whether model A's Rec@n is better than, the same as, or worse than model B's. For each group the number of users, the number of distinct items they liked in training, the average training profile size and the average number of training preferences of those items are reported. Users unknown to *prefs_train* count with an empty profile.

    Args:
        report_a (EvalReport): Report of model A
        report_b (EvalReport): Report of model B
        prefs_train (PreferenceData): Training preferences
        tolerance (float): Rec@n difference treated as equal, defaults to 1e-12

    Returns:
        dict: *{'BETTER': GroupSummary, 'SAME': GroupSummary, 'WORSE': GroupSummary}*
    '''
    index = {str(user_id): u for u, user_id in enumerate(prefs_train.user_ids or ())}
    item_counts = np.zeros(prefs_train.n_items, dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)

    for items in prefs_train.positives:
        item_counts[items] += 1

    def profile(user):
        u = int(user) if isinstance(user, (int, np.integer)) else index.get(str(user), -1)
        return prefs_train.positives[u] if 0 <= u < prefs_train.n_users else empty

    groups = {'BETTER': [], 'SAME': [], 'WORSE': []}

    for user, (rec_a, _) in report_a.per_user.items():
        if user not in report_b.per_user:
            continue

        rec_b = report_b.per_user[user][0]

        if rec_a > rec_b + tolerance:
            groups['BETTER'].append(profile(user))
        elif rec_a < rec_b - tolerance:
            groups['WORSE'].append(profile(user))
        else:
            groups['SAME'].append(profile(user))

    summary = {}

    for name, profiles in groups.items():
        liked = np.unique(np.concatenate(profiles)) if len(profiles) > 0 else empty
        summary[name] = GroupSummary(
            len(profiles),
            len(liked),
            float(np.mean([len(p) for p in profiles])) if len(profiles) > 0 else 0.0,
            float(np.mean(item_counts[liked])) if len(liked) > 0 else 0.0)

    return summary
