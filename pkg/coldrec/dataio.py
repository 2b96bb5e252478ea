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

'''Loading and writing preferences, item features, splits, and models.

All text files are UTF-8 and tab-separated, lines starting with `#` are comments:

| File | Line format |
| -------- | -------- |
| Preferences | `user item [rating]` (no rating means an implicit positive) |
| Term features | `item term count` |
| Sparse features | `item feature_id value`, optional header `%n_features=<int>` |
| Vocabulary | `feature_id term df`, header `# n_items=<int>` |
| Split manifest | `item {train\\|val\\|test}`, header `# seed=<int>` |

Models are stored in a little-endian binary container starting with the magic bytes `FBSM1` or `UFSM1`, followed by the dimensions, a hash of the feature space, and the parameters in row-major order.

Typical usage example:

    ```
    bags = load_term_features('terms.tsv')
    vocabulary, features = build_tfidf(bags, min_item_df=20, max_item_fraction=0.2)
    prefs = load_preferences('ratings.tsv', binarize_threshold=3, item_index=features.item_index())
    train, val, test, split = split_by_items(prefs, seed=1)
    ```
'''

__docformat__ = 'google'


import math
import struct
import hashlib
import logging
from collections import Counter

import numpy as np

from coldrec.errors import ParseError, EmptyDataError, PipelineError, SplitError, FormatError, ConfigError
from coldrec.sparse import SparseVector, ItemFeatureMatrix, PreferenceData
from coldrec.fbsm import FbsmModel
from coldrec.baselines import LinearSimilarityModel


_log = logging.getLogger(__name__)

SPLIT_LABELS = ('train', 'val', 'test')

_FBSM_MAGIC = b'FBSM1'
_UFSM_MAGIC = b'UFSM1'
_FBSM_HEADER = struct.Struct('<5sQQ16s')
_UFSM_HEADER = struct.Struct('<5sQQQ16s')


class VocabularyMap:
    '''Mapping of retained terms to dense feature ids.

    Attributes:
        terms (tuple): Term of each feature id
        df (tuple): Document frequency (number of items containing the term) of each feature id
        n_items_seen (int): Number of items the frequencies were counted over
    '''

    def __init__(self, terms, df, n_items_seen):
        self.terms = tuple(terms)
        self.df = tuple(int(x) for x in df)
        self.n_items_seen = int(n_items_seen)
        self._ids = {term: i for i, term in enumerate(self.terms)}

        if len(self.terms) != len(self.df):
            raise PipelineError('Vocabulary has {} terms but {} document frequencies'.format(len(self.terms), len(self.df)))

        if len(self._ids) != len(self.terms):
            raise PipelineError('Vocabulary terms must be unique')

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self._ids

    def feature_id(self, term):
        '''Get the feature id of a term.

        Args:
            term (str): Term

        Returns:
            int: Feature id, or None if the term was not retained
        '''
        return self._ids.get(term)


class ItemSplit:
    '''Partition of items into training, validation, and test items.

    Attributes:
        train_items (numpy.ndarray): Sorted dense ids of training items
        validation_items (numpy.ndarray): Sorted dense ids of validation items
        test_items (numpy.ndarray): Sorted dense ids of test items
        seed (int): Seed the split was drawn with, or None if loaded without one
    '''

    def __init__(self, train_items, validation_items, test_items, seed=None):
        self.train_items = np.sort(np.asarray(train_items, dtype=np.int64))
        self.validation_items = np.sort(np.asarray(validation_items, dtype=np.int64))
        self.test_items = np.sort(np.asarray(test_items, dtype=np.int64))
        self.seed = seed

        together = np.concatenate([self.train_items, self.validation_items, self.test_items])

        if len(np.unique(together)) != len(together):
            raise SplitError('Split partitions overlap')

    def partitions(self):
        '''Get the partitions with their labels.

        Returns:
            list: `[('train', items), ('val', items), ('test', items)]`
        '''
        return list(zip(SPLIT_LABELS, (self.train_items, self.validation_items, self.test_items)))


def _records(path):
    '''Yield (line number, fields) of the data lines of a tab-separated file.'''
    with open(path, 'r', encoding='utf-8') as fd:
        for line_number, line in enumerate(fd, start=1):
            line = line.rstrip('\r\n')

            if len(line.strip()) == 0 or line.lstrip().startswith('#'):
                continue

            yield line_number, line.split('\t')

def _finite(text, path, line_number, name):
    try:
        value = float(text)
    except ValueError:
        raise ParseError('Invalid {} \'{}\''.format(name, text), path, line_number) from None

    if not math.isfinite(value):
        raise ParseError('{} must be finite'.format(name.capitalize()), path, line_number)

    return value

def load_preferences(path, binarize_threshold=3, keep_explicit_negatives=False, item_index=None, user_index=None):
    '''Load user preferences.

    Ratings greater than or equal to *binarize_threshold* are positives. Lower ratings are explicit negatives when *keep_explicit_negatives* is set and dropped otherwise. Lines without a rating are positives.

    When *item_index* is given (ex. *ItemFeatureMatrix.item_index()*), dense item ids follow it and preferences on items without features are dropped with a warning. When *user_index* is given, known users keep their dense ids and new users are numbered after them, so several files of one split share a user id space.

    Args:
        path (str): Preference file path
        binarize_threshold (float): Smallest rating treated as a positive, defaults to 3
        keep_explicit_negatives (bool): Keep ratings below the threshold as explicit negatives, defaults to False
        item_index (dict): *{item_id: dense_id, ...}*, defaults to None (items numbered in order of appearance)
        user_index (dict): *{user_id: dense_id, ...}*, defaults to None (users numbered in order of appearance)

    Returns:
        coldrec.sparse.PreferenceData: Binary preferences with external ids retained

    Raises:
        ParseError: Malformed line or non-finite rating
        EmptyDataError: File has no preferences
    '''
    users = dict(user_index) if user_index is not None else {}
    items = dict(item_index) if item_index is not None else {}
    positives = {}
    negatives = {}
    dropped = set()
    n_lines = 0

    for line_number, fields in _records(path):
        if len(fields) not in (2, 3) or len(fields[0]) == 0 or len(fields[1]) == 0:
            raise ParseError('Expected \'user<TAB>item[<TAB>rating]\'', path, line_number)

        n_lines += 1
        user_id, item_id = fields[0], fields[1]
        positive = True

        if len(fields) == 3:
            positive = _finite(fields[2], path, line_number, 'rating') >= binarize_threshold

        if item_id not in items:
            if item_index is not None:
                dropped.add(item_id)
                continue

            items[item_id] = len(items)

        if user_id not in users:
            users[user_id] = len(users)

        u = users[user_id]
        i = items[item_id]

        if positive:
            positives.setdefault(u, set()).add(i)
            negatives.get(u, set()).discard(i)
        elif keep_explicit_negatives and i not in positives.get(u, ()):
            negatives.setdefault(u, set()).add(i)

    if n_lines == 0:
        raise EmptyDataError('Preference file {} has no preferences'.format(path))

    if len(dropped) > 0:
        _log.warning('Dropped preferences on %d items without features from %s', len(dropped), path)

    user_ids = sorted(users, key=users.get)
    item_ids = sorted(items, key=items.get)
    n_users = len(user_ids)

    prefs = PreferenceData(
        n_users,
        len(item_ids),
        [sorted(positives.get(u, ())) for u in range(n_users)],
        [sorted(negatives.get(u, ())) for u in range(n_users)] if keep_explicit_negatives else None,
        user_ids,
        item_ids)

    _log.debug('Loaded %d positive preferences of %d users on %d items from %s', prefs.n_preferences(), n_users, len(item_ids), path)
    return prefs

def write_preferences(path, prefs):
    '''Write preferences in the preference file format.

    Positives are written as `user item`, explicit negatives as `user item 0`, so that *load_preferences()* with a positive threshold reads the same data back.

    Args:
        path (str): Output file path
        prefs (coldrec.sparse.PreferenceData): Preferences to write
    '''
    def user_name(u):
        return prefs.user_ids[u] if prefs.user_ids is not None else str(u)

    def item_name(i):
        return prefs.item_ids[i] if prefs.item_ids is not None else str(i)

    with open(path, 'w', encoding='utf-8') as fd:
        for u in range(prefs.n_users):
            for i in prefs.positives[u]:
                fd.write('{}\t{}\n'.format(user_name(u), item_name(int(i))))

            for i in prefs.explicit_negatives(u):
                fd.write('{}\t{}\t0\n'.format(user_name(u), item_name(int(i))))

def load_term_features(path):
    '''Load pre-tokenized item terms.

    Args:
        path (str): Term feature file path

    Returns:
        dict: *{item_id: collections.Counter({term: count, ...}), ...}* in order of first appearance, counts of repeated (item, term) lines are summed

    Raises:
        ParseError: Malformed line or count below 1
        EmptyDataError: File has no terms
    '''
    bags = {}

    for line_number, fields in _records(path):
        if len(fields) != 3 or len(fields[0]) == 0 or len(fields[1]) == 0:
            raise ParseError('Expected \'item<TAB>term<TAB>count\'', path, line_number)

        count = _finite(fields[2], path, line_number, 'count')

        if count < 1:
            raise ParseError('Term count must be at least 1', path, line_number)

        bags.setdefault(fields[0], Counter())[fields[1]] += count

    if len(bags) == 0:
        raise EmptyDataError('Term feature file {} has no terms'.format(path))

    return bags

def build_tfidf(bags, min_item_df=20, max_item_fraction=0.2, smooth_idf=False, normalize=False):
    '''Build TF-IDF item features from term bags.

    Terms found in fewer than *min_item_df* items or in more than *max_item_fraction* of the items are dropped. The remaining terms are numbered in sorted order and each feature value is *tf(item, term) * ln(n_items / df(term))*. With *smooth_idf* set the idf is *ln(n_items / df) + 1*, which keeps terms found in every item.

    Args:
        bags (dict): *{item_id: {term: count, ...}, ...}* from *load_term_features()*
        min_item_df (int): Minimum document frequency, defaults to 20
        max_item_fraction (float): Maximum document frequency as a fraction of the items, defaults to 0.2
        smooth_idf (bool): Add 1 to every idf, defaults to False
        normalize (bool): Scale every item vector to unit length, defaults to False

    Returns:
        tuple: (VocabularyMap, coldrec.sparse.ItemFeatureMatrix)

    Raises:
        ConfigError: Invalid filter thresholds
        PipelineError: No term survives filtering
    '''
    if min_item_df < 1:
        raise ConfigError('Minimum item document frequency must be at least 1')

    if not 0 < max_item_fraction <= 1:
        raise ConfigError('Maximum item fraction must be in (0, 1]')

    n_items = len(bags)
    df = Counter()

    for bag in bags.values():
        df.update(term for term, count in bag.items() if count > 0)

    ceiling = max_item_fraction * n_items
    terms = sorted(term for term, n in df.items() if min_item_df <= n <= ceiling)

    if len(terms) == 0:
        raise PipelineError('No term is found in at least {} and at most {:g} of {} items'.format(min_item_df, ceiling, n_items))

    vocabulary = VocabularyMap(terms, [df[term] for term in terms], n_items)
    idf = np.array([math.log(n_items / df[term]) for term in terms])

    if smooth_idf:
        idf += 1.0

    rows = []

    for bag in bags.values():
        pairs = [(vocabulary.feature_id(term), count) for term, count in bag.items() if term in vocabulary]
        pairs.sort()
        indices = np.array([p for p, _ in pairs], dtype=np.int64)
        values = np.array([c for _, c in pairs], dtype=np.float64) * idf[indices] if len(pairs) > 0 else np.zeros(0)
        row = SparseVector(indices, values)
        rows.append(row.l2_normalized() if normalize else row)

    features = ItemFeatureMatrix(rows, len(vocabulary), list(bags))
    empty = features.empty_rows()

    if len(empty) > 0:
        _log.warning('%d of %d items have no features after filtering', len(empty), n_items)

    _log.info('TF-IDF features: %d terms kept of %d, %d items', len(vocabulary), len(df), n_items)
    return vocabulary, features

def load_sparse_features(path):
    '''Load precomputed sparse item features.

    The number of features is taken from a `%n_features=<int>` header if present, otherwise it is one more than the largest feature id. If an (item, feature) pair is repeated the last value wins. A line holding only an item id declares an item without features.

    Args:
        path (str): Sparse feature file path

    Returns:
        coldrec.sparse.ItemFeatureMatrix: Item features with external item ids

    Raises:
        ParseError: Malformed line, non-finite value, or feature id beyond the header
        EmptyDataError: File has no items
    '''
    header = None
    entries = {}
    duplicates = 0

    with open(path, 'r', encoding='utf-8') as fd:
        for line_number, line in enumerate(fd, start=1):
            line = line.rstrip('\r\n')

            if line.startswith('%'):
                key, _, value = line[1:].partition('=')

                if key.strip() != 'n_features':
                    raise ParseError('Unknown header \'{}\''.format(line), path, line_number)

                try:
                    header = int(value)
                except ValueError:
                    raise ParseError('Invalid feature count \'{}\''.format(value), path, line_number) from None

                continue

            if len(line.strip()) == 0 or line.lstrip().startswith('#'):
                continue

            fields = line.split('\t')

            if len(fields) == 1 and len(fields[0]) > 0:
                entries.setdefault(fields[0], {})
                continue

            if len(fields) != 3 or len(fields[0]) == 0:
                raise ParseError('Expected \'item<TAB>feature_id<TAB>value\'', path, line_number)

            try:
                feature = int(fields[1])
            except ValueError:
                raise ParseError('Invalid feature id \'{}\''.format(fields[1]), path, line_number) from None

            if feature < 0 or (header is not None and feature >= header):
                raise ParseError('Feature id {} out of range'.format(feature), path, line_number)

            row = entries.setdefault(fields[0], {})

            if feature in row:
                duplicates += 1

            row[feature] = _finite(fields[2], path, line_number, 'value')

    if len(entries) == 0:
        raise EmptyDataError('Sparse feature file {} has no items'.format(path))

    if duplicates > 0:
        _log.warning('%d repeated (item, feature) entries in %s, last value kept', duplicates, path)

    max_feature = max((max(row) for row in entries.values() if len(row) > 0), default=-1)
    n_features = header if header is not None else max_feature + 1
    rows = [SparseVector.from_pairs(row.items()) for row in entries.values()]
    features = ItemFeatureMatrix(rows, n_features, list(entries))
    empty = features.empty_rows()

    if len(empty) > 0:
        _log.warning('%d of %d items in %s have no features', len(empty), features.n_items, path)

    return features

def write_sparse_features(path, features):
    '''Write item features in the sparse feature file format.

    Values are written with *repr()* so that loading the file gives bit-identical values.

    Args:
        path (str): Output file path
        features (coldrec.sparse.ItemFeatureMatrix): Item features
    '''
    with open(path, 'w', encoding='utf-8') as fd:
        fd.write('%n_features={}\n'.format(features.n_features))

        for i, row in enumerate(features.rows):
            item_id = features.item_ids[i] if features.item_ids is not None else str(i)

            if len(row) == 0:
                fd.write('{}\n'.format(item_id))

            for p, value in zip(row.indices, row.values):
                fd.write('{}\t{}\t{!r}\n'.format(item_id, int(p), float(value)))

def write_vocabulary(path, vocabulary):
    '''Write a vocabulary.

    Args:
        path (str): Output file path
        vocabulary (VocabularyMap): Vocabulary to write
    '''
    with open(path, 'w', encoding='utf-8') as fd:
        fd.write('# n_items={}\n'.format(vocabulary.n_items_seen))

        for p, (term, df) in enumerate(zip(vocabulary.terms, vocabulary.df)):
            fd.write('{}\t{}\t{}\n'.format(p, term, df))

def load_vocabulary(path):
    '''Load a vocabulary written by *write_vocabulary()*.

    Args:
        path (str): Vocabulary file path

    Returns:
        VocabularyMap: Vocabulary

    Raises:
        ParseError: Malformed line or feature ids not dense
    '''
    n_items = 0
    terms = []
    df = []

    with open(path, 'r', encoding='utf-8') as fd:
        for line_number, line in enumerate(fd, start=1):
            line = line.rstrip('\r\n')

            if line.startswith('#'):
                key, _, value = line[1:].partition('=')

                if key.strip() == 'n_items':
                    n_items = int(value)

                continue

            if len(line.strip()) == 0:
                continue

            fields = line.split('\t')

            if len(fields) != 3:
                raise ParseError('Expected \'feature_id<TAB>term<TAB>df\'', path, line_number)

            try:
                feature, count = int(fields[0]), int(fields[2])
            except ValueError:
                raise ParseError('Invalid feature id or document frequency', path, line_number) from None

            if feature != len(terms):
                raise ParseError('Feature ids must be dense and in order', path, line_number)

            terms.append(fields[1])
            df.append(count)

    return VocabularyMap(terms, df, n_items)

def feature_space_hash(features, vocabulary=None):
    '''Hash of the feature id mapping.

    Stored in model files so that a model is not silently applied to a different feature space.

    Args:
        features (coldrec.sparse.ItemFeatureMatrix): Item features
        vocabulary (VocabularyMap): Feature names, defaults to None (only the number of features is hashed)

    Returns:
        bytes: 16 byte digest
    '''
    digest = hashlib.blake2b(digest_size=16)
    digest.update('n_features={}\n'.format(features.n_features).encode('utf-8'))

    if vocabulary is not None:
        for term in vocabulary.terms:
            digest.update(term.encode('utf-8') + b'\n')

    return digest.digest()

def _split_key(seed, item_id):
    return hashlib.blake2b('{}:{}'.format(seed, item_id).encode('utf-8'), digest_size=8).digest()

def split_by_items(prefs, fractions=(0.6, 0.2, 0.2), seed=1):
    '''Split preferences by items into training, validation, and test data.

    Items are ordered by a seeded hash of their external id and cut into partitions of *round(f * n_items)* training and validation items, with the remaining items used for testing. The split depends only on the seed and the external item ids, so relabeling dense item ids does not change which items land in each partition.

    Every output keeps all users; users without positives in a partition are not evaluated on it.

    Args:
        prefs (coldrec.sparse.PreferenceData): Preferences of all items
        fractions (tuple): Training, validation, and test fractions summing to 1, defaults to (0.6, 0.2, 0.2)
        seed (int): Split seed, defaults to 1

    Returns:
        tuple: (train, val, test, ItemSplit), the first three are column-restricted *PreferenceData*

    Raises:
        ConfigError: Fractions are negative or do not sum to 1
        SplitError: Fewer than 3 items or an empty partition
    '''
    fractions = tuple(float(f) for f in fractions)

    if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ConfigError('Split fractions must be three non-negative numbers summing to 1, got {}'.format(fractions))

    n_items = prefs.n_items

    if n_items < 3:
        raise SplitError('At least 3 items are needed to split, got {}'.format(n_items))

    n_train = int(round(fractions[0] * n_items))
    n_val = int(round(fractions[1] * n_items))
    n_test = n_items - n_train - n_val

    if min(n_train, n_val, n_test) <= 0:
        raise SplitError('Split of {} items into {}/{}/{} leaves a partition empty'.format(n_items, n_train, n_val, n_test))

    names = prefs.item_ids if prefs.item_ids is not None else [str(i) for i in range(n_items)]
    order = sorted(range(n_items), key=lambda i: (_split_key(seed, names[i]), names[i]))
    split = ItemSplit(order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:], seed)
    _log.info('Split %d items into %d/%d/%d with seed %d', n_items, n_train, n_val, n_test, seed)
    return apply_split(prefs, split) + (split,)

def apply_split(prefs, split):
    '''Restrict preferences to the partitions of an existing split.

    Args:
        prefs (coldrec.sparse.PreferenceData): Preferences of all items
        split (ItemSplit): Item partitions

    Returns:
        tuple: (train, val, test) column-restricted *PreferenceData*
    '''
    return tuple(prefs.restrict_items(items) for _, items in split.partitions())

def write_split_manifest(path, split, item_ids=None):
    '''Write a split manifest.

    Args:
        path (str): Output file path
        split (ItemSplit): Item partitions
        item_ids (tuple): External item ids indexed by dense id, defaults to None (dense ids are written)
    '''
    lines = []

    for label, items in split.partitions():
        for i in items:
            lines.append((int(i), label))

    lines.sort()

    with open(path, 'w', encoding='utf-8') as fd:
        if split.seed is not None:
            fd.write('# seed={}\n'.format(split.seed))

        for i, label in lines:
            fd.write('{}\t{}\n'.format(item_ids[i] if item_ids is not None else i, label))

def load_split_manifest(path, item_index=None):
    '''Load a split manifest.

    Args:
        path (str): Manifest file path
        item_index (dict): *{item_id: dense_id, ...}*, defaults to None (item ids are dense ids)

    Returns:
        ItemSplit: Item partitions, manifest items unknown to *item_index* are skipped with a warning

    Raises:
        ParseError: Malformed line or unknown partition label
        SplitError: A partition is empty
    '''
    seed = None
    partitions = {label: [] for label in SPLIT_LABELS}
    unknown = 0

    with open(path, 'r', encoding='utf-8') as fd:
        for line_number, line in enumerate(fd, start=1):
            line = line.rstrip('\r\n')

            if line.startswith('#'):
                key, _, value = line[1:].partition('=')

                if key.strip() == 'seed':
                    seed = int(value)

                continue

            if len(line.strip()) == 0:
                continue

            fields = line.split('\t')

            if len(fields) != 2 or fields[1] not in partitions:
                raise ParseError('Expected \'item<TAB>{train|val|test}\'', path, line_number)

            if item_index is not None:
                if fields[0] not in item_index:
                    unknown += 1
                    continue

                item = item_index[fields[0]]
            else:
                try:
                    item = int(fields[0])
                except ValueError:
                    raise ParseError('Invalid item id \'{}\''.format(fields[0]), path, line_number) from None

            partitions[fields[1]].append(item)

    if unknown > 0:
        _log.warning('Skipped %d manifest items without features in %s', unknown, path)

    for label, items in partitions.items():
        if len(items) == 0:
            raise SplitError('Manifest {} has no {} items'.format(path, label))

    return ItemSplit(partitions['train'], partitions['val'], partitions['test'], seed)

def dataset_stats(prefs, features):
    '''Summary statistics of a dataset.

    Args:
        prefs (coldrec.sparse.PreferenceData): Preferences
        features (coldrec.sparse.ItemFeatureMatrix): Item features

    Returns:
        dict: users, items, features, preferences, density, avg_user_preferences, avg_item_features
    '''
    n_preferences = prefs.n_preferences()
    cells = prefs.n_users * prefs.n_items

    return {
        'users': prefs.n_users,
        'items': prefs.n_items,
        'features': features.n_features,
        'preferences': n_preferences,
        'density': n_preferences / cells if cells > 0 else 0.0,
        'avg_user_preferences': n_preferences / prefs.n_users if prefs.n_users > 0 else 0.0,
        'avg_item_features': features.nnz() / features.n_items if features.n_items > 0 else 0.0
    }

def save_model(path, model, feature_hash=None):
    '''Save a trained FBSM or UFSM model.

    Args:
        path (str): Output file path
        model (FbsmModel or LinearSimilarityModel): Model to save
        feature_hash (bytes): Digest from *feature_space_hash()*, defaults to None (all zeros)

    Raises:
        FormatError: Model is not finite or not a supported kind
    '''
    if not model.is_finite():
        raise FormatError('Refusing to save a model with non-finite parameters')

    feature_hash = feature_hash if feature_hash is not None else bytes(16)

    if isinstance(model, FbsmModel):
        header = _FBSM_HEADER.pack(_FBSM_MAGIC, model.n_features, model.h, feature_hash)
        arrays = (model.d, model.V)
    elif isinstance(model, LinearSimilarityModel):
        header = _UFSM_HEADER.pack(_UFSM_MAGIC, model.n_features, model.l, model.n_users, feature_hash)
        arrays = (model.W, model.M)
    else:
        raise FormatError('Cannot save model of type {}'.format(type(model).__name__))

    with open(path, 'wb') as fd:
        fd.write(header)

        for array in arrays:
            fd.write(np.ascontiguousarray(array, dtype='<f8').tobytes())

def _read_array(data, offset, count, shape, path):
    end = offset + 8 * count

    if end > len(data):
        raise FormatError('Model file {} is truncated'.format(path))

    return np.frombuffer(data[offset:end], dtype='<f8').astype(np.float64).reshape(shape), end

def load_model(path, n_features=None, feature_hash=None):
    '''Load a model saved by *save_model()*.

    Args:
        path (str): Model file path
        n_features (int): Expected number of features, defaults to None (not checked)
        feature_hash (bytes): Expected feature space digest, defaults to None (not checked)

    Returns:
        tuple: (model, stored feature hash)

    Raises:
        FormatError: Unknown magic or version, truncated file, or mismatching number of features or feature hash
    '''
    with open(path, 'rb') as fd:
        data = fd.read()

    magic = data[:5]

    if magic == _FBSM_MAGIC and len(data) >= _FBSM_HEADER.size:
        _, n_f, h, stored_hash = _FBSM_HEADER.unpack_from(data)
        d, offset = _read_array(data, _FBSM_HEADER.size, n_f, (n_f,), path)
        V, offset = _read_array(data, offset, h * n_f, (h, n_f), path)
        model = FbsmModel(d, V)
    elif magic == _UFSM_MAGIC and len(data) >= _UFSM_HEADER.size:
        _, n_f, l, n_users, stored_hash = _UFSM_HEADER.unpack_from(data)
        W, offset = _read_array(data, _UFSM_HEADER.size, l * n_f, (l, n_f), path)
        M, offset = _read_array(data, offset, n_users * l, (n_users, l), path)
        model = LinearSimilarityModel(W, M)
    else:
        raise FormatError('{} is not a coldrec model file (magic {!r})'.format(path, magic))

    if offset != len(data):
        raise FormatError('Model file {} has {} trailing bytes'.format(path, len(data) - offset))

    if n_features is not None and n_f != n_features:
        raise FormatError('Model has {} features, expected {}'.format(n_f, n_features))

    if feature_hash is not None and stored_hash != bytes(16) and stored_hash != feature_hash:
        raise FormatError('Model was trained on a different feature space')

    return model, stored_hash
