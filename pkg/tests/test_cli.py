import pytest

from coldrec.__main__ import main
from coldrec.dataio import write_sparse_features, write_preferences
from coldrec.synthetic import planted_dataset

NAME = 'Command Line'

TERMS = 'i1\tx\t1\ni1\tx\t2\ni1\ty\t1\ni2\tx\t3\ni2\ty\t1\ni3\ty\t1\ni3\tz\t1\ni4\ty\t1\n'

TRAIN_SWITCHES = ['--h', '3', '--alpha-d', '0.05', '--alpha-v', '0.05', '--lambda', '0.001', '--beta', '0.001', '--max-epochs', '3']


@pytest.fixture
def dataset(tmp_path):
    features, prefs, _ = planted_dataset(seed=4, n_items=100, n_users=50)
    paths = {'features': str(tmp_path / 'features.tsv'), 'prefs': str(tmp_path / 'prefs.tsv'), 'split': tmp_path / 'split'}
    write_sparse_features(paths['features'], features)
    write_preferences(paths['prefs'], prefs)
    assert main(['split', '--prefs', paths['prefs'], '--features', paths['features'], '--output', str(paths['split'])]) == 0

    for name in ('train', 'val', 'test', 'manifest'):
        paths[name] = str(paths['split'] / (name + '.tsv'))

    return paths

def data_switches(paths, *keys):
    switches = []

    for key in keys:
        switches += ['--' + key, paths[key]]

    return switches

def log_records(path):
    with open(path, 'r', encoding='utf-8') as fd:
        return [line.rstrip('\n').split('\t') for line in fd if not line.startswith('#')]

def test_prep_is_idempotent(tmp_path, capsys):
    terms = tmp_path / 'terms.tsv'
    terms.write_text(TERMS)
    first = tmp_path / 'first'
    second = tmp_path / 'second'

    assert main(['prep', '--terms', str(terms), '--min-df', '1', '--max-frac', '0.5', '--output', str(first)]) == 0
    assert 'features: 2' in capsys.readouterr().out
    assert (first / 'vocabulary.tsv').exists()

    assert main(['prep', '--sparse-features', str(first / 'features.tsv'), '--output', str(second)]) == 0
    assert (second / 'features.tsv').read_bytes() == (first / 'features.tsv').read_bytes()

def test_prep_errors(tmp_path):
    terms = tmp_path / 'terms.tsv'
    terms.write_text(TERMS)

    assert main(['prep', '--terms', str(terms), '--min-df', '9', '--max-frac', '1.0', '--output', str(tmp_path / 'out')]) == 2
    assert main(['prep', '--output', str(tmp_path / 'out')]) == 1

def test_split_is_deterministic(tmp_path, dataset):
    again = tmp_path / 'again'
    assert main(['split', '--prefs', dataset['prefs'], '--features', dataset['features'], '--output', str(again)]) == 0
    assert (again / 'manifest.tsv').read_bytes() == (dataset['split'] / 'manifest.tsv').read_bytes()
    assert (again / 'test.tsv').read_bytes() == (dataset['split'] / 'test.tsv').read_bytes()

def test_split_bad_fractions(tmp_path, dataset):
    out = str(tmp_path / 'bad')
    assert main(['split', '--prefs', dataset['prefs'], '--fractions', '0.5', '0.5', '0.5', '--output', out]) == 1
    assert main(['split', '--prefs', dataset['prefs'], '--fractions', '1', '0', '0', '--output', out]) == 2

def test_train_cosim_rejected(tmp_path, dataset):
    model_file = str(tmp_path / 'cosim.bin')
    assert main(['train', '--model', 'cosim', '--model-file', model_file] + data_switches(dataset, 'features', 'train', 'val')) == 1

def test_pipeline(tmp_path, dataset, capsys):
    model_file = str(tmp_path / 'fbsm.bin')
    report = str(tmp_path / 'fbsm.report')
    cosim_report = str(tmp_path / 'cosim.report')

    args = ['train', '--model-file', model_file] + TRAIN_SWITCHES + data_switches(dataset, 'features', 'train', 'val', 'manifest')
    assert main(args) == 0
    assert 'best epoch' in capsys.readouterr().out

    records = log_records(model_file + '.log')
    assert [record[0] for record in records] == ['0', '1', '2', '3']
    assert all(len(record) == 5 for record in records)

    assert main(['--workers', '2', 'evaluate', '--model-file', model_file, '--report', report] + data_switches(dataset, 'features', 'train', 'test', 'manifest')) == 0
    assert 'Rec@10' in capsys.readouterr().out

    assert main(['evaluate', '--model', 'cosim', '--report', cosim_report, '--json-lines'] + data_switches(dataset, 'features', 'train', 'test', 'manifest')) == 0
    capsys.readouterr()

    assert main(['aggregate', report, cosim_report]) == 0
    assert 'reports: 2' in capsys.readouterr().out

    assert main(['compare', report, cosim_report] + data_switches(dataset, 'features', 'train')) == 0
    out = capsys.readouterr().out
    assert all(group in out for group in ('BETTER', 'SAME', 'WORSE'))

    assert main(['interactions', '--model-file', model_file, '--k', '3']) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3

def test_training_is_reproducible(tmp_path, dataset):
    files = [str(tmp_path / 'a.bin'), str(tmp_path / 'b.bin')]

    for model_file in files:
        assert main(['train', '--model-file', model_file] + TRAIN_SWITCHES + ['--no-log-timing'] + data_switches(dataset, 'features', 'train', 'val', 'manifest')) == 0

    with open(files[0], 'rb') as a, open(files[1], 'rb') as b:
        assert a.read() == b.read()

    assert all(len(record) == 4 for record in log_records(files[0] + '.log'))
    assert log_records(files[0] + '.log') == log_records(files[1] + '.log')

def test_settings_file(tmp_path, dataset):
    model_file = tmp_path / 'ufsm.bin'
    settings = tmp_path / 'run.ini'
    settings.write_text('model = ufsm\nl = 2\nmax_epochs = 2\nfeatures = {}\ntrain = {}\nval = {}\nmanifest = {}\n'.format(
        dataset['features'], dataset['train'], dataset['val'], dataset['manifest']))

    assert main(['--config', str(settings), 'train', '--model-file', str(model_file)]) == 0
    assert model_file.read_bytes()[:5] == b'UFSM1'
    assert any(line == '# model = ufsm' for line in (tmp_path / 'ufsm.bin.log').read_text().splitlines())

def test_gradcheck(capsys):
    assert main(['gradcheck', '--trials', '5']) == 0
    assert capsys.readouterr().out.splitlines()[-1] == 'pass'
    assert main(['gradcheck', '--trials', '5', '--h', '0']) == 0
    assert main(['gradcheck', '--trials', '5', '--flip-sign']) == 3

def test_bench(capsys):
    assert main(['bench', '--n-features', '16', '32', '--h', '2', '--nnz', '4', '--repeats', '3']) == 0
    out = capsys.readouterr().out
    assert 'us/triplet' in out
    assert 'slope vs n_features' in out

def test_missing_and_malformed_inputs(tmp_path, dataset):
    missing = str(tmp_path / 'missing.tsv')
    malformed = tmp_path / 'malformed.tsv'
    malformed.write_text('u1\ti1\t5\nno tabs here\n')

    assert main(['train', '--model-file', str(tmp_path / 'm.bin'), '--features', missing, '--train', dataset['train'], '--val', dataset['val']]) == 1
    assert main(['split', '--prefs', str(malformed), '--output', str(tmp_path / 'out')]) == 2
    assert main(['aggregate', missing]) == 1
    assert main(['--config', missing, 'split', '--prefs', dataset['prefs']]) == 1

def test_manifest_required(tmp_path, dataset):
    model_file = str(tmp_path / 'fbsm.bin')

    assert main(['train', '--model-file', model_file] + TRAIN_SWITCHES + data_switches(dataset, 'features', 'train', 'val')) == 1
    assert main(['evaluate', '--model', 'cosim'] + data_switches(dataset, 'features', 'train', 'test')) == 1
    assert main(['evaluate', '--model', 'cosim'] + data_switches(dataset, 'features', 'train', 'test', 'manifest')) == 0

def test_usage_errors(capsys):
    assert main(['train', '--h', 'abc']) == 1
    assert main(['split', '--no-such-switch']) == 1
    assert main([]) == 1
    assert 'usage' in capsys.readouterr().err
    assert main(['--help']) == 0
