import json
import pytest
import pandas as pd
from main import run


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    """
    Fixture to make sure the environment does not override the seed.
    """
    monkeypatch.delenv('LRGK_SEED', raising=False)


@pytest.fixture
def bundle(tmp_path):
    """
    Fixture to generate a labeled 6x6 grid bundle through the command line.

    Returns:
    - str: Path of the bundle directory.
    """
    out = tmp_path / 'bundle'
    code = run(['--out', str(out), '--seed', '1', '--threads', '1', 'generate', '--grid', '6x6',
                '--label', '--hops', '4', '--quantiles', '2'])
    assert code == 0
    return str(out)


@pytest.fixture
def config_file(tmp_path, bundle):
    """
    Fixture to write a short training configuration pointing at the bundle.
    """
    path = tmp_path / 'short.toml'
    path.write_text(f"""[Dataset]
bundle = '{bundle}'

[Training]
architecture = "gcn"
layers = 2
hops = 2
hidden = 8
lr = 0.01
dropout = 0.0
epochs = 4
record_window = 2

[Influence]
hops = 2
samples = 5

[IO]
logName = "RunSummary"
results = "{tmp_path / 'results'}"
""")
    return str(path)


def test_bound_only(tmp_path, capsys):
    """
    Test the bound evaluation without a graph.
    - Checks if (15, 121) prints 0.4741 and a manifest is written.
    """
    assert run(['--out', str(tmp_path), 'spectral', '--bound-only', '--dmax', '15', '--diam', '121']) == 0
    assert capsys.readouterr().out.strip() == '0.4741'
    manifest = json.loads((tmp_path / 'manifest.json').read_text())
    assert manifest['subcommand'] == 'spectral'
    assert json.loads((tmp_path / 'spectral.json').read_text())['bound_value'] == pytest.approx(0.4741, abs=5e-5)


def test_published_bounds(tmp_path, capsys):
    """
    Test that the reference graphs are listed with their bounds.
    """
    assert run(['--out', str(tmp_path), 'spectral', '--published']) == 0
    out = capsys.readouterr().out
    assert 'Cora' in out and '0.0324' in out and '-0.0640' in out


def test_exit_codes(tmp_path):
    """
    Test the exit codes.
    - Checks if a missing input file, a domain error and bad arguments give 2.
    """
    missing = str(tmp_path / 'missing.csv')
    assert run(['--out', str(tmp_path), 'ingest', '--nodes', missing, '--edges', missing]) == 2
    assert run(['--out', str(tmp_path), 'spectral', '--bound-only', '--dmax', '10', '--diam', '3']) == 2
    assert run(['--out', str(tmp_path), 'generate', '--grid', 'wide']) == 2
    assert run(['frobnicate']) == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    """
    Test that LRGK_SEED takes precedence over --seed.
    """
    monkeypatch.setenv('LRGK_SEED', '11')
    assert run(['--out', str(tmp_path), '--seed', '3', 'spectral', '--bound-only', '--dmax', '4', '--diam', '9']) == 0
    assert json.loads((tmp_path / 'manifest.json').read_text())['seed'] == 11


def test_ingest(tmp_path, capsys):
    """
    Test building a bundle from the sample city files.
    """
    out = tmp_path / 'city'
    assert run(['--out', str(out), '--threads', '1', 'ingest', '--nodes', 'tests/data/city_nodes.csv',
                '--edges', 'tests/data/city_edges.csv', '--label', '--hops', '4', '--quantiles', '4']) == 0
    features = pd.read_csv(out / 'features.csv')
    assert features.shape == (16, 38)
    assert json.loads((out / 'stats.json').read_text())['n_edges'] == 24


def test_generate_and_stats(bundle, tmp_path, capsys):
    """
    Test the generated bundle and the stats command.
    """
    labels = pd.read_csv(f'{bundle}/labels.csv')
    assert labels['label'].value_counts().tolist() == [18, 18]
    out = tmp_path / 'stats'
    assert run(['--out', str(out), 'stats', '--bundle', bundle]) == 0
    stats = json.loads((out / 'stats.json').read_text())
    assert stats['n_nodes'] == 36 and stats['max_degree'] == 4


def test_spectral_on_bundle(bundle, tmp_path):
    """
    Test eigenvalue estimates of a bundle.
    """
    out = tmp_path / 'spectral'
    assert run(['--out', str(out), 'spectral', '--bundle', bundle, '--decay-length', '5']) == 0
    report = json.loads((out / 'spectral.json').read_text())
    assert report['lambda_N']['value'] == 1.0
    assert len(report['decay_curve']) == 5
    assert report['bound_value'] < report['lambda_N_minus_1']['value']


def test_train_and_influence(config_file, tmp_path):
    """
    Test training from a configuration and the influence of the trained model.
    - Checks if the checkpoint, history and metrics are written.
    - Checks if the influence curve starts at 1.
    """
    assert run(['-c', config_file, '--threads', '1', 'train']) == 0
    results = tmp_path / 'results' / 'short_results'
    history = pd.read_csv(results / 'history.csv')
    assert history['epoch'].tolist() == [2, 4]
    assert (results / 'RunSummary').is_file()
    assert 0.0 <= json.loads((results / 'metrics.json').read_text())['test_acc'] <= 1.0

    out = tmp_path / 'influence'
    assert run(['-c', config_file, '--out', str(out), '--threads', '1', 'influence',
                '--checkpoint', str(results / 'checkpoint.pt')]) == 0
    curve = pd.read_csv(out / 'influence.csv')
    assert curve['h'].tolist() == [0, 1, 2]
    assert curve['T_bar_normalized'].iloc[0] == 1.0
    assert json.loads((out / 'influence.json').read_text())['n_sampled'] == 5


def test_train_needs_labels(tmp_path):
    """
    Test that training an unlabeled bundle fails with exit code 2.
    """
    out = tmp_path / 'plain'
    assert run(['--out', str(out), 'generate', '--grid', '4x4']) == 0
    assert run(['--out', str(tmp_path / 'train'), 'train', '--bundle', str(out)]) == 2
