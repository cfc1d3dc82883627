"""Tests for the run_system.py command line."""

import json
import random
import string

import pytest

from main import SecretSieveSystem
from run_system import EXIT_CORPUS_UNREADABLE, EXIT_OK, EXIT_USAGE, UNMASK_ACK_FLAG, main
from src.learning.models import Label, LabeledGroupDataset

PHRASES = ['Loading...', 'Cancel', 'Settings', 'Try again later', 'Network error', 'Sign in',
           'Welcome back', 'Save changes', 'Open file', 'Close']

SPEC = {'n_apps': 3, 'noise_profile': 'quiet', 'seeds': [
    {'provider': 'google_api_key', 'placement': 'literal_arg', 'count': 4},
    {'provider': 'mailgun', 'placement': 'split_concat', 'count': 2},
]}


def random_key(rng: random.Random, length: int = 39) -> str:
    return ''.join(rng.choice(string.ascii_letters + string.digits) for _ in range(length))


def write_lines(path, records) -> str:
    path.write_text(''.join(json.dumps(r) + '\n' for r in records), encoding='utf-8')
    return str(path)


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv('SECRETSIEVE_CONFIG', raising=False)


@pytest.fixture(scope='module')
def generated(tmp_path_factory):
    """A small corpus written the way gen-corpus writes it"""
    out = tmp_path_factory.mktemp('generated')
    (out / 'spec.json').write_text(json.dumps(SPEC), encoding='utf-8')
    SecretSieveSystem().generate_corpus(str(out / 'spec.json'), str(out), seed=3, n_apps=5, with_datasets=False)
    return out


def scan_output(capsys, *argv: str):
    code = main(['scan', *argv])
    return code, capsys.readouterr().out


class TestScanCommand:
    """Tests for scan."""

    def test_corpus_layout(self, generated) -> None:
        """The requested app count overrides the spec count."""
        assert sorted(p.name for p in (generated / 'corpus').iterdir()) == [f'app{i:04d}' for i in range(5)]
        assert (generated / 'manifest.jsonl').is_file()
        assert not (generated / 'datasets').exists()

    def test_scan_json_to_stdout(self, generated, capsys) -> None:
        """The default format is masked JSON."""
        code, out = scan_output(capsys, str(generated / 'corpus'))
        assert code == EXIT_OK
        report = json.loads(out)
        assert report['masked'] is True
        assert report['summary']['apps'] == 5
        assert report['summary']['findings'] == 6

    def test_scan_csv_to_file(self, generated, tmp_path) -> None:
        """--out writes the report instead of printing it."""
        target = tmp_path / 'reports' / 'scan.csv'
        assert main(['scan', str(generated / 'corpus'), '--format', 'csv', '--out', str(target)]) == EXIT_OK
        lines = target.read_text(encoding='utf-8').splitlines()
        assert lines[0].startswith('app_id,provider,value')
        assert len(lines) == 7

    def test_unmask_needs_acknowledgement(self, generated, capsys) -> None:
        """Raw values are only printed with the explicit acknowledgement flag."""
        code, out = scan_output(capsys, str(generated / 'corpus'), '--unmask')
        assert code == EXIT_USAGE
        assert out == ''

        manifest = [json.loads(line) for line in (generated / 'manifest.jsonl').read_text().splitlines()]
        code, out = scan_output(capsys, str(generated / 'corpus'), '--unmask', UNMASK_ACK_FLAG)
        assert code == EXIT_OK
        assert all(entry['value'] in out for entry in manifest)

    def test_unreadable_corpus(self, tmp_path) -> None:
        """A missing corpus has its own exit status."""
        assert main(['scan', str(tmp_path / 'missing')]) == EXIT_CORPUS_UNREADABLE

    def test_bad_format(self, generated) -> None:
        """argparse rejections exit with the usage status."""
        with pytest.raises(SystemExit) as exc:
            main(['scan', str(generated / 'corpus'), '--format', 'xml'])
        assert exc.value.code == EXIT_USAGE

    def test_missing_config_file(self, generated, tmp_path) -> None:
        """A named config file that does not exist is a usage error."""
        assert main(['--config', str(tmp_path / 'absent.json'), 'scan', str(generated / 'corpus')]) == EXIT_USAGE

    def test_learned_detector_without_model(self, generated) -> None:
        """Enabling a learned detector requires its model file."""
        assert main(['scan', str(generated / 'corpus'), '--detectors', 'intrinsic']) == EXIT_USAGE


class TestOtherCommands:
    """Tests for eval, train, study and status."""

    def test_eval(self, generated, capsys) -> None:
        """Scores come back per detector with a review sample."""
        code = main(['eval', str(generated / 'corpus'), str(generated / 'manifest.jsonl')])
        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result['seeded'] == 6
        assert result['score']['detectors']['sig_flow']['recall'] == 1.0
        assert result['review']['population'] == result['findings']

    def test_train(self, tmp_path, capsys) -> None:
        """A model file is written and its metrics printed."""
        rng = random.Random(2)
        dataset = LabeledGroupDataset()
        for i in range(30):
            dataset.add(f's{i}', ['setApiKey', random_key(rng)], Label.SECRET)
            dataset.add(f'n{i}', rng.sample(PHRASES, 2), Label.NO_SECRET)
        dataset.save(str(tmp_path / 'groups.jsonl'))

        model_path = tmp_path / 'models' / 'groups.json'
        code = main(['train', str(tmp_path / 'groups.jsonl'), '--model-kind', 'logistic_regression',
                     '--scheme', 'char_histogram', '--out', str(model_path)])
        assert code == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result['target'] == 'string_group'
        assert result['scheme'] == 'char_histogram'
        assert model_path.is_file()

    def test_train_rejects_scheme_for_target(self, tmp_path) -> None:
        """Intrinsic models only take character n-grams."""
        dataset = write_lines(tmp_path / 'd.jsonl', [])
        code = main(['train', dataset, '--target', 'intrinsic', '--scheme', 'tfidf', '--out', str(tmp_path / 'm.json')])
        assert code == EXIT_USAGE

    def test_study(self, tmp_path, capsys) -> None:
        """Two group files give a similarity report."""
        rng = random.Random(9)
        secret = write_lines(tmp_path / 'secret.jsonl', [['setApiKey', random_key(rng)] for _ in range(15)])
        plain = write_lines(tmp_path / 'plain.jsonl', [rng.sample(PHRASES, 2) for _ in range(15)])
        assert main(['study', secret, plain, '--max-pairs', '50']) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report['variant'] == 'case_sensitive'
        assert report['n_secret'] == 15
        assert report['mean_ss'] > report['mean_sn']

    def test_status(self, capsys) -> None:
        """Status prints the effective configuration."""
        assert main(['status']) == EXIT_OK
        status = json.loads(capsys.readouterr().out)
        assert status['system_name'] == 'SecretSieve'
        assert status['status'] == 'ready'
        assert status['config']['jobs'] == 4

    def test_gen_corpus(self, tmp_path, capsys) -> None:
        """gen-corpus prints where it wrote the corpus, manifest and datasets."""
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps(SPEC), encoding='utf-8')
        code = main(['gen-corpus', str(spec), '--out', str(tmp_path / 'out'), '--seed', '3', '--jobs', '2'])
        assert code == EXIT_OK
        outputs = json.loads(capsys.readouterr().out)
        assert set(outputs) == {'corpus', 'manifest', 'string_groups', 'intrinsic', 'context'}
        assert len((tmp_path / 'out' / 'manifest.jsonl').read_text().splitlines()) == 6

    def test_gen_corpus_bad_spec(self, tmp_path) -> None:
        """An unknown provider in the spec is a usage error."""
        spec = tmp_path / 'spec.json'
        spec.write_text(json.dumps({'seeds': [{'provider': 'nobody'}]}), encoding='utf-8')
        assert main(['gen-corpus', str(spec), '--out', str(tmp_path / 'out')]) == EXIT_USAGE
