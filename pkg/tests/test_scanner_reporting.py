"""Tests for corpus scanning, failure isolation and report rendering."""

import io
import json

import pandas as pd
import pytest

from src.core.errors import CorpusUnreadableError, UnknownFormatError
from src.core.paths import config_path
from src.engine.findings import Detector
from src.engine.reporting import FINDING_COLUMNS, emit_report, parse_json_report, provider_frame
from src.engine.scanner import NOT_APPLICABLE, ScanReport, SecretScanner, list_apps, load_app_files
from src.sigflow.detector import SliceDiagnostic
from tests.conftest import GOOGLE_KEY, SAMPLE_HELPER_IR, SAMPLE_IR

MAILGUN_KEY = 'key-q7Hx2mPz9Wk4Lr8Tb3Nv6Cy1Jd5Fs0Ga'


def write_sample(root) -> str:
    app_dir = root / 'sample'
    app_dir.mkdir(parents=True)
    (app_dir / 'MainActivity.jir').write_text(SAMPLE_IR, encoding='utf-8')
    (app_dir / 'NetHelper.jir').write_text(SAMPLE_HELPER_IR, encoding='utf-8')
    return str(root)


@pytest.fixture
def sample_report(scan_config, tmp_path):
    return SecretScanner(scan_config()).scan(write_sample(tmp_path / 'corpus'))


class TestCorpusLayout:
    """Tests for app discovery."""

    def test_list_apps(self, tmp_path) -> None:
        """Subdirectories with IR files are apps; root IR files form one more."""
        (tmp_path / 'a').mkdir()
        (tmp_path / 'a' / 'X.jir').write_text('class a.X\n', encoding='utf-8')
        (tmp_path / 'b').mkdir()
        (tmp_path / 'c').mkdir()
        (tmp_path / 'c' / 'notes.txt').write_text('nothing', encoding='utf-8')
        (tmp_path / 'R.jir').write_text('class r.R\n', encoding='utf-8')
        apps = list_apps(str(tmp_path))
        assert [app_id for app_id, _ in apps] == sorted(['a', tmp_path.name])

    def test_unreadable_corpus(self, tmp_path) -> None:
        """A missing directory is a corpus error."""
        with pytest.raises(CorpusUnreadableError):
            list_apps(str(tmp_path / 'missing'))

    def test_env_file_is_loaded(self, tmp_path) -> None:
        """env.json rides along with the IR files."""
        (tmp_path / 'A.jir').write_text('class a.A\n', encoding='utf-8')
        (tmp_path / 'env.json').write_text(json.dumps({'res': {'k': 'v'}}), encoding='utf-8')
        files, env = load_app_files(str(tmp_path))
        assert [path for path, _ in files] == ['A.jir']
        assert env == {'res': {'k': 'v'}}


class TestScanner:
    """Tests for the scan pipeline."""

    def test_sample_findings(self, sample_report) -> None:
        """Both detectors report the Google key; only slicing finds the Mailgun key."""
        by_value = {f.value: f for f in sample_report.findings}
        assert set(by_value) == {GOOGLE_KEY, MAILGUN_KEY}
        assert by_value[GOOGLE_KEY].detectors == {Detector.THREE_LAYER, Detector.SIG_FLOW}
        assert by_value[MAILGUN_KEY].detectors == {Detector.SIG_FLOW}
        assert sample_report.overlap() == {'sig_flow': 1, 'sig_flow+three_layer': 1}
        assert len(sample_report.diagnostics) == 1

    def test_broken_app_is_isolated(self, scan_config, tmp_path) -> None:
        """A malformed app is recorded as failed and the rest still scan."""
        corpus = write_sample(tmp_path / 'corpus')
        broken = tmp_path / 'corpus' / 'broken'
        broken.mkdir()
        (broken / 'Bad.jir').write_text('r1 = "no class header"\n', encoding='utf-8')
        report = SecretScanner(scan_config()).scan(corpus)
        failed = report.failed_apps
        assert [app.app_id for app in failed] == ['broken']
        assert failed[0].error_type == 'parse_error'
        assert 'Bad.jir:1' in failed[0].error
        assert {f.value for f in report.findings} == {GOOGLE_KEY, MAILGUN_KEY}

    def test_degraded_statements_counted_per_app(self, scan_config, tmp_path) -> None:
        """Each app reports its own degraded statements, also on the thread pool."""
        for i in range(12):
            app_dir = tmp_path / 'corpus' / f'app{i:02d}'
            app_dir.mkdir(parents=True)
            (app_dir / 'A.jir').write_text('class a.A\nmethod void m() {\n    ??? odd\n    return\n}\n',
                                           encoding='utf-8')
        report = SecretScanner(scan_config(jobs=8)).scan(str(tmp_path / 'corpus'))
        assert [app.degraded_statements for app in report.apps] == [1] * 12
        assert report.degraded_statements == 12

    def test_worker_count_does_not_change_output(self, make_corpus, example_seeds, scan_config, tmp_path) -> None:
        """Serial and threaded scans emit byte-identical reports."""
        corpus = make_corpus(example_seeds, n_apps=50, seed=21)
        outputs = corpus.write(str(tmp_path), with_datasets=False)
        serial = SecretScanner(scan_config(jobs=1)).scan(outputs['corpus'])
        threaded = SecretScanner(scan_config(jobs=8)).scan(outputs['corpus'])
        assert emit_report(serial) == emit_report(threaded)
        assert len(serial.findings) > 0

    def test_memory_scan_matches_disk_scan(self, example_corpus, scan_config, tmp_path) -> None:
        """Scanning parsed apps gives the same findings as scanning the written corpus."""
        outputs = example_corpus.write(str(tmp_path), with_datasets=False)
        scanner = SecretScanner(scan_config())
        from_disk = scanner.scan(outputs['corpus'])
        in_memory = scanner.scan_apps(example_corpus.parsed(),
                                      {app.app_id: app.env for app in example_corpus.apps})
        assert [f.key for f in in_memory.findings] == [f.key for f in from_disk.findings]

    def test_dump_strings(self, scan_config, tmp_path) -> None:
        """Every occurrence of every app lands in the CSV dump."""
        corpus = write_sample(tmp_path / 'corpus')
        dump = str(tmp_path / 'strings.csv')
        report = SecretScanner(scan_config()).scan(corpus, dump_strings=dump)
        frame = pd.read_csv(dump, keep_default_na=False, dtype=str)
        assert len(frame) == sum(app.n_strings for app in report.apps)
        assert GOOGLE_KEY in set(frame['value'])


class TestReporting:
    """Tests for JSON, CSV and table output."""

    def test_json_is_masked_by_default(self, sample_report) -> None:
        """Secret values are shortened unless unmasking is requested."""
        masked = emit_report(sample_report)
        assert GOOGLE_KEY.encode() not in masked
        assert 'AIza…(39)'.encode('utf-8') in masked
        assert GOOGLE_KEY.encode() in emit_report(sample_report, mask=False)

    def test_json_schema(self, sample_report) -> None:
        """The report carries a version, a summary and per-provider counts."""
        data = parse_json_report(emit_report(sample_report))
        assert data['schema_version'] == '1.0'
        assert data['masked'] is True
        assert data['summary']['findings'] == 2
        assert data['summary']['unique_pairs'] == sum(data['overlap'].values())
        assert data['provider_counts']['google_api_key'] == {'three_layer': 1, 'sig_flow': 1, 'total': 1}

    def test_csv_rows_match_counts(self, sample_report) -> None:
        """One row per finding; per-provider totals agree with the count table."""
        frame = pd.read_csv(io.BytesIO(emit_report(sample_report, 'csv')), keep_default_na=False)
        assert list(frame.columns) == FINDING_COLUMNS
        assert len(frame) == len(sample_report.findings)
        counts = sample_report.provider_counts()
        for provider, rows in frame.groupby('provider'):
            assert counts[provider]['total'] == len(rows)

    def test_not_applicable_cells(self, scan_config, tmp_path) -> None:
        """Providers a detector has no catalog entry for are marked NA."""
        with open(config_path('cloud_api_signatures.json'), encoding='utf-8') as f:
            google_only = [entry for entry in json.load(f) if entry['provider'] == 'google_api_key']
        sigs = tmp_path / 'google_sigs.json'
        sigs.write_text(json.dumps(google_only), encoding='utf-8')
        report = SecretScanner(scan_config(signatures_path=str(sigs))).scan(write_sample(tmp_path / 'corpus'))
        counts = report.provider_counts()
        assert counts['mailgun']['sig_flow'] == NOT_APPLICABLE
        assert counts['mailgun']['three_layer'] == 0
        assert counts['google_api_key']['sig_flow'] == 1
        assert provider_frame(report).loc['mailgun', 'sig_flow'] == NOT_APPLICABLE

    def test_table(self, sample_report) -> None:
        """The text table has the count, overlap and findings sections."""
        text = emit_report(sample_report, 'table').decode('utf-8')
        for heading in ('Findings per provider and detector', 'Detector overlap', 'Findings'):
            assert heading in text
        assert GOOGLE_KEY not in text

    def test_unknown_format(self, sample_report) -> None:
        """Only json, csv and table exist."""
        with pytest.raises(UnknownFormatError):
            emit_report(sample_report, 'xml')

    def test_diagnostic_partials_are_masked(self, sample_report) -> None:
        """Unresolved slices never leak more than a masked prefix."""
        data = parse_json_report(emit_report(sample_report))
        assert [(d['location'], d['reason']) for d in data['diagnostics']] == [
            ('com.example.app.NetHelper.send:1', 'no_caller')]

        partial = SliceDiagnostic('sample', 'com.example.app.NetHelper.send:1', 'mailgun',
                                  'com.mailgun.client.MailgunClient.config', 0, 'partial', None,
                                  'key-q7Hx2mPz9W')
        report = ScanReport(corpus='c', detectors=[Detector.SIG_FLOW], diagnostics=[partial])
        assert parse_json_report(emit_report(report))['diagnostics'][0]['partial'] == 'key-…(14)'
        assert parse_json_report(emit_report(report, mask=False))['diagnostics'][0]['partial'] == 'key-q7Hx2mPz9W'
