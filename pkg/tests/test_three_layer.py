"""Tests for the Three-Layer Filter: rules, the three filters and the detector."""

import random
import string

import pytest

from src.core.errors import EmptyStringError, RuleCompileError
from src.core.paths import config_path
from src.engine.findings import Detector
from src.extraction.string_extractor import Origin, StringOccurrence, extract_occurrences
from src.three_layer.detector import ThreeLayerFilter, run_three_layer, scan_regex
from src.three_layer.filters import (
    WordDictionary, entropy_filter, entropy_verdicts, pattern_filter, shannon_entropy, word_filter,
)
from src.three_layer.rules import DetectionRule, PrecisionClass, load_rules, rules_from_entries
from tests.conftest import GOOGLE_KEY

KEY_ALPHABET = string.ascii_letters + string.digits + '-_'
LOW_ENTROPY_GOOGLE = 'AIza' + 'ace' * 11 + 'ac'


def occurrence(value: str, app_id: str = 'app', index: int = 0) -> StringOccurrence:
    return StringOccurrence(value=value, app_id=app_id, class_name='a.A', method_name='m',
                            statement_index=index, origin=Origin.METHOD_BODY)


def random_google_keys(count: int, seed: int = 3):
    rng = random.Random(seed)
    return ['AIza' + ''.join(rng.choice(KEY_ALPHABET) for _ in range(35)) for _ in range(count)]


def has_run(s: str, run_len: int) -> bool:
    for start in range(len(s) - run_len + 1):
        steps = {ord(b) - ord(a) for a, b in zip(s[start:start + run_len], s[start + 1:start + run_len])}
        if steps in ({0}, {1}, {-1}):
            return True
    return False


class TestEntropy:
    """Tests for Shannon entropy and the 3-sigma verdicts."""

    @pytest.mark.parametrize("value, expected", [('aaaa', 0.0), ('abcd', 2.0), ('aab', 0.9182958)])
    def test_known_values(self, value: str, expected: float) -> None:
        """Entropy in bits per character."""
        assert shannon_entropy(value) == pytest.approx(expected, abs=1e-6)

    def test_empty_string_raises(self) -> None:
        """Entropy of nothing is undefined."""
        with pytest.raises(EmptyStringError):
            shannon_entropy('')

    def test_low_outlier_fails(self) -> None:
        """One value far below the group mean is rejected."""
        flags = entropy_verdicts([4.0] * 20 + [0.5])
        assert flags[-1] is False
        assert all(flags[:-1])

    def test_high_outlier_depends_on_sidedness(self) -> None:
        """High outliers fail two-sided and pass low-sided."""
        values = [2.0] * 20 + [6.0]
        assert entropy_verdicts(values, 'two')[-1] is False
        assert entropy_verdicts(values, 'low')[-1] is True

    def test_small_and_constant_groups_pass(self) -> None:
        """Fewer than two values, or zero spread, never fail."""
        assert entropy_verdicts([]) == []
        assert entropy_verdicts([0.1]) == [True]
        assert entropy_verdicts([3.0, 3.0, 3.0]) == [True, True, True]

    def test_bad_sidedness(self) -> None:
        """Only 'two' and 'low' are accepted."""
        with pytest.raises(ValueError):
            entropy_verdicts([1.0, 2.0], 'high')

    def test_groups_are_independent(self) -> None:
        """An outlier in one group does not affect another."""
        result = entropy_filter({'a': [4.0] * 20 + [0.5], 'b': [0.5, 0.6]})
        assert result['a'][-1] is False
        assert result['b'] == [True, True]


class TestWordAndPattern:
    """Tests for the dictionary and repetition filters."""

    def test_word_filter_min_length(self) -> None:
        """Only words of at least the minimum length reject a string."""
        words = WordDictionary(['secret', 'key', 'token'])
        assert word_filter('xxSECRETxx', words) is False
        assert word_filter('xxkeyxx', words) is True
        assert word_filter('xxkeyxx', words, min_word_len=3) is False
        assert words.find('mysecrettoken', 5) == ['token', 'secret']

    def test_word_filter_accepts_plain_iterables(self) -> None:
        """A list of words works in place of a dictionary object."""
        assert word_filter('hello-world', ['world']) is False

    def test_dictionary_loads_bundled_list(self, dictionary) -> None:
        """The bundled word list is non-trivial and lower-cased."""
        assert len(dictionary) > 500
        assert 'password' in dictionary

    @pytest.mark.parametrize("value, passes", [
        ('aaaa', False), ('abcd', False), ('dcba', False), ('1234', False),
        ('aaab', True), ('abce', True), ('a1b2c3', True), ('', True),
    ])
    def test_runs(self, value: str, passes: bool) -> None:
        """Runs of four identical or consecutive characters fail."""
        assert pattern_filter(value) is passes

    def test_matches_brute_force(self) -> None:
        """The streaming check agrees with a window-by-window check."""
        rng = random.Random(0)
        alphabet = 'abcd1234'
        for _ in range(10_000):
            s = ''.join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
            for run_len in (2, 3, 4):
                assert pattern_filter(s, run_len) is not has_run(s, run_len), (s, run_len)

    def test_run_len_lower_bound(self) -> None:
        """A run length below two is meaningless."""
        with pytest.raises(ValueError):
            pattern_filter('abc', 1)


class TestRules:
    """Tests for rule compilation and matching."""

    def test_catalog_counts(self) -> None:
        """Loose rules are included unless excluded."""
        path = config_path('detection_rules.json')
        assert len(load_rules(path)) == 19
        assert len(load_rules(path, include_loose=False)) == 17

    @pytest.mark.parametrize("kwargs", [
        {'provider': '', 'pattern': 'x'},
        {'provider': 'p', 'pattern': '(unclosed'},
        {'provider': 'p', 'pattern': 'x', 'precision_class': 'fuzzy'},
        {'provider': 'p', 'pattern': 'x', 'filters': ['entropy', 'magic']},
    ])
    def test_build_errors(self, kwargs) -> None:
        """Malformed rules fail at load time."""
        with pytest.raises(RuleCompileError):
            DetectionRule.build(**kwargs)

    def test_duplicate_ids(self) -> None:
        """Two entries with the same id are rejected."""
        entries = [{'id': 'r', 'provider': 'a', 'pattern': 'x'}, {'id': 'r', 'provider': 'b', 'pattern': 'y'}]
        with pytest.raises(RuleCompileError):
            rules_from_entries(entries)

    def test_precise_rules_search(self, rules) -> None:
        """Precise rules find the key inside a longer string."""
        google = [r for r in rules if r.rule_id == 'google_api_key'][0]
        found = google.match(f'https://maps.example.com/?key={GOOGLE_KEY}&z=3')
        assert found.group(0) == GOOGLE_KEY

    def test_loose_rules_need_whole_string(self, rules) -> None:
        """Loose rules only fire on a full match."""
        loose = [r for r in rules if r.rule_id == 'twitter_client_id'][0]
        assert loose.precision_class == PrecisionClass.LOOSE
        assert loose.match('Kq8Zt3Wm9Xr2Yp7Ln4Vb') is not None
        assert loose.match('id Kq8Zt3Wm9Xr2Yp7Ln4Vb') is None
        assert loose.match('') is None


class TestThreeLayerFilter:
    """Tests for the combined detector."""

    def test_sample_app_finds_google_key(self, sample_app, rules, dictionary) -> None:
        """The static-field key is reported; split mailgun pieces are not."""
        findings = run_three_layer(extract_occurrences(sample_app), rules, dictionary)
        assert [(f.value, f.provider) for f in findings] == [(GOOGLE_KEY, 'google_api_key')]
        finding = findings[0]
        assert finding.detectors == {Detector.THREE_LAYER}
        assert finding.confidence[Detector.THREE_LAYER] == 1.0
        assert finding.locations[0].render() == 'com.example.app.MainActivity.<static>'

    def test_finding_value_is_matched_substring(self, rules) -> None:
        """Surrounding text is not part of the reported value."""
        detector = ThreeLayerFilter(rules, ['zzzzzzzz'])
        findings = detector.run([occurrence(f'key={GOOGLE_KEY}')])
        assert findings[0].value == GOOGLE_KEY

    def test_every_filter_is_evaluated(self, rules) -> None:
        """Verdicts carry all enabled filters even after one fails."""
        detector = ThreeLayerFilter(rules, ['password'])
        key = 'AIzaPASSWORD' + 'x7Q2' * 6 + 'abcd' + 'Zq9'
        verdicts = detector.evaluate(detector.match([occurrence(key)]))
        verdict = [v for v in verdicts if v.rule_id == 'google_api_key'][0]
        assert set(verdict.passed) == {'entropy', 'word', 'pattern'}
        assert verdict.passed['word'] is False
        assert verdict.passed['pattern'] is False
        assert verdict.dictionary_hits == ['password']
        assert not verdict.final

    def test_firebase_keys_fail_pattern_filter(self, rules) -> None:
        """The fixed AAAA prefix is a run of four."""
        rng = random.Random(1)
        tail = ''.join(rng.choice(string.ascii_letters) for _ in range(140))
        key = 'AAAA' + 'bX3kP9q' + ':' + tail
        detector = ThreeLayerFilter(rules, ['zzzzzzzz'])
        matches = detector.match([occurrence(key)])
        assert [m.rule.provider for m in matches] == ['firebase_cloud_messaging']
        assert detector.evaluate(matches)[0].passed['pattern'] is False

    def test_loose_findings_have_low_confidence(self, rules) -> None:
        """Loose-rule findings carry confidence 0.5."""
        detector = ThreeLayerFilter(rules, ['zzzzzzzz'])
        findings = detector.run([occurrence('Kq8Zt3Wm9Xr2Yp7Ln4Vb')])
        assert findings[0].provider == 'twitter_client_id'
        assert findings[0].confidence[Detector.THREE_LAYER] == 0.5

    def test_entropy_scope(self, rules) -> None:
        """A low-entropy key fails against the corpus group but passes alone in its app."""
        occs = [occurrence(key, app_id=f'app{i:02d}') for i, key in enumerate(random_google_keys(20))]
        occs.append(occurrence(LOW_ENTROPY_GOOGLE, app_id='lonely'))
        google_only = [r for r in rules if r.rule_id == 'google_api_key']

        corpus_scope = ThreeLayerFilter(google_only, ['zzzzzzzz'], {'entropy_scope': 'corpus'})
        verdicts = corpus_scope.evaluate(corpus_scope.match(occs))
        assert verdicts[-1].passed['entropy'] is False

        app_scope = ThreeLayerFilter(google_only, ['zzzzzzzz'], {'entropy_scope': 'app'})
        verdicts = app_scope.evaluate(app_scope.match(occs))
        assert all(v.passed['entropy'] for v in verdicts)

    def test_bad_scope(self, rules) -> None:
        """Unknown entropy scopes are rejected."""
        with pytest.raises(ValueError):
            ThreeLayerFilter(rules, [], {'entropy_scope': 'global'})

    def test_duplicate_values_merge(self, rules) -> None:
        """The same key twice in an app is one finding with two locations."""
        detector = ThreeLayerFilter(rules, ['zzzzzzzz'])
        findings = detector.run([occurrence(GOOGLE_KEY, index=0), occurrence(GOOGLE_KEY, index=4)])
        assert len(findings) == 1
        assert findings[0].multiplicity == 2
        assert len(findings[0].locations) == 2

    def test_scan_regex_skips_empty_strings(self, rules) -> None:
        """Empty literals never produce matches."""
        assert scan_regex([occurrence('')], rules) == []
