"""Tests for the identifier-renaming obfuscator and what it does to each detector."""

import random
import string

import pytest

from src.core.errors import EmptyWindowError
from src.corpus.generator import DEFAULT_ENV_GETTERS
from src.corpus.obfuscator import RESERVED, obfuscate, short_names
from src.extraction.string_extractor import extract_occurrences
from src.ir.parser import parse_app
from src.ir.printer import print_app
from src.learning.detectors import context_degradation, paired_windows
from src.learning.features import Scheme
from src.learning.models import Label, LabeledGroupDataset, ModelKind, ModelTrainer
from src.sigflow.detector import run_sig_flow
from src.sigflow.signatures import remap_signatures
from src.three_layer.detector import run_three_layer
from tests.conftest import GOOGLE_KEY, app_env, ir_app

CLIENT_CALL = 'staticinvoke <com.example.net.Client: void setApiKey(java.lang.String)>(r1)'
TITLE_CALL = 'staticinvoke <com.example.ui.Screen: void setTitle(java.lang.String)>(r1)'

CONTEXT_APP = f"""
class com.example.app.Main

method void start() {{
    r1 = "{GOOGLE_KEY}"
    {CLIENT_CALL}
    return
}}
"""


def value_pairs(findings):
    return sorted((f.app_id, f.value, f.provider) for f in findings)


class TestRenaming:
    """Tests for the renamed app itself."""

    def test_short_names_skip_reserved_words(self) -> None:
        """Names run a..z, aa.. and never hit IR keywords."""
        names = short_names(1000)
        assert names[:3] == ['a', 'b', 'c']
        assert len(set(names)) == 1000
        assert not RESERVED & set(names)

    def test_literals_survive(self, sample_app) -> None:
        """Every string literal is kept, in the same order."""
        twin, _ = obfuscate(sample_app)
        assert [o.value for o in extract_occurrences(twin)] == [o.value for o in extract_occurrences(sample_app)]

    def test_app_names_are_gone(self, sample_app) -> None:
        """App and SDK identifiers are renamed; platform types and constructors are kept."""
        twin, rename = obfuscate(sample_app)
        text = '\n'.join(body for _, body in print_app(twin))
        for name in ('com.example.app', 'MainActivity', 'NetHelper', 'onCreate', 'API_KEY', 'MailgunClient'):
            assert name not in text
        for name in ('android.os.Bundle', 'java.lang.StringBuilder', '<init>', 'append'):
            assert name in text
        assert rename.classes['com.example.app.MainActivity'].count('.') == 1

    def test_renamed_app_reparses(self, sample_app) -> None:
        """The printed twin is valid IR that parses back to the same app."""
        twin, _ = obfuscate(sample_app)
        assert parse_app(print_app(twin), twin.app_id) == twin

    def test_deterministic(self, sample_app) -> None:
        """The same seed gives the same twin and map."""
        first, first_map = obfuscate(sample_app, seed=5)
        second, second_map = obfuscate(sample_app, seed=5)
        assert first == second
        assert first_map.to_dict() == second_map.to_dict()

    def test_method_keys_map_through(self, sample_app) -> None:
        """Every original method key maps onto a method of the twin."""
        twin, rename = obfuscate(sample_app)
        twin_keys = {method.key for method in twin.methods()}
        assert {rename.method_key(method.key) for method in sample_app.methods()} == twin_keys


class TestDetectorsUnderObfuscation:
    """Tests for which detectors survive renaming."""

    def test_three_layer_is_unaffected(self, example_corpus, rules, dictionary) -> None:
        """String-only detection sees the same values after renaming."""
        for app in example_corpus.parsed():
            twin, _ = obfuscate(app, seed=1)
            before = run_three_layer(extract_occurrences(app), rules, dictionary)
            after = run_three_layer(extract_occurrences(twin), rules, dictionary)
            assert value_pairs(after) == value_pairs(before)

    def test_sig_flow_follows_remapped_signatures(self, example_corpus, signatures) -> None:
        """With the catalog pushed through the rename map, slicing finds the same secrets."""
        envs = app_env(example_corpus)
        for app in example_corpus.parsed():
            twin, rename = obfuscate(app, seed=1)
            sigs = remap_signatures(signatures, rename.classes, rename.methods)
            env = envs[app.app_id]
            before = run_sig_flow(app, signatures, env=env, env_getters=DEFAULT_ENV_GETTERS)
            after = run_sig_flow(twin, sigs, env=env, env_getters=DEFAULT_ENV_GETTERS)
            assert value_pairs(after) == value_pairs(before)

    def test_context_scores_drop(self) -> None:
        """A context model keyed on API names loses confidence once they are renamed."""
        rng = random.Random(4)
        dataset = LabeledGroupDataset()
        for i in range(20):
            value = ''.join(rng.choice(string.ascii_letters) for _ in range(12))
            dataset.add(f's{i}', (f'r1 = "{value}"', CLIENT_CALL, 'return'), Label.SECRET)
            dataset.add(f'n{i}', (f'r1 = "{value}"', TITLE_CALL, 'return'), Label.NO_SECRET)
        model, _ = ModelTrainer().fit(dataset, ModelKind.LOGISTIC_REGRESSION, Scheme.COUNT_FREQUENCY)

        app = ir_app(CONTEXT_APP)
        twin, rename = obfuscate(app)
        pairs = paired_windows(app, twin, rename.method_key, [GOOGLE_KEY])
        report = context_degradation(model, pairs)
        assert report.n_windows == 1
        assert report.mean_drop > 0
        assert report.n_dropped == 1

    def test_no_pairs(self) -> None:
        """Nothing to compare is an error."""
        with pytest.raises(EmptyWindowError):
            context_degradation(None, [])
