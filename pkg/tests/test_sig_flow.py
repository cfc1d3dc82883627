"""Tests for cloud API signatures, the backward slicer and the signature-flow detector."""

from typing import List

import pytest

from src.core.errors import ConfigError
from src.corpus.generator import DEFAULT_ENV_GETTERS
from src.engine.findings import Detector
from src.ir.index import find_callsites
from src.ir.model import MethodSignature
from src.sigflow.detector import SigFlowDetector, run_sig_flow
from src.sigflow.reference_interpreter import ReferenceInterpreter
from src.sigflow.signatures import ApiSignature, MatchMode, match_signatures, remap_signatures
from src.sigflow.slicer import SliceBudget, SliceResult, SliceStatus, backward_slice
from tests.conftest import GOOGLE_KEY, ir_app

STRING = 'java.lang.String'
SINK = 'staticinvoke <com.mailgun.client.MailgunClient: void config(java.lang.String)>'
APPEND = '<java.lang.StringBuilder: java.lang.StringBuilder append(java.lang.String)>'
TO_STRING = '<java.lang.StringBuilder: java.lang.String toString()>'
MAILGUN_KEY = 'key-q7Hx2mPz9Wk4Lr8Tb3Nv6Cy1Jd5Fs0Ga'


def method_app(body: str, extra: str = '') -> str:
    lines = '\n'.join(f'    {line}' for line in body.strip().splitlines())
    return f"class a.A\n{extra}\nmethod void m() {{\n{lines}\n    return\n}}\n"


def slice_sink(text: str, budget: SliceBudget = None, **kwargs) -> List[SliceResult]:
    app = ir_app(text)
    site = find_callsites(app, lambda sig: sig.name == 'config')[0]
    return backward_slice(app, site, 0, budget, **kwargs)


def values(results: List[SliceResult]):
    return sorted(r.value for r in results if r.status == SliceStatus.RESOLVED)


class TestSignatures:
    """Tests for signature validation and call matching."""

    def test_catalog_loads(self, signatures) -> None:
        """Every bundled entry validates."""
        assert len(signatures) == 48
        assert any(s.match_mode == MatchMode.STRUCTURAL for s in signatures)

    @pytest.mark.parametrize("entry", [
        {'provider': 'p', 'owner': 'a.B', 'method': 'm', 'params': [STRING], 'secret_params': [1]},
        {'provider': 'p', 'owner': 'a.B', 'method': 'm', 'params': ['int'], 'secret_params': [0]},
        {'provider': 'p', 'owner': 'a.B', 'method': 'm', 'params': [STRING], 'secret_params': [0],
         'invoke': 'dynamic'},
        {'provider': 'p', 'owner': 'a.B', 'method': 'm', 'params': [STRING], 'match_mode': 'sloppy'},
        {'owner': 'a.B', 'method': 'm'},
    ])
    def test_invalid_entries(self, entry) -> None:
        """Bad indices, non-string secrets and unknown modes are config errors."""
        with pytest.raises(ConfigError):
            ApiSignature.from_dict(entry)

    def test_exact_and_structural_owners(self, signatures) -> None:
        """Structural entries tolerate a renamed package but keep the class name."""
        mws = [s for s in signatures if s.method_name == 'setAwsAccessKeyId'][0]
        exact = MethodSignature('com.amazonservices.mws.client.MwsConnection', 'void',
                                'setAwsAccessKeyId', (STRING,))
        moved = MethodSignature('org.vendor.client.MwsConnection', 'void', 'setAwsAccessKeyId', (STRING,))
        unrelated = MethodSignature('org.vendor.Connection', 'void', 'setAwsAccessKeyId', (STRING,))
        assert mws.matches(exact, 'virtual') is False
        assert mws.matches(moved, 'virtual') is True
        assert mws.matches(unrelated, 'virtual') is None

    def test_invoke_kind_is_checked(self, signatures) -> None:
        """A static signature does not match a virtual call of the same method."""
        places = [s for s in signatures if s.method_name == 'initialize' and s.invoke == 'static'][0]
        callee = MethodSignature(places.owner_pattern, 'void', 'initialize', places.param_types)
        assert places.matches(callee, 'static') is False
        assert places.matches(callee, 'virtual') is None

    def test_wildcard_owner(self) -> None:
        """A leading wildcard matches any package."""
        sig = ApiSignature.from_dict({'provider': 'p', 'owner': '*.Client', 'method': 'auth',
                                      'params': [STRING], 'secret_params': [0]})
        assert sig.matches(MethodSignature('x.y.Client', 'void', 'auth', (STRING,)), 'virtual') is False

    def test_match_signatures_on_sample(self, sample_app, signatures) -> None:
        """Both signed calls of the sample app are found in call-site order."""
        matches = match_signatures(sample_app, signatures)
        assert [(m.callsite.location, m.signature.provider) for m in matches] == [
            ('com.example.app.MainActivity.onCreate:3', 'google_api_key'),
            ('com.example.app.MainActivity.onCreate:8', 'mailgun'),
            ('com.example.app.NetHelper.send:1', 'mailgun'),
        ]

    def test_remap(self, signatures) -> None:
        """Renamed classes and methods are applied to owners, names and types."""
        sig = ApiSignature.from_dict({'provider': 'p', 'owner': 'a.Client', 'method': 'auth',
                                      'params': ['a.Token', STRING], 'secret_params': [1]})
        remapped = remap_signatures([sig], {'a.Client': 'b', 'a.Token': 'c'},
                                    {('a.Client', 'auth', ('a.Token', STRING)): 'x'})[0]
        assert (remapped.owner_pattern, remapped.method_name, remapped.param_types) == ('b', 'x', ('c', STRING))
        assert remapped.secret_param_indices == frozenset({1})


class TestBackwardSlicer:
    """Tests for single-argument slices over hand-written IR."""

    def test_literal(self) -> None:
        """A literal argument resolves directly."""
        results = slice_sink(method_app(f'{SINK}("{MAILGUN_KEY}")'))
        assert values(results) == [MAILGUN_KEY]
        assert results[0].depth_used == 0

    def test_builder_chain(self) -> None:
        """Constructor and appends are replayed in order."""
        results = slice_sink(method_app(f"""
r1 = new java.lang.StringBuilder
specialinvoke r1.<java.lang.StringBuilder: void <init>(java.lang.String)>("ab")
r2 = virtualinvoke r1.{APPEND}("cd")
virtualinvoke r1.{APPEND}("ef")
r3 = virtualinvoke r2.{TO_STRING}()
{SINK}(r3)
"""))
        assert values(results) == ['abcdef']

    def test_concat(self) -> None:
        """String.concat joins receiver and argument."""
        results = slice_sink(method_app(f"""
r1 = "ab"
r2 = virtualinvoke r1.<java.lang.String: java.lang.String concat(java.lang.String)>("cd")
{SINK}(r2)
"""))
        assert values(results) == ['abcd']

    def test_array_read(self) -> None:
        """Constant-index reads pick the last write to that slot."""
        results = slice_sink(method_app(f"""
r1 = newarray (java.lang.String)[2]
r1[0] = "x1"
r1[1] = "y2"
r1[1] = "z3"
r2 = r1[1]
{SINK}(r2)
"""))
        assert values(results) == ['z3']

    def test_dynamic_index(self) -> None:
        """Non-constant indices leave a hole."""
        results = slice_sink(method_app(f"""
r1 = newarray (java.lang.String)[2]
r1[0] = "x1"
r2 = r1[i9]
{SINK}(r2)
"""))
        assert results[0].status == SliceStatus.UNRESOLVED
        assert results[0].reason == 'dynamic_index'

    def test_static_initializer(self) -> None:
        """Static fields resolve through their declared initializer."""
        text = method_app(f"r1 = <a.A: {STRING} K>\n{SINK}(r1)",
                          extra=f'staticfield {STRING} K = "init-value"')
        assert values(slice_sink(text)) == ['init-value']

    def test_static_initializer_method(self) -> None:
        """Stores in <clinit> reach reads elsewhere."""
        text = f"""
class a.A
staticfield {STRING} K

method void <clinit>() {{
    <a.A: {STRING} K> = "late-value"
    return
}}

method void m() {{
    r1 = <a.A: {STRING} K>
    {SINK}(r1)
    return
}}
"""
        results = slice_sink(text)
        assert values(results) == ['late-value']
        assert 'field_store' in [step.transfer for step in results[0].trace]

    def test_env_getter(self) -> None:
        """Configured getters read from the app's env files."""
        text = method_app(f"""
r1 = staticinvoke <java.lang.System: {STRING} getProperty({STRING})>("amazon_key_0")
{SINK}(r1)
""")
        getters = ['java.lang.System.getProperty']
        found = slice_sink(text, env={'res/values/secrets.xml': {'amazon_key_0': 'AKIAQ7X2M9P4L8T3N6C1'}},
                           env_getters=getters)
        assert values(found) == ['AKIAQ7X2M9P4L8T3N6C1']
        missing = slice_sink(text, env={}, env_getters=getters)
        assert missing[0].status == SliceStatus.UNRESOLVED
        assert missing[0].reason == 'env_missing'

    def test_env_getter_not_configured_is_external(self) -> None:
        """Without the getter in the list the call is opaque."""
        text = method_app(f"""
r1 = staticinvoke <java.lang.System: {STRING} getProperty({STRING})>("k")
{SINK}(r1)
""")
        assert slice_sink(text)[0].reason == 'external'

    def test_wrapper_callers(self) -> None:
        """A parameter resolves through every caller of its method."""
        text = f"""
class a.A

method void wrap({STRING}) {{
    r0 := @parameter0: {STRING}
    {SINK}(r0)
    return
}}

method void one() {{
    staticinvoke <a.A: void wrap({STRING})>("first")
    return
}}

method void two() {{
    staticinvoke <a.A: void wrap({STRING})>("second")
    return
}}
"""
        results = slice_sink(text)
        assert values(results) == ['first', 'second']
        assert all(r.depth_used == 1 for r in results)

        shallow = slice_sink(text, SliceBudget(max_depth=0))
        assert [r.status for r in shallow] == [SliceStatus.PARTIAL]
        assert shallow[0].render() == '<?budget_depth>'

        narrow = slice_sink(text, SliceBudget(fan_out=1))
        assert values(narrow) == ['first']
        assert SliceStatus.PARTIAL in [r.status for r in narrow]

    def test_uncalled_parameter(self, sample_app) -> None:
        """Parameters of methods nobody calls have no value."""
        site = find_callsites(sample_app, lambda sig: sig.name == 'config')[1]
        results = backward_slice(sample_app, site, 0)
        assert results[0].status == SliceStatus.UNRESOLVED
        assert results[0].reason == 'no_caller'

    def test_recursion(self) -> None:
        """A method feeding its own argument is cut as recursive."""
        text = f"""
class a.A

method {STRING} loop({STRING}) {{
    r0 := @parameter0: {STRING}
    r1 = staticinvoke <a.A: {STRING} loop({STRING})>(r0)
    {SINK}(r1)
    return r1
}}
"""
        results = slice_sink(text)
        assert [(r.status, r.reason) for r in results] == [(SliceStatus.UNRESOLVED, 'recursive')]

    def test_array_field_cycle(self) -> None:
        """An array field stored back from its own load is cut as recursive."""
        text = method_app(f"""
r1 = <a.A: {STRING}[] K>
<a.A: {STRING}[] K> = r1
r2 = r1[0]
{SINK}(r2)
""", extra=f'staticfield {STRING}[] K')
        results = slice_sink(text)
        assert [(r.status, r.reason) for r in results] == [(SliceStatus.UNRESOLVED, 'recursive')]

    def test_array_through_fields_depth(self) -> None:
        """Arrays handed across methods through fields respect the depth budget."""
        text = f"""
class a.A
staticfield {STRING}[] K1
staticfield {STRING}[] K2

method void fill() {{
    r0 = newarray ({STRING})[1]
    r0[0] = "via-fields"
    <a.A: {STRING}[] K1> = r0
    return
}}

method void copy() {{
    r1 = <a.A: {STRING}[] K1>
    <a.A: {STRING}[] K2> = r1
    return
}}

method void m() {{
    r2 = <a.A: {STRING}[] K2>
    r3 = r2[0]
    {SINK}(r3)
    return
}}
"""
        assert values(slice_sink(text)) == ['via-fields']

        shallow = slice_sink(text, SliceBudget(max_depth=1))
        assert [r.status for r in shallow] == [SliceStatus.PARTIAL]
        assert shallow[0].render() == '<?budget_depth>'

    def test_loop_in_builder(self) -> None:
        """Branches inside a builder's lifetime leave a trailing hole."""
        results = slice_sink(method_app(f"""
r1 = new java.lang.StringBuilder
specialinvoke r1.<java.lang.StringBuilder: void <init>()>()
label1:
virtualinvoke r1.{APPEND}("ab")
if i0 < 3 goto label1
r3 = virtualinvoke r1.{TO_STRING}()
{SINK}(r3)
"""))
        assert results[0].status == SliceStatus.PARTIAL
        assert results[0].render() == 'ab<?loop>'
        assert results[0].value is None

    def test_statement_budget(self) -> None:
        """Long copy chains exhaust a small statement budget."""
        text = method_app(f'r1 = "v"\nr2 = r1\nr3 = r2\nr4 = r3\n{SINK}(r4)')
        assert values(slice_sink(text)) == ['v']
        tight = slice_sink(text, SliceBudget(max_statements=2))
        assert tight[0].status == SliceStatus.PARTIAL
        assert tight[0].holes[0].reason == 'budget_statements'

    def test_external_source(self) -> None:
        """Values returned by SDK calls cannot be resolved."""
        results = slice_sink(method_app(f"""
r1 = staticinvoke <com.vendor.Secrets: {STRING} fetch()>()
{SINK}(r1)
"""))
        assert (results[0].status, results[0].reason) == (SliceStatus.UNRESOLVED, 'external')

    def test_internal_return_value(self) -> None:
        """Values returned by app methods are followed."""
        text = f"""
class a.A

method {STRING} secret() {{
    r1 = "from-return"
    return r1
}}

method void m() {{
    r1 = staticinvoke <a.A: {STRING} secret()>()
    {SINK}(r1)
    return
}}
"""
        assert values(slice_sink(text)) == ['from-return']

    def test_bad_argument_index(self, sample_app) -> None:
        """Slicing a missing argument raises."""
        site = find_callsites(sample_app, lambda sig: sig.name == 'config')[0]
        with pytest.raises(IndexError):
            backward_slice(sample_app, site, 3)


class TestSigFlowDetector:
    """Tests for findings and diagnostics."""

    def test_sample_app(self, sample_app, signatures) -> None:
        """The static-field key and the built mailgun key are found; the helper is a diagnostic."""
        detector = SigFlowDetector(signatures)
        findings = detector.run(sample_app)
        assert [(f.value, f.provider) for f in findings] == [
            (GOOGLE_KEY, 'google_api_key'), (MAILGUN_KEY, 'mailgun')]
        assert all(f.detectors == {Detector.SIG_FLOW} for f in findings)
        assert all(f.confidence[Detector.SIG_FLOW] == 1.0 for f in findings)
        assert findings[0].locations[0].render() == 'com.example.app.MainActivity.onCreate:3'
        assert [(d.location, d.reason) for d in detector.diagnostics] == [
            ('com.example.app.NetHelper.send:1', 'no_caller')]

    def test_empty_string_is_diagnostic(self, signatures) -> None:
        """A resolved empty value is reported as empty, not as a finding."""
        app = ir_app(method_app(f'{SINK}("")'))
        detector = SigFlowDetector(signatures)
        assert detector.run(app) == []
        assert detector.diagnostics[0].status == 'empty'

    def test_fuzzy_match_has_half_confidence(self, signatures) -> None:
        """Structural matches carry the fuzzy flag."""
        app = ir_app(method_app(f"""
r1 = new org.vendor.client.MwsConnection
specialinvoke r1.<org.vendor.client.MwsConnection: void <init>()>()
virtualinvoke r1.<org.vendor.client.MwsConnection: void setAwsAccessKeyId({STRING})>("AKIAQ7X2M9P4L8T3N6C1")
"""))
        findings = run_sig_flow(app, signatures)
        assert findings[0].fuzzy
        assert findings[0].confidence[Detector.SIG_FLOW] == 0.5


@pytest.mark.slow
class TestInterpreterAgreement:
    """The slicer's resolved values equal what concrete execution observes."""

    def _check(self, corpus, signatures) -> int:
        checked = 0
        for generated in corpus.apps:
            app = generated.parse()
            interpreter = ReferenceInterpreter(app, generated.env, DEFAULT_ENV_GETTERS)
            observed = interpreter.run()
            for match in match_signatures(app, signatures):
                site = match.callsite
                for arg_index in sorted(match.signature.secret_param_indices):
                    results = backward_slice(app, site, arg_index, env=generated.env,
                                             env_getters=DEFAULT_ENV_GETTERS)
                    sliced = {r.value for r in results if r.status == SliceStatus.RESOLVED}
                    concrete = {obs.args[arg_index] for obs in observed
                                if obs.site_key == site.sort_key and obs.args[arg_index] is not None}
                    assert sliced == concrete, (app.app_id, site.location, arg_index)
                    checked += 1
        return checked

    def test_quiet_corpus(self, make_corpus, example_seeds, signatures) -> None:
        """One hundred quiet apps covering every placement."""
        corpus = make_corpus(example_seeds, n_apps=100, profile='quiet', seed=11)
        assert self._check(corpus, signatures) >= len(corpus.manifest) - 2

    def test_noisy_corpus(self, example_corpus, signatures) -> None:
        """The default-noise example corpus."""
        assert self._check(example_corpus, signatures) > 0
