"""
Synthetic Corpus Generator for SecretSieve
Builds IR apps with secrets seeded in known placements, the ground-truth
manifest used to score every detector, and per-app env side files
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from src.core.errors import InvalidSpecError
from src.core.paths import config_path
from src.corpus.keys import DISTRACTOR_LENGTHS, KeyGenerator, load_key_formats, split_value
from src.ir.model import IrApp
from src.ir.parser import IrParser
from src.ir.printer import class_file_name, escape_string
from src.sigflow.signatures import STRING_TYPES, ApiSignature, MatchMode, load_signatures
from src.three_layer.filters import WordDictionary
from src.three_layer.rules import DetectionRule, load_rules

logger = logging.getLogger(__name__)

ENV_FILE = 'env.json'
ENV_RESOURCE = 'res/values/secrets.xml'
DEFAULT_ENV_GETTERS = ('java.lang.System.getProperty', 'android.content.res.Resources.getString')
MANIFEST_FILE = 'manifest.jsonl'

STRING = 'java.lang.String'
BUILDER = 'java.lang.StringBuilder'
BUILDER_APPEND = f'<{BUILDER}: {BUILDER} append({STRING})>'
BUILDER_TO_STRING = f'<{BUILDER}: {STRING} toString()>'
STRING_CONCAT = f'<{STRING}: {STRING} concat({STRING})>'
ENV_GETTER = f'<java.lang.System: {STRING} getProperty({STRING})>'
LOG_DEBUG = f'<android.util.Log: int d({STRING},{STRING})>'
PREFS_GET = f'<android.content.SharedPreferences: {STRING} getString({STRING},{STRING})>'
MAP_TYPE = 'java.util.HashMap'
MAP_PUT = f'<{MAP_TYPE}: java.lang.Object put(java.lang.Object,java.lang.Object)>'
PRIMITIVES = frozenset({'int', 'long', 'short', 'byte', 'char', 'boolean', 'float', 'double'})


class Placement(str, Enum):
    LITERAL_ARG = "literal_arg"
    SPLIT_BUILDER = "split_builder"
    SPLIT_CONCAT = "split_concat"
    STATIC_FIELD = "static_field"
    ARRAY_ASSEMBLY = "array_assembly"
    ENV_FILE = "env_file"
    UNUSED_LITERAL = "unused_literal"
    WRAPPER_CALL = "wrapper_call"
    NESTED_WRAPPER_CALL = "nested_wrapper_call"

    @property
    def reaches_api(self) -> bool:
        return self != Placement.UNUSED_LITERAL

    @property
    def splits_value(self) -> bool:
        return self in (Placement.SPLIT_BUILDER, Placement.SPLIT_CONCAT, Placement.ARRAY_ASSEMBLY)


@dataclass(frozen=True)
class SeedSpec:
    provider: str
    placement: Placement
    count: int = 1
    key_format: Optional[str] = None

    @classmethod
    def from_dict(cls, entry: Mapping[str, Any]) -> 'SeedSpec':
        provider = entry.get('provider')
        if not provider:
            raise InvalidSpecError(f"seed spec {dict(entry)} has no provider")
        try:
            placement = Placement(entry.get('placement', Placement.LITERAL_ARG.value))
        except ValueError:
            raise InvalidSpecError(f"unknown placement {entry.get('placement')!r}")
        count = entry.get('count', 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 0:
            raise InvalidSpecError(f"seed count must be a non-negative integer, got {count!r}")
        return cls(provider, placement, count, entry.get('key_format'))

    def to_dict(self) -> Dict[str, Any]:
        data = {'provider': self.provider, 'placement': self.placement.value, 'count': self.count}
        if self.key_format is not None:
            data['key_format'] = self.key_format
        return data


@dataclass(frozen=True)
class ManifestEntry:
    """One seeded secret; the location is the consuming call site, or the literal for unused literals"""
    app_id: str
    value: str
    provider: str
    placement: Placement
    class_name: str
    method_name: Optional[str]
    index: Optional[int]
    fragments: Tuple[str, ...] = ()
    sink: Optional[str] = None

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.app_id, self.value, self.provider)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'app_id': self.app_id,
            'value': self.value,
            'provider': self.provider,
            'placement': self.placement.value,
            'class': self.class_name,
            'method': self.method_name,
            'index': self.index,
            'fragments': list(self.fragments),
            'sink': self.sink,
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> 'ManifestEntry':
        return cls(
            app_id=record['app_id'], value=record['value'], provider=record['provider'],
            placement=Placement(record['placement']), class_name=record['class'],
            method_name=record.get('method'), index=record.get('index'),
            fragments=tuple(record.get('fragments', ())), sink=record.get('sink'),
        )


@dataclass
class GroundTruthManifest:
    entries: List[ManifestEntry] = field(default_factory=list)
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def keys(self) -> Set[Tuple[str, str, str]]:
        return {entry.key for entry in self.entries}

    def values(self) -> Set[str]:
        return {entry.value for entry in self.entries}

    def fragments(self) -> Set[str]:
        return {piece for entry in self.entries for piece in entry.fragments}

    def for_app(self, app_id: str) -> List[ManifestEntry]:
        return [entry for entry in self.entries if entry.app_id == app_id]

    def save(self, path: str):
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for entry in self.entries:
                record = entry.to_dict()
                record['seed'] = self.seed
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n')

    @classmethod
    def load(cls, path: str) -> 'GroundTruthManifest':
        manifest = cls()
        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                if not line.strip():
                    continue
                record = json.loads(line)
                manifest.seed = record.get('seed', manifest.seed)
                manifest.entries.append(ManifestEntry.from_dict(record))
        logger.info(f"Loaded manifest with {len(manifest)} seeded secrets from {path}")
        return manifest


@dataclass
class GeneratedApp:
    app_id: str
    files: List[Tuple[str, str]]
    env: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def parse(self) -> IrApp:
        return IrParser().parse_app(self.files, self.app_id)


@dataclass
class GeneratedCorpus:
    apps: List[GeneratedApp]
    manifest: GroundTruthManifest

    def parsed(self) -> List[IrApp]:
        return [app.parse() for app in self.apps]

    def write(self, out_dir: str, with_datasets: bool = True, dataset_seed: Optional[int] = None) -> Dict[str, str]:
        """
        Layout: <out>/corpus/<app_id>/*.jir (+ env.json), <out>/manifest.jsonl
        and, optionally, <out>/datasets/{string_groups,intrinsic,context}.jsonl
        """
        corpus_dir = os.path.join(out_dir, 'corpus')
        for app in self.apps:
            app_dir = os.path.join(corpus_dir, app.app_id)
            os.makedirs(app_dir, exist_ok=True)
            for path, text in app.files:
                with open(os.path.join(app_dir, path), 'w', encoding='utf-8') as f:
                    f.write(text)
            if app.env:
                with open(os.path.join(app_dir, ENV_FILE), 'w', encoding='utf-8') as f:
                    json.dump(app.env, f, indent=2, sort_keys=True)
        outputs = {'corpus': corpus_dir, 'manifest': os.path.join(out_dir, MANIFEST_FILE)}
        self.manifest.save(outputs['manifest'])

        if with_datasets:
            from src.corpus.datasets import build_datasets
            seed = self.manifest.seed if dataset_seed is None else dataset_seed
            for name, dataset in build_datasets(self.parsed(), self.manifest, seed=seed or 0).items():
                outputs[name] = os.path.join(out_dir, 'datasets', f'{name}.jsonl')
                dataset.save(outputs[name])
        logger.info(f"Wrote {len(self.apps)} apps and {len(self.manifest)} manifest entries to {out_dir}")
        return outputs


# ---------------------------------------------------------------- builders


class _MethodBuilder:
    def __init__(self, owner: str, name: str, params: Sequence[str] = (), static: bool = False):
        self.owner = owner
        self.name = name
        self.params = tuple(params)
        self.lines: List[str] = []
        self._next_local = 0
        self.this: Optional[str] = None
        if not static:
            self.this = self.local()
            self.emit(f"{self.this} := @this: {owner}")
        self.param_locals = []
        for position, type_name in enumerate(self.params):
            local = self.local()
            self.emit(f"{local} := @parameter{position}: {type_name}")
            self.param_locals.append(local)

    @property
    def signature(self) -> str:
        return f"<{self.owner}: void {self.name}({','.join(self.params)})>"

    def local(self, prefix: str = 'r') -> str:
        name = f"{prefix}{self._next_local}"
        self._next_local += 1
        return name

    def emit(self, line: str) -> int:
        self.lines.append(line)
        return len(self.lines) - 1

    def render(self) -> List[str]:
        body = self.lines if self.lines and self.lines[-1].startswith('return') else self.lines + ['return']
        return ([f"method void {self.name}({','.join(self.params)}) {{"]
                + [f"    {line}" for line in body] + ['}'])


class _ClassBuilder:
    def __init__(self, qualified_name: str):
        self.name = qualified_name
        self.fields: List[Tuple[str, Optional[str]]] = []
        self.methods: List[_MethodBuilder] = []
        self._method_names: Set[str] = set()

    @property
    def simple_name(self) -> str:
        return self.name.rsplit('.', 1)[-1]

    def method(self, base: str, params: Sequence[str] = (), static: bool = False) -> _MethodBuilder:
        name, n = base, 1
        while name in self._method_names:
            name, n = f"{base}{n}", n + 1
        self._method_names.add(name)
        builder = _MethodBuilder(self.name, name, params, static)
        self.methods.append(builder)
        return builder

    def add_field(self, base: str, initializer: Optional[str]) -> str:
        names = {name for name, _ in self.fields}
        name, n = base, 1
        while name in names:
            name, n = f"{base}_{n}", n + 1
        self.fields.append((name, initializer))
        return name

    @property
    def empty(self) -> bool:
        return not self.fields and not self.methods

    def render(self) -> str:
        lines = [f'class {self.name}']
        for name, initializer in self.fields:
            decl = f'staticfield {STRING} {name}'
            if initializer is not None:
                decl += f' = {escape_string(initializer)}'
            lines.append(decl)
        for method in self.methods:
            lines.append('')
            lines.extend(method.render())
        return '\n'.join(lines) + '\n'


class _AppBuilder:
    """Generates one app; all randomness comes from the app's own RNG stream"""

    def __init__(self, generator: 'CorpusGenerator', app_id: str, rng: np.random.Generator,
                 profile: Mapping[str, Any]):
        self.gen = generator
        self.app_id = app_id
        self.rng = rng
        self.profile = profile
        vocab = generator.vocabulary
        package = self._pick(vocab['packages'])
        self.main = _ClassBuilder(f"{package}.{self._pick(vocab['activities'])}")
        self.helper = _ClassBuilder(f"{package}.{self._pick(vocab['helpers'])}")
        self.config = _ClassBuilder(f"{package}.{self._pick(vocab['config_classes'])}")
        self.wrapper = _ClassBuilder(f"{package}.{self._pick(vocab['wrappers'])}")
        self.clinit: Optional[_MethodBuilder] = None
        self.env: Dict[str, Dict[str, str]] = {}
        self.entries: List[ManifestEntry] = []

    def _pick(self, options: Sequence[Any]) -> Any:
        return options[int(self.rng.integers(len(options)))]

    def _between(self, bounds: Sequence[int]) -> int:
        low, high = bounds
        return int(self.rng.integers(low, high + 1))

    def _sample(self, options: Sequence[str], n: int) -> List[str]:
        n = min(n, len(options))
        return [options[i] for i in self.rng.choice(len(options), size=n, replace=False)] if n else []

    # ------------------------------------------------------------ app

    def build(self, seeds: Sequence[Tuple[SeedSpec, int]]) -> Tuple[GeneratedApp, List[ManifestEntry]]:
        ctor = self.main.method('<init>')
        ctor.emit(f"specialinvoke {ctor.this}.<android.app.Activity: void <init>()>()")

        n_noise = self._between(self.profile['noise_methods'])
        lengths = self.profile.get('distractor_lengths', DISTRACTOR_LENGTHS)
        distractors = [self.gen.keys.distractor(self.rng, lengths)
                       for _ in range(self.profile.get('distractors', 0))]
        share = [[] for _ in range(max(n_noise, 1))]
        for position, value in enumerate(distractors):
            share[position % len(share)].append(value)
        for extra in share:
            self._noise_method(self._pick((self.main, self.helper)), extra)

        for spec, position in seeds:
            self._plant(spec, position)

        classes = [c for c in (self.main, self.helper, self.config, self.wrapper) if not c.empty]
        files = sorted((class_file_name(c.name), c.render()) for c in classes)
        return GeneratedApp(self.app_id, files, self.env), self.entries

    def _noise_method(self, cls: _ClassBuilder, extra: Sequence[str]):
        vocab = self.gen.vocabulary
        mb = cls.method(self._pick(vocab['noise_methods']))
        texts = self._sample(vocab['ordinary_strings'], self._between(self.profile['ordinary_per_method']))
        for text in list(texts) + list(extra):
            self._ordinary(mb, cls, text)
        counter = mb.local('i')
        mb.emit(f"{counter} = {int(self.rng.integers(0, 10))}")
        mb.emit(f"{mb.local('i')} = {counter} + {int(self.rng.integers(1, 10))}")

    def _ordinary(self, mb: _MethodBuilder, cls: _ClassBuilder, text: str):
        style = int(self.rng.integers(3))
        if style == 1:
            mb.emit(f"staticinvoke {LOG_DEBUG}({escape_string(cls.simple_name)}, {escape_string(text)})")
        elif style == 2 and mb.this is not None:
            mb.emit(f"{mb.local()} = virtualinvoke {mb.this}.{PREFS_GET}({escape_string(text)}, null)")
        else:
            mb.emit(f"{mb.local()} = {escape_string(text)}")

    def _context(self, mb: _MethodBuilder, cls: _ClassBuilder):
        """Secret-context vocabulary (grant_type, refresh_token, ...) as request parameters"""
        vocab = self.gen.vocabulary
        for text in self._sample(vocab['ordinary_strings'], self._between(self.profile.get('seed_ordinary', (0, 0)))):
            self._ordinary(mb, cls, text)
        terms = self._sample(vocab['context_terms'], self._between(self.profile.get('context_terms', (0, 0))))
        if not terms:
            return
        params = mb.local()
        mb.emit(f"{params} = new {MAP_TYPE}")
        mb.emit(f"specialinvoke {params}.<{MAP_TYPE}: void <init>()>()")
        for start in range(0, len(terms), 2):
            key = escape_string(terms[start])
            value = escape_string(terms[start + 1]) if start + 1 < len(terms) else 'null'
            mb.emit(f"virtualinvoke {params}.{MAP_PUT}({key}, {value})")

    # ---------------------------------------------------------- seeds

    def _host(self) -> Tuple[_ClassBuilder, _MethodBuilder]:
        vocab = self.gen.vocabulary
        cls = self._pick((self.main, self.helper))
        return cls, cls.method(f"{self._pick(vocab['verbs'])}{self._pick(vocab['nouns'])}")

    def _plant(self, spec: SeedSpec, position: int):
        value = self.gen.keys.generate(spec.provider, self.rng, spec.key_format)
        cls, host = self._host()
        self._context(host, cls)

        if spec.placement == Placement.UNUSED_LITERAL:
            index = host.emit(f"{host.local()} = {escape_string(value)}")
            self._record(spec, value, cls.name, host.name, index)
            return

        sig, secret_index = self.gen.sink_for(spec.provider)
        if spec.placement in (Placement.WRAPPER_CALL, Placement.NESTED_WRAPPER_CALL):
            vocab = self.gen.vocabulary
            inner = self.wrapper.method(f"{self._pick(vocab['verbs'])}{self._pick(vocab['nouns'])}", (STRING,), static=True)
            index, sink = self._sink(inner, sig, secret_index, inner.param_locals[0])
            target = inner
            if spec.placement == Placement.NESTED_WRAPPER_CALL:
                outer = self.wrapper.method(f"with{self._pick(vocab['nouns'])}", (STRING,), static=True)
                outer.emit(f"staticinvoke {inner.signature}({outer.param_locals[0]})")
                target = outer
            host.emit(f"staticinvoke {target.signature}({escape_string(value)})")
            self._record(spec, value, self.wrapper.name, inner.name, index, sink=sink)
            return

        arg, fragments = self._value(host, spec, value, position)
        index, sink = self._sink(host, sig, secret_index, arg)
        self._record(spec, value, cls.name, host.name, index, fragments, sink)

    def _record(self, spec: SeedSpec, value: str, class_name: str, method_name: Optional[str],
                index: Optional[int], fragments: Sequence[str] = (), sink: Optional[str] = None):
        self.entries.append(ManifestEntry(self.app_id, value, spec.provider, spec.placement,
                                          class_name, method_name, index, tuple(fragments), sink))

    def _value(self, mb: _MethodBuilder, spec: SeedSpec, value: str, position: int) -> Tuple[str, List[str]]:
        """Emits the statements producing the secret; returns (argument text, IR fragments)"""
        placement = spec.placement
        if placement == Placement.LITERAL_ARG:
            return escape_string(value), []

        if placement == Placement.STATIC_FIELD:
            base = spec.provider.upper().replace('-', '_')
            if not base.endswith(('_KEY', '_ID', '_TOKEN', '_SECRET')):
                base += '_KEY'
            if self.rng.random() < 0.5:
                name = self.config.add_field(base, value)
            else:
                name = self.config.add_field(base, None)
                if self.clinit is None:
                    self.clinit = self.config.method('<clinit>', static=True)
                self.clinit.emit(f"<{self.config.name}: {STRING} {name}> = {escape_string(value)}")
            local = mb.local()
            mb.emit(f"{local} = <{self.config.name}: {STRING} {name}>")
            return local, []

        if placement == Placement.ENV_FILE:
            name = f"{spec.provider}_key_{position}"
            self.env.setdefault(ENV_RESOURCE, {})[name] = value
            local = mb.local()
            mb.emit(f"{local} = staticinvoke {ENV_GETTER}({escape_string(name)})")
            return local, []

        pieces = split_value(value, self.rng, self.gen.rules)
        if placement == Placement.SPLIT_CONCAT:
            current = mb.local()
            mb.emit(f"{current} = {escape_string(pieces[0])}")
            for piece in pieces[1:]:
                nxt = mb.local()
                mb.emit(f"{nxt} = virtualinvoke {current}.{STRING_CONCAT}({escape_string(piece)})")
                current = nxt
            return current, pieces

        builder = mb.local()
        mb.emit(f"{builder} = new {BUILDER}")
        if placement == Placement.ARRAY_ASSEMBLY:
            array = mb.local()
            mb.emit(f"{array} = newarray ({STRING})[{len(pieces)}]")
            for slot, piece in enumerate(pieces):
                mb.emit(f"{array}[{slot}] = {escape_string(piece)}")
            mb.emit(f"specialinvoke {builder}.<{BUILDER}: void <init>()>()")
            for slot in range(len(pieces)):
                item = mb.local()
                mb.emit(f"{item} = {array}[{slot}]")
                mb.emit(f"virtualinvoke {builder}.{BUILDER_APPEND}({item})")
            current = builder
        else:
            rest = pieces
            if self.rng.random() < 0.5:
                mb.emit(f"specialinvoke {builder}.<{BUILDER}: void <init>({STRING})>({escape_string(pieces[0])})")
                rest = pieces[1:]
            else:
                mb.emit(f"specialinvoke {builder}.<{BUILDER}: void <init>()>()")
            chained = self.rng.random() < 0.5
            current = builder
            for piece in rest:
                if chained:
                    nxt = mb.local()
                    mb.emit(f"{nxt} = virtualinvoke {current}.{BUILDER_APPEND}({escape_string(piece)})")
                    current = nxt
                else:
                    mb.emit(f"virtualinvoke {current}.{BUILDER_APPEND}({escape_string(piece)})")
        result = mb.local()
        mb.emit(f"{result} = virtualinvoke {current}.{BUILDER_TO_STRING}()")
        return result, pieces

    def _sink(self, mb: _MethodBuilder, sig: ApiSignature, secret_index: int, arg: str) -> Tuple[int, str]:
        """Emits the signed API call; returns (statement index, rendered callee)"""
        guarded = self.gen.secret_slots(sig)
        args = []
        for position, type_name in enumerate(sig.param_types):
            if position == secret_index:
                args.append(arg)
            elif position in guarded or type_name not in STRING_TYPES:
                args.append('0' if type_name in PRIMITIVES else 'null')
            else:
                args.append(escape_string(self._pick(self.gen.vocabulary['sdk_arguments'])))
        owner = sig.owner_pattern
        callee = f"<{owner}: void {sig.method_name}({','.join(sig.param_types)})>"
        call_args = ', '.join(args)
        if sig.invoke == 'static':
            return mb.emit(f"staticinvoke {callee}({call_args})"), callee
        receiver = mb.local()
        mb.emit(f"{receiver} = new {owner}")
        if sig.method_name == '<init>':
            return mb.emit(f"specialinvoke {receiver}.{callee}({call_args})"), callee
        mb.emit(f"specialinvoke {receiver}.<{owner}: void <init>()>()")
        return mb.emit(f"virtualinvoke {receiver}.{callee}({call_args})"), callee


# --------------------------------------------------------------- generator


def load_vocabulary(path: str) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        vocabulary = json.load(f)
    logger.info(f"Loaded noise vocabulary with {len(vocabulary.get('ordinary_strings', []))} ordinary strings "
                f"and {len(vocabulary.get('profiles', {}))} profiles from {path}")
    return vocabulary


def load_corpus_spec(path: str) -> Dict[str, Any]:
    """gen-corpus input: {"seeds": [...], "n_apps": N, "noise_profile": name-or-object}"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            spec = json.load(f)
    except json.JSONDecodeError as e:
        raise InvalidSpecError(f"{path}: {e}")
    if not isinstance(spec, dict) or not isinstance(spec.get('seeds', []), list):
        raise InvalidSpecError(f"{path}: expected an object with a 'seeds' list")
    spec['seeds'] = [SeedSpec.from_dict(entry) for entry in spec.get('seeds', [])]
    return spec


class CorpusGenerator:
    """
    Deterministic corpus generation: one SeedSequence per corpus seed, spawned
    into one RNG stream per app index, so output is identical for any jobs value.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('CorpusGenerator')
        self.vocabulary = config.get('vocabulary') or load_vocabulary(
            config.get('vocabulary_path', config_path('noise_vocabulary.json')))
        self.signatures: List[ApiSignature] = config.get('signatures') or load_signatures(
            config.get('signatures_path', config_path('cloud_api_signatures.json')))
        self.rules: List[DetectionRule] = config.get('rules') or load_rules(
            config.get('rules_path', config_path('detection_rules.json')))
        dictionary = config.get('dictionary')
        if dictionary is None:
            dictionary = WordDictionary.load(config.get('dictionary_path', config_path('english_words.txt')))
        formats = config.get('key_formats') or load_key_formats(
            config.get('key_formats_path', config_path('key_formats.json')))
        self.keys = KeyGenerator(formats, self.rules, dictionary, config.get('three_layer', {}))
        self.jobs = max(1, int(config.get('jobs', 1)))
        self._sinks: Dict[str, Tuple[ApiSignature, int]] = {}

    def sink_for(self, provider: str) -> Tuple[ApiSignature, int]:
        """Catalog signature used to consume a provider's secret: exact single-secret entries first"""
        if provider not in self._sinks:
            candidates = [s for s in self.signatures if s.provider == provider and '*' not in s.owner_pattern]
            if not candidates:
                raise InvalidSpecError(f"no cloud API signature for provider {provider!r}")
            ranked = sorted(candidates, key=lambda s: (s.match_mode != MatchMode.EXACT,
                                                       len(s.secret_param_indices) != 1))
            sig = ranked[0]
            self._sinks[provider] = (sig, min(sig.secret_param_indices))
        return self._sinks[provider]

    def secret_slots(self, sig: ApiSignature) -> Set[int]:
        """Secret positions of every catalog entry describing the same call"""
        same = (sig.owner_pattern, sig.method_name, sig.param_types)
        return {i for s in self.signatures if (s.owner_pattern, s.method_name, s.param_types) == same
                for i in s.secret_param_indices}

    def profile(self, noise_profile: Union[str, Mapping[str, Any], None]) -> Dict[str, Any]:
        profiles = self.vocabulary.get('profiles', {})
        base = dict(profiles.get('default', {}))
        if noise_profile is None:
            return base
        if isinstance(noise_profile, str):
            if noise_profile not in profiles:
                raise InvalidSpecError(f"unknown noise profile {noise_profile!r}")
            return {**base, **profiles[noise_profile]}
        return {**base, **dict(noise_profile)}

    def validate(self, specs: Sequence[SeedSpec]):
        probe = np.random.default_rng(0)
        for spec in specs:
            self.keys.generate(spec.provider, probe, spec.key_format)
            if spec.placement.reaches_api:
                self.sink_for(spec.provider)

    def generate(self, specs: Sequence[Union[SeedSpec, Mapping[str, Any]]], n_apps: int,
                 noise_profile: Union[str, Mapping[str, Any], None] = 'default', seed: int = 0) -> GeneratedCorpus:
        if not isinstance(n_apps, int) or n_apps < 1:
            raise InvalidSpecError(f"n_apps must be a positive integer, got {n_apps!r}")
        specs = [s if isinstance(s, SeedSpec) else SeedSpec.from_dict(s) for s in specs]
        self.validate(specs)
        profile = self.profile(noise_profile)

        assignments: List[List[Tuple[SeedSpec, int]]] = [[] for _ in range(n_apps)]
        position = 0
        for spec in specs:
            for _ in range(spec.count):
                assignments[position % n_apps].append((spec, position))
                position += 1

        streams = np.random.SeedSequence(seed).spawn(n_apps)

        def build(i: int):
            builder = _AppBuilder(self, f"app{i:04d}", np.random.default_rng(streams[i]), profile)
            return builder.build(assignments[i])

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(build, range(n_apps)))
        else:
            results = [build(i) for i in range(n_apps)]

        apps = [app for app, _ in results]
        manifest = GroundTruthManifest([entry for _, entries in results for entry in entries], seed)
        self.logger.info(f"Generated {n_apps} apps with {len(manifest)} seeded secrets (seed {seed})")
        return GeneratedCorpus(apps, manifest)


def gen_corpus(spec: Sequence[Union[SeedSpec, Mapping[str, Any]]], n_apps: int,
               noise_profile: Union[str, Mapping[str, Any], None] = 'default', seed: int = 0,
               config: Optional[Dict[str, Any]] = None) -> GeneratedCorpus:
    return CorpusGenerator(config).generate(spec, n_apps, noise_profile, seed)
