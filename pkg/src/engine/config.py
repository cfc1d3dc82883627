"""
Scan configuration for SecretSieve
Built-in defaults, then the JSON config file, then CLI flags, then the JSON
file named by SECRETSIEVE_CONFIG; later sources win.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from src.core.errors import ConfigError
from src.core.paths import PROJECT_ROOT, config_path
from src.engine.findings import Detector

logger = logging.getLogger(__name__)

ENV_VAR = 'SECRETSIEVE_CONFIG'
DEFAULT_CONFIG_FILE = config_path('secretsieve_config.json')
OUTPUT_FORMATS = ('json', 'csv', 'table')

DEFAULT_CONFIG: Dict[str, Any] = {
    'detectors': ['three_layer', 'sig_flow'],
    'rules_path': config_path('detection_rules.json'),
    'signatures_path': config_path('cloud_api_signatures.json'),
    'dictionary_path': config_path('english_words.txt'),
    'models': {'intrinsic': None, 'context': None, 'string_group': None},
    'budget': {'max_depth': 5, 'max_statements': 500, 'fan_out': 8},
    'three_layer': {
        'entropy_sided': 'two',
        'entropy_scope': 'corpus',
        'run_len': 4,
        'min_word_len': 5,
        'include_loose': True,
    },
    'env_getters': ['java.lang.System.getProperty', 'android.content.res.Resources.getString'],
    'context_radius': 6,
    'group_min_size': 2,
    'output_format': 'json',
    'mask': True,
    'jobs': 1,
}

# Trained models each ML detector needs
MODEL_REQUIREMENTS = {
    Detector.INTRINSIC: ('intrinsic',),
    Detector.CONTEXT: ('intrinsic', 'context'),
    Detector.STRING_GROUP: ('string_group',),
}


def merge_config(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge; None in `override` leaves the base value in place"""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def resolve_path(path: Optional[str]) -> Optional[str]:
    """Relative paths are tried against the working directory, then the project root"""
    if not path or os.path.isabs(path) or os.path.exists(path):
        return path
    candidate = PROJECT_ROOT / path
    return str(candidate) if candidate.exists() else path


@dataclass
class ScanConfig:
    detectors: List[Detector] = field(default_factory=list)
    rules_path: str = DEFAULT_CONFIG['rules_path']
    signatures_path: str = DEFAULT_CONFIG['signatures_path']
    dictionary_path: str = DEFAULT_CONFIG['dictionary_path']
    models: Dict[str, Optional[str]] = field(default_factory=dict)
    budget: Dict[str, int] = field(default_factory=dict)
    three_layer: Dict[str, Any] = field(default_factory=dict)
    env_getters: List[str] = field(default_factory=list)
    context_radius: int = 6
    group_min_size: int = 2
    output_format: str = 'json'
    mask: bool = True
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], validate: bool = True) -> 'ScanConfig':
        merged = merge_config(DEFAULT_CONFIG, data)
        unknown = sorted(set(merged) - set(DEFAULT_CONFIG))
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {unknown}")
        try:
            detectors = Detector.parse_list(merged['detectors'])
        except ValueError as e:
            raise ConfigError(f"unknown detector in {merged['detectors']!r}: {e}")
        config = cls(
            detectors=sorted(set(detectors), key=lambda d: list(Detector).index(d)),
            rules_path=resolve_path(merged['rules_path']),
            signatures_path=resolve_path(merged['signatures_path']),
            dictionary_path=resolve_path(merged['dictionary_path']),
            models={k: resolve_path(v) for k, v in merged['models'].items()},
            budget=dict(merged['budget']),
            three_layer=dict(merged['three_layer']),
            env_getters=list(merged['env_getters']),
            context_radius=int(merged['context_radius']),
            group_min_size=int(merged['group_min_size']),
            output_format=merged['output_format'],
            mask=bool(merged['mask']),
            jobs=int(merged['jobs']),
        )
        if validate:
            config.validate()
        return config

    def enabled(self, detector: Detector) -> bool:
        return detector in self.detectors

    def required_files(self) -> Dict[str, Optional[str]]:
        files: Dict[str, Optional[str]] = {}
        if self.enabled(Detector.THREE_LAYER):
            files['rules_path'] = self.rules_path
            files['dictionary_path'] = self.dictionary_path
        if self.enabled(Detector.SIG_FLOW):
            files['signatures_path'] = self.signatures_path
        for detector, models in MODEL_REQUIREMENTS.items():
            if self.enabled(detector):
                files['rules_path'] = self.rules_path
                for name in models:
                    files[f'models.{name}'] = self.models.get(name)
        return files

    def validate(self):
        if not self.detectors:
            raise ConfigError("at least one detector must be enabled")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output_format must be one of {', '.join(OUTPUT_FORMATS)}, got {self.output_format!r}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.group_min_size < 1 or self.context_radius < 0:
            raise ConfigError("group_min_size must be >= 1 and context_radius >= 0")
        if self.three_layer.get('entropy_scope') not in ('corpus', 'app'):
            raise ConfigError("three_layer.entropy_scope must be 'corpus' or 'app'")
        if self.three_layer.get('entropy_sided') not in ('two', 'low'):
            raise ConfigError("three_layer.entropy_sided must be 'two' or 'low'")
        for key, path in self.required_files().items():
            if not path:
                raise ConfigError(f"{key} is required by the enabled detectors")
            if not os.path.isfile(path):
                raise ConfigError(f"{key} references missing file {path}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'detectors': [d.value for d in self.detectors],
            'rules_path': self.rules_path,
            'signatures_path': self.signatures_path,
            'dictionary_path': self.dictionary_path,
            'models': dict(self.models),
            'budget': dict(self.budget),
            'three_layer': dict(self.three_layer),
            'env_getters': list(self.env_getters),
            'context_radius': self.context_radius,
            'group_min_size': self.group_min_size,
            'output_format': self.output_format,
            'mask': self.mask,
            'jobs': self.jobs,
        }


def build_scan_config(config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                      environ: Optional[Mapping[str, str]] = None) -> ScanConfig:
    """
    An explicit `config_file` must exist; the bundled default file is optional.
    `overrides` holds CLI flag values, None meaning "not given".
    """
    environ = os.environ if environ is None else environ
    data: Dict[str, Any] = {}
    if config_file is not None:
        data = load_config_file(config_file)
        logger.info(f"Loaded scan config from {config_file}")
    elif os.path.isfile(DEFAULT_CONFIG_FILE):
        data = load_config_file(DEFAULT_CONFIG_FILE)
    else:
        logger.warning(f"Config file {DEFAULT_CONFIG_FILE} not found, using defaults")

    data = merge_config(data, overrides or {})
    env_file = environ.get(ENV_VAR)
    if env_file:
        data = merge_config(data, load_config_file(env_file))
        logger.info(f"Applied {ENV_VAR} overrides from {env_file}")
    return ScanConfig.from_dict(data)
