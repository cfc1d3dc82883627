"""
Cloud API signatures and call-site matching
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from fnmatch import fnmatchcase
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from src.core.errors import ConfigError
from src.ir.index import CallSite
from src.ir.model import IrApp, MethodSignature

logger = logging.getLogger(__name__)

STRING_TYPES = frozenset({'java.lang.String', 'java.lang.CharSequence'})
MIN_SHARED_SEGMENTS = 2


class MatchMode(str, Enum):
    EXACT = "exact"
    STRUCTURAL = "structural"


@dataclass(frozen=True)
class ApiSignature:
    """
    Descriptor of a cloud SDK call that consumes a secret.
    `owner_pattern` is a dotted class name, optionally with a leading '*.' wildcard.
    """
    provider: str
    owner_pattern: str
    method_name: str
    param_types: Tuple[str, ...]
    secret_param_indices: FrozenSet[int]
    match_mode: MatchMode = MatchMode.EXACT
    invoke: Optional[str] = None

    def __post_init__(self):
        for index in self.secret_param_indices:
            if not 0 <= index < len(self.param_types):
                raise ConfigError(f"{self.describe()}: secret index {index} outside arity {len(self.param_types)}")
            if self.param_types[index] not in STRING_TYPES:
                raise ConfigError(f"{self.describe()}: parameter {index} is {self.param_types[index]}, not a string type")
        if self.invoke not in (None, 'static', 'instance'):
            raise ConfigError(f"{self.describe()}: invoke must be 'static' or 'instance'")

    def describe(self) -> str:
        return f"{self.owner_pattern}.{self.method_name}({','.join(self.param_types)})"

    @property
    def owner_segments(self) -> List[str]:
        return self.owner_pattern.lstrip('*.').split('.')

    def owner_matches_exactly(self, owner: str) -> bool:
        if '*' in self.owner_pattern:
            return fnmatchcase(owner, self.owner_pattern)
        return owner == self.owner_pattern

    def shares_owner_suffix(self, owner: str) -> bool:
        """Owner ends with the same class name and at least one package segment"""
        mine, theirs = self.owner_segments, owner.split('.')
        shared = 0
        for a, b in zip(reversed(mine), reversed(theirs)):
            if a != b:
                break
            shared += 1
        return shared >= min(MIN_SHARED_SEGMENTS, len(mine))

    def matches(self, callee: MethodSignature, invoke_kind: str) -> Optional[bool]:
        """None when the call does not match; otherwise the fuzzy flag"""
        if callee.name != self.method_name or callee.param_types != self.param_types:
            return None
        if self.invoke == 'static' and invoke_kind != 'static':
            return None
        if self.invoke == 'instance' and invoke_kind == 'static':
            return None
        if self.owner_matches_exactly(callee.owner):
            return False
        if self.match_mode == MatchMode.STRUCTURAL and self.shares_owner_suffix(callee.owner):
            return True
        return None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'provider': self.provider,
            'owner': self.owner_pattern,
            'method': self.method_name,
            'params': list(self.param_types),
            'secret_params': sorted(self.secret_param_indices),
            'match_mode': self.match_mode.value,
        }
        if self.invoke:
            data['invoke'] = self.invoke
        return data

    @classmethod
    def from_dict(cls, entry: Mapping[str, Any]) -> 'ApiSignature':
        try:
            return cls(
                provider=entry['provider'],
                owner_pattern=entry['owner'],
                method_name=entry['method'],
                param_types=tuple(entry.get('params', ())),
                secret_param_indices=frozenset(entry.get('secret_params', ())),
                match_mode=MatchMode(entry.get('match_mode', 'exact')),
                invoke=entry.get('invoke'),
            )
        except (KeyError, ValueError) as e:
            raise ConfigError(f"invalid signature entry {dict(entry)}: {e}")


@dataclass(frozen=True)
class SignatureMatch:
    callsite: CallSite
    signature: ApiSignature
    fuzzy: bool = False


def load_signatures(path: str) -> List[ApiSignature]:
    with open(path, 'r', encoding='utf-8') as f:
        entries = json.load(f)
    signatures = [ApiSignature.from_dict(entry) for entry in entries]
    logger.info(f"Loaded {len(signatures)} cloud API signatures for "
                f"{len({s.provider for s in signatures})} providers from {path}")
    return signatures


def match_signatures(app: IrApp, sigs: Sequence[ApiSignature]) -> List[SignatureMatch]:
    """Call sites matching any signature, in call-site order then catalog order"""
    if not sigs:
        return []
    by_name: Dict[Tuple[str, int], List[ApiSignature]] = defaultdict(list)
    for sig in sigs:
        by_name[(sig.method_name, len(sig.param_types))].append(sig)

    matches = []
    for site in app.index.call_sites:
        callee = site.call.callee
        for sig in by_name.get((callee.name, callee.arity), ()):
            fuzzy = sig.matches(callee, site.call.invoke_kind)
            if fuzzy is not None:
                matches.append(SignatureMatch(site, sig, fuzzy))
    if matches:
        logger.debug(f"{app.app_id}: {len(matches)} signed API call sites "
                     f"({sum(1 for m in matches if m.fuzzy)} fuzzy)")
    return matches


def remap_signatures(sigs: Sequence[ApiSignature], class_map: Mapping[str, str],
                     method_map: Mapping[Tuple[str, str, Tuple[str, ...]], str]) -> List[ApiSignature]:
    """Rewrite signatures through an obfuscation rename map"""
    remapped = []
    for sig in sigs:
        key = (sig.owner_pattern, sig.method_name, sig.param_types)
        remapped.append(replace(
            sig,
            owner_pattern=class_map.get(sig.owner_pattern, sig.owner_pattern),
            method_name=method_map.get(key, sig.method_name),
            param_types=tuple(class_map.get(t, t) for t in sig.param_types),
        ))
    return remapped
