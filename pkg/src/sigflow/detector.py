"""
Signature-flow detector for SecretSieve
Matches cloud-API call sites, then slices each secret argument backward
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

from src.engine.findings import Detector, FindingLocation, SecretFinding, merge_findings
from src.ir.model import IrApp
from src.sigflow.signatures import ApiSignature, SignatureMatch, match_signatures
from src.sigflow.slicer import BackwardSlicer, SliceBudget, SliceResult, SliceStatus

EXACT_CONFIDENCE = 1.0
FUZZY_CONFIDENCE = 0.5


@dataclass(frozen=True)
class SliceDiagnostic:
    """A signed call site whose secret argument did not resolve to a usable constant"""
    app_id: str
    location: str
    provider: str
    callee: str
    arg_index: int
    status: str
    reason: Optional[str]
    partial: str
    fuzzy: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'app_id': self.app_id,
            'location': self.location,
            'provider': self.provider,
            'callee': self.callee,
            'arg_index': self.arg_index,
            'status': self.status,
            'reason': self.reason,
            'partial': self.partial,
            'fuzzy': self.fuzzy,
        }


class SigFlowDetector:
    """
    Signature-flow detector. One finding per (call site, secret parameter,
    resolved value); partial and unresolved slices become diagnostics.
    """

    def __init__(self, signatures: Sequence[ApiSignature], config: Optional[Dict[str, Any]] = None):
        config = config or {}
        self.logger = logging.getLogger('SigFlowDetector')
        self.signatures = list(signatures)
        self.budget = config.get('budget')
        if not isinstance(self.budget, SliceBudget):
            self.budget = SliceBudget.from_config(self.budget)
        self.env: Mapping[str, Mapping[str, str]] = config.get('env') or {}
        self.env_getters = tuple(config.get('env_getters', ()))
        self.diagnostics: List[SliceDiagnostic] = []

    def run(self, app: IrApp) -> List[SecretFinding]:
        slicer = BackwardSlicer(app, self.budget, self.env, self.env_getters)
        raw: List[SecretFinding] = []
        matches = match_signatures(app, self.signatures)
        for match in matches:
            for arg_index in sorted(match.signature.secret_param_indices):
                for result in slicer.slice(match.callsite, arg_index):
                    finding = self._to_finding(app, match, arg_index, result)
                    if finding is not None:
                        raw.append(finding)

        findings = merge_findings(raw)
        unresolved = sum(1 for d in self.diagnostics if d.app_id == app.app_id)
        self.logger.info(f"{app.app_id}: {len(matches)} signed call sites, "
                         f"{len(findings)} findings, {unresolved} diagnostics")
        return findings

    def _to_finding(self, app: IrApp, match: SignatureMatch, arg_index: int,
                    result: SliceResult) -> Optional[SecretFinding]:
        site = match.callsite
        if result.status != SliceStatus.RESOLVED or not result.value:
            self.diagnostics.append(SliceDiagnostic(
                app_id=app.app_id,
                location=site.location,
                provider=match.signature.provider,
                callee=site.call.callee.render(),
                arg_index=arg_index,
                status=result.status.value if result.value is None else 'empty',
                reason=result.reason,
                partial=result.render(),
                fuzzy=match.fuzzy,
            ))
            self.logger.debug(f"{app.app_id}: {site.location} arg {arg_index} "
                              f"{result.status.value} ({result.reason or result.render()})")
            return None

        return SecretFinding(
            value=result.value,
            provider=match.signature.provider,
            app_id=app.app_id,
            detectors={Detector.SIG_FLOW},
            locations=[FindingLocation(app.app_id, site.class_name, site.method_name, site.index, 'call_site')],
            confidence={Detector.SIG_FLOW: FUZZY_CONFIDENCE if match.fuzzy else EXACT_CONFIDENCE},
            slice_trace=list(result.trace),
            fuzzy=match.fuzzy,
        )


def run_sig_flow(app: IrApp, sigs: Sequence[ApiSignature], budget: Optional[SliceBudget] = None,
                 env: Optional[Mapping[str, Mapping[str, str]]] = None,
                 env_getters: Sequence[str] = ()) -> List[SecretFinding]:
    detector = SigFlowDetector(sigs, {'budget': budget, 'env': env, 'env_getters': env_getters})
    return detector.run(app)
