# Signature-Flow Module for SecretSieve: cloud-API signatures, backward slicing and the forward oracle
from .signatures import ApiSignature, MatchMode, SignatureMatch, load_signatures, match_signatures, remap_signatures
from .slicer import BackwardSlicer, SliceBudget, SliceResult, SliceStatus, TraceStep, backward_slice
from .reference_interpreter import ObservedCall, ReferenceInterpreter
from .detector import SigFlowDetector, SliceDiagnostic, run_sig_flow

__all__ = [
    'ApiSignature',
    'MatchMode',
    'SignatureMatch',
    'load_signatures',
    'match_signatures',
    'remap_signatures',
    'BackwardSlicer',
    'SliceBudget',
    'SliceResult',
    'SliceStatus',
    'TraceStep',
    'backward_slice',
    'ObservedCall',
    'ReferenceInterpreter',
    'SigFlowDetector',
    'SliceDiagnostic',
    'run_sig_flow',
]
