# Engine Module for SecretSieve: configuration, findings, scanning and reporting
# Scanner and reporting import the detector packages, which import findings from here;
# import them as src.engine.scanner / src.engine.reporting.

from .findings import Detector, FindingLocation, SecretFinding, mask_value, merge_findings, overlap_matrix
from .config import ScanConfig, build_scan_config

__all__ = [
    'Detector', 'FindingLocation', 'SecretFinding', 'mask_value', 'merge_findings', 'overlap_matrix',
    'ScanConfig', 'build_scan_config',
]
