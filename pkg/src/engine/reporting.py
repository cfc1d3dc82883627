"""
Report rendering for SecretSieve
JSON (versioned schema), CSV and plain-text tables; secrets masked unless
explicitly requested otherwise
"""

import io
import json
import logging
from typing import Any, Dict, List

import pandas as pd

from src.core.errors import UnknownFormatError
from src.engine.findings import mask_value
from src.engine.scanner import ScanReport

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = '1.0'
REPORT_FORMATS = ('json', 'csv', 'table')
FINDING_COLUMNS = ['app_id', 'provider', 'value', 'detectors', 'confidence', 'multiplicity', 'locations', 'fuzzy']


def report_to_dict(report: ScanReport, mask: bool = True) -> Dict[str, Any]:
    """Plain-data report with stable key order"""
    diagnostics = []
    for diagnostic in report.diagnostics:
        data = diagnostic.to_dict()
        if mask and data['partial']:
            data['partial'] = mask_value(data['partial'])
        diagnostics.append(data)
    return {
        'schema_version': REPORT_SCHEMA_VERSION,
        'corpus': report.corpus,
        'masked': mask,
        'settings': report.settings,
        'summary': {
            'apps': len(report.apps),
            'apps_failed': len(report.failed_apps),
            'findings': len(report.findings),
            'unique_pairs': sum(report.overlap().values()),
            'diagnostics': len(report.diagnostics),
        },
        'apps': [app.to_dict() for app in report.apps],
        'provider_counts': report.provider_counts(),
        'overlap': report.overlap(),
        'findings': [finding.to_dict(mask) for finding in report.findings],
        'diagnostics': diagnostics,
    }


def findings_frame(report: ScanReport, mask: bool = True) -> pd.DataFrame:
    rows = []
    for finding in report.findings:
        data = finding.to_dict(mask)
        rows.append({
            'app_id': data['app_id'],
            'provider': data['provider'],
            'value': data['value'],
            'detectors': '+'.join(data['detectors']),
            'confidence': ';'.join(f"{k}={v}" for k, v in data['confidence'].items()),
            'multiplicity': data['multiplicity'],
            'locations': ';'.join(loc.render() for loc in finding.locations),
            'fuzzy': data['fuzzy'],
        })
    return pd.DataFrame(rows, columns=FINDING_COLUMNS)


def provider_frame(report: ScanReport) -> pd.DataFrame:
    columns = [d.value for d in report.detectors] + ['total']
    counts = report.provider_counts()
    frame = pd.DataFrame.from_dict(counts, orient='index', columns=columns) if counts \
        else pd.DataFrame(columns=columns)
    frame.index.name = 'provider'
    return frame


def _render_table(report: ScanReport, mask: bool) -> str:
    sections: List[str] = [
        f"SecretSieve report (schema {REPORT_SCHEMA_VERSION}) for {report.corpus}",
        f"apps: {len(report.apps)}  failed: {len(report.failed_apps)}  findings: {len(report.findings)}",
        '',
        'Findings per provider and detector',
        provider_frame(report).to_string() if report.provider_counts() else '(none)',
        '',
        'Detector overlap (unique value/provider pairs)',
    ]
    overlap = report.overlap()
    sections.append(pd.Series(overlap, name='count').to_string() if overlap else '(none)')
    sections += ['', 'Findings']
    frame = findings_frame(report, mask)
    sections.append(frame.to_string(index=False) if len(frame) else '(none)')
    failed = report.failed_apps
    if failed:
        sections += ['', 'Failed apps']
        sections += [f"{app.app_id}: [{app.error_type}] {app.error}" for app in failed]
    return '\n'.join(sections) + '\n'


def emit_report(report: ScanReport, fmt: str = 'json', mask: bool = True) -> bytes:
    """
    json: the full versioned report. csv: one row per finding. table: the
    per-provider table, overlap cells and findings as aligned text.
    """
    if fmt == 'json':
        text = json.dumps(report_to_dict(report, mask), indent=2, ensure_ascii=False) + '\n'
    elif fmt == 'csv':
        buffer = io.StringIO()
        findings_frame(report, mask).to_csv(buffer, index=False, lineterminator='\n')
        text = buffer.getvalue()
    elif fmt == 'table':
        text = _render_table(report, mask)
    else:
        raise UnknownFormatError(f"unknown report format {fmt!r}; expected one of {', '.join(REPORT_FORMATS)}")
    if not mask:
        logger.warning("Report contains unmasked secret values")
    return text.encode('utf-8')


def parse_json_report(data: bytes) -> Dict[str, Any]:
    return json.loads(data.decode('utf-8'))
