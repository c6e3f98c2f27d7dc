"""
Fit Report Files
JSON document tying a selection report to the exact samples it was fitted on
"""
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from core.errors import DataError, ModelSpecError, ReportMismatch
from core.hashing import hash_report_body, hash_samples
from seafloor.models import EmConfig, RKMixture, SelectionReport

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


@dataclass
class FitReportFile:
    """Provenance, preprocessing, fit settings and per-model results"""
    provenance: Dict[str, Any]
    preprocessing: Dict[str, Any]
    em_config: EmConfig
    report: SelectionReport
    created: int = field(default_factory=lambda: int(time.time()))

    @classmethod
    def build(cls, samples, source: str, preprocessing: dict, em_config: EmConfig,
              report: SelectionReport) -> 'FitReportFile':
        provenance = {'source': source, 'samples_hash': hash_samples(samples), 'n_samples': len(samples)}
        return cls(provenance=provenance, preprocessing=preprocessing, em_config=em_config, report=report)

    @property
    def samples_hash(self) -> str:
        return self.provenance['samples_hash']

    @property
    def report_id(self) -> str:
        """Hash of everything except the timestamp"""
        return hash_report_body(self._body())

    def verify_samples(self, samples) -> None:
        """Raise ReportMismatch unless samples are the ones this report was fitted on"""
        actual = hash_samples(samples)
        if actual != self.samples_hash:
            raise ReportMismatch(
                f"Samples do not match the report (report {self.samples_hash}, data {actual}); "
                f"check the input file and the tile/decimation/normalization flags"
            )

    def theta(self, M: int) -> RKMixture:
        try:
            row = self.report.row(M)
        except KeyError:
            available = [r.M for r in self.report.rows if r.ok]
            raise DataError(f"Model M={M} not in report (available: {available})") from None
        if not row.ok or row.fit is None:
            raise DataError(f"Model M={M} failed in this report: {row.error}")
        return row.fit.theta

    def fitted_thetas(self, converged_only: bool = True) -> Dict[int, RKMixture]:
        out = {}
        for row in self.report.rows:
            if row.ok and row.fit is not None and (row.fit.converged or not converged_only):
                out[row.M] = row.fit.theta
        return out

    def _body(self) -> dict:
        return {
            'version': REPORT_VERSION,
            'provenance': self.provenance,
            'preprocessing': self.preprocessing,
            'em_config': self.em_config.to_dict(),
            'k_convention': self.report.k_convention,
            'n_samples': self.report.n_samples,
            'models': [r.to_dict() for r in self.report.rows],
            'selections': {
                'aic': self.report.selected_by_aic,
                'bic': self.report.selected_by_bic,
                'loglik': self.report.selected_by_ll,
            },
        }

    def to_dict(self) -> dict:
        return {'created': self.created, **self._body(), 'report_id': self.report_id}

    @classmethod
    def from_dict(cls, data: dict) -> 'FitReportFile':
        try:
            selections = data.get('selections', {})
            report = SelectionReport.from_dict({
                'rows': data['models'],
                'n_samples': data['n_samples'],
                'k_convention': data['k_convention'],
                'selected_by_aic': selections.get('aic'),
                'selected_by_bic': selections.get('bic'),
                'selected_by_ll': selections.get('loglik'),
            })
            return cls(
                provenance=data['provenance'],
                preprocessing=data['preprocessing'],
                em_config=EmConfig.from_dict(data['em_config']),
                report=report,
                created=data.get('created', 0),
            )
        except (KeyError, TypeError) as e:
            raise DataError(f"Malformed fit report: {e}") from e

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        logger.info(f"Wrote fit report to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'FitReportFile':
        path = Path(path)
        if not path.exists():
            raise DataError(f"Fit report not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: line {e.lineno}: {e.msg}") from e
        return cls.from_dict(data)


def read_model_spec(path: Union[str, Path]) -> RKMixture:
    """RKMixture from a model-spec JSON file, with line-level diagnostics"""
    path = Path(path)
    if not path.exists():
        raise ModelSpecError(f"Model spec not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSpecError(e.msg, line=e.lineno) from e
    try:
        return RKMixture.from_dict(data)
    except ModelSpecError as e:
        line = _line_of(text, e.field) if e.field else None
        if line is None:
            raise
        raise ModelSpecError(e.message, line=line, field=e.field) from e


_FIELD = re.compile(r"^(?:components\[(\d+)\]\.?)?(\w*)$")


def _line_of(text: str, field_path: str) -> Optional[int]:
    """Line of the key a field path like components[1].alpha points at"""
    match = _FIELD.match(field_path)
    if not match:
        return None
    index, key = match.groups()
    lines = text.splitlines()

    def hits(name: str):
        return [i for i, line in enumerate(lines, start=1) if f'"{name}"' in line]

    if index is not None:
        # the i-th component opens at the i-th "w" key, or failing that at the components list
        keyed = hits(key or "w")
        if int(index) < len(keyed):
            return keyed[int(index)]
        key = "components"
    found = hits(key or "components")
    return found[0] if found else None
