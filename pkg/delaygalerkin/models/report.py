import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

# Largest magnitude written for a margin; keeps the JSON report finite.
MARGIN_CAP = 1e300


def _finite(value: float) -> float:
    value = float(value)
    if math.isnan(value):
        return -MARGIN_CAP
    return max(-MARGIN_CAP, min(MARGIN_CAP, value))


def _plain(value: Any) -> Any:
    """numpy scalars/arrays and tuples to JSON-ready python values."""
    if hasattr(value, 'tolist'):
        return _plain(value.tolist())
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return _finite(value)
    return value


@dataclass
class CheckRecord:
    """One verified inequality: positive margin means the bound holds with room to spare."""
    name: str
    reference: str
    passed: bool
    margin: float
    constants: Dict[str, float] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    # plot-data columns; exported as CSV, never embedded in the JSON report
    series: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.margin = _finite(self.margin)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'reference': self.reference,
            'passed': self.passed,
            'margin': self.margin,
            'constants': _plain(self.constants),
            'details': _plain(self.details),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CheckRecord':
        return cls(
            name=data.get('name', ''),
            reference=data.get('reference', ''),
            passed=data.get('passed', False),
            margin=data.get('margin', 0.0),
            constants=data.get('constants', {}),
            details=data.get('details', {}),
        )


@dataclass
class VerificationReport:
    command: str
    scenario: Dict[str, Any]
    config_text: str = ''
    records: List[CheckRecord] = field(default_factory=list)
    created_at: Optional[str] = None

    def __post_init__(self):
        if self.created_at is None:
            self.created_at = datetime.now().isoformat(timespec='seconds')

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.records)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def extend(self, records: List[CheckRecord]) -> None:
        for record in records:
            self.add(record)

    def failed(self) -> List[CheckRecord]:
        return [record for record in self.records if not record.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'created_at': self.created_at,
            'passed': self.passed,
            'scenario': _plain(self.scenario),
            'config_text': self.config_text,
            'checks': [record.to_dict() for record in self.records],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'VerificationReport':
        return cls(
            command=data.get('command', ''),
            scenario=data.get('scenario', {}),
            config_text=data.get('config_text', ''),
            records=[CheckRecord.from_dict(r) for r in data.get('checks', [])],
            created_at=data.get('created_at'),
        )
