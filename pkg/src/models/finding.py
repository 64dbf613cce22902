from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from models.grid import AreaExtent


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


class FindingCode(str, Enum):
    DAMAGED_FORMULA = "DAMAGED_FORMULA"
    INVALID_PRECEDENT = "INVALID_PRECEDENT"
    DATA_OVER_BLANK = "DATA_OVER_BLANK"
    DATA_UNREFERENCED = "DATA_UNREFERENCED"
    INCONSISTENT_DEPENDENT = "INCONSISTENT_DEPENDENT"
    UNVERIFIABLE_DEPENDENTS = "UNVERIFIABLE_DEPENDENTS"
    CANDIDATE_FINAL_RESULT = "CANDIDATE_FINAL_RESULT"
    VULNERABLE_DOLLARING = "VULNERABLE_DOLLARING"
    BLANK_IN_DATA = "BLANK_IN_DATA"
    FORMULA_IN_DATA = "FORMULA_IN_DATA"
    TYPE_MISMATCH = "TYPE_MISMATCH"
    OUT_OF_BOUNDS = "OUT_OF_BOUNDS"
    WATCH_DAMAGED = "WATCH_DAMAGED"


# The first four strings are matched bit-exactly by users' tooling.
MESSAGES: Dict[FindingCode, str] = {
    FindingCode.DAMAGED_FORMULA: "<Error in Formula.>",
    FindingCode.INVALID_PRECEDENT: "<Formula refers to a Cell/Area that is NOT Watched.>",
    FindingCode.DATA_OVER_BLANK: "<Data entered over Blank.>",
    FindingCode.DATA_UNREFERENCED: "<Data is NOT referred to by a Watched Formula.>",
    FindingCode.INCONSISTENT_DEPENDENT: "<Area is NOT referred to consistently by Watched Formulas.>",
    FindingCode.UNVERIFIABLE_DEPENDENTS: "<Area is referred to by Formulas that are NOT Watched.>",
    FindingCode.CANDIDATE_FINAL_RESULT: "<Formula has no Dependents; mark it as a Final Result.>",
    FindingCode.VULNERABLE_DOLLARING: "<Reference Dollaring is Vulnerable to Fill.>",
    FindingCode.BLANK_IN_DATA: "<Blank in Data Area.>",
    FindingCode.FORMULA_IN_DATA: "<Formula in Data Area.>",
    FindingCode.TYPE_MISMATCH: "<Data Type does not match Data Area.>",
    FindingCode.OUT_OF_BOUNDS: "<Data out of Bounds.>",
    FindingCode.WATCH_DAMAGED: "<Watch Information Damaged.>",
}

SEVERITIES: Dict[FindingCode, Severity] = {
    code: Severity.WARNING if code in (
        FindingCode.UNVERIFIABLE_DEPENDENTS,
        FindingCode.CANDIDATE_FINAL_RESULT,
        FindingCode.VULNERABLE_DOLLARING,
    ) else Severity.ERROR
    for code in FindingCode
}


class Finding(BaseModel):
    model_config = ConfigDict(frozen=True)

    entry_id: str
    location: AreaExtent
    severity: Severity
    code: FindingCode
    message: str
    fix_hint: Optional[str] = None
    detail: Optional[str] = None
    term_index: Optional[int] = None

    @classmethod
    def of(cls, code: FindingCode, entry_id: str, location: AreaExtent, **extra) -> "Finding":
        return cls(entry_id=entry_id, location=location, severity=SEVERITIES[code], code=code,
                   message=MESSAGES[code], **extra)


class ReportRow(BaseModel):
    entry_id: str
    modified_at: datetime
    error_found: str
    indications: List[str] = Field(default_factory=list)
    change_detected: str
    location: str
    formula: str


class Report(BaseModel):
    generated_at: datetime
    rows: List[ReportRow] = Field(default_factory=list)
    findings: List[Finding] = Field(default_factory=list)

    @property
    def error_count(self) -> int:
        return sum(1 for f in self.findings if f.severity == Severity.ERROR)

    @property
    def warning_count(self) -> int:
        return sum(1 for f in self.findings if f.severity == Severity.WARNING)

    def for_entry(self, entry_id: str) -> List[Finding]:
        return [f for f in self.findings if f.entry_id == entry_id]

    def messages(self) -> List[str]:
        return [f.message for f in self.findings]
