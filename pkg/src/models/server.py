from typing import List, Optional

from pydantic import BaseModel

from models.formula import TraceRow


# --- Pydantic Models for API Response ---
class FindingOut(BaseModel):
    entry_id: str
    location: str
    severity: str
    code: str
    message: str
    detail: Optional[str] = None
    fix_hint: Optional[str] = None


class FindingsResponse(BaseModel):
    count: int
    errors: int
    warnings: int
    findings: List[FindingOut]


class TraceStepOut(BaseModel):
    depth: int
    cell: str
    formula: str
    rows: List[TraceRow]


class TraceResponse(BaseModel):
    count: int
    steps: List[TraceStepOut]


class EvalResponse(BaseModel):
    cell: str
    value: str


class UnwatchedArea(BaseModel):
    location: str
    generic: Optional[str] = None


class UnwatchedResponse(BaseModel):
    count: int
    areas: List[UnwatchedArea]
