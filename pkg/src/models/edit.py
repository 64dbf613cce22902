from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from models.finding import Finding
from models.grid import WorkbookSet
from models.watch import AuditEvent, Registry


class CommandVerb(str, Enum):
    SET = "SET"
    CLEAR = "CLEAR"
    FILL = "FILL"
    MOVE = "MOVE"
    INSERT_BELOW = "INSERT-BELOW"
    INSERT_RIGHT = "INSERT-RIGHT"
    DELETE_ROWS = "DELETE-ROWS"
    DELETE_COLS = "DELETE-COLS"
    REPLICATE = "REPLICATE"
    FIX = "FIX"
    RAW_INSERT_ROWS = "RAW-INSERT-ROWS"
    RAW_INSERT_COLS = "RAW-INSERT-COLS"
    RAW_DELETE_ROWS = "RAW-DELETE-ROWS"
    RAW_DELETE_COLS = "RAW-DELETE-COLS"
    RAW_MOVE_COLS = "RAW-MOVE-COLS"
    RAW_MOVE_ROWS = "RAW-MOVE-ROWS"
    RAW_MOVE = "RAW-MOVE"


# Tool commands that Operational mode refuses; everything else is the operator's own editing.
SLEUTH_VERBS = frozenset({
    CommandVerb.MOVE, CommandVerb.INSERT_BELOW, CommandVerb.INSERT_RIGHT,
    CommandVerb.DELETE_ROWS, CommandVerb.DELETE_COLS, CommandVerb.REPLICATE,
})


class EditCommand(BaseModel):
    """One parsed edit-script line."""
    model_config = ConfigDict(frozen=True)

    verb: CommandVerb
    line: int = 0
    text: str = ""
    params: Dict[str, Any] = Field(default_factory=dict)


class EditResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    workbooks: WorkbookSet
    registry: Registry
    findings: List[Finding] = Field(default_factory=list)
    events: List[AuditEvent] = Field(default_factory=list)
    detail: Optional[Dict[str, Any]] = None
