from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from models.formula import GenericFormula
from models.grid import AreaExtent, fold

SLEUTHFILE_VERSION = "v1"


class Mode(str, Enum):
    DEVELOPMENT = "Development"
    OPERATIONAL = "Operational"


class EntryKind(str, Enum):
    FORMULA = "Formula"
    DATA = "Data"
    GUARD = "Guard"


class DataKind(str, Enum):
    NUMERIC = "Numeric"
    TEXTUAL = "Textual"


class EntryStatus(str, Enum):
    NORMAL = "Normal"
    FINAL_RESULT = "FinalResult"
    GUARD = "Guard"


class GroupAxis(str, Enum):
    ROW = "Row"
    COLUMN = "Column"


class Area(BaseModel):
    model_config = ConfigDict(frozen=True)

    extent: AreaExtent
    kind: EntryKind
    generic: Optional[GenericFormula] = None
    data_kind: Optional[DataKind] = None


class Bounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float

    @model_validator(mode="after")
    def _ordered(self) -> "Bounds":
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def describe(self) -> str:
        return f"bounds [{self.lower:g}, {self.upper:g}]"


class DataDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True)

    data_kind: DataKind
    bounds: Optional[Bounds] = None
    accept_blank_as_zero: bool = False
    user_bounds: bool = False


class WatchEntry(BaseModel):
    """One registry row: what the area holds, where it lives, and its flags."""

    id: str
    extent: AreaExtent
    kind: EntryKind

    # Area elements
    current_generic: Optional[GenericFormula] = None
    last_watched_generic: Optional[GenericFormula] = None
    data_descriptor: Optional[DataDescriptor] = None
    last_watched_data: Optional[DataDescriptor] = None
    references: List[str] = Field(default_factory=list)
    link_sources: List[str] = Field(default_factory=list)

    # Area properties
    names: List[str] = Field(default_factory=list)
    group: Optional[str] = None
    status: EntryStatus = EntryStatus.NORMAL
    guard_for: Optional[str] = None
    # member length before the insert that added this guard; None for guards watched by hand
    guard_base: Optional[int] = None

    # Flags
    change_flag: bool = False
    error_flag: bool = False
    extent_lost: bool = False
    modified_at: datetime

    @property
    def sheet(self) -> str:
        return self.extent.sheet

    @property
    def workbook(self) -> str:
        return self.extent.workbook

    def is_changed(self) -> bool:
        if self.kind == EntryKind.FORMULA:
            return self.current_generic != self.last_watched_generic
        return self.data_descriptor != self.last_watched_data


class GroupDef(BaseModel):
    name: str
    axis: GroupAxis = GroupAxis.ROW
    members: List[str] = Field(default_factory=list)


class AuditVerb(str, Enum):
    WATCH = "Watch"
    UNWATCH = "Unwatch"
    CHECK = "Check"
    FIX = "Fix"
    INSERT = "Insert"
    DELETE = "Delete"
    MOVE = "Move"
    REPLICATE = "Replicate"
    GROUP = "Group"
    CHANGE = "Change"
    STATUS = "Status"
    MODE = "Mode"
    EDIT = "Edit"


class AuditEvent(BaseModel):
    """Append-only log record; the state deltas make the log replayable."""

    timestamp: datetime
    actor: str
    verb: AuditVerb
    detail: Dict[str, Any] = Field(default_factory=dict)
    upserts: List[WatchEntry] = Field(default_factory=list)
    removed: List[str] = Field(default_factory=list)
    groups: Dict[str, Optional[GroupDef]] = Field(default_factory=dict)
    mode: Optional[Mode] = None
    next_id: Optional[int] = None


CellKey = Tuple[str, str, int, int]


class Registry(BaseModel):
    entries: Dict[str, WatchEntry] = Field(default_factory=dict)
    groups: Dict[str, GroupDef] = Field(default_factory=dict)
    capacity: int = 10_000
    mode: Mode = Mode.DEVELOPMENT
    next_id: int = 1
    audit: List[AuditEvent] = Field(default_factory=list)

    _owners: Optional[Dict[CellKey, str]] = PrivateAttr(default=None)

    def state_equals(self, other: "Registry") -> bool:
        """Equality of everything but the audit log."""
        return (self.entries == other.entries and self.groups == other.groups
                and self.capacity == other.capacity and self.mode == other.mode
                and self.next_id == other.next_id)

    # --- cell ownership index ---

    def invalidate_index(self) -> None:
        self._owners = None

    def _index(self) -> Dict[CellKey, str]:
        if self._owners is None:
            owners: Dict[CellKey, str] = {}
            for entry in self.entries.values():
                if entry.extent_lost:
                    continue
                wb, sh = entry.extent.sheet_key()
                for row, col in entry.extent.positions():
                    owners[(wb, sh, row, col)] = entry.id
            self._owners = owners
        return self._owners

    def owner_of(self, workbook: str, sheet: str, row: int, col: int) -> Optional[str]:
        return self._index().get((fold(workbook), fold(sheet), row, col))

    def owners_in(self, extent: AreaExtent) -> List[str]:
        index = self._index()
        wb, sh = extent.sheet_key()
        found = []
        for row, col in extent.positions():
            owner = index.get((wb, sh, row, col))
            if owner is not None and owner not in found:
                found.append(owner)
        return found

    def group(self, name: str) -> Optional[GroupDef]:
        return self.groups.get(fold(name))

    def sorted_entries(self) -> List[WatchEntry]:
        return sorted(self.entries.values(), key=lambda e: e.extent.key())
