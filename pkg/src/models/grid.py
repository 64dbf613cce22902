import math
import re
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import SheetExistsError, UnknownSheetError, UnknownWorkbookError

MAX_ROW = 1_048_576
MAX_COL = 16_384


def column_letters(col: int) -> str:
    """1 -> A, 27 -> AA, 16384 -> XFD."""
    if col < 1:
        raise ValueError(f"column index must be positive, got {col}")
    label = ""
    while col:
        col, mod = divmod(col - 1, 26)
        label = chr(65 + mod) + label
    return label


def column_index(letters: str) -> int:
    """AA -> 27 (case-insensitive)."""
    value = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"invalid column letters {letters!r}")
        value = value * 26 + (ord(ch) - 64)
    return value


def fold(identifier: str) -> str:
    return identifier.casefold()


class CellAddr(BaseModel):
    model_config = ConfigDict(frozen=True)

    workbook: str
    sheet: str
    row: int = Field(ge=1, le=MAX_ROW)
    col: int = Field(ge=1, le=MAX_COL)

    def key(self) -> Tuple[str, str, int, int]:
        return (fold(self.workbook), fold(self.sheet), self.row, self.col)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CellAddr) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def a1(self, absolute: bool = False) -> str:
        if absolute:
            return f"${column_letters(self.col)}${self.row}"
        return f"{column_letters(self.col)}{self.row}"

    def label(self) -> str:
        return f"{quote_sheet(self.sheet)}!{self.a1(absolute=True)}"

    def moved(self, rows: int = 0, cols: int = 0) -> "CellAddr":
        return CellAddr(workbook=self.workbook, sheet=self.sheet, row=self.row + rows, col=self.col + cols)


class AreaExtent(BaseModel):
    model_config = ConfigDict(frozen=True)

    top_left: CellAddr
    bottom_right: CellAddr

    @model_validator(mode="after")
    def _same_sheet_and_ordered(self) -> "AreaExtent":
        a, b = self.top_left, self.bottom_right
        if (fold(a.workbook), fold(a.sheet)) != (fold(b.workbook), fold(b.sheet)):
            raise ValueError("extent corners must share workbook and sheet")
        if a.row > b.row or a.col > b.col:
            raise ValueError(f"extent corners out of order: {a.a1()}:{b.a1()}")
        return self

    @classmethod
    def of(cls, workbook: str, sheet: str, top: int, left: int, bottom: Optional[int] = None,
           right: Optional[int] = None) -> "AreaExtent":
        bottom = top if bottom is None else bottom
        right = left if right is None else right
        return cls(
            top_left=CellAddr(workbook=workbook, sheet=sheet, row=top, col=left),
            bottom_right=CellAddr(workbook=workbook, sheet=sheet, row=bottom, col=right),
        )

    @classmethod
    def single(cls, addr: CellAddr) -> "AreaExtent":
        return cls(top_left=addr, bottom_right=addr)

    @property
    def workbook(self) -> str:
        return self.top_left.workbook

    @property
    def sheet(self) -> str:
        return self.top_left.sheet

    @property
    def top(self) -> int:
        return self.top_left.row

    @property
    def left(self) -> int:
        return self.top_left.col

    @property
    def bottom(self) -> int:
        return self.bottom_right.row

    @property
    def right(self) -> int:
        return self.bottom_right.col

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def size(self) -> int:
        return self.height * self.width

    def sheet_key(self) -> Tuple[str, str]:
        return (fold(self.workbook), fold(self.sheet))

    def bounds(self) -> Tuple[int, int, int, int]:
        return (self.top, self.left, self.bottom, self.right)

    def key(self) -> Tuple[str, str, int, int, int, int]:
        return self.sheet_key() + self.bounds()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AreaExtent) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def positions(self) -> Iterator[Tuple[int, int]]:
        """Row-major (row, col) pairs."""
        for row in range(self.top, self.bottom + 1):
            for col in range(self.left, self.right + 1):
                yield row, col

    def addresses(self) -> Iterator[CellAddr]:
        for row, col in self.positions():
            yield CellAddr(workbook=self.workbook, sheet=self.sheet, row=row, col=col)

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right

    def contains_extent(self, other: "AreaExtent") -> bool:
        return (self.sheet_key() == other.sheet_key()
                and self.top <= other.top and other.bottom <= self.bottom
                and self.left <= other.left and other.right <= self.right)

    def intersects(self, other: "AreaExtent") -> bool:
        return (self.sheet_key() == other.sheet_key()
                and self.top <= other.bottom and other.top <= self.bottom
                and self.left <= other.right and other.left <= self.right)

    def translated(self, workbook: str, sheet: str, top: int, left: int) -> "AreaExtent":
        return AreaExtent.of(workbook, sheet, top, left, top + self.height - 1, left + self.width - 1)

    def a1(self) -> str:
        if self.height == 1 and self.width == 1:
            return self.top_left.a1(absolute=True)
        return f"{self.top_left.a1(absolute=True)}:{self.bottom_right.a1(absolute=True)}"

    def label(self) -> str:
        """Absolute `Sheet!$C$R:$C$R` form used in reports."""
        return f"{quote_sheet(self.sheet)}!{self.a1()}"


_CELL_LIKE = re.compile(r"^([A-Za-z]{1,3}\d+|[Rr]\d*[Cc]\d*|TRUE|FALSE)$", re.IGNORECASE)


def needs_quotes(sheet: str) -> bool:
    if not sheet:
        return True
    if not (sheet[0].isalpha() or sheet[0] == "_"):
        return True
    if _CELL_LIKE.match(sheet):
        return True
    return any(not (ch.isascii() and (ch.isalnum() or ch in "_.")) for ch in sheet)


def quote_sheet(sheet: str) -> str:
    if needs_quotes(sheet):
        return "'" + sheet.replace("'", "''") + "'"
    return sheet


class CellKind(str, Enum):
    BLANK = "Blank"
    NUMBER = "Number"
    TEXT = "Text"
    FORMULA = "Formula"


class CellContent(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: CellKind
    number: Optional[float] = None
    text: Optional[str] = None
    formula: Optional[str] = None

    @model_validator(mode="after")
    def _one_payload(self) -> "CellContent":
        populated = {
            CellKind.NUMBER: self.number is not None,
            CellKind.TEXT: self.text is not None,
            CellKind.FORMULA: self.formula is not None,
        }
        expected = {k: k == self.kind for k in populated}
        if populated != expected:
            raise ValueError(f"{self.kind.value} cell must carry exactly its own payload")
        if self.kind == CellKind.FORMULA and not self.formula.startswith("="):
            raise ValueError("formula payload must start with '='")
        return self

    @classmethod
    def of_number(cls, value: float) -> "CellContent":
        return cls(kind=CellKind.NUMBER, number=float(value))

    @classmethod
    def of_text(cls, value: str) -> "CellContent":
        return cls(kind=CellKind.TEXT, text=value)

    @classmethod
    def of_formula(cls, source: str) -> "CellContent":
        return cls(kind=CellKind.FORMULA, formula=source)

    @property
    def is_blank(self) -> bool:
        return self.kind == CellKind.BLANK

    @property
    def is_formula(self) -> bool:
        return self.kind == CellKind.FORMULA

    @property
    def is_data(self) -> bool:
        return self.kind in (CellKind.NUMBER, CellKind.TEXT)


BLANK = CellContent(kind=CellKind.BLANK)


class NameDef(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    target: AreaExtent


class Sheet(BaseModel):
    name: str
    cells: Dict[Tuple[int, int], CellContent] = Field(default_factory=dict)

    def get(self, row: int, col: int) -> CellContent:
        return self.cells.get((row, col), BLANK)

    def put(self, row: int, col: int, content: CellContent) -> None:
        if content.is_blank:
            self.cells.pop((row, col), None)
        else:
            self.cells[(row, col)] = content

    def sorted_positions(self) -> List[Tuple[int, int]]:
        return sorted(self.cells)


class Workbook(BaseModel):
    id: str
    sheets: Dict[str, Sheet] = Field(default_factory=dict)
    names: List[NameDef] = Field(default_factory=list)

    @field_validator("names")
    @classmethod
    def _canonical_name_order(cls, names: List[NameDef]) -> List[NameDef]:
        return sorted(names, key=lambda n: fold(n.name))

    def has_sheet(self, name: str) -> bool:
        return fold(name) in self.sheets

    def sheet(self, name: str) -> Sheet:
        try:
            return self.sheets[fold(name)]
        except KeyError:
            raise UnknownSheetError(f"workbook {self.id!r} has no sheet {name!r}") from None

    def add_sheet(self, name: str) -> Sheet:
        if self.has_sheet(name):
            raise SheetExistsError(f"sheet {name!r} already exists in workbook {self.id!r}")
        sheet = Sheet(name=name)
        self.sheets[fold(name)] = sheet
        return sheet

    def ensure_sheet(self, name: str) -> Sheet:
        return self.sheets[fold(name)] if self.has_sheet(name) else self.add_sheet(name)

    def set_name(self, name: str, target: AreaExtent) -> None:
        kept = [n for n in self.names if fold(n.name) != fold(name)]
        kept.append(NameDef(name=name, target=target))
        self.names = sorted(kept, key=lambda n: fold(n.name))

    def get(self, sheet: str, row: int, col: int) -> CellContent:
        if not self.has_sheet(sheet):
            return BLANK
        return self.sheet(sheet).get(row, col)


class WorkbookSet(BaseModel):
    workbooks: Dict[str, Workbook] = Field(default_factory=dict)

    @classmethod
    def of(cls, *workbooks: Workbook) -> "WorkbookSet":
        return cls(workbooks={fold(wb.id): wb for wb in workbooks})

    @property
    def default_id(self) -> str:
        if not self.workbooks:
            raise UnknownWorkbookError("the workbook set is empty")
        return self.workbooks[min(self.workbooks)].id

    def has_workbook(self, workbook_id: str) -> bool:
        return fold(workbook_id) in self.workbooks

    def workbook(self, workbook_id: Optional[str] = None) -> Workbook:
        if workbook_id is None:
            workbook_id = self.default_id
        try:
            return self.workbooks[fold(workbook_id)]
        except KeyError:
            raise UnknownWorkbookError(f"no workbook {workbook_id!r} in the set") from None

    def add(self, workbook: Workbook) -> None:
        self.workbooks[fold(workbook.id)] = workbook

    def get(self, addr: CellAddr) -> CellContent:
        if not self.has_workbook(addr.workbook):
            return BLANK
        return self.workbook(addr.workbook).get(addr.sheet, addr.row, addr.col)

    def put(self, addr: CellAddr, content: CellContent) -> None:
        self.workbook(addr.workbook).ensure_sheet(addr.sheet).put(addr.row, addr.col, content)

    def formula_cells(self) -> Iterator[Tuple[CellAddr, CellContent]]:
        for wb in self.workbooks.values():
            for sheet in wb.sheets.values():
                for (row, col), content in sorted(sheet.cells.items()):
                    if content.is_formula:
                        yield CellAddr(workbook=wb.id, sheet=sheet.name, row=row, col=col), content
