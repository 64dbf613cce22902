from typing import Callable, Dict, Hashable, List, Optional, Tuple

from core.errors import (
    FormulaSyntaxError, NonFormulaCellError, NotUniformError, ReferenceOutOfGridError,
    UnclassifiableAreaError,
)
from models.formula import GenericFormula
from models.grid import AreaExtent, CellContent, CellKind, Workbook
from models.watch import Area, DataKind, EntryKind, Registry
from service.notation import generic_text

CellFilter = Callable[[int, int, CellContent], bool]


def _cell_key(row: int, col: int, content: CellContent) -> Hashable:
    if content.kind == CellKind.FORMULA:
        try:
            return ("F", generic_text(content.formula, row, col))
        except (FormulaSyntaxError, ReferenceOutOfGridError):
            # unparseable formulas never join an area
            return ("X", row, col)
    if content.kind == CellKind.NUMBER:
        return ("D", DataKind.NUMERIC)
    return ("D", DataKind.TEXTUAL)


def infer_areas(wb: Workbook, sheet: str, include: Optional[CellFilter] = None) -> List[Area]:
    """Greedy row-major rectangles: extend right, then down.

    Every non-blank cell (passing `include`) lands in exactly one area.
    """
    grid = wb.sheet(sheet)
    keys: Dict[Tuple[int, int], Hashable] = {}
    for (row, col), content in grid.cells.items():
        if include is None or include(row, col, content):
            keys[(row, col)] = _cell_key(row, col, content)

    assigned = set()
    areas: List[Area] = []
    for (row, col) in sorted(keys):
        if (row, col) in assigned:
            continue
        key = keys[(row, col)]

        width = 1
        while (row, col + width) not in assigned and keys.get((row, col + width)) == key:
            width += 1
        height = 1
        while all((row + height, c) not in assigned and keys.get((row + height, c)) == key
                  for c in range(col, col + width)):
            height += 1

        for r in range(row, row + height):
            for c in range(col, col + width):
                assigned.add((r, c))
        extent = AreaExtent.of(wb.id, grid.name, row, col, row + height - 1, col + width - 1)
        if key[0] == "D":
            areas.append(Area(extent=extent, kind=EntryKind.DATA, data_kind=key[1]))
        elif key[0] == "F":
            areas.append(Area(extent=extent, kind=EntryKind.FORMULA, generic=GenericFormula(r1c1_text=key[1])))
        else:
            areas.append(Area(extent=extent, kind=EntryKind.FORMULA))
    return areas


def generic_formula(wb: Workbook, extent: AreaExtent) -> GenericFormula:
    master: Optional[str] = None
    for row, col in extent.positions():
        content = wb.get(extent.sheet, row, col)
        label = AreaExtent.of(wb.id, extent.sheet, row, col).label()
        if content.kind != CellKind.FORMULA:
            raise NonFormulaCellError(label)
        if master is None:
            master = generic_text(content.formula, row, col)
            continue
        try:
            text = generic_text(content.formula, row, col)
        except (FormulaSyntaxError, ReferenceOutOfGridError):
            raise NotUniformError(label) from None
        if text != master:
            raise NotUniformError(label)
    return GenericFormula(r1c1_text=master)


def find_unwatched_formulas(wb: Workbook, reg: Registry) -> List[Area]:
    found: List[Area] = []
    for sheet in wb.sheets.values():
        def unwatched(row: int, col: int, content: CellContent, _sheet=sheet.name) -> bool:
            return content.is_formula and reg.owner_of(wb.id, _sheet, row, col) is None
        found.extend(infer_areas(wb, sheet.name, unwatched))
    return found


def classify_data_area(wb: Workbook, extent: AreaExtent) -> DataKind:
    numbers = texts = 0
    for row, col in extent.positions():
        content = wb.get(extent.sheet, row, col)
        if content.kind == CellKind.NUMBER:
            numbers += 1
        elif content.kind == CellKind.TEXT:
            texts += 1
    if numbers == 0 and texts == 0:
        raise UnclassifiableAreaError(f"{extent.label()} holds no data to classify")
    return DataKind.NUMERIC if numbers >= texts else DataKind.TEXTUAL


def cover_rectangles(cells) -> List[Tuple[int, int, int, int]]:
    """Split a set of (row, col) cells into rectangles with the same greedy growth as infer_areas."""
    remaining = set(cells)
    rects = []
    for row, col in sorted(cells):
        if (row, col) not in remaining:
            continue
        width = 1
        while (row, col + width) in remaining:
            width += 1
        height = 1
        while all((row + height, c) in remaining for c in range(col, col + width)):
            height += 1
        for r in range(row, row + height):
            for c in range(col, col + width):
                remaining.discard((r, c))
        rects.append((row, col, row + height - 1, col + width - 1))
    return rects
