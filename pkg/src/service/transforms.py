"""Grid edits and what they do to cells, references, names and extents.

Every edit maps a referenced rectangle to its new place (or to nothing, which
renders as `#REF!`) and every stored cell to its new address. Formulas are
rewritten in A1 form, so absolute and relative components move alike: only
the position of the referenced cells matters.
"""
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from core import log
from core.errors import FormulaSyntaxError, ReferenceOutOfGridError
from models.formula import Coord, ErrorLiteral, FunctionCall, Node, RefKind, Reference
from models.grid import MAX_COL, MAX_ROW, AreaExtent, CellContent, NameDef, WorkbookSet, fold
from models.watch import GroupAxis
from service.formula_parser import map_references, parse_cached, render, walk
from service.references import Box, box_of

Host = Tuple[str, str, int, int]


# --- axis helpers; work on Box and AreaExtent alike ---

def lo(rect, axis: GroupAxis) -> int:
    return rect.top if axis == GroupAxis.ROW else rect.left


def hi(rect, axis: GroupAxis) -> int:
    return rect.bottom if axis == GroupAxis.ROW else rect.right


def cross_lo(rect, axis: GroupAxis) -> int:
    return rect.left if axis == GroupAxis.ROW else rect.top


def cross_hi(rect, axis: GroupAxis) -> int:
    return rect.right if axis == GroupAxis.ROW else rect.bottom


def line_of(row: int, col: int, axis: GroupAxis) -> int:
    return row if axis == GroupAxis.ROW else col


def with_span(box: Box, axis: GroupAxis, new_lo: int, new_hi: int) -> Box:
    if axis == GroupAxis.ROW:
        return box._replace(top=new_lo, bottom=new_hi)
    return box._replace(left=new_lo, right=new_hi)


def same_sheet(box: Box, workbook: str, sheet: str) -> bool:
    return box.sheet_key() == (fold(workbook), fold(sheet))


def ref_box(ref: Reference, host: Host) -> Box:
    """Rectangle of an A1 cell or range reference written at `host`."""
    end = ref.end or ref.start
    return Box(ref.workbook or host[0], ref.sheet or host[1],
               min(ref.start.row, end.row), min(ref.start.col, end.col),
               max(ref.start.row, end.row), max(ref.start.col, end.col))


def rebuild(ref: Reference, old: Box, new: Box, host: Host, new_host: Host) -> Reference:
    """Reference to `new` keeping dollaring, qualified as seen from `new_host`."""
    start = Coord(new.top, new.left, ref.start.row_abs, ref.start.col_abs)
    end = None
    if ref.kind == RefKind.RANGE:
        end = Coord(new.bottom, new.right, ref.end.row_abs, ref.end.col_abs)

    workbook = ref.workbook
    moved_book = fold(new.workbook) != fold(old.workbook)
    if workbook is not None and moved_book:
        workbook = new.workbook
    elif workbook is None and fold(new.workbook) != fold(new_host[0]):
        workbook = new.workbook

    sheet = ref.sheet
    moved_sheet = new.sheet_key() != old.sheet_key()
    if sheet is not None and moved_sheet:
        sheet = new.sheet
    elif sheet is None and (workbook is not None or fold(new.sheet) != fold(new_host[1])):
        sheet = new.sheet
    return replace(ref, start=start, end=end, workbook=workbook, sheet=sheet)


class GridEdit:
    """Base edit: subclasses define where boxes and cells go."""

    def relocates(self, workbook: str, sheet: str) -> bool:
        raise NotImplementedError

    def move_box(self, box: Box) -> Optional[Box]:
        raise NotImplementedError

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        raise NotImplementedError

    def describe(self) -> Dict:
        return {}

    def rewrite_reference(self, ref: Reference, host: Host, new_host: Host, grow: int = 0,
                          axis: GroupAxis = GroupAxis.ROW) -> Node:
        if ref.kind == RefKind.NAME:
            return ref
        old = ref_box(ref, host)
        new = self.move_box(old)
        if new is None:
            return ErrorLiteral("#REF!")
        if grow:
            new = with_span(new, axis, lo(new, axis), hi(new, axis) + grow)
        if new == old and new_host[:2] == host[:2]:
            return ref
        return rebuild(ref, old, new, host, new_host)

    def rewrite(self, ast: Node, host: Host, new_host: Host) -> Node:
        return map_references(ast, lambda ref: self.rewrite_reference(ref, host, new_host))


class LineInsert(GridEdit):
    """`count` whole rows (columns) inserted before line `at`."""

    def __init__(self, workbook: str, sheet: str, axis: GroupAxis, at: int, count: int):
        self.workbook, self.sheet, self.axis, self.at, self.count = workbook, sheet, axis, at, count

    def describe(self) -> Dict:
        return {"insert": self.axis.value, "sheet": self.sheet, "at": self.at, "count": self.count}

    def relocates(self, workbook: str, sheet: str) -> bool:
        return (fold(workbook), fold(sheet)) == (fold(self.workbook), fold(self.sheet))

    def shift(self, index: int) -> int:
        return index + self.count if index >= self.at else index

    def move_box(self, box: Box) -> Optional[Box]:
        if not same_sheet(box, self.workbook, self.sheet):
            return box
        return with_span(box, self.axis, self.shift(lo(box, self.axis)), self.shift(hi(box, self.axis)))

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        if not self.relocates(workbook, sheet):
            return (workbook, sheet, row, col)
        if self.axis == GroupAxis.ROW:
            return (workbook, sheet, self.shift(row), col)
        return (workbook, sheet, row, self.shift(col))


class LineDelete(GridEdit):
    """`count` whole rows (columns) removed starting at line `at`."""

    def __init__(self, workbook: str, sheet: str, axis: GroupAxis, at: int, count: int):
        self.workbook, self.sheet, self.axis, self.at, self.count = workbook, sheet, axis, at, count

    @property
    def last(self) -> int:
        return self.at + self.count - 1

    def describe(self) -> Dict:
        return {"delete": self.axis.value, "sheet": self.sheet, "at": self.at, "count": self.count}

    def relocates(self, workbook: str, sheet: str) -> bool:
        return (fold(workbook), fold(sheet)) == (fold(self.workbook), fold(self.sheet))

    def span(self, first: int, last: int) -> Optional[Tuple[int, int]]:
        if self.at <= first and last <= self.last:
            return None
        if first < self.at:
            new_first = first
        elif first <= self.last:
            new_first = self.at
        else:
            new_first = first - self.count
        if last < self.at:
            new_last = last
        elif last <= self.last:
            new_last = self.at - 1
        else:
            new_last = last - self.count
        return new_first, new_last

    def move_box(self, box: Box) -> Optional[Box]:
        if not same_sheet(box, self.workbook, self.sheet):
            return box
        span = self.span(lo(box, self.axis), hi(box, self.axis))
        return None if span is None else with_span(box, self.axis, *span)

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        if not self.relocates(workbook, sheet):
            return (workbook, sheet, row, col)
        line = line_of(row, col, self.axis)
        if self.at <= line <= self.last:
            return None
        if line > self.last:
            line -= self.count
        return (workbook, sheet, line, col) if self.axis == GroupAxis.ROW else (workbook, sheet, row, line)


class LineMove(GridEdit):
    """Cut `count` lines at `start` and insert them so the first lands on line `dest`.

    References wholly inside the moved lines follow them; everything else sees
    a delete followed by an insert.
    """

    def __init__(self, workbook: str, sheet: str, axis: GroupAxis, start: int, count: int, dest: int):
        self.workbook, self.sheet, self.axis = workbook, sheet, axis
        self.start, self.count, self.dest = start, count, dest
        self.removal = LineDelete(workbook, sheet, axis, start, count)
        self.insertion = LineInsert(workbook, sheet, axis, dest, count)

    def describe(self) -> Dict:
        return {"move": self.axis.value, "sheet": self.sheet, "from": self.start, "count": self.count,
                "to": self.dest}

    def relocates(self, workbook: str, sheet: str) -> bool:
        return self.removal.relocates(workbook, sheet)

    def _moving(self, first: int, last: int) -> bool:
        return self.start <= first and last <= self.start + self.count - 1

    def move_box(self, box: Box) -> Optional[Box]:
        if not same_sheet(box, self.workbook, self.sheet):
            return box
        first, last = lo(box, self.axis), hi(box, self.axis)
        if self._moving(first, last):
            delta = self.dest - self.start
            return with_span(box, self.axis, first + delta, last + delta)
        shrunk = self.removal.move_box(box)
        return None if shrunk is None else self.insertion.move_box(shrunk)

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        if not self.relocates(workbook, sheet):
            return (workbook, sheet, row, col)
        line = line_of(row, col, self.axis)
        if self._moving(line, line):
            line += self.dest - self.start
            return (workbook, sheet, line, col) if self.axis == GroupAxis.ROW else (workbook, sheet, row, line)
        gone = self.removal.move_cell(workbook, sheet, row, col)
        return self.insertion.move_cell(*gone)


class BlockMove(GridEdit):
    """Cut-paste of a rectangle; whatever sat under the destination is overwritten."""

    def __init__(self, source: Box, workbook: str, sheet: str, row: int, col: int):
        self.source = source
        self.delta = (row - source.top, col - source.left)
        self.target = Box(workbook, sheet, row, col,
                          row + source.bottom - source.top, col + source.right - source.left)
        if self.target.bottom > MAX_ROW or self.target.right > MAX_COL:
            raise ReferenceOutOfGridError(f"destination {self.target.extent().label()} leaves the grid")

    def describe(self) -> Dict:
        return {"from": self.source.extent().label(), "to": self.target.extent().label()}

    def relocates(self, workbook: str, sheet: str) -> bool:
        key = (fold(workbook), fold(sheet))
        return key in (self.source.sheet_key(), self.target.sheet_key())

    def _inside(self, outer: Box, box: Box) -> bool:
        return (box.sheet_key() == outer.sheet_key()
                and outer.top <= box.top and box.bottom <= outer.bottom
                and outer.left <= box.left and box.right <= outer.right)

    def move_box(self, box: Box) -> Optional[Box]:
        if self._inside(self.source, box):
            dr, dc = self.delta
            return Box(self.target.workbook, self.target.sheet,
                       box.top + dr, box.left + dc, box.bottom + dr, box.right + dc)
        if self._inside(self.target, box):
            return None
        return box

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        here = Box(workbook, sheet, row, col, row, col)
        moved = self.move_box(here)
        if moved is None:
            return None
        return (moved.workbook, moved.sheet, moved.top, moved.left)


class GroupLineInsert(LineInsert):
    """Whole-line insert that also stretches aggregate ranges ending at a member's last line.

    A range argument stretches when it ends exactly on the member's last line,
    starts at or before its first line, crosses its columns (rows) and is read
    from outside the member's lines. Parallel range arguments of the same
    call stretch with it.
    """

    def __init__(self, workbook: str, sheet: str, axis: GroupAxis, at: int, count: int,
                 members: List[Tuple[AreaExtent, int]]):
        super().__init__(workbook, sheet, axis, at, count)
        self.members = members
        self.extended: List[str] = []

    def _triggers(self, box: Box, member: AreaExtent) -> bool:
        axis = self.axis
        return (box.sheet_key() == member.sheet_key()
                and hi(box, axis) == hi(member, axis) and lo(box, axis) <= lo(member, axis)
                and cross_lo(box, axis) <= cross_hi(member, axis)
                and cross_lo(member, axis) <= cross_hi(box, axis))

    def rewrite(self, ast: Node, host: Host, new_host: Host) -> Node:
        axis = self.axis
        grow: Dict[int, int] = {}
        host_line = line_of(host[2], host[3], axis)
        for node in walk(ast):
            if not isinstance(node, FunctionCall):
                continue
            ranges = [(a, ref_box(a, host)) for a in node.args
                      if isinstance(a, Reference) and a.kind == RefKind.RANGE]
            for member, amount in self.members:
                on_member_lines = ((fold(host[0]), fold(host[1])) == member.sheet_key()
                                   and lo(member, axis) <= host_line <= hi(member, axis))
                if on_member_lines:
                    continue
                for ref, box in ranges:
                    if not self._triggers(box, member):
                        continue
                    for other, other_box in ranges:
                        parallel = (other_box.sheet_key() == box.sheet_key()
                                    and lo(other_box, axis) == lo(box, axis)
                                    and hi(other_box, axis) == hi(box, axis))
                        if (other is ref or parallel) and id(other) not in grow:
                            grow[id(other)] = amount

        if not grow:
            return super().rewrite(ast, host, new_host)

        def stretch(ref: Reference) -> Node:
            amount = grow.get(id(ref), 0)
            new = self.rewrite_reference(ref, host, new_host, grow=amount, axis=axis)
            if amount and isinstance(new, Reference):
                self.extended.append(render(new, equals=False))
            return new

        return map_references(ast, stretch)


# --- applying an edit to a workbook set ---

def rewrite_formula(source: str, edit: GridEdit, host: Host, new_host: Optional[Host]) -> str:
    try:
        ast = parse_cached(source)
    except FormulaSyntaxError:
        return source
    new_ast = edit.rewrite(ast, host, new_host or host)
    if new_ast == ast:
        return source
    return render(new_ast)


def apply_edit(workbooks: WorkbookSet, edit: GridEdit) -> None:
    """Relocate cells, rewrite every formula and every name of the set."""
    placed: List[Tuple[Host, CellContent]] = []
    for wb in workbooks.workbooks.values():
        for sheet in wb.sheets.values():
            relocating = edit.relocates(wb.id, sheet.name)
            for (row, col), content in sorted(sheet.cells.items()):
                host = (wb.id, sheet.name, row, col)
                target = edit.move_cell(*host) if relocating else host
                if content.is_formula:
                    content = CellContent.of_formula(rewrite_formula(content.formula, edit, host, target))
                if not relocating:
                    sheet.cells[(row, col)] = content
                elif target is not None:
                    placed.append((target, content))
            if relocating:
                sheet.cells = {}
    for (workbook, sheet, row, col), content in placed:
        workbooks.workbook(workbook).ensure_sheet(sheet).put(row, col, content)

    for wb in workbooks.workbooks.values():
        kept: List[NameDef] = []
        for name in wb.names:
            moved = edit.move_box(box_of(name.target))
            if moved is None:
                log.warn(f"name {name.name} lost its cells and was removed")
                continue
            kept.append(NameDef(name=name.name, target=moved.extent()))
        wb.names = sorted(kept, key=lambda n: fold(n.name))


def move_extent(edit: GridEdit, extent: AreaExtent) -> Optional[AreaExtent]:
    moved = edit.move_box(box_of(extent))
    return None if moved is None else moved.extent()


class Replication(GridEdit):
    """Copies of a set of areas, each placed by its own shift, possibly onto another sheet.

    A reference wholly inside copied areas that share one shift moves with the
    copy whatever its dollaring; all others keep pointing at the original cells.
    """

    def __init__(self, placements: List[Tuple[AreaExtent, AreaExtent]]):
        self.placements = placements

    def relocates(self, workbook: str, sheet: str) -> bool:
        return False

    def _shift(self, source: AreaExtent, target: AreaExtent) -> Tuple[str, str, int, int]:
        return (target.workbook, target.sheet, target.top - source.top, target.left - source.left)

    def _covering_shift(self, box: Box) -> Optional[Tuple[str, str, int, int]]:
        size = (box.bottom - box.top + 1) * (box.right - box.left + 1)
        inside = 0
        shifts = set()
        for source, target in self.placements:
            if source.sheet_key() != box.sheet_key():
                continue
            height = min(box.bottom, source.bottom) - max(box.top, source.top) + 1
            width = min(box.right, source.right) - max(box.left, source.left) + 1
            if height > 0 and width > 0:
                inside += height * width
                shifts.add(self._shift(source, target))
        return shifts.pop() if inside == size and len(shifts) == 1 else None

    def move_box(self, box: Box) -> Optional[Box]:
        shift = self._covering_shift(box)
        if shift is None:
            return box
        workbook, sheet, rows, cols = shift
        return Box(workbook, sheet, box.top + rows, box.left + cols, box.bottom + rows, box.right + cols)

    def move_cell(self, workbook: str, sheet: str, row: int, col: int) -> Optional[Host]:
        for source, target in self.placements:
            if source.sheet_key() == (fold(workbook), fold(sheet)) and \
                    source.top <= row <= source.bottom and source.left <= col <= source.right:
                target_wb, target_sheet, rows, cols = self._shift(source, target)
                return (target_wb, target_sheet, row + rows, col + cols)
        return (workbook, sheet, row, col)
