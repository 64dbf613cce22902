from typing import Iterator, List, NamedTuple, Optional, Tuple, Union

from core.errors import FormulaSyntaxError, ReferenceOutOfGridError, UnknownNameError
from models.formula import ErrorLiteral, GenericFormula, Node, RefKind, Reference
from models.grid import AreaExtent, WorkbookSet, fold
from service.formula_parser import parse_cached, walk
from service.notation import expand_generic
from service.workbook_io import resolve_name

Term = Union[Reference, ErrorLiteral]


class Box(NamedTuple):
    """A concrete rectangle a reference reads."""
    workbook: str
    sheet: str
    top: int
    left: int
    bottom: int
    right: int

    def sheet_key(self) -> Tuple[str, str]:
        return (fold(self.workbook), fold(self.sheet))

    def cells(self) -> Iterator[Tuple[int, int]]:
        for row in range(self.top, self.bottom + 1):
            for col in range(self.left, self.right + 1):
                yield row, col

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right

    def extent(self) -> AreaExtent:
        return AreaExtent.of(self.workbook, self.sheet, self.top, self.left, self.bottom, self.right)

    def intersects(self, extent: AreaExtent) -> bool:
        return (self.sheet_key() == extent.sheet_key()
                and self.top <= extent.bottom and extent.top <= self.bottom
                and self.left <= extent.right and extent.left <= self.right)


def box_of(extent: AreaExtent) -> Box:
    return Box(extent.workbook, extent.sheet, extent.top, extent.left, extent.bottom, extent.right)


def terms(ast: Node) -> List[Term]:
    """References plus `#REF!` literals, in source order."""
    return [n for n in walk(ast)
            if isinstance(n, Reference) or (isinstance(n, ErrorLiteral) and n.code == "#REF!")]


def resolve(ref: Reference, workbook: str, sheet: str, workbooks: WorkbookSet) -> Optional[Box]:
    """Concrete rectangle of an A1 reference written on `workbook`/`sheet`.

    None when it points at a missing workbook, sheet or name.
    """
    target_wb = ref.workbook or workbook
    if not workbooks.has_workbook(target_wb):
        return None
    wb = workbooks.workbook(target_wb)
    if ref.kind == RefKind.NAME:
        try:
            return box_of(resolve_name(wb, ref.name))
        except UnknownNameError:
            return None
    target_sheet = ref.sheet or sheet
    if not wb.has_sheet(target_sheet):
        return None
    end = ref.end or ref.start
    return Box(wb.id, wb.sheet(target_sheet).name,
               min(ref.start.row, end.row), min(ref.start.col, end.col),
               max(ref.start.row, end.row), max(ref.start.col, end.col))


def expanded_terms(generic: GenericFormula, row: int, col: int) -> Optional[List[Term]]:
    """Terms of the generic placed at (row, col); None when it falls off the grid."""
    try:
        return terms(expand_generic(generic.r1c1_text, row, col))
    except ReferenceOutOfGridError:
        return None


def formula_boxes(source: str, workbook: str, sheet: str, workbooks: WorkbookSet) -> List[Box]:
    """Resolvable rectangles read by a raw A1 formula; unparseable formulas read nothing."""
    try:
        ast = parse_cached(source)
    except FormulaSyntaxError:
        return []
    boxes = []
    for ref in terms(ast):
        if isinstance(ref, Reference):
            box = resolve(ref, workbook, sheet, workbooks)
            if box is not None:
                boxes.append(box)
    return boxes
