from dataclasses import replace
from functools import lru_cache
from typing import Optional, Tuple, Union

from core.errors import FormulaSyntaxError, ReferenceOutOfGridError, SleuthError
from models.formula import Coord, Node, Notation, RefKind, Reference
from models.grid import MAX_COL, MAX_ROW, AreaExtent, CellAddr, column_index
from service.formula_parser import map_references, parse, parse_cached, render

Anchor = Union[CellAddr, Tuple[int, int]]


def _anchor(anchor: Anchor) -> Tuple[int, int]:
    if isinstance(anchor, CellAddr):
        return anchor.row, anchor.col
    return anchor


def _to_offsets(coord: Coord, row: int, col: int) -> Coord:
    return Coord(
        row=coord.row if coord.row_abs else coord.row - row,
        col=coord.col if coord.col_abs else coord.col - col,
        row_abs=coord.row_abs,
        col_abs=coord.col_abs,
    )


def _to_indices(coord: Coord, row: int, col: int) -> Coord:
    new_row = coord.row if coord.row_abs else row + coord.row
    new_col = coord.col if coord.col_abs else col + coord.col
    if not (1 <= new_row <= MAX_ROW and 1 <= new_col <= MAX_COL):
        raise ReferenceOutOfGridError(f"reference resolves to row {new_row}, column {new_col} at R{row}C{col}")
    return Coord(row=new_row, col=new_col, row_abs=coord.row_abs, col_abs=coord.col_abs)


def a1_to_r1c1(ast: Node, anchor: Anchor) -> Node:
    row, col = _anchor(anchor)

    def convert(ref: Reference) -> Reference:
        if ref.notation == Notation.R1C1:
            return ref
        if ref.kind == RefKind.NAME:
            return replace(ref, notation=Notation.R1C1)
        return replace(
            ref,
            notation=Notation.R1C1,
            start=_to_offsets(ref.start, row, col),
            end=_to_offsets(ref.end, row, col) if ref.end is not None else None,
        )

    return map_references(ast, convert)


def r1c1_to_a1(ast: Node, anchor: Anchor) -> Node:
    row, col = _anchor(anchor)

    def convert(ref: Reference) -> Reference:
        if ref.notation == Notation.A1:
            return ref
        if ref.kind == RefKind.NAME:
            return replace(ref, notation=Notation.A1)
        return replace(
            ref,
            notation=Notation.A1,
            start=_to_indices(ref.start, row, col),
            end=_to_indices(ref.end, row, col) if ref.end is not None else None,
        )

    return map_references(ast, convert)


@lru_cache(maxsize=131072)
def generic_text(a1_source: str, row: int, col: int) -> str:
    """R1C1 text of an A1 formula sitting at (row, col)."""
    return render(a1_to_r1c1(parse_cached(a1_source, Notation.A1), (row, col)))


@lru_cache(maxsize=131072)
def expand_generic(r1c1_text: str, row: int, col: int) -> Node:
    """A1 tree of a generic formula placed at (row, col)."""
    return r1c1_to_a1(parse_cached(r1c1_text, Notation.R1C1), (row, col))


def a1_text(r1c1_text: str, row: int, col: int) -> str:
    return render(expand_generic(r1c1_text, row, col))


# --- addresses typed by users ---

def parse_reference(text: str) -> Reference:
    try:
        node = parse(text.strip(), Notation.A1)
    except FormulaSyntaxError as e:
        raise SleuthError(f"not a cell address: {text!r} ({e})") from None
    if not isinstance(node, Reference) or node.kind == RefKind.NAME:
        raise SleuthError(f"not a cell address: {text!r}")
    return node


def parse_extent(text: str, default_workbook: str, default_sheet: Optional[str] = None) -> AreaExtent:
    """`Sheet!H5:I6`, `[wb]Sheet!$H$5` or, with a default sheet, `H5:I6`."""
    ref = parse_reference(text)
    sheet = ref.sheet or default_sheet
    if sheet is None:
        raise SleuthError(f"address {text!r} needs a sheet qualifier")
    workbook = ref.workbook or default_workbook
    end = ref.end or ref.start
    return AreaExtent.of(
        workbook, sheet,
        min(ref.start.row, end.row), min(ref.start.col, end.col),
        max(ref.start.row, end.row), max(ref.start.col, end.col),
    )


def parse_cell(text: str, default_workbook: str, default_sheet: Optional[str] = None) -> CellAddr:
    extent = parse_extent(text, default_workbook, default_sheet)
    if extent.size != 1:
        raise SleuthError(f"expected a single cell, got {text!r}")
    return extent.top_left


def parse_column(text: str) -> int:
    text = text.strip()
    if text.isdigit():
        return int(text)
    try:
        return column_index(text)
    except ValueError:
        raise SleuthError(f"not a column: {text!r}") from None
