from typing import List

from models.formula import (
    Boolean, Coord, ErrorLiteral, FunctionCall, Node, Number, RefKind, Reference, Text, TraceRow,
)
from service.formula_parser import format_number, render_reference, walk


def _dollaring(coords: List[Coord]) -> str:
    flags = [flag for c in coords for flag in (c.row_abs, c.col_abs)]
    if all(flags):
        return "Absolute"
    if not any(flags):
        return "Relative"
    return "Mixed"


def reference_type(ref: Reference) -> str:
    """Label like `Off Sheet Relative Single Cell` or `Mixed Range`."""
    if ref.kind == RefKind.NAME:
        label = "Name"
    else:
        shape = "Single Cell" if ref.kind == RefKind.CELL else "Range"
        label = f"{_dollaring(list(ref.endpoints))} {shape}"
    if ref.workbook is not None:
        return f"Linked Workbook {label}"
    if ref.sheet is not None:
        return f"Off Sheet {label}"
    return label


def _depths(source: str) -> List[int]:
    """Bracket depth at every character offset; quoted text is skipped."""
    depths = []
    depth = 0
    in_string = False
    for ch in source:
        depths.append(depth)
        if ch == '"':
            in_string = not in_string
        elif not in_string:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
    depths.append(depth)
    return depths


def breakdown(ast: Node, source: str) -> List[TraceRow]:
    depths = _depths(source)
    rows: List[TraceRow] = []
    for node in walk(ast):
        if isinstance(node, FunctionCall):
            ref_type = "Worksheet Function"
        elif isinstance(node, Reference):
            ref_type = reference_type(node)
        elif isinstance(node, Number):
            ref_type = "Number"
        elif isinstance(node, Text):
            ref_type = "Text"
        elif isinstance(node, Boolean):
            ref_type = "Boolean"
        elif isinstance(node, ErrorLiteral):
            ref_type = "Error Value"
        else:
            continue
        start, end = node.span
        value = source[start:end] if end > start else _fallback_text(node)
        rows.append(TraceRow(ref_type=ref_type, value_text=value,
                             nesting_level=depths[min(start, len(source))], span=(start, end)))
    return rows


def _fallback_text(node: Node) -> str:
    if isinstance(node, Reference):
        return render_reference(node)
    if isinstance(node, Number):
        return format_number(node.value)
    if isinstance(node, FunctionCall):
        return node.name
    if isinstance(node, Text):
        return node.value
    if isinstance(node, Boolean):
        return "TRUE" if node.value else "FALSE"
    return node.code
