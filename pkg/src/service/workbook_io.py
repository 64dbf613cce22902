import csv
import math
import os
import re
from pathlib import Path
from typing import List, Tuple, Union

from core import log
from core.errors import (
    DuplicateCellError, SheetExistsError, SleuthError, SwtFormatError, UnknownNameError,
)
from models.grid import (
    MAX_COL, MAX_ROW, AreaExtent, CellContent, CellKind, Workbook, WorkbookSet, column_index,
    column_letters, fold, quote_sheet,
)
from service.formula_parser import format_number
from service.notation import parse_extent

SWT_SUFFIX = ".swt"

_SHEET_PART = r"('(?:[^']|'')+'|[^!'\s]+)"
_CELL_RECORD = re.compile(r"^" + _SHEET_PART + r"!\$?([A-Za-z]{1,3})\$?(\d+)\s*:=\s*(.*)$")
_SHEET_RECORD = re.compile(r"^@sheet\s+(.+?)\s*$")
_NAME_RECORD = re.compile(r"^@name\s+([A-Za-z_][A-Za-z0-9_.]*)\s*:=\s*(.+?)\s*$")
# str.splitlines() breaks on all of these
_LINE_BREAKS = "\n\r\x0b\x0c\x1c\x1d\x1e\x85\u2028\u2029"
_TEXT_ESCAPE = re.compile(r"\\(\\|n|r|u[0-9a-fA-F]{4})")


def _unquote_sheet(text: str) -> str:
    if text.startswith("'"):
        return text[1:-1].replace("''", "'")
    return text


def _escape_text(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch in _LINE_BREAKS:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def _unescape_text(text: str) -> str:
    def expand(m: re.Match) -> str:
        code = m.group(1)
        if code == "n":
            return "\n"
        if code == "r":
            return "\r"
        if code == "\\":
            return "\\"
        return chr(int(code[1:], 16))

    return _TEXT_ESCAPE.sub(expand, text)


def parse_payload(payload: str, line: int) -> CellContent:
    if payload.startswith("="):
        return CellContent.of_formula(payload)
    if payload.startswith('"'):
        if len(payload) < 2 or not payload.endswith('"'):
            raise SwtFormatError(line, "unterminated string payload")
        body = payload[1:-1]
        if '"' in body.replace('""', ""):
            raise SwtFormatError(line, "unescaped quote in string payload")
        return CellContent.of_text(_unescape_text(body.replace('""', '"')))
    try:
        value = float(payload)
    except ValueError:
        raise SwtFormatError(line, f"payload {payload!r} is not a number, string or formula") from None
    if not math.isfinite(value):
        raise SwtFormatError(line, f"non-finite number {payload!r}")
    return CellContent.of_number(value)


def parse_swt(text: str, workbook_id: str) -> Workbook:
    wb = Workbook(id=workbook_id)
    seen = set()
    pending_names: List[Tuple[int, str, str]] = []

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        m = _SHEET_RECORD.match(line)
        if m:
            name = _unquote_sheet(m.group(1))
            if wb.has_sheet(name):
                raise SwtFormatError(number, f"sheet {name!r} declared twice")
            wb.add_sheet(name)
            continue

        m = _NAME_RECORD.match(line)
        if m:
            pending_names.append((number, m.group(1), m.group(2)))
            continue

        m = _CELL_RECORD.match(line)
        if not m:
            raise SwtFormatError(number, f"malformed record: {line!r}")
        sheet_name = _unquote_sheet(m.group(1))
        try:
            col = column_index(m.group(2))
        except ValueError:
            raise SwtFormatError(number, f"bad column {m.group(2)!r}") from None
        row = int(m.group(3))
        if not (1 <= row <= MAX_ROW and col <= MAX_COL):
            raise SwtFormatError(number, f"cell {m.group(2)}{row} is outside the grid")
        key = (fold(sheet_name), row, col)
        if key in seen:
            raise DuplicateCellError(number, f"cell {sheet_name}!{m.group(2).upper()}{row} defined twice")
        seen.add(key)
        content = parse_payload(m.group(4).strip(), number)
        wb.ensure_sheet(sheet_name).put(row, col, content)

    for number, name, target in pending_names:
        if any(fold(n.name) == fold(name) for n in wb.names):
            raise SwtFormatError(number, f"name {name!r} defined twice")
        try:
            extent = parse_extent(target, workbook_id)
        except (SleuthError, ValueError) as e:
            raise SwtFormatError(number, f"bad name target {target!r}: {e}") from None
        wb.set_name(name, extent)
    return wb


def dump_swt(wb: Workbook) -> str:
    lines: List[str] = []
    for sheet in wb.sheets.values():
        lines.append(f"@sheet {quote_sheet(sheet.name)}")
    for name in wb.names:
        lines.append(f"@name {name.name} := {name.target.label()}")
    for sheet in wb.sheets.values():
        prefix = quote_sheet(sheet.name)
        for (row, col) in sheet.sorted_positions():
            content = sheet.cells[(row, col)]
            lines.append(f"{prefix}!{column_letters(col)}{row} := {_render_payload(content)}")
    return "".join(line + "\n" for line in lines)


def _render_payload(content: CellContent) -> str:
    if content.kind == CellKind.NUMBER:
        return format_number(content.number)
    if content.kind == CellKind.TEXT:
        return '"' + _escape_text(content.text).replace('"', '""') + '"'
    return content.formula


def load_workbook(path: Union[str, Path]) -> Workbook:
    path = Path(path)
    return parse_swt(path.read_text(encoding="utf-8"), path.stem)


def save_workbook(wb: Workbook, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_swt(wb), encoding="utf-8")


def load_workbook_set(path: Union[str, Path]) -> WorkbookSet:
    """A directory of `<id>.swt` files, or a single `.swt` file."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == SWT_SUFFIX)
    elif path.exists():
        files = [path]
    else:
        raise FileNotFoundError(f"workbook set not found: {path}")
    workbooks = WorkbookSet()
    for file in files:
        workbooks.add(load_workbook(file))
    log.info(f"Loaded {len(files)} workbook(s) from {path}")
    return workbooks


def save_workbook_set(workbooks: WorkbookSet, path: Union[str, Path]) -> None:
    path = Path(path)
    if path.suffix == SWT_SUFFIX and not path.is_dir():
        if len(workbooks.workbooks) != 1:
            raise SleuthError(f"{path} holds a single workbook but the set has {len(workbooks.workbooks)}")
        save_workbook(next(iter(workbooks.workbooks.values())), path)
        return
    os.makedirs(path, exist_ok=True)
    for wb in workbooks.workbooks.values():
        save_workbook(wb, path / f"{wb.id}{SWT_SUFFIX}")


def _csv_field(field: str) -> CellContent:
    if field.startswith("="):
        return CellContent.of_formula(field)
    try:
        value = float(field)
    except ValueError:
        return CellContent.of_text(field)
    if not math.isfinite(value):
        return CellContent.of_text(field)
    return CellContent.of_number(value)


def ingest_csv(path: Union[str, Path], sheet: str, wb: Workbook) -> Workbook:
    if wb.has_sheet(sheet):
        raise SheetExistsError(f"sheet {sheet!r} already exists in workbook {wb.id!r}")
    target = wb.add_sheet(sheet)
    with open(path, newline="", encoding="utf-8") as f:
        for row, fields in enumerate(csv.reader(f), start=1):
            for col, field in enumerate(fields, start=1):
                if field == "":
                    continue
                target.put(row, col, _csv_field(field))
    log.info(f"Ingested {path} into {wb.id}!{sheet} ({len(target.cells)} cells)")
    return wb


def resolve_name(wb: Workbook, name: str) -> AreaExtent:
    for definition in wb.names:
        if fold(definition.name) == fold(name):
            return definition.target
    raise UnknownNameError(f"workbook {wb.id!r} defines no name {name!r}")
