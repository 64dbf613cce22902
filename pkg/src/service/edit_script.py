"""Edit scripts: one command per line, replayed in order.

    SET Costs!E5 := 24
    FILL Costs!H7 -> Costs!H8:I8
    MOVE Costs!G2:G8 -> Costs!J2
    INSERT-BELOW group=CardRows row=7 count=1
    REPLICATE entries=e12,e13 -> Costs2!B2
    FIX e9 reject
    RAW-MOVE-COLS Costs col=G -> J
"""
import re
from typing import Dict, List, Optional, Tuple

from core import log
from core.config import Settings
from core.errors import EditScriptError, ModeError, SleuthError, SwtFormatError
from models.edit import SLEUTH_VERBS, CommandVerb, EditCommand, EditResult
from models.grid import AreaExtent, CellAddr, WorkbookSet
from models.watch import GroupAxis, Mode, Registry
from service.notation import parse_cell, parse_column, parse_extent
from service.structural_service import StructuralService
from service.workbook_io import parse_payload

_SHEET = r"((?:\[[^\]]+\])?(?:'(?:[^']|'')+'|[^\s'!]+))"
_ADDR = r"((?:\[[^\]]+\])?(?:'(?:[^']|'')+'|[^\s'!]+)!\S+|\S+)"

_PATTERNS: Dict[CommandVerb, re.Pattern] = {
    CommandVerb.SET: re.compile(r"^SET\s+" + _ADDR + r"\s*:=\s*(.*)$", re.IGNORECASE),
    CommandVerb.CLEAR: re.compile(r"^CLEAR\s+" + _ADDR + r"\s*$", re.IGNORECASE),
    CommandVerb.FILL: re.compile(r"^FILL\s+" + _ADDR + r"\s*->\s*" + _ADDR + r"\s*$", re.IGNORECASE),
    CommandVerb.MOVE: re.compile(r"^MOVE\s+" + _ADDR + r"\s*->\s*" + _ADDR + r"\s*$", re.IGNORECASE),
    CommandVerb.REPLICATE: re.compile(r"^REPLICATE\s+entries=(\S+)\s*->\s*" + _ADDR + r"\s*$", re.IGNORECASE),
    CommandVerb.FIX: re.compile(r"^FIX\s+(\S+)\s+(accept|reject)\s*$", re.IGNORECASE),
    CommandVerb.RAW_MOVE: re.compile(r"^RAW-MOVE\s+" + _ADDR + r"\s*->\s*" + _ADDR + r"\s*$", re.IGNORECASE),
    CommandVerb.RAW_MOVE_COLS: re.compile(r"^RAW-MOVE-COLS\s+" + _SHEET + r"\s+col=(\S+)\s*->\s*(\S+)\s*$",
                                          re.IGNORECASE),
    CommandVerb.RAW_MOVE_ROWS: re.compile(r"^RAW-MOVE-ROWS\s+" + _SHEET + r"\s+row=(\S+)\s*->\s*(\S+)\s*$",
                                          re.IGNORECASE),
}

_GROUP_VERBS = {
    CommandVerb.INSERT_BELOW: GroupAxis.ROW,
    CommandVerb.INSERT_RIGHT: GroupAxis.COLUMN,
    CommandVerb.DELETE_ROWS: GroupAxis.ROW,
    CommandVerb.DELETE_COLS: GroupAxis.COLUMN,
}

_RAW_LINE_VERBS = {
    CommandVerb.RAW_INSERT_ROWS: GroupAxis.ROW,
    CommandVerb.RAW_INSERT_COLS: GroupAxis.COLUMN,
    CommandVerb.RAW_DELETE_ROWS: GroupAxis.ROW,
    CommandVerb.RAW_DELETE_COLS: GroupAxis.COLUMN,
}


def _options(text: str, line: int) -> Dict[str, str]:
    options = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise EditScriptError(line, f"expected key=value, got {token!r}")
        options[key.lower()] = value
    return options


def _positive(options: Dict[str, str], key: str, line: int, column: bool = False, default: Optional[int] = None) -> int:
    raw = options.get(key)
    if raw is None:
        if default is None:
            raise EditScriptError(line, f"missing {key}=")
        return default
    try:
        value = parse_column(raw) if column else int(raw)
    except (SleuthError, ValueError):
        raise EditScriptError(line, f"bad {key}={raw!r}") from None
    if value < 1:
        raise EditScriptError(line, f"{key} must be positive")
    return value


def _line_span(text: str, axis: GroupAxis, line: int) -> Tuple[int, int]:
    """`G` or `G:H` for columns, `7` or `7:8` for rows -> (first, count)."""
    first, _, last = text.partition(":")
    key = "col" if axis == GroupAxis.COLUMN else "row"
    start = _positive({key: first}, key, line, column=axis == GroupAxis.COLUMN)
    end = _positive({key: last or first}, key, line, column=axis == GroupAxis.COLUMN)
    if end < start:
        raise EditScriptError(line, f"{key} span {text!r} runs backwards")
    return start, end - start + 1


def parse_command(text: str, line: int = 0) -> EditCommand:
    stripped = text.strip()
    head = stripped.split(None, 1)[0].upper() if stripped else ""
    try:
        verb = CommandVerb(head)
    except ValueError:
        raise EditScriptError(line, f"unknown command {head or stripped!r}", stripped) from None

    params: Dict = {}
    if verb in _GROUP_VERBS:
        axis = _GROUP_VERBS[verb]
        options = _options(stripped.split(None, 1)[1] if " " in stripped else "", line)
        if "group" not in options:
            raise EditScriptError(line, "missing group=", stripped)
        key = "row" if axis == GroupAxis.ROW else "col"
        params = dict(group=options["group"], axis=axis,
                      index=_positive(options, key, line, column=axis == GroupAxis.COLUMN),
                      count=_positive(options, "count", line, default=1))
    elif verb in _RAW_LINE_VERBS:
        axis = _RAW_LINE_VERBS[verb]
        m = re.match(r"^\S+\s+" + _SHEET + r"\s+(.*)$", stripped)
        if not m:
            raise EditScriptError(line, "expected a sheet and options", stripped)
        options = _options(m.group(2), line)
        key = "row" if axis == GroupAxis.ROW else "col"
        params = dict(sheet=m.group(1), axis=axis,
                      index=_positive(options, key, line, column=axis == GroupAxis.COLUMN),
                      count=_positive(options, "count", line, default=1))
    else:
        m = _PATTERNS[verb].match(stripped)
        if not m:
            raise EditScriptError(line, f"malformed {verb.value} command", stripped)
        groups = m.groups()
        if verb == CommandVerb.SET:
            try:
                content = parse_payload(groups[1].strip(), line)
            except SwtFormatError as e:
                raise EditScriptError(line, str(e), stripped) from None
            params = dict(cell=groups[0], content=content)
        elif verb == CommandVerb.CLEAR:
            params = dict(area=groups[0])
        elif verb in (CommandVerb.FILL, CommandVerb.MOVE, CommandVerb.RAW_MOVE):
            params = dict(source=groups[0], target=groups[1])
        elif verb == CommandVerb.REPLICATE:
            params = dict(entries=[i for i in groups[0].split(",") if i], target=groups[1])
        elif verb == CommandVerb.FIX:
            params = dict(entry=groups[0], accept=groups[1].lower() == "accept")
        else:
            axis = GroupAxis.COLUMN if verb == CommandVerb.RAW_MOVE_COLS else GroupAxis.ROW
            start, count = _line_span(groups[1], axis, line)
            dest, _ = _line_span(groups[2], axis, line)
            params = dict(sheet=groups[0], axis=axis, index=start, count=count, dest=dest)
    return EditCommand(verb=verb, line=line, text=stripped, params=params)


def parse_script(text: str) -> List[EditCommand]:
    commands = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        commands.append(parse_command(line, number))
    return commands


class EditScriptRunner:
    def __init__(self, settings: Settings, structural: Optional[StructuralService] = None):
        self.settings = settings
        self.structural = structural or StructuralService(settings)

    def _sheet(self, workbooks: WorkbookSet, text: str) -> Tuple[str, str]:
        workbook = workbooks.default_id
        if text.startswith("["):
            workbook, _, text = text[1:].partition("]")
        if text.startswith("'"):
            text = text[1:-1].replace("''", "'")
        wb = workbooks.workbook(workbook)
        return wb.id, wb.sheet(text).name

    def _extent(self, workbooks: WorkbookSet, text: str, default_sheet: Optional[str] = None) -> AreaExtent:
        return parse_extent(text, workbooks.default_id, default_sheet)

    def _cell(self, workbooks: WorkbookSet, text: str, default_sheet: Optional[str] = None) -> CellAddr:
        return parse_cell(text, workbooks.default_id, default_sheet)

    def run_command(self, workbooks: WorkbookSet, reg: Registry, command: EditCommand) -> EditResult:
        if reg.mode == Mode.OPERATIONAL and command.verb in SLEUTH_VERBS:
            raise ModeError(f"line {command.line}: {command.verb.value} is not available in Operational mode")
        p = command.params
        verb = command.verb
        s = self.structural
        if verb == CommandVerb.SET:
            return s.set_cell(workbooks, reg, self._cell(workbooks, p["cell"]), p["content"])
        if verb == CommandVerb.CLEAR:
            return s.clear(workbooks, reg, self._extent(workbooks, p["area"]))
        if verb == CommandVerb.FILL:
            source = self._cell(workbooks, p["source"])
            return s.fill(workbooks, reg, source, self._extent(workbooks, p["target"], source.sheet))
        if verb == CommandVerb.MOVE:
            source = self._extent(workbooks, p["source"])
            return s.move_area(workbooks, reg, source, self._cell(workbooks, p["target"], source.sheet))
        if verb == CommandVerb.RAW_MOVE:
            source = self._extent(workbooks, p["source"])
            return s.raw_move_block(workbooks, reg, source, self._cell(workbooks, p["target"], source.sheet))
        if verb == CommandVerb.REPLICATE:
            return s.replicate(workbooks, reg, p["entries"], self._cell(workbooks, p["target"]))
        if verb == CommandVerb.FIX:
            return s.fix_area(workbooks, reg, p["entry"], p["accept"])
        if verb in (CommandVerb.INSERT_BELOW, CommandVerb.INSERT_RIGHT):
            return s.insert_in_group(workbooks, reg, p["group"], p["axis"], p["index"], p["count"])
        if verb in (CommandVerb.DELETE_ROWS, CommandVerb.DELETE_COLS):
            return s.delete_in_group(workbooks, reg, p["group"], p["axis"], p["index"], p["count"])

        workbook, sheet = self._sheet(workbooks, p["sheet"])
        if verb in (CommandVerb.RAW_INSERT_ROWS, CommandVerb.RAW_INSERT_COLS):
            return s.raw_insert(workbooks, reg, workbook, sheet, p["axis"], p["index"], p["count"])
        if verb in (CommandVerb.RAW_DELETE_ROWS, CommandVerb.RAW_DELETE_COLS):
            return s.raw_delete(workbooks, reg, workbook, sheet, p["axis"], p["index"], p["count"])
        return s.raw_move_lines(workbooks, reg, workbook, sheet, p["axis"], p["index"], p["dest"], p["count"])

    def apply(self, workbooks: WorkbookSet, reg: Registry, commands: List[EditCommand]) -> EditResult:
        """Run commands in order; the first failure abandons the whole script."""
        result = EditResult(workbooks=workbooks, registry=reg)
        for command in commands:
            try:
                step = self.run_command(result.workbooks, result.registry, command)
            except (EditScriptError, ModeError):
                raise
            except (SleuthError, ValueError) as e:
                raise EditScriptError(command.line, str(e), command.text) from e
            log.info(f"line {command.line}: {command.verb.value}")
            result = EditResult(
                workbooks=step.workbooks,
                registry=step.registry,
                findings=result.findings + step.findings,
                events=result.events + step.events,
            )
        return result

    def apply_text(self, workbooks: WorkbookSet, reg: Registry, text: str) -> EditResult:
        return self.apply(workbooks, reg, parse_script(text))
