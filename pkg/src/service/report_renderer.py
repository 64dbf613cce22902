import csv
import io
from typing import Dict, List, NamedTuple, Optional, Set, Tuple

from core.errors import FormulaSyntaxError, NotAFormulaError
from models.finding import MESSAGES, SEVERITIES, FindingCode, Report, Severity
from models.formula import TraceRow
from models.grid import AreaExtent, CellAddr, CellContent, CellKind, WorkbookSet, column_letters, fold
from models.watch import Area, EntryKind
from service.breakdown import breakdown
from service.formula_parser import format_number, parse_cached
from service.references import formula_boxes

COLUMNS = ("Date Modified", "Error Found", "Error Indications", "Change Detected", "Location", "Formula String")

# The header legend explains every other code.
_CANONICAL = {
    FindingCode.DAMAGED_FORMULA, FindingCode.INVALID_PRECEDENT,
    FindingCode.DATA_OVER_BLANK, FindingCode.DATA_UNREFERENCED,
}

MATCHING_RULE = ("Dependents match when the cells of an area read by watched formulas "
                 "cover the whole watched extent.")

DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def legend() -> List[str]:
    lines = ["# Additional indications:"]
    for code in FindingCode:
        if code in _CANONICAL:
            continue
        lines.append(f"#   {MESSAGES[code]} {code.value} ({SEVERITIES[code].value})")
    return lines


def footer(report: Report) -> List[str]:
    return [
        f"# {report.error_count} error(s), {report.warning_count} warning(s)",
        f"# {MATCHING_RULE}",
    ]


def _table(rows: List[Tuple[str, ...]]) -> List[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(COLUMNS))]
    out = []
    for n, row in enumerate(rows):
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return out


def render_check_report(report: Report, fmt: str = "table") -> str:
    """The six-column listing; one physical line per indication in table form."""
    if fmt == "delimited":
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in report.rows:
            writer.writerow([row.modified_at.strftime(DATE_FORMAT), row.error_found, " ".join(row.indications),
                             row.change_detected, row.location, row.formula])
        return buffer.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")

    rows: List[Tuple[str, ...]] = [COLUMNS]
    for row in report.rows:
        indications = row.indications or [""]
        rows.append((row.modified_at.strftime(DATE_FORMAT), row.error_found, indications[0],
                     row.change_detected, row.location, row.formula))
        for extra in indications[1:]:
            rows.append(("", "", extra, "", "", ""))
    return "\n".join(legend() + _table(rows) + footer(report)) + "\n"


def render_findings(report: Report) -> str:
    lines = []
    for f in report.findings:
        line = f"{f.severity.value.upper():7} {f.entry_id:6} {f.location.label():24} {f.message}"
        if f.detail:
            line += f"  ({f.detail})"
        if f.fix_hint:
            line += f"  master: {f.fix_hint}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def render_areas(areas: List[Area]) -> str:
    lines = []
    for area in areas:
        label = area.extent.label()
        if area.kind == EntryKind.FORMULA and area.generic is not None:
            lines.append(f"{label}  {area.generic.r1c1_text}")
        else:
            lines.append(f"{label}  ({area.kind.value})")
    return "\n".join(lines) + ("\n" if lines else "")


# --- grid dumps ---

def cell_text(content: CellContent) -> str:
    if content.kind == CellKind.NUMBER:
        return format_number(content.number)
    if content.kind == CellKind.TEXT:
        return content.text
    if content.kind == CellKind.FORMULA:
        return content.formula
    return ""


def render_grid(workbooks: WorkbookSet, workbook: str, sheet: str, top: int, left: int, bottom: int, right: int,
                marks: Optional[Dict[Tuple[int, int], str]] = None) -> str:
    marks = marks or {}
    wb = workbooks.workbook(workbook)
    header = [""] + [column_letters(c) for c in range(left, right + 1)]
    rows = [header]
    for row in range(top, bottom + 1):
        cells = [str(row)]
        for col in range(left, right + 1):
            cells.append(cell_text(wb.get(sheet, row, col)) + marks.get((row, col), ""))
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in rows) + "\n"


def render_context(workbooks: WorkbookSet, extent: AreaExtent, margin: int) -> str:
    """The grid around an extent, its own cells marked with `*`."""
    marks = {pos: "*" for pos in extent.positions()}
    return render_grid(workbooks, extent.workbook, extent.sheet,
                       max(1, extent.top - margin), max(1, extent.left - margin),
                       extent.bottom + margin, extent.right + margin, marks)


def render_error_contexts(workbooks: WorkbookSet, report: Report, margin: int) -> str:
    blocks = []
    seen: Set[AreaExtent] = set()
    for f in report.findings:
        if f.severity != Severity.ERROR or f.location in seen:
            continue
        seen.add(f.location)
        blocks.append(f"{f.location.label()}  {f.message}\n" + render_context(workbooks, f.location, margin))
    return "\n".join(blocks)


def render_annotated(workbooks: WorkbookSet, report: Report, changed: List[AreaExtent]) -> str:
    """Every sheet's used range; `!err` marks cells under Error findings, `~chg` cells of changed entries."""
    marks: Dict[Tuple[str, str, int, int], str] = {}
    for extent in changed:
        for row, col in extent.positions():
            marks[extent.sheet_key() + (row, col)] = "~chg"
    for f in report.findings:
        if f.severity != Severity.ERROR:
            continue
        for row, col in f.location.positions():
            key = f.location.sheet_key() + (row, col)
            marks[key] = "!err" + marks.get(key, "")
    blocks = []
    for wb in workbooks.workbooks.values():
        for sheet in wb.sheets.values():
            sheet_key = (fold(wb.id), fold(sheet.name))
            local = {(k[2], k[3]): v for k, v in marks.items() if k[:2] == sheet_key}
            positions = list(sheet.cells) + list(local)
            if not positions:
                continue
            rows = [p[0] for p in positions]
            cols = [p[1] for p in positions]
            title = f"[{wb.id}]{sheet.name}" if len(workbooks.workbooks) > 1 else sheet.name
            blocks.append(f"== {title} ==\n" + render_grid(workbooks, wb.id, sheet.name, min(rows), min(cols),
                                                         max(rows), max(cols), local))
    return "\n".join(blocks)


# --- trace references ---

class TraceStep(NamedTuple):
    depth: int
    addr: CellAddr
    formula: str
    rows: List[TraceRow]


def trace(workbooks: WorkbookSet, addr: CellAddr, depth: int = 0) -> List[TraceStep]:
    """Breakdowns of `addr` and, `depth` levels down, of every formula it reads."""
    content = workbooks.get(addr)
    if not content.is_formula:
        raise NotAFormulaError(f"{addr.label()} does not hold a formula")
    steps: List[TraceStep] = []
    visited: Set[CellAddr] = set()

    def visit(cell: CellAddr, formula: str, level: int) -> None:
        visited.add(cell)
        try:
            rows = breakdown(parse_cached(formula), formula)
        except FormulaSyntaxError:
            rows = []
        steps.append(TraceStep(level, cell, formula, rows))
        if level >= depth:
            return
        for box in formula_boxes(formula, cell.workbook, cell.sheet, workbooks):
            for row, col in box.cells():
                target = CellAddr(workbook=box.workbook, sheet=box.sheet, row=row, col=col)
                held = workbooks.get(target)
                if held.is_formula and target not in visited:
                    visit(target, held.formula, level + 1)

    visit(addr, content.formula, 0)
    return steps


def render_trace(steps: List[TraceStep]) -> str:
    lines = []
    for step in steps:
        pad = "  " * step.depth
        lines.append(f"{pad}{step.addr.label()}  {step.formula}")
        width = max([len(r.ref_type) for r in step.rows] + [len("Reference Type")])
        vwidth = max([len(r.value_text) for r in step.rows] + [len("Value")])
        lines.append(f"{pad}  {'Reference Type'.ljust(width)}  {'Value'.ljust(vwidth)}  Level")
        for r in step.rows:
            lines.append(f"{pad}  {r.ref_type.ljust(width)}  {r.value_text.ljust(vwidth)}  {r.nesting_level}")
    return "\n".join(lines) + ("\n" if lines else "")
