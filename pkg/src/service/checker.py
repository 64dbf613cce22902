from collections import defaultdict
from datetime import datetime
from typing import Dict, Iterator, List, Optional, Set, Tuple

from core import log
from core.config import Settings
from core.errors import FormulaSyntaxError, ReferenceOutOfGridError
from models.finding import Finding, FindingCode, Report, ReportRow, Severity
from models.formula import ErrorLiteral, GenericFormula, RefKind, Reference
from models.grid import AreaExtent, CellKind, WorkbookSet
from models.watch import AuditVerb, DataKind, EntryKind, EntryStatus, Registry, WatchEntry
from service.area_engine import cover_rectangles
from service.bounds import compute_bounds
from service.formula_parser import render_reference
from service.notation import a1_text, generic_text
from service.references import Box, expanded_terms, formula_boxes, resolve
from service.watch_service import WatchService

__all__ = ["Checker", "DependencyIndex", "compute_bounds"]

# Boxes up to this many cells are checked cell by cell; larger ones by entry intersection.
_SMALL_BOX = 256

Cell = Tuple[int, int]


class Ownership:
    """Which watched entries own the cells of a box."""

    def __init__(self, reg: Registry):
        self.reg = reg
        self.by_sheet: Dict[Tuple[str, str], List[WatchEntry]] = defaultdict(list)
        for entry in reg.entries.values():
            if not entry.extent_lost:
                self.by_sheet[entry.extent.sheet_key()].append(entry)

    def touched(self, box: Box) -> Iterator[Tuple[str, Cell]]:
        size = (box.bottom - box.top + 1) * (box.right - box.left + 1)
        if size <= _SMALL_BOX:
            for row, col in box.cells():
                owner = self.reg.owner_of(box.workbook, box.sheet, row, col)
                if owner is not None:
                    yield owner, (row, col)
            return
        for entry in self.by_sheet.get(box.sheet_key(), ()):
            top, left = max(box.top, entry.extent.top), max(box.left, entry.extent.left)
            bottom, right = min(box.bottom, entry.extent.bottom), min(box.right, entry.extent.right)
            for row in range(top, bottom + 1):
                for col in range(left, right + 1):
                    yield entry.id, (row, col)

    def covered(self, box: Box) -> bool:
        size = (box.bottom - box.top + 1) * (box.right - box.left + 1)
        return sum(1 for _ in self.touched(box)) == size


class DependencyIndex:
    """Inverted precedents: which cells of each entry are read, and by whom."""

    def __init__(self, workbooks: WorkbookSet, reg: Registry, ownership: Optional[Ownership] = None):
        self.ownership = ownership or Ownership(reg)
        self.reads: Dict[str, Set[Cell]] = defaultdict(set)
        self.unwatched_readers: Dict[str, Set[Tuple[str, str, int, int]]] = defaultdict(set)

        for reader in reg.entries.values():
            if reader.kind != EntryKind.FORMULA or reader.extent_lost or reader.current_generic is None:
                continue
            wb, sheet = reader.extent.workbook, reader.extent.sheet
            for row, col in reader.extent.positions():
                for term in expanded_terms(reader.current_generic, row, col) or ():
                    if not isinstance(term, Reference):
                        continue
                    box = resolve(term, wb, sheet, workbooks)
                    if box is None:
                        continue
                    for owner, cell in self.ownership.touched(box):
                        if owner != reader.id:
                            self.reads[owner].add(cell)

        for addr, content in workbooks.formula_cells():
            if reg.owner_of(addr.workbook, addr.sheet, addr.row, addr.col) is not None:
                continue
            for box in formula_boxes(content.formula, addr.workbook, addr.sheet, workbooks):
                for owner, _ in self.ownership.touched(box):
                    self.unwatched_readers[owner].add(addr.key())


def _rect_extent(entry: WatchEntry, rect: Tuple[int, int, int, int]) -> AreaExtent:
    return AreaExtent.of(entry.workbook, entry.sheet, *rect)


def _bbox(entry: WatchEntry, cells) -> AreaExtent:
    rows = [r for r, _ in cells]
    cols = [c for _, c in cells]
    return AreaExtent.of(entry.workbook, entry.sheet, min(rows), min(cols), max(rows), max(cols))


class Checker:
    def __init__(self, settings: Settings, watch_service: Optional[WatchService] = None):
        self.settings = settings
        self.watch_service = watch_service or WatchService(settings)

    # --- snapshot ---

    def snapshot_generic(self, workbooks: WorkbookSet, entry: WatchEntry) -> Optional[GenericFormula]:
        """Generic read back from the area's top-left cell; None when it holds no usable formula."""
        if not workbooks.has_workbook(entry.workbook):
            return None
        content = workbooks.workbook(entry.workbook).get(entry.sheet, entry.extent.top, entry.extent.left)
        if content.kind != CellKind.FORMULA:
            return None
        try:
            return GenericFormula(r1c1_text=generic_text(content.formula, entry.extent.top, entry.extent.left))
        except (FormulaSyntaxError, ReferenceOutOfGridError):
            return None

    # --- individual checks ---

    def check_damage(self, workbooks: WorkbookSet, entry: WatchEntry) -> List[Finding]:
        if entry.kind != EntryKind.FORMULA or entry.current_generic is None:
            return []
        wb = workbooks.workbook(entry.workbook)
        # held to the watched master, not the top-left snapshot
        master = (entry.last_watched_generic or entry.current_generic).r1c1_text
        damaged: Set[Cell] = set()
        for row, col in entry.extent.positions():
            content = wb.get(entry.sheet, row, col)
            if content.kind != CellKind.FORMULA:
                damaged.add((row, col))
                continue
            try:
                if generic_text(content.formula, row, col) != master:
                    damaged.add((row, col))
            except (FormulaSyntaxError, ReferenceOutOfGridError):
                damaged.add((row, col))

        hint = master
        findings = []
        for rect in cover_rectangles(damaged):
            try:
                detail = f"master formula {a1_text(hint, rect[0], rect[1])}"
            except ReferenceOutOfGridError:
                detail = f"master formula {hint}"
            findings.append(Finding.of(FindingCode.DAMAGED_FORMULA, entry.id, _rect_extent(entry, rect),
                                       fix_hint=hint, detail=detail))
        return findings

    def check_precedents(self, workbooks: WorkbookSet, reg: Registry, entry: WatchEntry,
                         ownership: Optional[Ownership] = None) -> List[Finding]:
        if entry.kind != EntryKind.FORMULA or entry.current_generic is None:
            return []
        ownership = ownership or Ownership(reg)
        invalid: Dict[Optional[int], List[Cell]] = defaultdict(list)
        first_text: Dict[Optional[int], str] = {}

        for row, col in entry.extent.positions():
            placed = expanded_terms(entry.current_generic, row, col)
            if placed is None:
                invalid[None].append((row, col))
                first_text.setdefault(None, "reference falls off the grid")
                continue
            for index, term in enumerate(placed):
                if isinstance(term, ErrorLiteral):
                    ok = False
                else:
                    box = resolve(term, entry.workbook, entry.sheet, workbooks)
                    ok = box is not None and ownership.covered(box)
                if not ok:
                    invalid[index].append((row, col))
                    if index not in first_text:
                        text = term.code if isinstance(term, ErrorLiteral) else render_reference(term)
                        first_text[index] = f"{text} at {AreaExtent.of(entry.workbook, entry.sheet, row, col).label()}"

        return [
            Finding.of(FindingCode.INVALID_PRECEDENT, entry.id, _bbox(entry, cells),
                       detail=first_text[index], term_index=index)
            for index, cells in sorted(invalid.items(), key=lambda kv: -1 if kv[0] is None else kv[0])
        ]

    def check_dependents(self, workbooks: WorkbookSet, reg: Registry, entry: WatchEntry,
                         index: Optional[DependencyIndex] = None) -> List[Finding]:
        if entry.kind == EntryKind.GUARD or entry.extent_lost:
            return []
        index = index or DependencyIndex(workbooks, reg)
        read = index.reads.get(entry.id, set())
        unwatched = index.unwatched_readers.get(entry.id, set())
        findings = []
        if unwatched:
            findings.append(Finding.of(FindingCode.UNVERIFIABLE_DEPENDENTS, entry.id, entry.extent,
                                       detail=f"{len(unwatched)} unwatched formula cell(s)"))
        if not read:
            if unwatched:
                return findings
            if entry.kind == EntryKind.DATA:
                findings.append(Finding.of(FindingCode.DATA_UNREFERENCED, entry.id, entry.extent))
            elif entry.status != EntryStatus.FINAL_RESULT:
                findings.append(Finding.of(FindingCode.CANDIDATE_FINAL_RESULT, entry.id, entry.extent))
            return findings

        missing = [cell for cell in entry.extent.positions() if cell not in read]
        if missing:
            findings.append(Finding.of(FindingCode.INCONSISTENT_DEPENDENT, entry.id, _bbox(entry, missing),
                                       detail=f"{len(missing)} of {entry.extent.size} cells unreferenced"))
        return findings

    def check_dollaring(self, workbooks: WorkbookSet, reg: Registry, entry: WatchEntry) -> List[Finding]:
        if entry.kind != EntryKind.FORMULA or entry.current_generic is None or entry.extent.size == 1:
            return []
        area = entry.extent
        placed = expanded_terms(entry.current_generic, area.top, area.left) or []
        findings = []
        for term_index, term in enumerate(placed):
            if not isinstance(term, Reference) or term.kind == RefKind.NAME:
                continue
            box = resolve(term, entry.workbook, entry.sheet, workbooks)
            if box is None:
                continue
            owner_id = reg.owner_of(box.workbook, box.sheet, box.top, box.left)
            if owner_id is None or owner_id == entry.id:
                continue
            precedent = reg.entries[owner_id].extent
            if term.kind == RefKind.RANGE and precedent != box.extent():
                continue

            need_row = need_col = False
            if precedent.size == 1:
                need_row, need_col = area.height > 1, area.width > 1
            elif precedent.height == 1:
                need_row = area.height > 1
            elif precedent.width == 1:
                need_col = area.width > 1
            coords = term.endpoints
            if (need_row and not all(c.row_abs for c in coords)) or (need_col and not all(c.col_abs for c in coords)):
                findings.append(Finding.of(FindingCode.VULNERABLE_DOLLARING, entry.id, area,
                                           detail=render_reference(term), term_index=term_index))
        return findings

    def check_data(self, workbooks: WorkbookSet, entry: WatchEntry) -> List[Finding]:
        if entry.kind != EntryKind.DATA or entry.data_descriptor is None:
            return []
        descriptor = entry.data_descriptor
        wb = workbooks.workbook(entry.workbook)
        by_code: Dict[FindingCode, Set[Cell]] = defaultdict(set)
        outside: List[float] = []
        for row, col in entry.extent.positions():
            content = wb.get(entry.sheet, row, col)
            if content.is_blank:
                if not descriptor.accept_blank_as_zero:
                    by_code[FindingCode.BLANK_IN_DATA].add((row, col))
            elif content.is_formula:
                by_code[FindingCode.FORMULA_IN_DATA].add((row, col))
            elif (content.kind == CellKind.NUMBER) != (descriptor.data_kind == DataKind.NUMERIC):
                by_code[FindingCode.TYPE_MISMATCH].add((row, col))
            elif descriptor.bounds is not None and not descriptor.bounds.contains(content.number):
                by_code[FindingCode.OUT_OF_BOUNDS].add((row, col))
                outside.append(content.number)

        findings = []
        for code in (FindingCode.BLANK_IN_DATA, FindingCode.FORMULA_IN_DATA,
                     FindingCode.TYPE_MISMATCH, FindingCode.OUT_OF_BOUNDS):
            detail = None
            if code == FindingCode.OUT_OF_BOUNDS:
                detail = f"{', '.join(f'{v:g}' for v in outside)} outside {descriptor.bounds.describe()}"
            elif code == FindingCode.TYPE_MISMATCH:
                detail = f"expected {descriptor.data_kind.value} data"
            for rect in cover_rectangles(by_code.get(code, ())):
                findings.append(Finding.of(code, entry.id, _rect_extent(entry, rect), detail=detail))
        return findings

    def check_guard(self, workbooks: WorkbookSet, entry: WatchEntry) -> List[Finding]:
        if entry.kind != EntryKind.GUARD:
            return []
        wb = workbooks.workbook(entry.workbook)
        filled = {(r, c) for r, c in entry.extent.positions() if not wb.get(entry.sheet, r, c).is_blank}
        if not filled:
            return []
        numbers = [wb.get(entry.sheet, r, c).number for r, c in sorted(filled)
                   if wb.get(entry.sheet, r, c).kind == CellKind.NUMBER]
        detail = f"entered data {compute_bounds(numbers, self.settings.SLEUTH_BOUNDS_SIGMA).describe()}" \
            if numbers else "entered text or formulas"
        return [Finding.of(FindingCode.DATA_OVER_BLANK, entry.id, _rect_extent(entry, rect), detail=detail)
                for rect in cover_rectangles(filled)]

    # --- whole-entry and whole-registry checks ---

    def check_entry(self, workbooks: WorkbookSet, reg: Registry, entry: WatchEntry,
                    index: Optional[DependencyIndex] = None) -> List[Finding]:
        if entry.extent_lost or not workbooks.has_workbook(entry.workbook) \
                or not workbooks.workbook(entry.workbook).has_sheet(entry.sheet) \
                or (entry.kind == EntryKind.FORMULA and entry.current_generic is None):
            return [Finding.of(FindingCode.WATCH_DAMAGED, entry.id, entry.extent,
                               detail="watched cells were deleted; repair manually and re-watch")]
        index = index or DependencyIndex(workbooks, reg)
        findings: List[Finding] = []
        findings += self.check_damage(workbooks, entry)
        findings += self.check_precedents(workbooks, reg, entry, index.ownership)
        findings += self.check_guard(workbooks, entry)
        findings += self.check_data(workbooks, entry)
        findings += self.check_dependents(workbooks, reg, entry, index)
        findings += self.check_dollaring(workbooks, reg, entry)
        return findings

    def check_all(self, workbooks: WorkbookSet, reg: Registry, commit: bool = True,
                  generated_at: Optional[datetime] = None) -> Report:
        changed = []
        for entry in reg.sorted_entries():
            if entry.kind != EntryKind.FORMULA or entry.extent_lost:
                continue
            snapshot = self.snapshot_generic(workbooks, entry)
            if snapshot is not None and self.watch_service.record_change(reg, entry.id, snapshot, commit=False):
                changed.append(entry.id)

        index = DependencyIndex(workbooks, reg)
        findings: List[Finding] = []
        flagged = set(changed)
        for entry in reg.sorted_entries():
            found = self.check_entry(workbooks, reg, entry, index)
            findings += found
            error_flag = any(f.severity == Severity.ERROR for f in found)
            change_flag = entry.is_changed()
            if (error_flag, change_flag) != (entry.error_flag, entry.change_flag):
                entry.error_flag, entry.change_flag = error_flag, change_flag
                flagged.add(entry.id)

        report = self.build_report(workbooks, reg, findings, generated_at)
        if commit:
            self.watch_service.commit(
                reg, AuditVerb.CHECK,
                detail={"errors": report.error_count, "warnings": report.warning_count, "changed": changed},
                upserts=[reg.entries[i] for i in sorted(flagged)],
            )
        log.info(f"check: {report.error_count} error(s), {report.warning_count} warning(s)")
        return report

    # --- report ---

    def formula_string(self, entry: WatchEntry) -> str:
        if entry.kind == EntryKind.DATA:
            return "----- Data Cell -----" if entry.extent.size == 1 else "----- Data Area -----"
        if entry.kind == EntryKind.GUARD:
            return "----- Guard Cell -----" if entry.extent.size == 1 else "----- Guard Area -----"
        if entry.current_generic is None:
            return "----- Formula Lost -----"
        try:
            return a1_text(entry.current_generic.r1c1_text, entry.extent.top, entry.extent.left)
        except ReferenceOutOfGridError:
            return entry.current_generic.r1c1_text

    def build_report(self, workbooks: WorkbookSet, reg: Registry, findings: List[Finding],
                     generated_at: Optional[datetime] = None) -> Report:
        qualify = len(workbooks.workbooks) > 1
        by_entry: Dict[str, List[Finding]] = defaultdict(list)
        for f in findings:
            by_entry[f.entry_id].append(f)
        rows = []
        for entry in reg.sorted_entries():
            own = by_entry.get(entry.id, [])
            if any(f.severity == Severity.ERROR for f in own):
                error_found = "ERROR"
            elif own:
                error_found = "WARNING"
            else:
                error_found = "OK"
            indications: List[str] = []
            for f in own:
                if f.message not in indications:
                    indications.append(f.message)
            location = entry.extent.label()
            if qualify:
                location = f"[{entry.workbook}]{location}"
            rows.append(ReportRow(
                entry_id=entry.id,
                modified_at=entry.modified_at,
                error_found=error_found,
                indications=indications,
                change_detected="CHANGED" if entry.change_flag else "OK",
                location=location,
                formula=self.formula_string(entry),
            ))
        return Report(generated_at=generated_at or self.watch_service.clock(), rows=rows, findings=findings)

