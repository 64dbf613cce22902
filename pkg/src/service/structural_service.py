from collections import defaultdict
from datetime import datetime
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from core import log
from core.config import Settings
from core.errors import (
    AnchorOutsideGroupError, DestinationCollisionError, FormulaSyntaxError, GuardDeletionError,
    IrreparableEntryError, ModeError, ReferenceOutOfGridError, ShapeIncompatibleError, SleuthError,
    UnknownGroupError, UnwatchedSourceError, WouldEmptyAreaError,
)
from models.edit import EditResult
from models.finding import Severity
from models.formula import GenericFormula, RefKind
from models.grid import BLANK, AreaExtent, CellAddr, CellContent, WorkbookSet
from models.watch import AuditVerb, EntryKind, GroupAxis, Mode, Registry, WatchEntry
from service.checker import Checker
from service.formula_parser import extract_references, parse_cached
from service.notation import a1_text, generic_text
from service.references import box_of
from service.transforms import (
    BlockMove, GridEdit, GroupLineInsert, Host, LineDelete, LineInsert, LineMove, Replication,
    apply_edit, cross_hi, cross_lo, hi, lo, move_extent, ref_box, rewrite_formula,
)
from service.watch_service import WatchService

# (entry id, carrier cell before the edit, A1 master of current generic, A1 master of last watched)
Master = Tuple[str, Host, Optional[str], Optional[str]]


def _line_extent(extent: AreaExtent, axis: GroupAxis, first: int, last: int) -> AreaExtent:
    if axis == GroupAxis.ROW:
        return AreaExtent.of(extent.workbook, extent.sheet, first, extent.left, last, extent.right)
    return AreaExtent.of(extent.workbook, extent.sheet, extent.top, first, extent.bottom, last)


class StructuralService:
    """Safe edits (group insert/delete, tracked move, replicate, fix) and the operator's raw edits.

    Every call works on deep copies of the workbook set and registry and hands
    them back in an EditResult, so a failure leaves the caller's state alone.
    """

    def __init__(self, settings: Settings, watch_service: Optional[WatchService] = None,
                 checker: Optional[Checker] = None):
        self.settings = settings
        self.watch_service = watch_service or WatchService(settings)
        self.checker = checker or Checker(settings, self.watch_service)

    # --- plumbing ---

    def _begin(self, workbooks: WorkbookSet, reg: Registry) -> Tuple[WorkbookSet, Registry]:
        workbooks = workbooks.model_copy(deep=True)
        reg = reg.model_copy(deep=True)
        reg.invalidate_index()
        return workbooks, reg

    def _require_development(self, reg: Registry, verb: str) -> None:
        if reg.mode == Mode.OPERATIONAL:
            raise ModeError(f"{verb} is not available in Operational mode")

    def _members(self, reg: Registry, group_name: str) -> List[WatchEntry]:
        group = reg.group(group_name)
        if group is None:
            raise UnknownGroupError(f"no group {group_name!r}")
        members = [self.watch_service.entry(reg, i) for i in group.members]
        for member in members:
            if member.extent_lost:
                raise IrreparableEntryError(f"group member {member.id} lost its cells")
        return sorted(members, key=lambda m: m.extent.key())

    def _offset(self, members: List[WatchEntry], axis: GroupAxis, anchor: int) -> int:
        for member in members:
            if lo(member.extent, axis) <= anchor <= hi(member.extent, axis):
                return anchor - lo(member.extent, axis)
        raise AnchorOutsideGroupError(f"{axis.value.lower()} {anchor} is outside every member of the group")

    def _masters(self, reg: Registry, edit: GridEdit) -> List[Master]:
        masters = []
        for entry in reg.entries.values():
            if entry.kind != EntryKind.FORMULA or entry.extent_lost or entry.current_generic is None:
                continue
            carrier = None
            for row, col in entry.extent.positions():
                if edit.move_cell(entry.workbook, entry.sheet, row, col) is not None:
                    carrier = (entry.workbook, entry.sheet, row, col)
                    break
            if carrier is None:
                continue
            texts = []
            for generic in (entry.current_generic, entry.last_watched_generic):
                try:
                    texts.append(a1_text(generic.r1c1_text, carrier[2], carrier[3]) if generic else None)
                except ReferenceOutOfGridError:
                    texts.append(None)
            masters.append((entry.id, carrier, texts[0], texts[1]))
        return masters

    def _carry(self, reg: Registry, masters: List[Master], edit: GridEdit) -> Set[str]:
        """Re-derive generics from masters rewritten the same way as the cells."""
        changed = set()
        for entry_id, carrier, current, last in masters:
            entry = reg.entries[entry_id]
            target = edit.move_cell(*carrier)
            generics = []
            for text in (current, last):
                if text is None:
                    generics.append(None)
                    continue
                try:
                    moved = rewrite_formula(text, edit, carrier, target)
                    generics.append(GenericFormula(r1c1_text=generic_text(moved, target[2], target[3])))
                except (FormulaSyntaxError, ReferenceOutOfGridError):
                    generics.append(None)
            if generics[0] is not None and generics[0] != entry.current_generic:
                entry.current_generic = generics[0]
                changed.add(entry_id)
            if generics[1] is not None and generics[1] != entry.last_watched_generic:
                entry.last_watched_generic = generics[1]
                changed.add(entry_id)
        return changed

    def _move_extents(self, reg: Registry, edit: GridEdit) -> Set[str]:
        changed = set()
        for entry in reg.entries.values():
            if entry.extent_lost:
                continue
            moved = move_extent(edit, entry.extent)
            if moved is None:
                entry.extent_lost = True
                changed.add(entry.id)
                log.warn(f"{entry.id} at {entry.extent.label()} lost its cells")
            elif moved != entry.extent:
                entry.extent = moved
                changed.add(entry.id)
        reg.invalidate_index()
        return changed

    def _finish(self, workbooks: WorkbookSet, reg: Registry, verb: AuditVerb, ts: datetime,
                changed: Set[str], detail: Dict, removed: Sequence[str] = ()) -> EditResult:
        upserts = []
        for entry_id in sorted(changed):
            entry = reg.entries[entry_id]
            entry.modified_at = ts
            entry.change_flag = entry.is_changed()
            upserts.append(entry)
        event = self.watch_service.commit(reg, verb, ts, detail=detail, upserts=upserts, removed=removed)
        return EditResult(workbooks=workbooks, registry=reg, events=[event], detail=detail)

    def _fill_lines(self, workbooks: WorkbookSet, entry: WatchEntry, axis: GroupAxis, lines: Set[int]) -> None:
        if entry.kind != EntryKind.FORMULA or entry.current_generic is None:
            return
        sheet = workbooks.workbook(entry.workbook).sheet(entry.sheet)
        master = entry.current_generic.r1c1_text
        for line in sorted(lines):
            if not lo(entry.extent, axis) <= line <= hi(entry.extent, axis):
                continue
            for other in range(cross_lo(entry.extent, axis), cross_hi(entry.extent, axis) + 1):
                row, col = (line, other) if axis == GroupAxis.ROW else (other, line)
                sheet.put(row, col, CellContent.of_formula(a1_text(master, row, col)))

    # --- group insert / delete ---

    def _has_guard(self, reg: Registry, member: WatchEntry) -> bool:
        return any(e.kind == EntryKind.GUARD and e.guard_for == member.id and not e.extent_lost
                   for e in reg.entries.values())

    def _aggregate_follows(self, workbooks: WorkbookSet, member: WatchEntry, axis: GroupAxis) -> bool:
        """True when the line after the member holds a formula over a range ending on the member's last line."""
        extent = member.extent
        wb = workbooks.workbook(extent.workbook)
        line = hi(extent, axis) + 1
        for other in range(cross_lo(extent, axis), cross_hi(extent, axis) + 1):
            row, col = (line, other) if axis == GroupAxis.ROW else (other, line)
            content = wb.get(extent.sheet, row, col)
            if not content.is_formula:
                continue
            try:
                refs = extract_references(parse_cached(content.formula))
            except FormulaSyntaxError:
                continue
            host = (extent.workbook, extent.sheet, row, col)
            for ref in refs:
                if ref.kind != RefKind.RANGE:
                    continue
                box = ref_box(ref, host)
                if (box.sheet_key() == extent.sheet_key() and hi(box, axis) == hi(extent, axis)
                        and cross_lo(box, axis) <= cross_hi(extent, axis)
                        and cross_lo(extent, axis) <= cross_hi(box, axis)):
                    return True
        return False

    def _insert_lines(self, workbooks: WorkbookSet, reg: Registry, edit: GroupLineInsert,
                      grow: List[Tuple[WatchEntry, int]], fresh: Dict[str, Set[int]]) -> Set[str]:
        """Apply one insert; `grow` members take `amount` of the new lines after their last one."""
        axis = edit.axis
        masters = self._masters(reg, edit)
        before = {e.id: e.extent for e in reg.entries.values()}
        apply_edit(workbooks, edit)
        changed = self._move_extents(reg, edit)

        for entry_id, lines in fresh.items():
            if edit.relocates(reg.entries[entry_id].workbook, reg.entries[entry_id].sheet):
                fresh[entry_id] = {edit.shift(x) for x in lines}
        inserted = range(edit.at, edit.at + edit.count)
        for entry in reg.entries.values():
            old = before.get(entry.id)
            if old is not None and not entry.extent_lost and \
                    hi(entry.extent, axis) - lo(entry.extent, axis) > hi(old, axis) - lo(old, axis):
                fresh[entry.id].update(x for x in inserted if lo(entry.extent, axis) <= x <= hi(entry.extent, axis))
        for member, amount in grow:
            member.extent = _line_extent(member.extent, axis, lo(member.extent, axis), edit.at - 1 + amount)
            fresh[member.id].update(range(edit.at, edit.at + amount))
            changed.add(member.id)
        reg.invalidate_index()
        return changed | self._carry(reg, masters, edit)

    def _add_guard(self, workbooks: WorkbookSet, reg: Registry, member: WatchEntry, axis: GroupAxis,
                   line: int, base: int, ts: datetime) -> WatchEntry:
        guard = self.watch_service.new_entry(reg, workbooks, _line_extent(member.extent, axis, line, line),
                                             kind_hint=EntryKind.GUARD, guard_for=member.id, ts=ts)
        guard.guard_base = base
        return guard

    def insert_in_group(self, workbooks: WorkbookSet, reg: Registry, group_name: str,
                        axis: GroupAxis, anchor: int, count: int = 1) -> EditResult:
        if count < 1:
            raise SleuthError("insert count must be positive")
        workbooks, reg = self._begin(workbooks, reg)
        self._require_development(reg, "insert")
        members = self._members(reg, group_name)
        offset = self._offset(members, axis, anchor)
        ts = self.watch_service.timestamp(reg)

        batches: Dict[Tuple[str, str, int], List[WatchEntry]] = defaultdict(list)
        for member in members:
            line = lo(member.extent, axis) + offset
            if line > hi(member.extent, axis):
                raise AnchorOutsideGroupError(f"offset {offset} falls outside member {member.id}")
            batches[member.extent.sheet_key() + (line,)].append(member)

        fresh: Dict[str, Set[int]] = defaultdict(set)
        changed: Set[str] = set()
        guards: List[str] = []
        extended: List[str] = []
        for key in sorted(batches, key=lambda k: (k[0], k[1], -k[2])):
            batch = batches[key]
            line = key[2]
            wb_id, sheet = batch[0].workbook, batch[0].sheet
            # guard need is per member, wherever the new lines land in it
            needs_guard = [m for m in batch
                           if not self._has_guard(reg, m) and self._aggregate_follows(workbooks, m, axis)]
            bases = {m.id: hi(m.extent, axis) - lo(m.extent, axis) + 1 for m in needs_guard}
            growing = [m for m in batch if hi(m.extent, axis) == line]

            edit = GroupLineInsert(wb_id, sheet, axis, line + 1, count, [(m.extent, count) for m in growing])
            changed |= self._insert_lines(workbooks, reg, edit, [(m, count) for m in growing], fresh)
            extended += [text for text in edit.extended if text not in extended]

            by_end: Dict[int, List[WatchEntry]] = defaultdict(list)
            for member in needs_guard:
                by_end[hi(member.extent, axis)].append(member)
            for end in sorted(by_end, reverse=True):
                # unguarded partners take precedence over shared parallel ranges
                partners = [(m.extent, 0) for m in batch if m not in needs_guard and hi(m.extent, axis) == end]
                edit = GroupLineInsert(wb_id, sheet, axis, end + 1, 1,
                                       partners + [(m.extent, 1) for m in by_end[end]])
                changed |= self._insert_lines(workbooks, reg, edit, [], fresh)
                extended += [text for text in edit.extended if text not in extended]
                for member in by_end[end]:
                    guard = self._add_guard(workbooks, reg, member, axis, end + 1, bases[member.id], ts)
                    guards.append(guard.id)
                    changed.add(guard.id)

        for entry_id, lines in fresh.items():
            self._fill_lines(workbooks, reg.entries[entry_id], axis, lines)

        detail = {"group": group_name, "axis": axis.value, "anchor": anchor, "count": count,
                  "guards": guards, "extended": extended}
        return self._finish(workbooks, reg, AuditVerb.INSERT, ts, changed, detail)

    def _line_is_blank(self, workbooks: WorkbookSet, entry: WatchEntry, axis: GroupAxis) -> bool:
        line = lo(entry.extent, axis)
        sheet = workbooks.workbook(entry.workbook).sheet(entry.sheet)
        return not any((row if axis == GroupAxis.ROW else col) == line for row, col in sheet.cells)

    def _spent_guards(self, workbooks: WorkbookSet, reg: Registry, members: List[WatchEntry],
                      axis: GroupAxis) -> List[WatchEntry]:
        """Guards added by an insert whose member is back to its length before that insert."""
        spent = []
        for member in members:
            for entry in reg.entries.values():
                if (entry.kind == EntryKind.GUARD and entry.guard_for == member.id and not entry.extent_lost
                        and entry.guard_base is not None
                        and hi(member.extent, axis) - lo(member.extent, axis) + 1 <= entry.guard_base
                        and self._line_is_blank(workbooks, entry, axis)):
                    spent.append(entry)
        return sorted(spent, key=lambda e: (e.extent.sheet_key(), -lo(e.extent, axis)))

    def delete_in_group(self, workbooks: WorkbookSet, reg: Registry, group_name: str,
                        axis: GroupAxis, index: int, count: int = 1) -> EditResult:
        if count < 1:
            raise SleuthError("delete count must be positive")
        workbooks, reg = self._begin(workbooks, reg)
        self._require_development(reg, "delete")
        members = self._members(reg, group_name)
        offset = self._offset(members, axis, index)
        ts = self.watch_service.timestamp(reg)

        batches: Dict[Tuple[str, str, int], List[WatchEntry]] = defaultdict(list)
        for member in members:
            first = lo(member.extent, axis) + offset
            last = first + count - 1
            if last > hi(member.extent, axis):
                raise AnchorOutsideGroupError(f"deleting {count} line(s) from {first} overruns member {member.id}")
            if first == lo(member.extent, axis) and last == hi(member.extent, axis):
                raise WouldEmptyAreaError(f"deleting {count} line(s) would empty member {member.id}")
            batches[member.extent.sheet_key() + (first,)].append(member)

        for key, batch in batches.items():
            first, last = key[2], key[2] + count - 1
            for entry in reg.entries.values():
                if (entry.kind == EntryKind.GUARD and not entry.extent_lost
                        and entry.extent.sheet_key() == key[:2]
                        and lo(entry.extent, axis) <= last and first <= hi(entry.extent, axis)):
                    raise GuardDeletionError(f"lines {first}..{last} include guard {entry.id}")

        changed: Set[str] = set()
        for key in sorted(batches, key=lambda k: (k[0], k[1], -k[2])):
            batch = batches[key]
            changed |= self._delete_lines(reg, workbooks, LineDelete(batch[0].workbook, batch[0].sheet, axis,
                                                                     key[2], count))

        removed = []
        for guard in self._spent_guards(workbooks, reg, members, axis):
            changed |= self._delete_lines(reg, workbooks, LineDelete(guard.workbook, guard.sheet, axis,
                                                                     lo(guard.extent, axis), 1))
            del reg.entries[guard.id]
            removed.append(guard.id)
        reg.invalidate_index()

        detail = {"group": group_name, "axis": axis.value, "index": index, "count": count,
                  "guards_removed": removed}
        return self._finish(workbooks, reg, AuditVerb.DELETE, ts, changed - set(removed), detail, removed)

    def _delete_lines(self, reg: Registry, workbooks: WorkbookSet, edit: LineDelete) -> Set[str]:
        masters = self._masters(reg, edit)
        apply_edit(workbooks, edit)
        changed = self._move_extents(reg, edit)
        return changed | self._carry(reg, masters, edit)

    # --- tracked move ---

    def move_area(self, workbooks: WorkbookSet, reg: Registry, source: AreaExtent,
                  destination: CellAddr) -> EditResult:
        workbooks, reg = self._begin(workbooks, reg)
        self._require_development(reg, "move")
        entry = self.watch_service.find_by_extent(reg, source)
        if entry is None:
            raise UnwatchedSourceError(f"{source.label()} is not a watched area")
        source = entry.extent
        target_wb = workbooks.workbook(destination.workbook)
        target_sheet = target_wb.ensure_sheet(destination.sheet)
        target = source.translated(target_wb.id, target_sheet.name, destination.row, destination.col)
        for owner in reg.owners_in(target):
            if owner != entry.id:
                raise DestinationCollisionError(f"{target.label()} overlaps watched entry {owner}")
        for row, col in target.positions():
            if not target_sheet.get(row, col).is_blank and not source.contains_extent(
                    AreaExtent.of(target_wb.id, target_sheet.name, row, col)):
                raise DestinationCollisionError(f"{target.label()} is not blank")

        ts = self.watch_service.timestamp(reg)
        edit = BlockMove(box_of(source), target_wb.id, target_sheet.name, destination.row, destination.col)
        masters = self._masters(reg, edit)
        apply_edit(workbooks, edit)
        changed = self._move_extents(reg, edit)
        changed |= self._carry(reg, masters, edit)
        return self._finish(workbooks, reg, AuditVerb.MOVE, ts, changed | {entry.id}, edit.describe())

    # --- replication ---

    def replicate(self, workbooks: WorkbookSet, reg: Registry, ids: Sequence[str],
                  destination: Union[CellAddr, Mapping[str, CellAddr]]) -> EditResult:
        """Copy the given areas.

        A single cell places them as one block whose top-left lands there; a
        mapping from entry id to cell places each area's top-left on its own.
        """
        workbooks, reg = self._begin(workbooks, reg)
        self._require_development(reg, "replicate")
        sources = [self.watch_service.entry(reg, i) for i in ids]
        if not sources:
            raise UnwatchedSourceError("nothing to replicate")
        for source in sources:
            if source.extent_lost:
                raise UnwatchedSourceError(f"{source.id} lost its cells")

        try:
            if isinstance(destination, CellAddr):
                if len({s.extent.sheet_key() for s in sources}) > 1:
                    raise ShapeIncompatibleError("areas copied as one block must share one sheet")
                rows = destination.row - min(s.extent.top for s in sources)
                cols = destination.col - min(s.extent.left for s in sources)
                corners = {s.id: CellAddr(workbook=destination.workbook, sheet=destination.sheet,
                                          row=s.extent.top + rows, col=s.extent.left + cols) for s in sources}
                shown = destination.label()
            else:
                missing = [s.id for s in sources if s.id not in destination]
                if missing:
                    raise ShapeIncompatibleError(f"no target given for {', '.join(missing)}")
                corners = {s.id: destination[s.id] for s in sources}
                shown = {s.id: corners[s.id].label() for s in sources}
            targets: Dict[str, AreaExtent] = {}
            for source in sources:
                corner = corners[source.id]
                target_wb = workbooks.workbook(corner.workbook)
                target_sheet = target_wb.ensure_sheet(corner.sheet)
                targets[source.id] = source.extent.translated(target_wb.id, target_sheet.name, corner.row, corner.col)
        except ValueError:
            raise ReferenceOutOfGridError("a copy leaves the grid") from None

        for source in sources:
            target = targets[source.id]
            target_sheet = workbooks.workbook(target.workbook).sheet(target.sheet)
            if reg.owners_in(target) or any(not target_sheet.get(r, c).is_blank for r, c in target.positions()):
                raise DestinationCollisionError(f"{target.label()} is not free")
        extents = list(targets.values())
        for i, a in enumerate(extents):
            for b in extents[i + 1:]:
                if a.intersects(b):
                    raise DestinationCollisionError(f"{a.label()} overlaps {b.label()}")

        edit = Replication([(s.extent, targets[s.id]) for s in sources])
        for source in sources:
            source_wb = workbooks.workbook(source.workbook)
            for row, col in source.extent.positions():
                content = source_wb.get(source.sheet, row, col)
                host = (source.workbook, source.sheet, row, col)
                new_host = edit.move_cell(*host)
                if content.is_formula:
                    content = CellContent.of_formula(rewrite_formula(content.formula, edit, host, new_host))
                workbooks.workbook(new_host[0]).sheet(new_host[1]).put(new_host[2], new_host[3], content)

        ts = self.watch_service.timestamp(reg)
        created: Dict[str, WatchEntry] = {}
        for source in sources:
            copy = self.watch_service.new_entry(reg, workbooks, targets[source.id],
                                                kind_hint=source.kind, ts=ts)
            copy.status = source.status
            if source.kind == EntryKind.DATA:
                copy.data_descriptor = copy.last_watched_data = source.data_descriptor
            created[source.id] = copy
        for source in sources:
            if source.guard_for in created:
                created[source.id].guard_for = created[source.guard_for].id

        detail = {"sources": list(ids), "to": shown,
                  "created": [created[s.id].id for s in sources]}
        return self._finish(workbooks, reg, AuditVerb.REPLICATE, ts, {c.id for c in created.values()}, detail)

    # --- fix ---

    def fix_area(self, workbooks: WorkbookSet, reg: Registry, entry_id: str, accept: bool) -> EditResult:
        workbooks, reg = self._begin(workbooks, reg)
        entry = self.watch_service.entry(reg, entry_id)
        if entry.extent_lost or not workbooks.has_workbook(entry.workbook) \
                or not workbooks.workbook(entry.workbook).has_sheet(entry.sheet):
            raise IrreparableEntryError(
                f"{entry_id} lost its cells; repair {entry.extent.label()} by hand and watch it again")
        sheet = workbooks.workbook(entry.workbook).sheet(entry.sheet)
        ts = self.watch_service.timestamp(reg)

        if entry.kind == EntryKind.FORMULA:
            if accept:
                adopted = self.checker.snapshot_generic(workbooks, entry) or entry.current_generic
                entry.current_generic = entry.last_watched_generic = adopted
                described = self.watch_service.describe_formula(adopted, workbooks, entry.extent)
                entry.references = described["references"]
                entry.link_sources = described["link_sources"]
            else:
                master = entry.last_watched_generic
                if master is None:
                    raise IrreparableEntryError(f"{entry_id} has no watched formula to restore")
                rewritten = {}
                for row, col in entry.extent.positions():
                    try:
                        rewritten[(row, col)] = a1_text(master.r1c1_text, row, col)
                    except ReferenceOutOfGridError:
                        raise IrreparableEntryError(
                            f"the watched formula of {entry_id} no longer fits {entry.extent.label()}; "
                            "repair by hand and watch it again") from None
                for (row, col), text in rewritten.items():
                    sheet.put(row, col, CellContent.of_formula(text))
                entry.current_generic = master
        elif entry.kind == EntryKind.DATA and accept:
            descriptor = self.watch_service.describe_data(workbooks, entry.extent, previous=entry.data_descriptor)
            entry.data_descriptor = entry.last_watched_data = descriptor
        elif entry.kind == EntryKind.GUARD and not accept:
            for row, col in entry.extent.positions():
                sheet.put(row, col, BLANK)

        reg.invalidate_index()
        findings = self.checker.check_entry(workbooks, reg, entry)
        entry.error_flag = any(f.severity == Severity.ERROR for f in findings)
        result = self._finish(workbooks, reg, AuditVerb.FIX, ts, {entry.id},
                              {"entry": entry_id, "accept": accept})
        result.findings = findings
        return result

    # --- the operator's own edits ---

    def raw_edit(self, workbooks: WorkbookSet, reg: Registry, edit: GridEdit) -> EditResult:
        """Spreadsheet-native edit: extents and names follow, generics stay as recorded."""
        workbooks, reg = self._begin(workbooks, reg)
        ts = self.watch_service.timestamp(reg)
        apply_edit(workbooks, edit)
        changed = self._move_extents(reg, edit)
        upserts = [reg.entries[i] for i in sorted(changed)]
        event = self.watch_service.commit(reg, AuditVerb.EDIT, ts, detail=edit.describe(), upserts=upserts)
        return EditResult(workbooks=workbooks, registry=reg, events=[event], detail=edit.describe())

    def raw_insert(self, workbooks: WorkbookSet, reg: Registry, workbook: str, sheet: str,
                   axis: GroupAxis, at: int, count: int = 1) -> EditResult:
        return self.raw_edit(workbooks, reg, LineInsert(workbook, sheet, axis, at, count))

    def raw_delete(self, workbooks: WorkbookSet, reg: Registry, workbook: str, sheet: str,
                   axis: GroupAxis, at: int, count: int = 1) -> EditResult:
        return self.raw_edit(workbooks, reg, LineDelete(workbook, sheet, axis, at, count))

    def raw_move_lines(self, workbooks: WorkbookSet, reg: Registry, workbook: str, sheet: str,
                       axis: GroupAxis, start: int, dest: int, count: int = 1) -> EditResult:
        return self.raw_edit(workbooks, reg, LineMove(workbook, sheet, axis, start, count, dest))

    def raw_move_block(self, workbooks: WorkbookSet, reg: Registry, source: AreaExtent,
                       destination: CellAddr) -> EditResult:
        workbooks = workbooks.model_copy(deep=True)
        workbooks.workbook(destination.workbook).ensure_sheet(destination.sheet)
        edit = BlockMove(box_of(source), destination.workbook, destination.sheet, destination.row, destination.col)
        return self.raw_edit(workbooks, reg, edit)

    def _commit_edit(self, workbooks: WorkbookSet, reg: Registry, ts: datetime, detail: Dict) -> EditResult:
        event = self.watch_service.commit(reg, AuditVerb.EDIT, ts, detail=detail)
        return EditResult(workbooks=workbooks, registry=reg, events=[event], detail=detail)

    def set_cell(self, workbooks: WorkbookSet, reg: Registry, addr: CellAddr, content: CellContent) -> EditResult:
        workbooks, reg = self._begin(workbooks, reg)
        ts = self.watch_service.timestamp(reg)
        workbooks.put(addr, content)
        return self._commit_edit(workbooks, reg, ts, {"set": addr.label(), "kind": content.kind.value})

    def clear(self, workbooks: WorkbookSet, reg: Registry, extent: AreaExtent) -> EditResult:
        workbooks, reg = self._begin(workbooks, reg)
        ts = self.watch_service.timestamp(reg)
        for addr in extent.addresses():
            workbooks.put(addr, BLANK)
        return self._commit_edit(workbooks, reg, ts, {"clear": extent.label()})

    def fill(self, workbooks: WorkbookSet, reg: Registry, source: CellAddr, target: AreaExtent) -> EditResult:
        """Copy one cell over a range the way fill-down/right does."""
        workbooks, reg = self._begin(workbooks, reg)
        ts = self.watch_service.timestamp(reg)
        content = workbooks.get(source)
        if content.is_formula:
            generic = generic_text(content.formula, source.row, source.col)
        for addr in target.addresses():
            if content.is_formula:
                workbooks.put(addr, CellContent.of_formula(a1_text(generic, addr.row, addr.col)))
            else:
                workbooks.put(addr, content)
        return self._commit_edit(workbooks, reg, ts, {"fill": source.label(), "to": target.label()})
