import math
from datetime import datetime, timedelta
from typing import Callable, Dict, Iterable, List, Optional, Sequence

from core import log
from core.config import Settings
from core.errors import (
    CapacityExceededError, InvalidBoundsError, MixedContentError, OverlapError, ShapeIncompatibleError,
    TooManyReferencesError, UnclassifiableAreaError, UnknownEntryError,
)
from models.formula import GenericFormula
from models.grid import AreaExtent, CellContent, CellKind, WorkbookSet, fold
from models.watch import (
    AuditEvent, AuditVerb, Bounds, DataDescriptor, DataKind, EntryKind, EntryStatus, GroupAxis,
    GroupDef, Mode, Registry, WatchEntry,
)
from service.area_engine import classify_data_area, generic_formula
from service.bounds import compute_bounds
from service.formula_parser import extract_references, render_reference
from service.notation import a1_text


class WatchService:
    """Mutations of the registry. Every public mutation appends exactly one audit event."""

    def __init__(self, settings: Settings, clock: Optional[Callable[[], datetime]] = None):
        self.settings = settings
        self.clock = clock or datetime.now

    # --- plumbing ---

    def new_registry(self, mode: Optional[Mode] = None) -> Registry:
        return Registry(
            capacity=self.settings.SLEUTH_CAPACITY,
            mode=mode or Mode(self.settings.SLEUTH_MODE),
        )

    def timestamp(self, reg: Registry) -> datetime:
        now = self.clock()
        if reg.audit and now <= reg.audit[-1].timestamp:
            now = reg.audit[-1].timestamp + timedelta(microseconds=1)
        return now

    def commit(self, reg: Registry, verb: AuditVerb, timestamp: Optional[datetime] = None,
               detail: Optional[Dict] = None, upserts: Iterable[WatchEntry] = (),
               removed: Iterable[str] = (), groups: Optional[Dict[str, Optional[GroupDef]]] = None,
               mode: Optional[Mode] = None) -> AuditEvent:
        event = AuditEvent(
            timestamp=timestamp or self.timestamp(reg),
            actor=self.settings.SLEUTH_ACTOR,
            verb=verb,
            detail=detail or {},
            upserts=[e.model_copy(deep=True) for e in upserts],
            removed=list(removed),
            groups={k: (g.model_copy(deep=True) if g is not None else None) for k, g in (groups or {}).items()},
            mode=mode,
            next_id=reg.next_id,
        )
        reg.audit.append(event)
        reg.invalidate_index()
        touched = [e.id for e in event.upserts] + event.removed
        log.info(f"{verb.value}: {', '.join(touched) if touched else 'no entries'}")
        return event

    def entry(self, reg: Registry, entry_id: str) -> WatchEntry:
        try:
            return reg.entries[entry_id]
        except KeyError:
            raise UnknownEntryError(f"no watch entry {entry_id!r}") from None

    def allocate_id(self, reg: Registry) -> str:
        entry_id = f"e{reg.next_id}"
        reg.next_id += 1
        return entry_id

    # --- describing areas ---

    def describe_formula(self, generic: GenericFormula, workbooks: WorkbookSet,
                         extent: AreaExtent) -> Dict:
        refs = [r for r in extract_references(generic.ast)]
        if len(refs) > self.settings.SLEUTH_MAX_REFERENCES:
            raise TooManyReferencesError(
                f"{extent.label()} carries {len(refs)} references; the limit is {self.settings.SLEUTH_MAX_REFERENCES}"
            )
        return {
            "references": [render_reference(r) for r in refs],
            "link_sources": [render_reference(r) for r in refs if r.workbook is not None],
        }

    def describe_data(self, workbooks: WorkbookSet, extent: AreaExtent,
                      previous: Optional[DataDescriptor] = None) -> DataDescriptor:
        wb = workbooks.workbook(extent.workbook)
        data_kind = classify_data_area(wb, extent)
        accept = previous.accept_blank_as_zero if previous else self.settings.SLEUTH_ACCEPT_BLANK_AS_ZERO
        if previous is not None and previous.user_bounds:
            return DataDescriptor(data_kind=data_kind, bounds=previous.bounds,
                                  accept_blank_as_zero=accept, user_bounds=True)
        bounds = None
        if data_kind == DataKind.NUMERIC:
            numbers = [wb.get(extent.sheet, r, c).number for r, c in extent.positions()
                       if wb.get(extent.sheet, r, c).kind == CellKind.NUMBER]
            bounds = compute_bounds(numbers, self.settings.SLEUTH_BOUNDS_SIGMA)
        return DataDescriptor(data_kind=data_kind, bounds=bounds, accept_blank_as_zero=accept)

    def covering_names(self, workbooks: WorkbookSet, extent: AreaExtent) -> List[str]:
        wb = workbooks.workbook(extent.workbook)
        return [n.name for n in wb.names if n.target.intersects(extent)]

    # --- operations ---

    def watch_area(self, reg: Registry, workbooks: WorkbookSet, extent: AreaExtent,
                   kind_hint: Optional[EntryKind] = None, fill: bool = False,
                   guard_for: Optional[str] = None) -> WatchEntry:
        ts = self.timestamp(reg)
        entry = self.new_entry(reg, workbooks, extent, kind_hint, fill, guard_for, ts)
        self.commit(reg, AuditVerb.WATCH, ts, detail={"extent": entry.extent.label(), "kind": entry.kind.value},
                    upserts=[entry])
        return entry

    def new_entry(self, reg: Registry, workbooks: WorkbookSet, extent: AreaExtent,
                  kind_hint: Optional[EntryKind] = None, fill: bool = False,
                  guard_for: Optional[str] = None, ts: Optional[datetime] = None) -> WatchEntry:
        """Build and register an entry without logging it; callers commit."""
        wb = workbooks.workbook(extent.workbook)
        sheet = wb.sheet(extent.sheet)
        extent = AreaExtent.of(wb.id, sheet.name, *extent.bounds())

        if len(reg.entries) >= reg.capacity:
            raise CapacityExceededError(f"the registry already holds {reg.capacity} entries")
        clash = reg.owners_in(extent)
        if clash:
            raise OverlapError(f"{extent.label()} overlaps watched entr{'y' if len(clash) == 1 else 'ies'} {', '.join(clash)}")

        kind = kind_hint or self._infer_kind(workbooks, extent)
        entry_fields: Dict = {}
        if kind == EntryKind.FORMULA:
            if fill:
                self.fill_extent(workbooks, extent)
            generic = generic_formula(wb, extent)
            entry_fields = dict(current_generic=generic, last_watched_generic=generic,
                                **self.describe_formula(generic, workbooks, extent))
        elif kind == EntryKind.DATA:
            descriptor = self.describe_data(workbooks, extent)
            entry_fields = dict(data_descriptor=descriptor, last_watched_data=descriptor)

        entry = WatchEntry(
            id=self.allocate_id(reg),
            extent=extent,
            kind=kind,
            names=self.covering_names(workbooks, extent),
            status=EntryStatus.GUARD if kind == EntryKind.GUARD else EntryStatus.NORMAL,
            guard_for=guard_for,
            modified_at=ts or self.timestamp(reg),
            **entry_fields,
        )
        reg.entries[entry.id] = entry
        reg.invalidate_index()
        return entry

    def _infer_kind(self, workbooks: WorkbookSet, extent: AreaExtent) -> EntryKind:
        formulas = data = 0
        for row, col in extent.positions():
            content = workbooks.workbook(extent.workbook).get(extent.sheet, row, col)
            if content.is_formula:
                formulas += 1
            elif content.is_data:
                data += 1
        if formulas and data:
            raise MixedContentError(f"{extent.label()} mixes formulas and data; pass a kind")
        if formulas:
            return EntryKind.FORMULA
        if data:
            return EntryKind.DATA
        raise UnclassifiableAreaError(f"{extent.label()} is blank; pass a kind")

    def fill_extent(self, workbooks: WorkbookSet, extent: AreaExtent) -> None:
        """Fill every cell of the extent from the top-left formula."""
        wb = workbooks.workbook(extent.workbook)
        master = generic_formula(wb, AreaExtent.single(extent.top_left))
        sheet = wb.sheet(extent.sheet)
        for row, col in extent.positions():
            sheet.put(row, col, CellContent.of_formula(a1_text(master.r1c1_text, row, col)))

    def unwatch(self, reg: Registry, entry_id: str) -> None:
        entry = self.entry(reg, entry_id)
        del reg.entries[entry_id]
        groups: Dict[str, Optional[GroupDef]] = {}
        if entry.group is not None:
            key = fold(entry.group)
            group = reg.groups.get(key)
            if group is not None:
                group.members = [m for m in group.members if m != entry_id]
                if group.members:
                    groups[key] = group
                else:
                    del reg.groups[key]
                    groups[key] = None
        self.commit(reg, AuditVerb.UNWATCH, detail={"extent": entry.extent.label()},
                    removed=[entry_id], groups=groups)

    def assign_group(self, reg: Registry, ids: Sequence[str], group_name: str,
                     axis: GroupAxis = GroupAxis.ROW) -> GroupDef:
        members = [self.entry(reg, i) for i in ids]
        if axis == GroupAxis.ROW:
            sizes = {m.extent.width for m in members}
        else:
            sizes = {m.extent.height for m in members}
        if len(sizes) > 1:
            dimension = "width" if axis == GroupAxis.ROW else "height"
            raise ShapeIncompatibleError(f"group {group_name!r} members differ in {dimension}: {sorted(sizes)}")

        ts = self.timestamp(reg)
        changed_groups: Dict[str, Optional[GroupDef]] = {}
        for member in members:
            if member.group is not None and fold(member.group) != fold(group_name):
                old_key = fold(member.group)
                old = reg.groups.get(old_key)
                if old is not None:
                    old.members = [m for m in old.members if m != member.id]
                    if old.members:
                        changed_groups[old_key] = old
                    else:
                        del reg.groups[old_key]
                        changed_groups[old_key] = None
            member.group = group_name
            member.modified_at = ts

        key = fold(group_name)
        group = reg.groups.get(key) or GroupDef(name=group_name, axis=axis)
        group.axis = axis
        for member in members:
            if member.id not in group.members:
                group.members.append(member.id)
        reg.groups[key] = group
        changed_groups[key] = group
        self.commit(reg, AuditVerb.GROUP, ts, detail={"group": group_name, "members": list(ids)},
                    upserts=members, groups=changed_groups)
        return group

    def record_change(self, reg: Registry, entry_id: str, new_generic: GenericFormula,
                      commit: bool = True) -> bool:
        """Adopt a new current generic. The last watched generic stays put until a fix accepts.

        False when nothing changed. With commit=False the caller logs the change itself.
        """
        entry = self.entry(reg, entry_id)
        if entry.current_generic == new_generic:
            return False
        ts = self.timestamp(reg)
        entry.current_generic = new_generic
        entry.change_flag = entry.is_changed()
        entry.modified_at = ts
        if commit:
            self.commit(reg, AuditVerb.CHANGE, ts, detail={"generic": new_generic.r1c1_text}, upserts=[entry])
        return True

    def set_status(self, reg: Registry, entry_id: str, status: EntryStatus) -> WatchEntry:
        entry = self.entry(reg, entry_id)
        entry.status = status
        entry.modified_at = ts = self.timestamp(reg)
        self.commit(reg, AuditVerb.STATUS, ts, detail={"status": status.value}, upserts=[entry])
        return entry

    def set_bounds(self, reg: Registry, entry_id: str, lower: float, upper: float) -> WatchEntry:
        entry = self.entry(reg, entry_id)
        if entry.kind != EntryKind.DATA:
            raise MixedContentError(f"{entry_id} is not a data area")
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise InvalidBoundsError(f"bounds must be finite numbers, got [{lower}, {upper}]")
        if lower > upper:
            raise InvalidBoundsError(f"lower bound {lower:g} exceeds upper bound {upper:g}")
        descriptor = entry.data_descriptor.model_copy(
            update={"bounds": Bounds(lower=lower, upper=upper), "user_bounds": True})
        entry.data_descriptor = entry.last_watched_data = descriptor
        entry.modified_at = ts = self.timestamp(reg)
        self.commit(reg, AuditVerb.STATUS, ts, detail={"bounds": [lower, upper]}, upserts=[entry])
        return entry

    def accept_blanks(self, reg: Registry, entry_id: str, accept: bool) -> WatchEntry:
        entry = self.entry(reg, entry_id)
        if entry.kind != EntryKind.DATA:
            raise MixedContentError(f"{entry_id} is not a data area")
        descriptor = entry.data_descriptor.model_copy(update={"accept_blank_as_zero": accept})
        entry.data_descriptor = entry.last_watched_data = descriptor
        entry.modified_at = ts = self.timestamp(reg)
        self.commit(reg, AuditVerb.STATUS, ts, detail={"accept_blank_as_zero": accept}, upserts=[entry])
        return entry

    def set_mode(self, reg: Registry, mode: Mode) -> None:
        reg.mode = mode
        self.commit(reg, AuditVerb.MODE, detail={"mode": mode.value}, mode=mode)

    def find_by_extent(self, reg: Registry, extent: AreaExtent) -> Optional[WatchEntry]:
        for entry in reg.entries.values():
            if entry.extent == extent and not entry.extent_lost:
                return entry
        return None


def replay(events: Sequence[AuditEvent], capacity: int = 10_000,
           mode: Mode = Mode.DEVELOPMENT) -> Registry:
    """Rebuild registry state from an audit log."""
    reg = Registry(capacity=capacity, mode=mode)
    for event in events:
        for entry in event.upserts:
            reg.entries[entry.id] = entry.model_copy(deep=True)
        for entry_id in event.removed:
            reg.entries.pop(entry_id, None)
        for key, group in event.groups.items():
            if group is None:
                reg.groups.pop(key, None)
            else:
                reg.groups[key] = group.model_copy(deep=True)
        if event.mode is not None:
            reg.mode = event.mode
        if event.next_id is not None:
            reg.next_id = event.next_id
        reg.audit.append(event)
    reg.invalidate_index()
    return reg
