"""Sidecar watchfile: the registry of one workbook set as versioned text.

    SLEUTHFILE v1
    mode Development
    capacity 10000
    next_id 7
    [entries]
    {"id": "e1", ...}
    [groups]
    {"name": "CardRows", ...}
    [audit]
    {"timestamp": ..., "verb": "Watch", ...}
"""
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Union

from pydantic import ValidationError

from core import log
from core.errors import CorruptWatchfileError, LockError, VersionMismatchError
from models.grid import fold
from models.watch import SLEUTHFILE_VERSION, AuditEvent, GroupDef, Mode, Registry, WatchEntry

HEADER = "SLEUTHFILE"
SECTIONS = ("[entries]", "[groups]", "[audit]")


def dump_watchfile(reg: Registry) -> str:
    lines = [
        f"{HEADER} {SLEUTHFILE_VERSION}",
        f"mode {reg.mode.value}",
        f"capacity {reg.capacity}",
        f"next_id {reg.next_id}",
        "[entries]",
    ]
    lines += [e.model_dump_json() for e in sorted(reg.entries.values(), key=lambda e: (len(e.id), e.id))]
    lines.append("[groups]")
    lines += [reg.groups[k].model_dump_json() for k in sorted(reg.groups)]
    lines.append("[audit]")
    lines += [event.model_dump_json() for event in reg.audit]
    return "\n".join(lines) + "\n"


def _header_value(lines: List[str], index: int, key: str) -> str:
    if index >= len(lines):
        raise CorruptWatchfileError(f"missing {key} line")
    found, _, value = lines[index].partition(" ")
    if found != key or not value:
        raise CorruptWatchfileError(f"line {index + 1}: expected '{key} <value>'")
    return value.strip()


def parse_watchfile(text: str) -> Registry:
    lines = [line.rstrip("\r") for line in text.splitlines()]
    if not lines or not lines[0].startswith(HEADER + " "):
        raise CorruptWatchfileError(f"missing {HEADER} header")
    version = lines[0][len(HEADER) + 1:].strip()
    if version != SLEUTHFILE_VERSION:
        raise VersionMismatchError(f"watchfile version {version!r}, expected {SLEUTHFILE_VERSION!r}")

    try:
        mode = Mode(_header_value(lines, 1, "mode"))
        capacity = int(_header_value(lines, 2, "capacity"))
        next_id = int(_header_value(lines, 3, "next_id"))
    except ValueError as e:
        raise CorruptWatchfileError(str(e)) from None

    sections = {name: [] for name in SECTIONS}
    current = None
    for number, line in enumerate(lines[4:], start=5):
        if not line.strip():
            continue
        if line in sections:
            current = line
            continue
        if current is None:
            raise CorruptWatchfileError(f"line {number}: record outside a section")
        sections[current].append((number, line))

    reg = Registry(capacity=capacity, mode=mode, next_id=next_id)
    try:
        for number, line in sections["[entries]"]:
            entry = WatchEntry.model_validate_json(line)
            if entry.id in reg.entries:
                raise CorruptWatchfileError(f"line {number}: duplicate entry {entry.id}")
            reg.entries[entry.id] = entry
        for number, line in sections["[groups]"]:
            group = GroupDef.model_validate_json(line)
            reg.groups[fold(group.name)] = group
        for number, line in sections["[audit]"]:
            reg.audit.append(AuditEvent.model_validate_json(line))
    except ValidationError as e:
        raise CorruptWatchfileError(f"line {number}: {e.errors()[0]['msg']}") from None
    except json.JSONDecodeError as e:
        raise CorruptWatchfileError(f"line {number}: {e}") from None

    for group in reg.groups.values():
        missing = [m for m in group.members if m not in reg.entries]
        if missing:
            raise CorruptWatchfileError(f"group {group.name!r} names unknown entries {missing}")
    reg.invalidate_index()
    return reg


def load_watchfile(path: Union[str, Path]) -> Registry:
    path = Path(path)
    reg = parse_watchfile(path.read_text(encoding="utf-8"))
    log.info(f"Loaded {len(reg.entries)} watch entries from {path}")
    return reg


def save_watchfile(reg: Registry, path: Union[str, Path]) -> None:
    """Replaces the file atomically through `<name>.tmp`."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dump_watchfile(reg), encoding="utf-8")
    os.replace(tmp, path)


@contextmanager
def watchfile_lock(path: Union[str, Path]) -> Iterator[Path]:
    lock = Path(str(path) + ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{lock} exists; another sleuth command holds the watchfile") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield lock
    finally:
        try:
            os.unlink(lock)
        except FileNotFoundError:
            pass
