#!/usr/bin/env python3
"""sleuth: watch spreadsheet areas, check them, and restructure them safely.

    sleuth watch model/ Costs!H5:I6
    sleuth check model/ --watchfile model.sleuth
    sleuth insert model/ --group CardRows --below 7
"""
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import click

from core import log
from core.config import Settings, settings as default_settings
from core.errors import ModeError, SleuthError
from models.edit import EditResult
from models.finding import Report, Severity
from models.grid import WorkbookSet
from models.watch import EntryKind, EntryStatus, GroupAxis, Mode, Registry
from service.area_engine import find_unwatched_formulas
from service.checker import Checker
from service.edit_script import EditScriptRunner
from service.evaluator import display, evaluate
from service.notation import parse_cell, parse_column, parse_extent
from service.report_renderer import (
    render_annotated, render_areas, render_check_report, render_error_contexts, render_findings,
    render_trace, trace,
)
from service.structural_service import StructuralService
from service.watch_service import WatchService
from service.watchfile import load_watchfile, save_watchfile, watchfile_lock
from service.workbook_io import load_workbook_set, save_workbook_set

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_FAILURE = 2

# Verbs that work in Operational mode whatever SLEUTH_READ_ONLY_VERBS says.
ALWAYS_ALLOWED = frozenset({"mode", "apply", "eval", "find", "serve"})


def default_watchfile(workbook_set: str) -> Path:
    """`model/` -> `model.sleuth`, `model.swt` -> `model.sleuth`."""
    path = Path(workbook_set.rstrip("/\\") or ".")
    return path.with_suffix(".sleuth") if path.suffix == ".swt" else path.with_name(path.name + ".sleuth")


@dataclass
class Session:
    """Everything one invocation loads, mutates and writes back."""
    settings: Settings
    mode_override: Optional[Mode] = None
    workbook_path: Optional[str] = None
    watchfile: Optional[Path] = None
    workbooks: Optional[WorkbookSet] = None
    registry: Optional[Registry] = None
    stored_mode: Optional[Mode] = None
    watch_service: WatchService = field(init=False)
    checker: Checker = field(init=False)
    structural: StructuralService = field(init=False)

    def __post_init__(self):
        self.watch_service = WatchService(self.settings)
        self.checker = Checker(self.settings, self.watch_service)
        self.structural = StructuralService(self.settings, self.watch_service, self.checker)

    @contextmanager
    def open(self, workbook_path: str, watchfile: Optional[str]) -> Iterator["Session"]:
        """Lock the watchfile, then load the set and registry under the lock."""
        self.workbook_path = workbook_path
        self.watchfile = Path(watchfile) if watchfile else default_watchfile(workbook_path)
        with watchfile_lock(self.watchfile):
            self.workbooks = load_workbook_set(workbook_path)
            if self.watchfile.exists():
                self.registry = load_watchfile(self.watchfile)
            else:
                log.info(f"{self.watchfile} not found; starting an empty registry")
                self.registry = self.watch_service.new_registry()
            self.stored_mode = self.registry.mode
            if self.mode_override is not None:
                self.registry.mode = self.mode_override
            yield self

    @property
    def mode(self) -> Mode:
        return self.registry.mode

    def require(self, verb: str) -> None:
        allowed = {v.lower() for v in self.settings.SLEUTH_READ_ONLY_VERBS} | ALWAYS_ALLOWED
        if self.mode == Mode.OPERATIONAL and verb not in allowed:
            raise ModeError(f"{verb} is not available in Operational mode")

    def adopt(self, result: EditResult) -> None:
        self.workbooks = result.workbooks
        self.registry = result.registry

    def save(self, workbooks: bool = False) -> None:
        if self.mode_override is not None:
            self.registry.mode = self.stored_mode
        save_watchfile(self.registry, self.watchfile)
        if workbooks:
            save_workbook_set(self.workbooks, self.workbook_path)

    def extent(self, text: str):
        return parse_extent(text, self.workbooks.default_id)

    def cell(self, text: str):
        return parse_cell(text, self.workbooks.default_id)


pass_session = click.make_pass_decorator(Session)

workbook_argument = click.argument("workbook_set", type=click.Path(exists=True))
watchfile_option = click.option("--watchfile", type=click.Path(), default=None,
                                help="Registry file; defaults to <workbook set>.sleuth")


def _print_result_findings(result: EditResult) -> int:
    if result.findings:
        report = Report(generated_at=datetime.now(), findings=result.findings)
        click.echo(render_findings(report), nl=False)
    return EXIT_FINDINGS if any(f.severity == Severity.ERROR for f in result.findings) else EXIT_OK


@click.group()
@click.option("--mode", "mode", type=click.Choice([m.value for m in Mode], case_sensitive=False), default=None,
              help="Override the watchfile's mode for this invocation.")
@click.option("--verbose", is_flag=True, help="Progress lines on stderr.")
@click.pass_context
def cli(ctx: click.Context, mode: Optional[str], verbose: bool):
    settings = ctx.obj if isinstance(ctx.obj, Settings) else default_settings
    if verbose:
        settings.SLEUTH_VERBOSE = True
    override = Mode(mode.capitalize()) if mode else None
    ctx.obj = Session(settings=settings, mode_override=override)


# --- registry verbs ---

@cli.command()
@workbook_argument
@click.argument("extent")
@watchfile_option
@click.option("--kind", type=click.Choice([k.value for k in EntryKind], case_sensitive=False), default=None)
@click.option("--fill", is_flag=True, help="Fill the area from its top-left formula first.")
@click.option("--bounds", nargs=2, type=float, default=None, help="User bounds LOWER UPPER for a data area.")
@click.option("--accept-blanks", is_flag=True, help="Treat blanks in a data area as zero.")
@click.option("--guard-for", default=None, help="Entry id this guard area protects.")
@pass_session
def watch(session: Session, workbook_set, extent, watchfile, kind, fill, bounds, accept_blanks, guard_for):
    """Watch an area."""
    with session.open(workbook_set, watchfile):
        session.require("watch")
        ws = session.watch_service
        hint = EntryKind(kind.capitalize()) if kind else None
        entry = ws.watch_area(session.registry, session.workbooks, session.extent(extent), hint, fill, guard_for)
        if bounds:
            ws.set_bounds(session.registry, entry.id, *bounds)
        if accept_blanks:
            ws.accept_blanks(session.registry, entry.id, True)
        session.save(workbooks=fill)
    click.echo(f"{entry.id}  {entry.kind.value}  {entry.extent.label()}")
    return EXIT_OK


@cli.command()
@workbook_argument
@click.argument("entry_ids", nargs=-1, required=True)
@watchfile_option
@pass_session
def unwatch(session: Session, workbook_set, entry_ids, watchfile):
    """Delete watch entries."""
    with session.open(workbook_set, watchfile):
        session.require("unwatch")
        for entry_id in entry_ids:
            session.watch_service.unwatch(session.registry, entry_id)
        session.save()
    return EXIT_OK


@cli.command()
@workbook_argument
@watchfile_option
@pass_session
def find(session: Session, workbook_set, watchfile):
    """List formula areas nothing watches."""
    areas = []
    with session.open(workbook_set, watchfile):
        for wb in session.workbooks.workbooks.values():
            areas += find_unwatched_formulas(wb, session.registry)
    click.echo(render_areas(areas), nl=False)
    return EXIT_OK


@cli.command()
@workbook_argument
@click.argument("name")
@click.argument("entry_ids", nargs=-1, required=True)
@watchfile_option
@click.option("--axis", type=click.Choice(["row", "column"], case_sensitive=False), default="row")
@pass_session
def group(session: Session, workbook_set, name, entry_ids, watchfile, axis):
    """Group entries for insert/delete."""
    with session.open(workbook_set, watchfile):
        session.require("group")
        g = session.watch_service.assign_group(session.registry, entry_ids, name, GroupAxis(axis.capitalize()))
        session.save()
    click.echo(f"{g.name}: {', '.join(g.members)}")
    return EXIT_OK


@cli.command()
@workbook_argument
@click.argument("entry_id")
@click.argument("status", type=click.Choice(["final", "normal"], case_sensitive=False))
@watchfile_option
@pass_session
def status(session: Session, workbook_set, entry_id, status, watchfile):
    """Mark a formula area as a final result, or back to normal."""
    with session.open(workbook_set, watchfile):
        session.require("status")
        value = EntryStatus.FINAL_RESULT if status.lower() == "final" else EntryStatus.NORMAL
        session.watch_service.set_status(session.registry, entry_id, value)
        session.save()
    return EXIT_OK


@cli.command()
@workbook_argument
@click.argument("mode", type=click.Choice([m.value for m in Mode], case_sensitive=False))
@watchfile_option
@pass_session
def mode(session: Session, workbook_set, mode, watchfile):
    """Switch the watchfile between Development and Operational mode."""
    with session.open(workbook_set, watchfile):
        session.watch_service.set_mode(session.registry, Mode(mode.capitalize()))
        session.stored_mode = session.registry.mode
        session.save()
    click.echo(f"mode {session.registry.mode.value}")
    return EXIT_OK


# --- checking ---

def _render_report(session: Session, report, fmt: Optional[str], annotate: bool, context: Optional[int]) -> None:
    click.echo(render_check_report(report, fmt or session.settings.SLEUTH_REPORT_FORMAT), nl=False)
    if context is not None:
        click.echo(render_error_contexts(session.workbooks, report, context), nl=False)
    if annotate:
        changed = [e.extent for e in session.registry.sorted_entries() if e.change_flag]
        click.echo(render_annotated(session.workbooks, report, changed), nl=False)


report_options = [
    click.option("--format", "fmt", type=click.Choice(["table", "delimited"]), default=None),
    click.option("--annotate", is_flag=True, help="Dump the grid with !err / ~chg marks."),
    click.option("--context", type=click.IntRange(min=0), default=None,
                 help="Print N rows/columns around every error location."),
]


def with_report_options(fn):
    for option in reversed(report_options):
        fn = option(fn)
    return fn


@cli.command()
@workbook_argument
@watchfile_option
@with_report_options
@pass_session
def check(session: Session, workbook_set, watchfile, fmt, annotate, context):
    """Check every watched area and record the check."""
    with session.open(workbook_set, watchfile):
        session.require("check")
        report = session.checker.check_all(session.workbooks, session.registry)
        session.save()
    _render_report(session, report, fmt, annotate, context)
    return EXIT_FINDINGS if report.error_count else EXIT_OK


@cli.command()
@workbook_argument
@watchfile_option
@with_report_options
@pass_session
def report(session: Session, workbook_set, watchfile, fmt, annotate, context):
    """Print the check listing without recording anything."""
    with session.open(workbook_set, watchfile):
        session.require("report")
        result = session.checker.check_all(session.workbooks, session.registry, commit=False)
    _render_report(session, result, fmt, annotate, context)
    return EXIT_FINDINGS if result.error_count else EXIT_OK


@cli.command()
@workbook_argument
@click.argument("entry_id")
@click.argument("decision", type=click.Choice(["accept", "reject"], case_sensitive=False))
@watchfile_option
@pass_session
def fix(session: Session, workbook_set, entry_id, decision, watchfile):
    """Accept the area as it is now, or restore it from its watched master."""
    with session.open(workbook_set, watchfile):
        session.require("fix")
        result = session.structural.fix_area(session.workbooks, session.registry, entry_id,
                                             decision.lower() == "accept")
        session.adopt(result)
        session.save(workbooks=True)
    return _print_result_findings(result)


# --- structural edits ---

def _run_structural(session: Session, workbook_set: str, watchfile: Optional[str], verb: str,
                    action: Callable[[Session], EditResult]) -> int:
    with session.open(workbook_set, watchfile):
        session.require(verb)
        result = action(session)
        session.adopt(result)
        session.save(workbooks=True)
    if result.detail:
        click.echo(" ".join(f"{k}={v}" for k, v in result.detail.items()))
    return _print_result_findings(result)


@cli.command()
@workbook_argument
@watchfile_option
@click.option("--group", "group_name", required=True)
@click.option("--below", type=int, default=None, help="Insert rows below this row.")
@click.option("--right", default=None, help="Insert columns right of this column.")
@click.option("--count", type=click.IntRange(min=1), default=1)
@pass_session
def insert(session: Session, workbook_set, watchfile, group_name, below, right, count):
    """Insert rows or columns into every member of a group."""
    if (below is None) == (right is None):
        raise click.UsageError("give exactly one of --below and --right")
    axis, anchor = (GroupAxis.ROW, below) if below is not None else (GroupAxis.COLUMN, parse_column(right))
    return _run_structural(session, workbook_set, watchfile, "insert", lambda s: s.structural.insert_in_group(
        s.workbooks, s.registry, group_name, axis, anchor, count))


@cli.command()
@workbook_argument
@watchfile_option
@click.option("--group", "group_name", required=True)
@click.option("--rows", "row", type=int, default=None, help="First row to delete.")
@click.option("--cols", "col", default=None, help="First column to delete.")
@click.option("--count", type=click.IntRange(min=1), default=1)
@pass_session
def delete(session: Session, workbook_set, watchfile, group_name, row, col, count):
    """Delete rows or columns from every member of a group."""
    if (row is None) == (col is None):
        raise click.UsageError("give exactly one of --rows and --cols")
    axis, index = (GroupAxis.ROW, row) if row is not None else (GroupAxis.COLUMN, parse_column(col))
    return _run_structural(session, workbook_set, watchfile, "delete", lambda s: s.structural.delete_in_group(
        s.workbooks, s.registry, group_name, axis, index, count))


@cli.command()
@workbook_argument
@click.argument("source")
@click.argument("destination")
@watchfile_option
@pass_session
def move(session: Session, workbook_set, source, destination, watchfile):
    """Move a watched area; everything reading it follows."""
    def action(s: Session) -> EditResult:
        source_extent = s.extent(source)
        target = parse_cell(destination, s.workbooks.default_id, source_extent.sheet)
        return s.structural.move_area(s.workbooks, s.registry, source_extent, target)

    return _run_structural(session, workbook_set, watchfile, "move", action)


@cli.command()
@workbook_argument
@click.argument("entry_ids", nargs=-1, required=True)
@click.option("--to", "destination", required=True, help="Top-left cell of the copy.")
@watchfile_option
@pass_session
def replicate(session: Session, workbook_set, entry_ids, destination, watchfile):
    """Copy watched areas as one block; references between them follow the copy."""
    return _run_structural(session, workbook_set, watchfile, "replicate", lambda s: s.structural.replicate(
        s.workbooks, s.registry, list(entry_ids), s.cell(destination)))


@cli.command()
@workbook_argument
@click.argument("script", type=click.File("r"))
@watchfile_option
@pass_session
def apply(session: Session, workbook_set, script, watchfile):
    """Replay an edit script."""
    runner = EditScriptRunner(session.settings, session.structural)
    with session.open(workbook_set, watchfile):
        session.require("apply")
        result = runner.apply_text(session.workbooks, session.registry, script.read())
        session.adopt(result)
        session.save(workbooks=True)
    click.echo(f"applied {len(result.events)} audited step(s)")
    return _print_result_findings(result)


# --- reading ---

@cli.command(name="trace")
@workbook_argument
@click.argument("cell")
@click.option("--depth", type=click.IntRange(min=0), default=0)
@watchfile_option
@pass_session
def trace_command(session: Session, workbook_set, cell, depth, watchfile):
    """Break a formula into its references, following them DEPTH levels down."""
    with session.open(workbook_set, watchfile):
        session.require("trace")
        steps = trace(session.workbooks, session.cell(cell), depth)
    click.echo(render_trace(steps), nl=False)
    return EXIT_OK


@cli.command(name="eval")
@workbook_argument
@click.argument("cells", nargs=-1, required=True)
@watchfile_option
@pass_session
def eval_command(session: Session, workbook_set, cells, watchfile):
    """Evaluate cells (SUM, SUMPRODUCT, ROUNDUP, MAX, MIN, IF and operators)."""
    with session.open(workbook_set, watchfile):
        for text in cells:
            addr = session.cell(text)
            click.echo(f"{addr.label()}  {display(evaluate(session.workbooks, addr))}")
    return EXIT_OK


@cli.command()
@workbook_argument
@watchfile_option
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@pass_session
def serve(session: Session, workbook_set, watchfile, host, port):
    """Serve the read-only HTTP endpoints."""
    import uvicorn

    settings = session.settings
    settings.SLEUTH_WORKBOOK_SET = workbook_set
    settings.SLEUTH_WATCHFILE = str(watchfile or default_watchfile(workbook_set))
    from main import app  # the app reads core.config.settings per request
    uvicorn.run(app, host=host or settings.UVICORN_HOST, port=port or settings.UVICORN_PORT)
    return EXIT_OK


def run(argv: Sequence[str], settings: Optional[Settings] = None) -> int:
    """Invoke one verb; returns the process exit code instead of exiting."""
    try:
        code = cli.main(args=list(argv), prog_name="sleuth", standalone_mode=False, obj=settings)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_FAILURE
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_FAILURE
    except (SleuthError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_FAILURE
    return code if isinstance(code, int) else EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
