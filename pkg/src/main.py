#!/usr/bin/env python3
import sys
from pathlib import Path
from typing import Tuple

from fastapi import Depends, FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
import uvicorn

from core.config import settings
from core.errors import (
    CycleError, NotAFormulaError, ShapeMismatchError, SleuthError, UnknownSheetError, UnknownWorkbookError,
    UnsupportedFunctionError,
)
from models.grid import WorkbookSet
from models.server import (
    EvalResponse, FindingOut, FindingsResponse, TraceResponse, TraceStepOut, UnwatchedArea, UnwatchedResponse,
)
from models.watch import Registry
from service.area_engine import find_unwatched_formulas
from service.checker import Checker
from service.evaluator import display, evaluate
from service.notation import parse_cell
from service.report_renderer import render_check_report, trace as trace_formula
from service.watch_service import WatchService
from service.watchfile import load_watchfile
from service.workbook_io import load_workbook_set

# --- Service Initialization ---
watch_service = WatchService(settings)
checker = Checker(settings, watch_service)

# --- FastAPI App Setup ---
app = FastAPI(
    title="SheetSleuth",
    description="Read-only view of a watched workbook set: check listing, findings, traces and values.",
    version="1.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET"],
    allow_headers=["*"],
)

State = Tuple[WorkbookSet, Registry]


def get_state() -> State:
    """Loaded fresh for every request."""
    if not settings.SLEUTH_WORKBOOK_SET:
        raise HTTPException(status_code=503, detail="SLEUTH_WORKBOOK_SET is not configured.")
    try:
        workbooks = load_workbook_set(settings.SLEUTH_WORKBOOK_SET)
        watchfile = Path(settings.SLEUTH_WATCHFILE) if settings.SLEUTH_WATCHFILE else None
        if watchfile is not None and watchfile.exists():
            reg = load_watchfile(watchfile)
        else:
            reg = watch_service.new_registry()
    except (SleuthError, OSError) as e:
        raise HTTPException(status_code=503, detail=f"Cannot load the workbook set: {e}")
    return workbooks, reg


def _cell(workbooks: WorkbookSet, text: str):
    try:
        addr = parse_cell(text, workbooks.default_id)
        workbooks.workbook(addr.workbook).sheet(addr.sheet)
    except (UnknownSheetError, UnknownWorkbookError) as e:
        raise HTTPException(status_code=404, detail=str(e))
    except SleuthError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return addr


@app.get("/health", summary="Check if the service is running")
def health_check():
    return {"status": "ok"}


@app.get("/report", summary="Check listing as text")
def get_report(fmt: str = Query("table", alias="format", pattern="^(table|delimited)$"),
               state: State = Depends(get_state)):
    workbooks, reg = state
    report = checker.check_all(workbooks, reg, commit=False)
    return Response(render_check_report(report, fmt), media_type="text/plain")


@app.get("/findings", summary="Findings of a check, without recording it", response_model=FindingsResponse)
def get_findings(state: State = Depends(get_state)):
    workbooks, reg = state
    report = checker.check_all(workbooks, reg, commit=False)
    findings = [
        FindingOut(entry_id=f.entry_id, location=f.location.label(), severity=f.severity.value,
                   code=f.code.value, message=f.message, detail=f.detail, fix_hint=f.fix_hint)
        for f in report.findings
    ]
    return {"count": len(findings), "errors": report.error_count, "warnings": report.warning_count,
            "findings": findings}


@app.get("/trace", summary="Trace the references of a formula", response_model=TraceResponse)
def get_trace(cell: str = Query(..., description="Cell address, e.g. Costs!H7"),
              depth: int = Query(0, ge=0, le=10),
              state: State = Depends(get_state)):
    workbooks, _ = state
    addr = _cell(workbooks, cell)
    try:
        steps = trace_formula(workbooks, addr, depth)
    except NotAFormulaError as e:
        raise HTTPException(status_code=400, detail=str(e))
    out = [TraceStepOut(depth=s.depth, cell=s.addr.label(), formula=s.formula, rows=s.rows) for s in steps]
    return {"count": len(out), "steps": out}


@app.get("/eval", summary="Evaluate one cell", response_model=EvalResponse)
def get_eval(cell: str = Query(..., description="Cell address, e.g. Costs!H7"),
             state: State = Depends(get_state)):
    workbooks, _ = state
    addr = _cell(workbooks, cell)
    try:
        value = evaluate(workbooks, addr)
    except (CycleError, UnsupportedFunctionError, ShapeMismatchError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {"cell": addr.label(), "value": display(value)}


@app.get("/unwatched", summary="Formula areas nothing watches", response_model=UnwatchedResponse)
def get_unwatched(state: State = Depends(get_state)):
    workbooks, reg = state
    areas = []
    for wb in workbooks.workbooks.values():
        for area in find_unwatched_formulas(wb, reg):
            areas.append(UnwatchedArea(location=area.extent.label(),
                                       generic=area.generic.r1c1_text if area.generic else None))
    return {"count": len(areas), "areas": areas}


if __name__ == "__main__":
    if not settings.SLEUTH_WORKBOOK_SET:
        print("WARNING: SLEUTH_WORKBOOK_SET is not set. Every data endpoint will answer 503.", file=sys.stderr)

    uvicorn.run(app, host=settings.UVICORN_HOST, port=settings.UVICORN_PORT)
