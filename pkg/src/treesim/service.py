# service.py
# ----------------------------------------------------------------------
# HTTP/JSON facade and project persistence: upload a log, get back the
# discovered tree and mined parameters, edit both, launch seeded runs on
# a bounded worker pool, fetch results, and compare a run's synthetic
# log to the source with EMD.
#
# DESIGN DECISIONS
#  - Persistence is one directory per project (source CSV, tree JSONs,
#    parameter JSONs, per-run dirs holding a snapshot + results), every
#    write goes to a temp file and is renamed into place, and the GET
#    endpoints read from disk: the store stays inspectable, diff-able,
#    and restart-safe with no external database.
#  - Runs execute on a FIFO thread pool; each run snapshots the tree and
#    parameters at submission, so later edits never leak into it.
#  - On startup, runs still marked queued/running are failed with
#    "interrupted by restart" (their worker is gone); completed runs
#    stay fully readable.
#  - Errors are always {code, message, detail}: 404 for unknown ids and
#    unresolvable node paths, 409 for rejected edits and results that
#    are not ready, 422 for malformed or invalid bodies.
#  - POST /projects takes JSON {"csv": "...", "mapping": {...}} rather
#    than a multipart upload; browser clients read the file locally and
#    post its text.
#  - Structural edits re-annotate the tree against the source log, and
#    any choice node left with an unobserved branch falls back to
#    uniform weights plus a warning; SetXorWeights/SetMaxRedo edits are
#    applied verbatim and skip re-annotation so user-set values stick.
#  - EMD against the source is computed on first request and cached in
#    the run directory.
# ----------------------------------------------------------------------
from __future__ import annotations

import io
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict

from .discovery import NoReplayableTraces, annotate_with_report, discover_tree
from .emd import emd, emd_to_json
from .eventlog import (
    ColumnMapping,
    EmptyLog,
    EventLog,
    LogError,
    parse_csv,
    parse_timestamp,
    variants,
    write_csv,
)
from .params import (
    ParamError,
    mine_parameters,
    params_from_json,
    params_to_json,
)
from .ptree import (
    BadNodeId,
    InvariantViolation,
    OperatorNode,
    ProcessTree,
    PTNode,
    SetMaxRedo,
    SetXorWeights,
    TreeError,
    activity_names,
    apply_edit,
    edit_from_json,
    render_tree,
    tree_from_json,
    tree_to_json,
)
from .simengine import SimConfig, SimError, result_summary, simulate

__all__ = ["ApiError", "create_app"]

DEFAULT_START = "2024-01-01 00:00:00"
_MAPPING_KEYS = frozenset(("case", "activity", "start", "end", "resource"))


class ApiError(Exception):
    """Error carrying the HTTP status and the {code, message, detail} body."""

    def __init__(self, status: int, code: str, message: str, detail: str = ""):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail

    def body(self) -> dict:
        return {"code": self.code, "message": self.message,
                "detail": self.detail}


def _domain_error(error: Exception) -> ApiError:
    if isinstance(error, ApiError):
        return error
    if isinstance(error, BadNodeId):
        return ApiError(404, "bad_node_id", "node id does not resolve",
                        str(error))
    if isinstance(error, InvariantViolation):
        return ApiError(409, "invariant_violation", "edit rejected",
                        str(error))
    code = {
        LogError: "bad_log", TreeError: "bad_tree", ParamError: "bad_params",
        SimError: "simulation_failed", NoReplayableTraces: "no_replay",
        ValueError: "invalid_value",
    }
    for kind, name in code.items():
        if isinstance(error, kind):
            return ApiError(422, name, type(error).__name__, str(error))
    raise error


# -- request bodies ------------------------------------------------------

class CreateProjectBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    csv: str
    mapping: Optional[dict[str, str]] = None


class TreePatchBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    edit: Optional[dict] = None
    reset: bool = False


class ParamsPutBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    params: Optional[dict] = None
    reset: bool = False


class RunBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    cases: int
    seed: int
    start: str = DEFAULT_START
    interrupt_activity: bool = False
    interrupt_case: bool = False
    windows: list[tuple[str, str]] = []
    process_capacity: Optional[int] = None


# -- persistence helpers -------------------------------------------------

def _write_atomic(path: Path, data: bytes) -> None:
    temp = path.with_name(path.name + ".tmp")
    temp.write_bytes(data)
    os.replace(temp, path)


def _write_json_atomic(path: Path, document: dict) -> None:
    _write_atomic(path, (json.dumps(document, indent=2) + "\n").encode())


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _now() -> str:
    # microsecond precision keeps the chronological run ordering stable
    return datetime.now(tz=timezone.utc).strftime("%Y-%m-%d %H:%M:%S.%f")


def _fail_interrupted(projects_root: Path) -> None:
    for meta_path in projects_root.glob("*/runs/*/meta.json"):
        meta = _read_json(meta_path)
        if meta.get("status") in ("queued", "running"):
            meta["status"] = "failed"
            meta["error"] = {"code": "interrupted",
                             "message": "interrupted by restart"}
            _write_json_atomic(meta_path, meta)


# -- tree re-annotation ----------------------------------------------------

def _uniform_unobserved(tree: ProcessTree, zero_paths: set,
                        warnings: list[str]) -> ProcessTree:
    def walk(node: PTNode, path: tuple[int, ...]) -> PTNode:
        if not isinstance(node, OperatorNode):
            return node
        children = tuple(walk(child, path + (i,))
                         for i, child in enumerate(node.children))
        weights = node.xor_weights
        if path in zero_paths:
            weights = (1.0 / len(children),) * len(children)
            warnings.append(
                f"choice at {list(path)} has unobserved branches; "
                "weights set to uniform")
        if children != node.children or weights != node.xor_weights:
            return replace(node, children=children, xor_weights=weights)
        return node

    return ProcessTree(walk(tree.root, ()), tree.max_trace_length)


def _reannotate(tree: ProcessTree, log: EventLog) -> tuple[ProcessTree, list[str]]:
    try:
        annotated, report = annotate_with_report(tree, log)
    except NoReplayableTraces:
        return tree, ["edited tree replays none of the source traces; "
                      "annotations left unchanged"]
    warnings = list(report.warnings)
    if report.unreplayable_traces:
        warnings.append(
            f"{report.unreplayable_traces} of "
            f"{report.replayed_traces + report.unreplayable_traces} source "
            "traces no longer replay on the edited tree")
    zero_paths = {path for path, counts in report.xor_counts.items()
                  if 0 in counts}
    return _uniform_unobserved(annotated, zero_paths, warnings), warnings


# -- merge for partial parameter updates -----------------------------------

def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        merged = dict(base)
        for key, value in override.items():
            merged[key] = (_merge(base[key], value)
                           if key in base else value)
        return merged
    return override


# -- the application --------------------------------------------------------

def create_app(root: Path | str, workers: int = 2,
               ui_dir: Path | str | None = None) -> FastAPI:
    root = Path(root)
    projects_root = root / "projects"
    projects_root.mkdir(parents=True, exist_ok=True)
    _fail_interrupted(projects_root)

    executor = ThreadPoolExecutor(max_workers=max(1, workers))
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    app = FastAPI(title="treesim service")
    app.state.executor = executor

    def lock_for(project_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(project_id, threading.Lock())

    def project_dir(project_id: str) -> Path:
        directory = projects_root / project_id
        if not directory.is_dir():
            raise ApiError(404, "unknown_project",
                           f"no project {project_id!r}")
        return directory

    def run_dir(run_id: str) -> Path:
        matches = sorted(projects_root.glob(f"*/runs/{run_id}"))
        if not matches:
            raise ApiError(404, "unknown_run", f"no run {run_id!r}")
        return matches[0]

    # -- documents -------------------------------------------------------

    def run_doc(directory: Path) -> dict:
        doc = _read_json(directory / "meta.json")
        if doc["status"] == "done":
            kpi_path = directory / "kpis.json"
            doc["kpis"] = _read_json(kpi_path) if kpi_path.exists() else None
            emd_path = directory / "emd.json"
            if emd_path.exists():
                doc["emd"] = _read_json(emd_path)["distance"]
        return doc

    def project_doc(directory: Path) -> dict:
        meta = _read_json(directory / "meta.json")
        tree = tree_from_json(_read_json(directory / "tree.json"))
        mined = tree_from_json(_read_json(directory / "mined_tree.json"))
        runs = sorted((run_doc(run) for run in
                       sorted((directory / "runs").glob("*"))
                       if (run / "meta.json").exists()),
                      key=lambda doc: (doc["created"], doc["id"]))
        return {
            "id": meta["id"],
            "created": meta["created"],
            "tree": tree_to_json(tree),
            "tree_text": render_tree(tree),
            "mined_tree": tree_to_json(mined),
            "mined_tree_text": render_tree(mined),
            "params": _read_json(directory / "params.json"),
            "mined_params": _read_json(directory / "mined_params.json"),
            "warnings": meta["warnings"] + meta.get("tree_warnings", []),
            "source": meta["source"],
            "runs": runs,
        }

    # -- error handlers -----------------------------------------------------

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, error: ApiError):
        return JSONResponse(status_code=error.status, content=error.body())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request,
                                 error: RequestValidationError):
        detail = "; ".join(
            f"{'.'.join(str(p) for p in item['loc'])}: {item['msg']}"
            for item in error.errors())
        return JSONResponse(
            status_code=422,
            content={"code": "validation_error",
                     "message": "invalid request body", "detail": detail})

    # -- endpoints ---------------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody) -> dict:
        mapping = ColumnMapping()
        if body.mapping:
            unknown = set(body.mapping) - _MAPPING_KEYS
            if unknown:
                raise ApiError(422, "bad_mapping",
                               "unknown mapping keys",
                               ", ".join(sorted(unknown)))
            mapping = ColumnMapping(**body.mapping)
        try:
            log = parse_csv(io.BytesIO(body.csv.encode("utf-8")), mapping)
            tree, report = annotate_with_report(discover_tree(log), log)
            params, param_warnings = mine_parameters(
                log, activity_names(tree))
        except Exception as error:
            raise _domain_error(error) from error

        project_id = uuid.uuid4().hex[:12]
        directory = projects_root / project_id
        (directory / "runs").mkdir(parents=True)
        _write_atomic(directory / "source.csv", body.csv.encode("utf-8"))
        _write_json_atomic(directory / "tree.json", tree_to_json(tree))
        _write_json_atomic(directory / "mined_tree.json", tree_to_json(tree))
        _write_json_atomic(directory / "params.json", params_to_json(params))
        _write_json_atomic(directory / "mined_params.json",
                           params_to_json(params))
        _write_json_atomic(directory / "meta.json", {
            "id": project_id,
            "created": _now(),
            "warnings": list(report.warnings) + list(param_warnings),
            "tree_warnings": [],
            "source": {
                "cases": len(log.traces),
                "events": sum(len(t.events) for t in log.traces),
                "activities": sorted(log.alphabet),
                "variants": len(variants(log)),
                "replayed": report.replayed_traces,
                "unreplayable": report.unreplayable_traces,
            },
        })
        return project_doc(directory)

    @app.get("/projects/{project_id}")
    def get_project(project_id: str) -> dict:
        return project_doc(project_dir(project_id))

    @app.patch("/projects/{project_id}/tree")
    def patch_tree(project_id: str, body: TreePatchBody) -> dict:
        directory = project_dir(project_id)
        if body.reset == (body.edit is not None):
            raise ApiError(422, "bad_patch",
                           "provide exactly one of 'edit' or 'reset'")
        with lock_for(project_id):
            meta = _read_json(directory / "meta.json")
            if body.reset:
                tree = tree_from_json(_read_json(directory / "mined_tree.json"))
                warnings: list[str] = []
            else:
                try:
                    edit = edit_from_json(body.edit)
                    tree = tree_from_json(_read_json(directory / "tree.json"))
                    tree = apply_edit(tree, edit)
                except Exception as error:
                    raise _domain_error(error) from error
                if isinstance(edit, (SetXorWeights, SetMaxRedo)):
                    warnings = meta.get("tree_warnings", [])
                else:
                    with open(directory / "source.csv", "rb") as stream:
                        log = parse_csv(stream)
                    tree, warnings = _reannotate(tree, log)
            _write_json_atomic(directory / "tree.json", tree_to_json(tree))
            meta["tree_warnings"] = warnings
            _write_json_atomic(directory / "meta.json", meta)
        return {"tree": tree_to_json(tree), "tree_text": render_tree(tree),
                "warnings": warnings}

    @app.put("/projects/{project_id}/params")
    def put_params(project_id: str, body: ParamsPutBody) -> dict:
        directory = project_dir(project_id)
        if body.reset == (body.params is not None):
            raise ApiError(422, "bad_params_update",
                           "provide exactly one of 'params' or 'reset'")
        with lock_for(project_id):
            if body.reset:
                document = _read_json(directory / "mined_params.json")
            else:
                document = _merge(_read_json(directory / "params.json"),
                                  body.params)
            try:
                params = params_from_json(document)
            except ParamError as error:
                raise _domain_error(error) from error
            document = params_to_json(params)
            _write_json_atomic(directory / "params.json", document)
        return {"params": document}

    @app.post("/projects/{project_id}/runs", status_code=201)
    def start_run(project_id: str, body: RunBody) -> dict:
        directory = project_dir(project_id)
        if body.cases < 1:
            raise ApiError(422, "bad_config", "cases must be at least 1")
        try:
            start_time = parse_timestamp(body.start)
            windows = [(parse_timestamp(begin), parse_timestamp(end))
                       for begin, end in body.windows]
        except ValueError as error:
            raise _domain_error(error) from error
        for (begin, end), pair in zip(windows, body.windows):
            if end <= begin:
                raise ApiError(422, "bad_config",
                               "window ends before it begins",
                               " / ".join(pair))
        if body.process_capacity is not None and body.process_capacity < 1:
            raise ApiError(422, "bad_config",
                           "process_capacity must be at least 1")

        run_id = uuid.uuid4().hex[:12]
        run_directory = directory / "runs" / run_id
        run_directory.mkdir(parents=True)
        with lock_for(project_id):
            tree_doc = _read_json(directory / "tree.json")
            params_doc = _read_json(directory / "params.json")
        _write_json_atomic(run_directory / "tree.json", tree_doc)
        _write_json_atomic(run_directory / "params.json", params_doc)
        _write_json_atomic(run_directory / "meta.json", {
            "id": run_id,
            "project_id": project_id,
            "status": "queued",
            "created": _now(),
            "config": {
                "cases": body.cases, "seed": body.seed, "start": body.start,
                "interrupt_activity": body.interrupt_activity,
                "interrupt_case": body.interrupt_case,
                "windows": [list(pair) for pair in body.windows],
                "process_capacity": body.process_capacity,
            },
            "error": None,
        })
        config = SimConfig(
            num_cases=body.cases, start_time=start_time, seed=body.seed,
            interrupt_activity=body.interrupt_activity,
            interrupt_case=body.interrupt_case,
            interrupt_process=tuple(windows) if windows else None,
            process_capacity_override=body.process_capacity)
        executor.submit(_execute_run, run_directory, config)
        return run_doc(run_directory)

    def _execute_run(run_directory: Path, config: SimConfig) -> None:
        meta_path = run_directory / "meta.json"
        meta = _read_json(meta_path)
        meta["status"] = "running"
        _write_json_atomic(meta_path, meta)
        try:
            tree = tree_from_json(_read_json(run_directory / "tree.json"))
            params = params_from_json(
                _read_json(run_directory / "params.json"))
            result = simulate(tree, params, config)
            _write_atomic(run_directory / "log.csv", write_csv(result.log))
            _write_json_atomic(run_directory / "kpis.json",
                               result_summary(result))
            meta["status"] = "done"
        except Exception as error:
            meta["status"] = "failed"
            meta["error"] = {"code": type(error).__name__,
                             "message": str(error)}
        _write_json_atomic(meta_path, meta)

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        return run_doc(run_dir(run_id))

    def _finished_run(run_id: str) -> Path:
        directory = run_dir(run_id)
        status = _read_json(directory / "meta.json")["status"]
        if status != "done":
            raise ApiError(409, "not_ready",
                           f"run {run_id!r} is {status}, not done")
        return directory

    @app.get("/runs/{run_id}/log.csv")
    def download_log(run_id: str) -> Response:
        directory = _finished_run(run_id)
        return Response(content=(directory / "log.csv").read_bytes(),
                        media_type="text/csv")

    @app.get("/runs/{run_id}/emd")
    def run_emd(run_id: str) -> dict:
        directory = _finished_run(run_id)
        cached = directory / "emd.json"
        if cached.exists():
            return _read_json(cached)
        project_directory = directory.parent.parent
        with open(project_directory / "source.csv", "rb") as stream:
            source = parse_csv(stream)
        with open(directory / "log.csv", "rb") as stream:
            synthetic = parse_csv(stream)
        try:
            document = emd_to_json(emd(source, synthetic))
        except (EmptyLog, LogError) as error:
            raise _domain_error(error) from error
        _write_json_atomic(cached, document)
        return document

    if ui_dir is not None:
        # same-origin static mount for the browser UI; API routes above win
        ui_path = Path(ui_dir)
        if not (ui_path / "index.html").is_file():
            raise ValueError(f"--ui directory {ui_path} has no index.html")
        app.mount("/ui", StaticFiles(directory=ui_path, html=True), name="ui")

    return app
