"""HTTP service exposing the simulator: upload scenarios, launch runs on a
bounded worker pool, poll status, fetch results.

All payloads use the field names of the owning modules; the API surface is
frozen under /api/v1. Results are pull-based (polling); no push channel.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .clustering import ClusterConfig, list_algorithms
from .engine import RunConfig, run_simulation
from .errors import (
    ConfigError,
    NotFoundError,
    ParseError,
    RunCancelled,
    UsageError,
    ValidationFailed,
)
from .postproc import emit_graph_csv, record_to_jsonl_line, summary_to_json
from .storage import Store
from .trace_ingest import parse_scenario

DEFAULT_MAX_UPLOAD = 256 * 1024 * 1024
_XML_TYPES = ("application/xml", "text/xml")
_CSV_TYPES = ("text/csv",)


class RunManager:
    """Executes runs on a bounded FIFO pool and tracks their cancel flags."""

    def __init__(self, store: Store, max_workers: int = 2):
        self.store = store
        self.pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="run")
        self.cancel_flags: dict[str, threading.Event] = {}
        self.lock = threading.Lock()
        self.shutting_down = False

    def submit(self, rid: str) -> None:
        with self.lock:
            self.cancel_flags[rid] = threading.Event()
        self.pool.submit(self._execute, rid)

    def cancel(self, rid: str) -> None:
        with self.lock:
            flag = self.cancel_flags.get(rid)
        if flag is not None:
            flag.set()
        rec = self.store.get_run(rid)
        if rec.status == "queued":
            try:
                self.store.update_run(rid, status="cancelled")
            except UsageError:
                pass  # raced into running; the flag handles it

    def shutdown(self) -> None:
        # Abandon in-flight runs without touching their status: a later
        # restart marks them failed "interrupted" (storage recovery).
        self.shutting_down = True
        with self.lock:
            for flag in self.cancel_flags.values():
                flag.set()
        self.pool.shutdown(wait=True, cancel_futures=True)

    def _execute(self, rid: str) -> None:
        store = self.store
        flag = self.cancel_flags[rid]
        if flag.is_set():
            return  # cancelled while queued; status already set
        try:
            store.update_run(rid, status="running")
        except UsageError:
            return
        appender = None
        try:
            rec = store.get_run(rid)
            scen_rec = store.get_scenario(rec.scenario_id)
            scenario = parse_scenario(scen_rec.body, scen_rec.fmt, name=scen_rec.name)
            cluster = ClusterConfig(**rec.config["cluster"])
            appender = store.report_appender(rid, fmt="jsonl")

            last_progress = [0.0]

            def on_progress(p: float) -> None:
                if p - last_progress[0] >= 0.01 or p >= 1.0:
                    last_progress[0] = p
                    store.update_run(rid, progress=p)

            result = run_simulation(
                RunConfig(scenario=scenario, cluster=cluster),
                record_sink=lambda rs: appender.write_lines(
                    [record_to_jsonl_line(r) for r in rs]
                ),
                progress=on_progress,
                cancel=flag,
            )
            appender.close()
            store.attach_artifacts(
                rid,
                summary=summary_to_json(result.summary),
                graph=emit_graph_csv(list(result.series)),
            )
            store.update_run(rid, status="done", progress=1.0)
        except RunCancelled:
            if appender is not None:
                appender.close()
            if not self.shutting_down:
                store.update_run(rid, status="cancelled")
        except Exception as exc:  # failed run keeps the message for the client
            if appender is not None:
                appender.close()
            if not self.shutting_down:
                try:
                    store.update_run(rid, status="failed", error=str(exc))
                except UsageError:
                    pass
        finally:
            with self.lock:
                self.cancel_flags.pop(rid, None)


def _scenario_payload(rec) -> dict:
    return {
        "id": rec.id,
        "name": rec.name,
        "created_at": rec.created_at,
        "n_timesteps": rec.n_timesteps,
        "n_vehicles": rec.n_vehicles,
        "warnings": rec.warnings,
    }


def _run_payload(rec) -> dict:
    return {
        "id": rec.id,
        "scenario_id": rec.scenario_id,
        "config": rec.config,
        "status": rec.status,
        "progress": rec.progress,
        "error": rec.error,
        "created_at": rec.created_at,
    }


def create_app(
    store: Store,
    max_workers: int = 2,
    max_upload: int = DEFAULT_MAX_UPLOAD,
    static_dir: str | Path | None = None,
) -> FastAPI:
    manager = RunManager(store, max_workers=max_workers)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        manager.shutdown()

    app = FastAPI(title="vanetsim", lifespan=lifespan)
    app.state.store = store
    app.state.manager = manager

    @app.post("/api/v1/scenarios", status_code=201)
    async def upload_scenario(request: Request, name: str = "scenario"):
        ctype = request.headers.get("content-type", "").split(";")[0].strip().lower()
        if ctype in _XML_TYPES:
            fmt = "xml"
        elif ctype in _CSV_TYPES:
            fmt = "csv"
        else:
            return JSONResponse({"errors": [f"unsupported content type {ctype!r}"]}, 415)
        clen = request.headers.get("content-length")
        if clen is not None and int(clen) > max_upload:
            return JSONResponse({"errors": ["body too large"]}, 413)
        body = await request.body()
        if len(body) > max_upload:
            return JSONResponse({"errors": ["body too large"]}, 413)
        try:
            rec = store.put_scenario(name, body, fmt=fmt)
        except ValidationFailed as exc:
            return JSONResponse({"errors": exc.errors}, 422)
        except ParseError as exc:
            return JSONResponse({"errors": [str(exc)]}, 422)
        return _scenario_payload(rec)

    @app.get("/api/v1/scenarios")
    def get_scenarios():
        return [_scenario_payload(r) for r in store.list_scenarios()]

    @app.get("/api/v1/algorithms")
    def get_algorithms():
        return [
            {
                "id": d.id,
                "label": d.label,
                "params": [
                    {"name": n, "type": t, "default": dv} for n, t, dv in d.params
                ],
            }
            for d in list_algorithms()
        ]

    @app.post("/api/v1/runs", status_code=202)
    async def create_run(request: Request):
        body = await request.json()
        scenario_id = body.get("scenario_id", "")
        params = body.get("params") or {}
        try:
            cluster = ClusterConfig(
                range_m=float(body.get("range_m", 0)),
                algorithm=body.get("algorithm", ""),
                w_v=float(params.get("w_v", 0.5)),
                w_d=float(params.get("w_d", 0.5)),
                t_idle=int(params.get("t_idle", 3)),
                t_cont=int(params.get("t_cont", 3)),
            )
            cluster.validate()
        except (ConfigError, TypeError, ValueError) as exc:
            return JSONResponse({"errors": [str(exc)]}, 422)
        try:
            rec = store.create_run(
                scenario_id,
                {
                    "cluster": {
                        "range_m": cluster.range_m,
                        "algorithm": cluster.algorithm,
                        "w_v": cluster.w_v,
                        "w_d": cluster.w_d,
                        "t_idle": cluster.t_idle,
                        "t_cont": cluster.t_cont,
                    }
                },
            )
        except NotFoundError as exc:
            return JSONResponse({"errors": [str(exc)]}, 404)
        manager.submit(rec.id)
        return _run_payload(rec)

    @app.get("/api/v1/runs")
    def get_runs():
        return [_run_payload(r) for r in store.list_runs()]

    @app.get("/api/v1/runs/{rid}")
    def get_run(rid: str):
        try:
            return _run_payload(store.get_run(rid))
        except NotFoundError as exc:
            return JSONResponse({"errors": [str(exc)]}, 404)

    @app.delete("/api/v1/runs/{rid}")
    def cancel_run(rid: str):
        try:
            rec = store.get_run(rid)
        except NotFoundError as exc:
            return JSONResponse({"errors": [str(exc)]}, 404)
        if rec.status in ("done", "failed", "cancelled"):
            return JSONResponse({"errors": [f"run already {rec.status}"]}, 409)
        manager.cancel(rid)
        return _run_payload(store.get_run(rid))

    def _artifact_response(rid: str, getter, media_type: str):
        try:
            data = getter(rid)
        except NotFoundError as exc:
            return JSONResponse({"errors": [str(exc)]}, 404)
        except UsageError as exc:
            return JSONResponse({"errors": [str(exc)]}, 409)
        return Response(content=data, media_type=media_type)

    @app.get("/api/v1/runs/{rid}/summary")
    def run_summary(rid: str):
        return _artifact_response(rid, store.run_summary, "application/json")

    @app.get("/api/v1/runs/{rid}/graph.csv")
    def run_graph(rid: str):
        return _artifact_response(rid, store.run_graph, "text/csv")

    @app.get("/api/v1/runs/{rid}/report.jsonl")
    def run_report(rid: str, offset: int | None = None, limit: int | None = None):
        return _artifact_response(
            rid,
            lambda r: store.run_report(r, offset=offset, limit=limit),
            "application/x-ndjson",
        )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
