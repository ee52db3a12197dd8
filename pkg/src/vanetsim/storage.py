"""Embedded file-backed store for scenarios, runs, and result artifacts.

Layout under the data directory:

    scenarios/<id>/body          original uploaded bytes
    scenarios/<id>/meta.json     name, timestamps, validation outcome
    runs/<id>/meta.json          config, status, progress, error
    runs/<id>/report.jsonl       finalized report stream (done runs only)
    runs/<id>/graph.csv          series CSV (done runs only)
    runs/<id>/summary.json       metrics summary (done runs only)

Status meta is written via write-temp-then-rename so a crash never
leaves a half-written record. Runs found in `running` state at startup
are marked failed with error "interrupted" and their partial report
stream is discarded.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NotFoundError, UsageError, ValidationFailed
from .trace_ingest import parse_scenario, sniff_format, validate_scenario

RUN_STATUSES = ("queued", "running", "done", "failed", "cancelled")
_LEGAL_TRANSITIONS = {
    "queued": {"running", "cancelled", "failed"},
    "running": {"done", "failed", "cancelled"},
    "done": set(),
    "failed": set(),
    "cancelled": set(),
}


@dataclass
class ScenarioRecord:
    id: str
    name: str
    created_at: float
    seq: int
    fmt: str
    n_timesteps: int
    n_vehicles: int
    warnings: list[str] = field(default_factory=list)
    body: bytes | None = None


@dataclass
class RunRecord:
    id: str
    scenario_id: str
    config: dict
    status: str
    progress: float
    error: str
    created_at: float
    seq: int


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class ReportAppender:
    """Streams report lines into a partial file; finalized on success."""

    def __init__(self, path: Path):
        self.path = path
        self._fh = open(path, "wb")

    def write_line(self, line: str) -> None:
        self._fh.write(line.encode("utf-8"))
        self._fh.write(b"\n")

    def write_lines(self, lines: list[str]) -> None:
        self._fh.write("".join(f"{s}\n" for s in lines).encode("utf-8"))

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._fh.close()


class Store:
    def __init__(self, data_dir: str | os.PathLike):
        self.root = Path(data_dir)
        self.scenario_dir = self.root / "scenarios"
        self.run_dir = self.root / "runs"
        self.scenario_dir.mkdir(parents=True, exist_ok=True)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._recover()

    # -- scenarios ---------------------------------------------------------

    def put_scenario(self, name: str, body: bytes, fmt: str | None = None) -> ScenarioRecord:
        fmt = fmt or sniff_format(body)
        scenario = parse_scenario(body, fmt, name=name)  # raises ParseError
        report = validate_scenario(scenario)
        if report.errors:
            raise ValidationFailed(report.errors)
        sid = secrets.token_hex(16)
        rec = ScenarioRecord(
            id=sid,
            name=name,
            created_at=time.time(),
            seq=time.time_ns(),
            fmt=fmt,
            n_timesteps=report.n_timesteps,
            n_vehicles=report.n_vehicles,
            warnings=report.warnings,
        )
        d = self.scenario_dir / sid
        d.mkdir()
        (d / "body").write_bytes(body)
        meta = {k: getattr(rec, k) for k in
                ("id", "name", "created_at", "seq", "fmt", "n_timesteps", "n_vehicles", "warnings")}
        _atomic_write(d / "meta.json", json.dumps(meta).encode())
        rec.body = body
        return rec

    def _load_scenario_meta(self, sid: str) -> ScenarioRecord:
        path = self.scenario_dir / sid / "meta.json"
        if not path.exists():
            raise NotFoundError(f"unknown scenario {sid}")
        return ScenarioRecord(**json.loads(path.read_text()))

    def get_scenario(self, sid: str) -> ScenarioRecord:
        rec = self._load_scenario_meta(sid)
        rec.body = (self.scenario_dir / sid / "body").read_bytes()
        return rec

    def list_scenarios(self) -> list[ScenarioRecord]:
        recs = [self._load_scenario_meta(p.name) for p in sorted(self.scenario_dir.iterdir())]
        return sorted(recs, key=lambda r: (r.created_at, r.seq), reverse=True)

    # -- runs --------------------------------------------------------------

    def create_run(self, scenario_id: str, config: dict) -> RunRecord:
        if not (self.scenario_dir / scenario_id / "meta.json").exists():
            raise NotFoundError(f"unknown scenario {scenario_id}")
        rid = secrets.token_hex(16)
        rec = RunRecord(
            id=rid,
            scenario_id=scenario_id,
            config=config,
            status="queued",
            progress=0.0,
            error="",
            created_at=time.time(),
            seq=time.time_ns(),
        )
        d = self.run_dir / rid
        d.mkdir()
        self._write_run_meta(rec)
        return rec

    def _write_run_meta(self, rec: RunRecord) -> None:
        meta = {k: getattr(rec, k) for k in
                ("id", "scenario_id", "config", "status", "progress", "error", "created_at", "seq")}
        _atomic_write(self.run_dir / rec.id / "meta.json", json.dumps(meta).encode())

    def get_run(self, rid: str) -> RunRecord:
        path = self.run_dir / rid / "meta.json"
        if not path.exists():
            raise NotFoundError(f"unknown run {rid}")
        return RunRecord(**json.loads(path.read_text()))

    def list_runs(self) -> list[RunRecord]:
        recs = [self.get_run(p.name) for p in sorted(self.run_dir.iterdir())]
        return sorted(recs, key=lambda r: (r.created_at, r.seq), reverse=True)

    def update_run(self, rid: str, status: str | None = None,
                   progress: float | None = None, error: str | None = None) -> RunRecord:
        with self._lock:
            rec = self.get_run(rid)
            if status is not None and status != rec.status:
                if status not in _LEGAL_TRANSITIONS.get(rec.status, set()):
                    raise UsageError(f"illegal status transition {rec.status} -> {status}")
                if status == "done" and not (self.run_dir / rid / "summary.json").exists():
                    raise UsageError("cannot mark done before artifacts are attached")
                rec.status = status
                if status in ("failed", "cancelled"):
                    self._discard_partial(rid)
            if progress is not None:
                rec.progress = float(progress)
            if error is not None:
                rec.error = error
            self._write_run_meta(rec)
            return rec

    def report_appender(self, rid: str, fmt: str = "jsonl") -> ReportAppender:
        self.get_run(rid)
        return ReportAppender(self.run_dir / rid / f"report.{fmt}.partial")

    def attach_artifacts(self, rid: str, summary: bytes, graph: bytes) -> None:
        """Finalize result artifacts; legal only while the run is running."""
        with self._lock:
            rec = self.get_run(rid)
            if rec.status != "running":
                raise UsageError(f"cannot attach artifacts to a {rec.status} run")
            d = self.run_dir / rid
            for partial in d.glob("report.*.partial"):
                os.replace(partial, d / partial.name.removesuffix(".partial"))
            _atomic_write(d / "graph.csv", graph)
            _atomic_write(d / "summary.json", summary)

    def _discard_partial(self, rid: str) -> None:
        d = self.run_dir / rid
        for p in list(d.glob("report.*")) + [d / "graph.csv", d / "summary.json"]:
            if p.exists():
                p.unlink()

    def _artifact(self, rid: str, filename: str) -> bytes:
        rec = self.get_run(rid)
        if rec.status != "done":
            raise UsageError(f"run {rid} is {rec.status}, not done")
        return (self.run_dir / rid / filename).read_bytes()

    def run_summary(self, rid: str) -> bytes:
        return self._artifact(rid, "summary.json")

    def run_graph(self, rid: str) -> bytes:
        return self._artifact(rid, "graph.csv")

    def run_report(self, rid: str, offset: int | None = None,
                   limit: int | None = None, fmt: str = "jsonl") -> bytes:
        data = self._artifact(rid, f"report.{fmt}")
        if offset is None and limit is None:
            return data
        lines = data.decode("utf-8").splitlines()
        header: list[str] = []
        if fmt == "csv" and lines:
            header, lines = [lines[0]], lines[1:]
        start = offset or 0
        stop = start + limit if limit is not None else None
        selected = header + lines[start:stop]
        return ("\n".join(selected) + "\n").encode("utf-8") if selected else b""

    # -- recovery ----------------------------------------------------------

    def _recover(self) -> None:
        for d in self.run_dir.iterdir():
            meta_path = d / "meta.json"
            if not meta_path.exists():
                continue
            rec = RunRecord(**json.loads(meta_path.read_text()))
            if rec.status in ("running", "queued"):
                rec.status = "failed"
                rec.error = "interrupted"
                self._discard_partial(rec.id)
                self._write_run_meta(rec)
