"""Command-line entry points: validate a scenario, run the pipeline
offline, or serve the HTTP API.

Exit codes: 0 success, 1 domain error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import os
import socket
import sys
from pathlib import Path

from .clustering import ALGORITHM_IDS, ClusterConfig
from .engine import RunConfig, run_simulation
from .errors import ConfigError, ParseError
from .postproc import (
    REPORT_CSV_HEADER,
    emit_graph_csv,
    record_to_csv_line,
    record_to_jsonl_line,
    summary_to_json,
)
from .trace_ingest import parse_scenario, sniff_format, validate_scenario


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        sys.exit(2)


def _load_scenario(path: str):
    data = _read_file(path)
    try:
        return parse_scenario(data, sniff_format(data), name=Path(path).stem)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.file)
    report = validate_scenario(scenario)
    print(f"timesteps: {report.n_timesteps}")
    print(f"vehicles:  {report.n_vehicles}")
    for w in report.warnings:
        print(f"warning: {w}")
    for e in report.errors:
        print(f"error: {e}")
    return 0 if report.ok else 1


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cluster = ClusterConfig(
            range_m=args.range,
            algorithm=args.algorithm,
            w_v=args.wv,
            w_d=args.wd,
            t_idle=args.t_idle,
            t_cont=args.t_cont,
        )
        cluster.validate()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    scenario = _load_scenario(args.scenario)
    report = validate_scenario(scenario)
    if not report.ok:
        for e in report.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out_dir}: {exc}", file=sys.stderr)
        return 2

    fmt = args.format
    to_line = record_to_jsonl_line if fmt == "jsonl" else record_to_csv_line
    with open(out_dir / f"report.{fmt}", "wb") as report_fh:
        if fmt == "csv":
            report_fh.write(REPORT_CSV_HEADER.encode() + b"\n")
        result = run_simulation(
            RunConfig(scenario=scenario, cluster=cluster),
            record_sink=lambda rs: report_fh.write(
                "".join(f"{to_line(r)}\n" for r in rs).encode()
            ),
        )
    summary_bytes = summary_to_json(result.summary)
    (out_dir / "summary.json").write_bytes(summary_bytes)
    (out_dir / "graph.csv").write_bytes(emit_graph_csv(list(result.series)))
    sys.stdout.write(summary_bytes.decode("utf-8"))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .httpd import create_app
    from .storage import Store

    host, _, port_txt = args.addr.rpartition(":")
    try:
        port = int(port_txt)
    except ValueError:
        print(f"error: bad --addr {args.addr!r}", file=sys.stderr)
        return 1
    host = host or "127.0.0.1"
    data_dir = args.data_dir or os.environ.get("CVANETSIM_DATA_DIR") or "./vanetsim-data"
    store = Store(data_dir)
    app = create_app(
        store,
        max_workers=args.workers,
        static_dir=args.static_dir,
    )
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        print(f"error: cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 1
    sock.listen(128)
    config = uvicorn.Config(app, log_level=args.log_level)
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vanetsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the clustering pipeline offline")
    p.add_argument("--scenario", required=True, help="FCD XML or CSV trace file")
    p.add_argument("--algorithm", required=True,
                   help=f"one of: {', '.join(ALGORITHM_IDS)}")
    p.add_argument("--range", type=float, required=True, help="transmission range [m]")
    p.add_argument("--wv", type=float, default=0.5, help="mobility weight: relative speed")
    p.add_argument("--wd", type=float, default=0.5, help="mobility weight: relative distance")
    p.add_argument("--t-idle", type=int, default=3, help="idle-CH demotion timer [steps]")
    p.add_argument("--t-cont", type=int, default=3, help="CH contention timer [steps]")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the HTTP API (and web UI if built)")
    p.add_argument("--addr", default="127.0.0.1:8080", help="host:port to bind")
    p.add_argument("--data-dir", default=None,
                   help="storage directory (default: $CVANETSIM_DATA_DIR or ./vanetsim-data)")
    p.add_argument("--static-dir", default=None, help="directory of built web UI assets")
    p.add_argument("--workers", type=int, default=2, help="max concurrent runs")
    p.add_argument("--log-level", default="info")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    sys.exit(args.func(args))


if __name__ == "__main__":
    main()
