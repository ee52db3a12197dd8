import json
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from conftest import T3_CSV

CLI = [sys.executable, "-m", "vanetsim.cli"]


def run_cli(*args, **kw):
    return subprocess.run([*CLI, *args], capture_output=True, text=True, **kw)


@pytest.fixture
def t3_file(tmp_path):
    path = tmp_path / "t3.csv"
    path.write_bytes(T3_CSV)
    return path


def test_validate_ok(t3_file):
    proc = run_cli("validate", str(t3_file))
    assert proc.returncode == 0
    assert "vehicles:  3" in proc.stdout


def test_validate_duplicate_id(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_bytes(b"t,id,x,y,speed,angle\n0,A,0,0,1,0\n0,A,1,0,1,0\n")
    proc = run_cli("validate", str(path))
    assert proc.returncode == 1
    assert "duplicate id A" in proc.stdout


def test_validate_missing_file(tmp_path):
    proc = run_cli("validate", str(tmp_path / "nope.csv"))
    assert proc.returncode == 2


def test_run_t3(t3_file, tmp_path):
    out = tmp_path / "out"
    proc = run_cli(
        "run", "--scenario", str(t3_file), "--algorithm", "lowest_id",
        "--range", "100", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["avg_num_unclustered"] == 1.0
    assert (out / "summary.json").read_bytes().decode() == proc.stdout
    assert (out / "graph.csv").exists()
    assert len((out / "report.jsonl").read_text().splitlines()) == 6


def test_run_csv_format(t3_file, tmp_path):
    out = tmp_path / "out"
    proc = run_cli(
        "run", "--scenario", str(t3_file), "--algorithm", "lowest_id",
        "--range", "100", "--out", str(out), "--format", "csv",
    )
    assert proc.returncode == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0] == "t,veh,x,y,speed,angle,degree,role,cluster,dist_ch"
    assert len(lines) == 7


def test_run_bad_algorithm(t3_file, tmp_path):
    proc = run_cli(
        "run", "--scenario", str(t3_file), "--algorithm", "foo",
        "--range", "100", "--out", str(tmp_path / "o"),
    )
    assert proc.returncode == 1
    assert "lowest_id" in proc.stderr  # lists valid ids


def test_run_zero_range(t3_file, tmp_path):
    proc = run_cli(
        "run", "--scenario", str(t3_file), "--algorithm", "lowest_id",
        "--range", "0", "--out", str(tmp_path / "o"),
    )
    assert proc.returncode == 1


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _wait_http(url, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            with urllib.request.urlopen(url, timeout=1) as resp:
                return resp.read()
        except Exception:
            time.sleep(0.1)
    raise AssertionError(f"server at {url} did not come up")


def test_serve_and_port_conflict(tmp_path):
    port = _free_port()
    proc = subprocess.Popen(
        [*CLI, "serve", "--addr", f"127.0.0.1:{port}", "--data-dir", str(tmp_path / "d1"),
         "--log-level", "warning"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    try:
        body = _wait_http(f"http://127.0.0.1:{port}/api/v1/algorithms")
        assert [d["id"] for d in json.loads(body)] == ["lowest_id", "highest_degree", "mobility"]
        second = run_cli(
            "serve", "--addr", f"127.0.0.1:{port}", "--data-dir", str(tmp_path / "d2"),
            timeout=20,
        )
        assert second.returncode == 1
        assert "cannot bind" in second.stderr
    finally:
        proc.terminate()
        proc.wait(timeout=15)
