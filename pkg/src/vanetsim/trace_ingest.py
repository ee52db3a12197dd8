"""Scenario file ingestion: SUMO FCD XML and the CSV equivalent.

Both parsers normalize into the same Scenario structure: ordered
timesteps of per-vehicle kinematic states, vehicles sorted by id byte
order within each timestep. Angles use the SUMO compass convention
(0 = north, clockwise positive) and are reduced into [0, 360).
"""

from __future__ import annotations

import gc
import math
import statistics
import xml.etree.ElementTree as ET
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ParseError
from .textfmt import fmt_num

CSV_HEADER = "t,id,x,y,speed,angle"
_REQUIRED_ATTRS = ("id", "x", "y", "speed", "angle")


def id_sort_key(vehicle_id: str) -> bytes:
    # Canonical ordering everywhere: ascending UTF-8 byte order.
    return vehicle_id.encode("utf-8")


class VehicleState(NamedTuple):
    id: str
    x: float
    y: float
    speed: float
    angle: float  # degrees in [0, 360), compass convention


@dataclass(frozen=True)
class Timestep:
    time: float
    vehicles: tuple[VehicleState, ...]  # sorted ascending by id byte order


@dataclass(frozen=True)
class Scenario:
    name: str
    timesteps: tuple[Timestep, ...]
    nominal_dt: float = 1.0


@dataclass
class ValidationReport:
    n_timesteps: int = 0
    n_vehicles: int = 0
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@contextmanager
def _gc_paused():
    """Bulk ingestion allocates millions of objects that all survive the
    call, so collector passes during the build are pure overhead."""
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _check_finite(value: float, what: str, t_label: str) -> float:
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} at {t_label}")
    return value


def _make_state(raw: dict[str, str], t_label: str) -> VehicleState:
    try:
        x = float(raw["x"])
        y = float(raw["y"])
        speed = float(raw["speed"])
        angle = float(raw["angle"])
    except ValueError as exc:
        raise ParseError(f"bad numeric value at {t_label}: {exc}") from None
    for val, name in ((x, "x"), (y, "y"), (speed, "speed"), (angle, "angle")):
        _check_finite(val, name, t_label)
    if speed < 0:
        raise ParseError(f"negative speed {speed} at {t_label}")
    if not raw["id"]:
        raise ParseError(f"empty vehicle id at {t_label}")
    return VehicleState(id=raw["id"], x=x, y=y, speed=speed, angle=angle % 360.0)


def _sorted_vehicles(vehicles: list[VehicleState]) -> list[VehicleState]:
    keys = [v.id.encode("utf-8") for v in vehicles]
    if all(a <= b for a, b in zip(keys, keys[1:])):  # common case: already sorted
        return vehicles
    return sorted(vehicles, key=lambda v: id_sort_key(v.id))


def _make_scenario(name: str, steps: list[tuple[float, list[VehicleState]]]) -> Scenario:
    timesteps = []
    prev_t = None
    for t, vehicles in steps:
        if prev_t is not None and t <= prev_t:
            raise ParseError(f"timestep times not strictly increasing at t={fmt_num(t)}")
        prev_t = t
        timesteps.append(Timestep(time=t, vehicles=tuple(_sorted_vehicles(vehicles))))
    if len(timesteps) >= 2:
        deltas = [b.time - a.time for a, b in zip(timesteps, timesteps[1:])]
        dt = float(statistics.median(deltas))
    else:
        dt = 1.0
    return Scenario(name=name, timesteps=tuple(timesteps), nominal_dt=dt)


@_gc_paused()
def parse_fcd_xml(data: bytes, name: str = "scenario") -> Scenario:
    """Parse a SUMO FCD export. Root element is arbitrary; `<timestep>`
    elements are taken in document order, vehicles from `<vehicle>` children."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed XML at line {line}, column {col}: {exc.msg}") from None
    steps: list[tuple[float, list[VehicleState]]] = []
    for ts_el in root.iter("timestep"):
        t_raw = ts_el.get("time")
        if t_raw is None:
            raise ParseError("timestep element missing required attribute time")
        try:
            t = float(t_raw)
        except ValueError:
            raise ParseError(f"bad timestep time {t_raw!r}") from None
        _check_finite(t, "time", f"t={t_raw}")
        if t < 0:
            raise ParseError(f"negative timestep time {t_raw}")
        vehicles = []
        for veh_el in ts_el.findall("vehicle"):
            raw = {}
            for attr in _REQUIRED_ATTRS:
                val = veh_el.get(attr)
                if val is None:
                    raise ParseError(f"vehicle missing required attribute {attr} at t={t_raw}")
                raw[attr] = val
            vehicles.append(_make_state(raw, f"t={t_raw}"))
        steps.append((t, vehicles))
    return _make_scenario(name, steps)


@_gc_paused()
def parse_csv(data: bytes, name: str = "scenario") -> Scenario:
    """Parse the CSV equivalent: header `t,id,x,y,speed,angle`, rows
    grouped by non-decreasing t (equal t -> one timestep)."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CSV_HEADER:
        raise ParseError(f"bad header: expected {CSV_HEADER!r}")
    steps: list[tuple[float, list[VehicleState]]] = []
    cur_t: float | None = None
    cur_rows: list[VehicleState] = []
    isfinite = math.isfinite
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ParseError(f"wrong field count at row {row_no}: got {len(parts)}, want 6")
        try:
            t = float(parts[0])
            x = float(parts[2])
            y = float(parts[3])
            speed = float(parts[4])
            angle = float(parts[5])
        except ValueError:
            raise ParseError(f"bad numeric value at row {row_no}") from None
        # single check covers all five fields: any inf/nan poisons the sum
        if not isfinite(t + x + y + speed + angle):
            for val, what in ((t, "time"), (x, "x"), (y, "y"), (speed, "speed"), (angle, "angle")):
                _check_finite(val, what, f"row {row_no}")
        if t < 0:
            raise ParseError(f"negative time at row {row_no}")
        if speed < 0:
            raise ParseError(f"negative speed {speed} at row {row_no}")
        vid = parts[1]
        if not vid:
            raise ParseError(f"empty vehicle id at row {row_no}")
        if not 0.0 <= angle < 360.0:
            angle %= 360.0
        state = VehicleState(vid, x, y, speed, angle)
        if t == cur_t:
            cur_rows.append(state)
        elif cur_t is None or t > cur_t:
            cur_rows = [state]
            steps.append((t, cur_rows))
            cur_t = t
        else:
            raise ParseError(f"non-monotonic time at row {row_no}")
    return _make_scenario(name, steps)


def scenario_to_csv(s: Scenario) -> bytes:
    """Serialize back to the CSV wire format; round-trips field-for-field."""
    out = [CSV_HEADER]
    for ts in s.timesteps:
        t_txt = fmt_num(ts.time)
        for v in ts.vehicles:
            out.append(
                f"{t_txt},{v.id},{fmt_num(v.x)},{fmt_num(v.y)},{fmt_num(v.speed)},{fmt_num(v.angle)}"
            )
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_scenario(data: bytes, fmt: str, name: str = "scenario") -> Scenario:
    """Dispatch on format id: 'xml' or 'csv'."""
    if fmt == "xml":
        return parse_fcd_xml(data, name=name)
    if fmt == "csv":
        return parse_csv(data, name=name)
    raise ParseError(f"unknown scenario format {fmt!r}")


def sniff_format(data: bytes) -> str:
    head = data.lstrip()[:1]
    return "xml" if head == b"<" else "csv"


def validate_scenario(s: Scenario) -> ValidationReport:
    report = ValidationReport(n_timesteps=len(s.timesteps))
    if not s.timesteps:
        report.errors.append("empty scenario")
        return report
    seen_ids: set[str] = set()
    gone_ids: set[str] = set()
    reappeared: set[str] = set()
    warned_speed: set[str] = set()
    warned_pos: set[str] = set()
    for ts in s.timesteps:
        present: set[str] = set()
        t_txt = fmt_num(ts.time)
        for v in ts.vehicles:
            if v.id in present:
                report.errors.append(f"duplicate id {v.id} at t={t_txt}")
            present.add(v.id)
            if v.speed > 100.0 and v.id not in warned_speed:
                report.warnings.append(f"speed {fmt_num(v.speed)} m/s for id {v.id} exceeds 100 m/s")
                warned_speed.add(v.id)
            if (abs(v.x) > 1e7 or abs(v.y) > 1e7) and v.id not in warned_pos:
                report.warnings.append(f"position of id {v.id} beyond 1e7 m")
                warned_pos.add(v.id)
        for vid in present & gone_ids:
            if vid not in reappeared:
                report.warnings.append(f"id {vid} reappears")
                reappeared.add(vid)
        gone_ids |= seen_ids - present
        gone_ids -= present
        seen_ids |= present
    report.n_vehicles = len(seen_ids)
    return report
