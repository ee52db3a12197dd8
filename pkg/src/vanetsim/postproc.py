"""Aggregate clustering metrics and report/graph emission.

Produces the six run-level metrics (average CH duration, average CM
duration, average CH changes per vehicle, average number of clusters,
of CMs, and of unclustered vehicles), the per-timestep series behind
the graph view, and the byte-exact CSV / JSONL encodings.

Duration semantics: an interval of n consecutive timesteps lasts
n * nominal_dt seconds, so single-step intervals have nonzero duration.
A CM interval is broken by a CH-identity change even if the role stays CM.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from functools import lru_cache

from .clustering import ClusterState, Role
from .errors import UsageError
from .textfmt import fmt_num
from .trace_ingest import Timestep

GRAPH_CSV_HEADER = "t,n_vehicles,n_clusters,n_cm,n_unclustered"
REPORT_CSV_HEADER = "t,veh,x,y,speed,angle,degree,role,cluster,dist_ch"


@dataclass(frozen=True)
class SeriesPoint:
    t: float
    n_vehicles: int
    n_clusters: int
    n_cm: int
    n_unclustered: int


@dataclass
class IntervalStat:
    veh: str
    kind: str  # "CH" or "CM"
    start_t: float
    n_steps: int
    ch: str | None = None  # CM intervals only: the unchanged CH identity

    def duration(self, nominal_dt: float) -> float:
        return self.n_steps * nominal_dt


@dataclass(frozen=True)
class MetricsSummary:
    avg_ch_duration_s: float
    avg_cm_duration_s: float
    avg_ch_changes_per_vehicle: float
    avg_num_clusters: float
    avg_num_cm: float
    avg_num_unclustered: float
    n_timesteps: int
    n_vehicles: int
    nominal_dt: float


class MetricsAccumulator:
    """Single-writer accumulator fed ClusterStates in increasing time order."""

    def __init__(self) -> None:
        self.series: list[SeriesPoint] = []
        self.closed: list[IntervalStat] = []
        self._open: dict[str, IntervalStat] = {}
        self._prev_roles: dict[str, Role] = {}
        self._seen: set[str] = set()
        self._last_t: float | None = None
        self.ch_changes = 0

    def accumulate(self, state: ClusterState, ts: Timestep) -> None:
        if self._last_t is not None and state.time <= self._last_t:
            raise UsageError(
                f"states must arrive in increasing time order "
                f"(got t={state.time} after t={self._last_t})"
            )
        first = self._last_t is None
        self._last_t = state.time

        roles = state.roles
        cluster_of = state.cluster_of
        open_map = self._open
        closed = self.closed
        prev_roles = self._prev_roles
        t = state.time
        ch_role, cm_role = Role.CH, Role.CM
        n_ch = n_cm = n_un = 0
        for v in ts.vehicles:
            vid = v.id
            role = roles[vid]
            if role is ch_role:
                n_ch += 1
                key = ("CH", None)
                if not first and prev_roles.get(vid) is not ch_role:
                    self.ch_changes += 1
            elif role is cm_role:
                n_cm += 1
                key = ("CM", cluster_of[vid])
            else:
                n_un += 1
                key = None

            open_iv = open_map.get(vid)
            if open_iv is not None and key is not None and (open_iv.kind, open_iv.ch) == key:
                open_iv.n_steps += 1
            else:
                if open_iv is not None:
                    closed.append(open_iv)
                    del open_map[vid]
                if key is not None:
                    open_map[vid] = IntervalStat(
                        veh=vid, kind=key[0], start_t=t, n_steps=1, ch=key[1]
                    )

        # Vehicles that left the scenario close their running intervals.
        self._seen.update(roles)
        if len(open_map) > n_ch + n_cm:
            present = set(roles)
            for vid in [v for v in open_map if v not in present]:
                closed.append(open_map.pop(vid))
        self._prev_roles = roles
        self.series.append(
            SeriesPoint(
                t=state.time,
                n_vehicles=len(ts.vehicles),
                n_clusters=n_ch,
                n_cm=n_cm,
                n_unclustered=n_un,
            )
        )

    def finalize(self, nominal_dt: float) -> MetricsSummary:
        if not self.series:
            raise UsageError("no states accumulated")
        intervals = self.closed + sorted(self._open.values(), key=lambda iv: iv.veh)
        ch_durs = [iv.duration(nominal_dt) for iv in intervals if iv.kind == "CH"]
        cm_durs = [iv.duration(nominal_dt) for iv in intervals if iv.kind == "CM"]
        return MetricsSummary(
            avg_ch_duration_s=statistics.fmean(ch_durs) if ch_durs else 0.0,
            avg_cm_duration_s=statistics.fmean(cm_durs) if cm_durs else 0.0,
            avg_ch_changes_per_vehicle=self.ch_changes / len(self._seen),
            avg_num_clusters=statistics.fmean(p.n_clusters for p in self.series),
            avg_num_cm=statistics.fmean(p.n_cm for p in self.series),
            avg_num_unclustered=statistics.fmean(p.n_unclustered for p in self.series),
            n_timesteps=len(self.series),
            n_vehicles=len(self._seen),
            nominal_dt=nominal_dt,
        )


SUMMARY_FIELDS = (
    "avg_ch_duration_s",
    "avg_cm_duration_s",
    "avg_ch_changes_per_vehicle",
    "avg_num_clusters",
    "avg_num_cm",
    "avg_num_unclustered",
    "n_timesteps",
    "n_vehicles",
    "nominal_dt",
)


def summary_to_json(summary: MetricsSummary) -> bytes:
    doc = {name: getattr(summary, name) for name in SUMMARY_FIELDS}
    return (json.dumps(doc) + "\n").encode("utf-8")


def emit_graph_csv(series: list[SeriesPoint]) -> bytes:
    lines = [GRAPH_CSV_HEADER]
    for p in series:
        lines.append(f"{fmt_num(p.t)},{p.n_vehicles},{p.n_clusters},{p.n_cm},{p.n_unclustered}")
    return ("\n".join(lines) + "\n").encode("utf-8")


@lru_cache(maxsize=65536)
def _json_str(s: str) -> str:
    # vehicle ids repeat every timestep; cache their JSON escaping
    return json.dumps(s)


def _num(x) -> str:
    # record fields are plain finite int/float by construction; same
    # rendering as fmt_num without the re-validation. repr of an
    # integer-valued float in the non-exponent range always ends in
    # ".0", so stripping that suffix matches the int rendering.
    s = repr(x)
    if s.endswith(".0"):
        s = s[:-2]
        if s == "-0":
            return "0"
    return s


@lru_cache(maxsize=8)
def _t_str(t: float) -> str:
    # the timestep value repeats for every vehicle in the frame
    return _num(t)


# Enum .value goes through DynamicClassAttribute; too slow per record.
_ROLE_STR = {r: r.value for r in Role}


def record_to_jsonl_line(rec) -> str:
    cluster = _json_str(rec.cluster) if rec.cluster is not None else "null"
    dist = _num(rec.dist_ch) if rec.dist_ch is not None else "null"
    return (
        f'{{"t": {_t_str(rec.t)}, "veh": {_json_str(rec.veh)}, '
        f'"x": {_num(rec.x)}, "y": {_num(rec.y)}, '
        f'"speed": {_num(rec.speed)}, "angle": {_num(rec.angle)}, '
        f'"degree": {rec.degree}, "role": "{_ROLE_STR[rec.role]}", '
        f'"cluster": {cluster}, "dist_ch": {dist}}}'
    )


def record_to_csv_line(rec) -> str:
    cluster = rec.cluster if rec.cluster is not None else ""
    dist = _num(rec.dist_ch) if rec.dist_ch is not None else ""
    return (
        f"{_t_str(rec.t)},{rec.veh},{_num(rec.x)},{_num(rec.y)},"
        f"{_num(rec.speed)},{_num(rec.angle)},{rec.degree},"
        f"{_ROLE_STR[rec.role]},{cluster},{dist}"
    )


def emit_report(records, fmt: str = "jsonl") -> bytes:
    """Encode TimestepRecords (already in (t, veh) order) as JSONL or CSV."""
    if fmt == "jsonl":
        lines = [record_to_jsonl_line(r) for r in records]
    elif fmt == "csv":
        lines = [REPORT_CSV_HEADER] + [record_to_csv_line(r) for r in records]
    else:
        raise UsageError(f"unknown report format {fmt!r}")
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
