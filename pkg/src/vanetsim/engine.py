"""Simulation core: one discrete event per trace timestep.

Each event chains feature extraction -> clustering step -> per-vehicle
record emission -> metrics accumulation. Records stream to a sink, one
list per timestep, so memory stays proportional to the vehicle count,
not the run length.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .clustering import ClusterConfig, ClusterState, Role, step_clustering
from .errors import ConfigError, RunCancelled
from .features import compute_features
from .postproc import MetricsAccumulator, MetricsSummary, SeriesPoint
from .trace_ingest import Scenario


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    cluster: ClusterConfig
    emit_report: bool = True
    workers: int = 1  # feature-extraction parallelism; never changes results
    keep_states: bool = False


class TimestepRecord(NamedTuple):
    t: float
    veh: str
    x: float
    y: float
    speed: float
    angle: float
    degree: int
    role: Role
    cluster: str | None
    dist_ch: float | None


@dataclass(frozen=True)
class RunResult:
    summary: MetricsSummary
    series: tuple[SeriesPoint, ...]
    n_events: int
    states: tuple[ClusterState, ...] | None = None


def run_simulation(
    cfg: RunConfig,
    record_sink: Optional[Callable[[list[TimestepRecord]], None]] = None,
    progress: Optional[Callable[[float], None]] = None,
    cancel: Optional[threading.Event] = None,
) -> RunResult:
    cfg.cluster.validate()
    scenario = cfg.scenario
    if not scenario.timesteps:
        raise ConfigError("scenario has no timesteps")
    n_steps = len(scenario.timesteps)
    acc = MetricsAccumulator()
    state: ClusterState | None = None
    states: list[ClusterState] = []
    for k, ts in enumerate(scenario.timesteps):
        if cancel is not None and cancel.is_set():
            raise RunCancelled(f"cancelled before event {k}")
        frame = compute_features(ts, cfg.cluster.range_m, workers=cfg.workers)
        state = step_clustering(state, frame, cfg.cluster)
        if cfg.emit_report and record_sink is not None:
            cm_dist: dict[str, float] = {}
            if state.cluster_of:
                m_idx = np.array([frame.index_of[m] for m in state.cluster_of])
                c_idx = np.array([frame.index_of[c] for c in state.cluster_of.values()])
                cm_dist = dict(
                    zip(state.cluster_of, frame.pair_distances(m_idx, c_idx).tolist())
                )
            xs = frame.x.tolist()
            ys = frame.y.tolist()
            speeds = frame.speed.tolist()
            angles = frame.angle.tolist()
            degrees = frame.degree.tolist()
            t = ts.time
            roles = state.roles
            cluster_of = state.cluster_of
            ch_role, cm_role = Role.CH, Role.CM
            batch: list[TimestepRecord] = []
            emit = batch.append
            for i, vid in enumerate(frame.ids):
                role = roles[vid]
                if role is ch_role:
                    cluster: str | None = vid
                    dist_ch: float | None = 0.0
                elif role is cm_role:
                    cluster = cluster_of[vid]
                    dist_ch = cm_dist[vid]
                else:
                    cluster = None
                    dist_ch = None
                emit(
                    TimestepRecord(
                        t, vid, xs[i], ys[i], speeds[i], angles[i],
                        degrees[i], role, cluster, dist_ch,
                    )
                )
            record_sink(batch)
        acc.accumulate(state, ts)
        if cfg.keep_states:
            states.append(state)
        if progress is not None:
            progress((k + 1) / n_steps)
    summary = acc.finalize(scenario.nominal_dt)
    return RunResult(
        summary=summary,
        series=tuple(acc.series),
        n_events=n_steps,
        states=tuple(states) if cfg.keep_states else None,
    )
