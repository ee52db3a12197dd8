"""Cluster formation, head election, and deterministic maintenance.

Three pluggable election algorithms share one total order: lower score
wins, ties broken by ascending vehicle-id byte order.

  lowest_id       score = 0 (the id tie-break is the whole ranking)
  highest_degree  score = -degree
  mobility        score = w_v * avg_rel_speed + w_d * avg_rel_dist / R

Maintenance is a pure transition function over immutable states, run in
six fixed phases (departures, member pruning, CH contention, idle
demotion, re-affiliation, election); all iteration is in ascending id
order, so the result depends only on (prev, frame, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, InternalError
from .features import FeatureFrame


class Role(str, Enum):
    CH = "CH"
    CM = "CM"
    UNCLUSTERED = "UNCLUSTERED"


@dataclass(frozen=True)
class ClusterConfig:
    range_m: float
    algorithm: str = "lowest_id"
    w_v: float = 0.5
    w_d: float = 0.5
    t_idle: int = 3
    t_cont: int = 3

    def validate(self) -> None:
        if self.range_m <= 0:
            raise ConfigError(f"transmission range must be > 0, got {self.range_m}")
        if self.algorithm not in ALGORITHM_IDS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHM_IDS)}"
            )
        if self.w_v < 0 or self.w_d < 0:
            raise ConfigError("weights must be >= 0")
        if self.algorithm == "mobility" and self.w_v + self.w_d <= 0:
            raise ConfigError("mobility algorithm needs w_v + w_d > 0")
        if self.t_idle < 1 or self.t_cont < 1:
            raise ConfigError("timers must be >= 1 timestep")


@dataclass(frozen=True)
class AlgorithmDescriptor:
    id: str
    label: str
    params: tuple[tuple[str, str, float], ...]  # (name, type, default)


_REGISTRY: tuple[AlgorithmDescriptor, ...] = (
    AlgorithmDescriptor("lowest_id", "Lowest ID", ()),
    AlgorithmDescriptor("highest_degree", "Highest Degree", ()),
    AlgorithmDescriptor(
        "mobility",
        "Mobility (weighted relative speed + distance)",
        (("w_v", "float", 0.5), ("w_d", "float", 0.5)),
    ),
)
ALGORITHM_IDS = tuple(d.id for d in _REGISTRY)


def list_algorithms() -> tuple[AlgorithmDescriptor, ...]:
    return _REGISTRY


def frame_scores(f: FeatureFrame, cfg: ClusterConfig) -> np.ndarray:
    """Election score for every vehicle in the frame (lower is better)."""
    cfg.validate()
    n = len(f)
    if cfg.algorithm == "lowest_id":
        return np.zeros(n)
    if cfg.algorithm == "highest_degree":
        return -f.degree.astype(float)
    return cfg.w_v * f.avg_rel_speed + cfg.w_d * f.avg_rel_dist / cfg.range_m


def score_vehicle(v: str, f: FeatureFrame, cfg: ClusterConfig) -> float:
    if v not in f.index_of:
        raise ConfigError(f"vehicle {v!r} not in frame")
    return float(frame_scores(f, cfg)[f.index_of[v]])


@dataclass(frozen=True)
class ClusterState:
    time: float
    roles: dict[str, Role] = field(default_factory=dict)
    cluster_of: dict[str, str] = field(default_factory=dict)
    members: dict[str, tuple[str, ...]] = field(default_factory=dict)
    idle_count: dict[str, int] = field(default_factory=dict)
    contention: dict[str, int] = field(default_factory=dict)

    def heads(self) -> list[str]:
        return [v for v, r in self.roles.items() if r is Role.CH]


def step_clustering(
    prev: ClusterState | None, f: FeatureFrame, cfg: ClusterConfig
) -> ClusterState:
    cfg.validate()
    if f.range != cfg.range_m:
        raise ConfigError(
            f"frame built with range {f.range}, config says {cfg.range_m}"
        )
    ids = f.ids  # ascending byte order
    scores = frame_scores(f, cfg)

    def rank(vid: str) -> tuple[float, int]:
        i = f.index_of[vid]
        return (float(scores[i]), i)

    # Phase 1: departures and arrivals. Vehicles absent from the frame are
    # dropped; everything else carries its previous role. New vehicles start
    # UNCLUSTERED. Orphaning of members of departed CHs happens in phase 2.
    roles: dict[str, Role]
    cluster_of: dict[str, str] = {}
    idle: dict[str, int] = {}
    cont: dict[str, int] = {}
    if prev is None:
        roles = dict.fromkeys(ids, Role.UNCLUSTERED)
    elif prev.roles.keys() == f.index_of.keys():
        # common case: same population as last step, carry everything over
        roles = dict(prev.roles)
        cluster_of = dict(prev.cluster_of)
        idle = dict(prev.idle_count)
        cont = dict(prev.contention)
    else:
        roles = {}
        prev_roles = prev.roles
        for vid in ids:
            r = prev_roles.get(vid)
            if r is None:
                roles[vid] = Role.UNCLUSTERED
            else:
                roles[vid] = r
                if r is Role.CM:
                    cluster_of[vid] = prev.cluster_of[vid]
                elif r is Role.CH:
                    idle[vid] = prev.idle_count.get(vid, 0)
                    cont[vid] = prev.contention.get(vid, 0)

    # Phase 2: member pruning. A CM whose CH departed, lost its role, or is
    # now farther than R becomes an orphan.
    kept_cms: list[str] = []
    for vid, ch in list(cluster_of.items()):
        if roles.get(ch) is Role.CH:
            kept_cms.append(vid)
        else:
            roles[vid] = Role.UNCLUSTERED
            del cluster_of[vid]
    if kept_cms:
        m_idx = np.array([f.index_of[v] for v in kept_cms])
        c_idx = np.array([f.index_of[cluster_of[v]] for v in kept_cms])
        out = f.pair_distances(m_idx, c_idx) > cfg.range_m
        for vid in (v for v, o in zip(kept_cms, out) if o):
            roles[vid] = Role.UNCLUSTERED
            del cluster_of[vid]

    # Phase 3: CH contention. Decisions are computed against the CH set as it
    # stands on phase entry, then applied together.
    ch_list = [vid for vid in ids if roles[vid] is Role.CH]
    phase_chs = set(ch_list)
    abdicating: list[str] = []
    for c in ch_list:
        ci = f.index_of[c]
        contested = any(
            ids[j] in phase_chs and (float(scores[j]), int(j)) < (float(scores[ci]), ci)
            for j in f.neighbor_indices(ci)
        )
        cont[c] = cont.get(c, 0) + 1 if contested else 0
        if cont[c] >= cfg.t_cont:
            abdicating.append(c)
    for c in abdicating:
        roles[c] = Role.UNCLUSTERED
        del idle[c], cont[c]
        for m in [m for m, ch in cluster_of.items() if ch == c]:
            roles[m] = Role.UNCLUSTERED
            del cluster_of[m]

    # Phase 4: idle demotion of memberless CHs.
    member_count: dict[str, int] = {}
    for m, ch in cluster_of.items():
        member_count[ch] = member_count.get(ch, 0) + 1
    abd = set(abdicating)
    for c in (c for c in ch_list if c not in abd):
        if member_count.get(c, 0) == 0:
            idle[c] = idle.get(c, 0) + 1
            if idle[c] >= cfg.t_idle:
                roles[c] = Role.UNCLUSTERED
                del idle[c], cont[c]
        else:
            idle[c] = 0

    # Phase 5: re-affiliation of orphans to the nearest surviving CH in range
    # (tie: lower CH id); joining resets that CH's idle timer.
    orphans = [i for i, vid in enumerate(ids) if roles[vid] is Role.UNCLUSTERED]
    unclustered: set[int] = set()
    for vi in orphans:
        vid = ids[vi]
        nbrs = f.neighbor_indices(vi)
        dists = f.neighbor_dists(vi)
        best = None
        for j, d in zip(nbrs, dists):
            if roles[ids[j]] is Role.CH:
                key = (float(d), int(j))
                if best is None or key < best:
                    best = key
        if best is not None:
            ch = ids[best[1]]
            roles[vid] = Role.CM
            cluster_of[vid] = ch
            idle[ch] = 0
        else:
            unclustered.add(vi)

    # Phase 6: greedy election over the remaining unclustered population.
    while True:
        candidates = [
            i
            for i in unclustered
            if any(j in unclustered for j in f.neighbor_indices(i))
        ]
        if not candidates:
            break
        w = min(candidates, key=lambda i: (float(scores[i]), i))
        wid = ids[w]
        roles[wid] = Role.CH
        idle[wid] = 0
        cont[wid] = 0
        unclustered.discard(w)
        for j in f.neighbor_indices(w):
            j = int(j)
            if j in unclustered:
                mid = ids[j]
                roles[mid] = Role.CM
                cluster_of[mid] = wid
                unclustered.discard(j)

    members: dict[str, list[str]] = {v: [] for v in ids if roles[v] is Role.CH}
    for m in ids:
        if roles[m] is Role.CM:
            members[cluster_of[m]].append(m)
    state = ClusterState(
        time=f.time,
        roles=roles,
        cluster_of=cluster_of,
        members={ch: tuple(ms) for ch, ms in members.items()},
        idle_count=idle,
        contention=cont,
    )
    _check_state(state, f)
    return state


def _check_state(state: ClusterState, f: FeatureFrame) -> None:
    """Cheap structural sanity check; violations abort the run."""
    if state.roles.keys() != f.index_of.keys():
        raise InternalError("role map does not cover the frame")
    roles = state.roles
    for m, ch in state.cluster_of.items():
        if roles.get(m) is not Role.CM or roles.get(ch) is not Role.CH:
            raise InternalError(f"dangling membership {m} -> {ch}")
    if state.cluster_of:
        m_idx = np.array([f.index_of[m] for m in state.cluster_of])
        c_idx = np.array([f.index_of[ch] for ch in state.cluster_of.values()])
        if np.any(f.pair_distances(m_idx, c_idx) > f.range):
            raise InternalError("a member is out of range of its CH")
    n_cm = sum(1 for r in state.roles.values() if r is Role.CM)
    if sum(len(ms) for ms in state.members.values()) != n_cm:
        raise InternalError("members map inconsistent with cluster_of")
