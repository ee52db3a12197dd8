"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's numpy/grid code paths:
neighbors come from an all-pairs loop, election from a straight-line
greedy re-implementation over explicit sorted lists.
"""

from __future__ import annotations

import math
import random

import pytest

from vanetsim.clustering import ClusterConfig
from vanetsim.trace_ingest import Scenario, Timestep, VehicleState, id_sort_key

T3_CSV = b"""t,id,x,y,speed,angle
0,A,0,0,10,90
0,B,50,0,10,90
0,C,200,0,20,270
1,A,0,0,10,90
1,B,50,0,10,90
1,C,200,0,20,270
"""

T3_XML = b"""<fcd-export>
  <timestep time="0.00">
    <vehicle id="A" x="0.0" y="0.0" speed="10.0" angle="90.0"/>
    <vehicle id="B" x="50.0" y="0.0" speed="10.0" angle="90.0"/>
    <vehicle id="C" x="200.0" y="0.0" speed="20.0" angle="270.0"/>
  </timestep>
  <timestep time="1.00">
    <vehicle id="A" x="0.0" y="0.0" speed="10.0" angle="90.0"/>
    <vehicle id="B" x="50.0" y="0.0" speed="10.0" angle="90.0"/>
    <vehicle id="C" x="200.0" y="0.0" speed="20.0" angle="270.0"/>
  </timestep>
</fcd-export>
"""


@pytest.fixture
def t3_scenario():
    from vanetsim.trace_ingest import parse_csv

    return parse_csv(T3_CSV, name="t3")


def make_timestep(t: float, rows: list[tuple[str, float, float, float, float]]) -> Timestep:
    vehicles = sorted(
        (VehicleState(id=i, x=x, y=y, speed=s, angle=a) for i, x, y, s, a in rows),
        key=lambda v: id_sort_key(v.id),
    )
    return Timestep(time=t, vehicles=tuple(vehicles))


def random_timestep(rng: random.Random, t: float, n: int, size: float = 2000.0) -> Timestep:
    rows = [
        (f"v{i:04d}", rng.uniform(0, size), rng.uniform(0, size),
         rng.uniform(0, 40), rng.uniform(0, 360))
        for i in range(n)
    ]
    return make_timestep(t, rows)


def random_walk_scenario(
    rng: random.Random, n: int, steps: int, size: float = 1000.0, jump: float = 40.0
) -> Scenario:
    """Vehicles doing independent bounded random walks; occasional churn."""
    pos = {f"v{i:03d}": [rng.uniform(0, size), rng.uniform(0, size)] for i in range(n)}
    timesteps = []
    for k in range(steps):
        rows = []
        for vid, p in pos.items():
            p[0] = min(max(p[0] + rng.uniform(-jump, jump), 0.0), size)
            p[1] = min(max(p[1] + rng.uniform(-jump, jump), 0.0), size)
            if rng.random() < 0.02:  # vehicle off-trace for this step
                continue
            rows.append((vid, p[0], p[1], rng.uniform(0, 30), rng.uniform(0, 360)))
        timesteps.append(make_timestep(float(k), rows))
    return Scenario(name="walk", timesteps=tuple(timesteps), nominal_dt=1.0)


def brute_force_neighbors(ts: Timestep, r: float) -> dict[str, dict[str, float]]:
    """All-pairs O(n^2) oracle: id -> {neighbor id: distance}."""
    out: dict[str, dict[str, float]] = {v.id: {} for v in ts.vehicles}
    for i, a in enumerate(ts.vehicles):
        for j, b in enumerate(ts.vehicles):
            if i == j:
                continue
            d = math.hypot(a.x - b.x, a.y - b.y)
            if d <= r:
                out[a.id][b.id] = d
    return out


def oracle_features(ts: Timestep, r: float) -> dict[str, dict]:
    """Loop-based feature oracle: degree, avg_rel_speed, avg_rel_dist."""
    vel = {
        v.id: (v.speed * math.sin(math.radians(v.angle)),
               v.speed * math.cos(math.radians(v.angle)))
        for v in ts.vehicles
    }
    nbrs = brute_force_neighbors(ts, r)
    out = {}
    for v in ts.vehicles:
        items = sorted(nbrs[v.id].items(), key=lambda kv: id_sort_key(kv[0]))
        rel_speeds = [
            math.hypot(vel[v.id][0] - vel[o][0], vel[v.id][1] - vel[o][1])
            for o, _ in items
        ]
        dists = [d for _, d in items]
        deg = len(items)
        out[v.id] = {
            "degree": deg,
            "avg_rel_speed": sum(rel_speeds) / deg if deg else 0.0,
            "avg_rel_dist": sum(dists) / deg if deg else 0.0,
        }
    return out


def oracle_score(vid: str, feats: dict[str, dict], cfg: ClusterConfig) -> float:
    if cfg.algorithm == "lowest_id":
        return 0.0
    if cfg.algorithm == "highest_degree":
        return -float(feats[vid]["degree"])
    return cfg.w_v * feats[vid]["avg_rel_speed"] + cfg.w_d * feats[vid]["avg_rel_dist"] / cfg.range_m


def oracle_election(ts: Timestep, cfg: ClusterConfig):
    """Straight-line greedy (score, id) election over explicit sorted lists.

    Equivalent to running the clustering step from an empty state, where
    only the election phase can act.
    """
    nbrs = brute_force_neighbors(ts, cfg.range_m)
    feats = oracle_features(ts, cfg.range_m)
    ids = sorted((v.id for v in ts.vehicles), key=id_sort_key)
    roles = {vid: "UNCLUSTERED" for vid in ids}
    cluster_of: dict[str, str] = {}
    while True:
        candidates = [
            vid for vid in ids
            if roles[vid] == "UNCLUSTERED"
            and any(roles[o] == "UNCLUSTERED" for o in nbrs[vid])
        ]
        if not candidates:
            break
        winner = min(candidates, key=lambda vid: (oracle_score(vid, feats, cfg), id_sort_key(vid)))
        roles[winner] = "CH"
        for other in sorted(nbrs[winner], key=id_sort_key):
            if roles[other] == "UNCLUSTERED":
                roles[other] = "CM"
                cluster_of[other] = winner
    return roles, cluster_of
