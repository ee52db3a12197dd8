"""Per-timestep kinematic feature extraction.

For every vehicle in a timestep: a velocity vector derived from the
compass heading, the neighbor set within transmission range R (uniform
grid with cell side R, 3x3 block candidate collection, exact Euclidean
filter), degree, and mean relative speed / distance over the neighbors.

Neighbor data is held in flat CSR-style numpy arrays so that 1000-vehicle
frames stay cheap; per-vehicle object views are materialized on demand.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .trace_ingest import Timestep, VehicleState

try:  # optional accelerator; the numpy sweep below is the reference path
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _pair_sweep(keys_sorted, order, key_of, x, y, span, r, r2_hi, bound):
        """Scan of the 3x3 cell block around every vehicle.

        Same candidate set and the same double arithmetic as the numpy
        sweep (dx*dx + dy*dy, then sqrt), so both paths emit identical
        pairs and bit-identical distances. `bound` is the candidate
        count, an upper bound on the pair count, so one fill pass into
        preallocated buffers suffices. Output comes back already in
        (i, j) lexicographic order via two stable counting-sort passes,
        by j then by i.
        """
        n = x.shape[0]
        out_i = np.empty(bound, dtype=np.int64)
        out_j = np.empty(bound, dtype=np.int64)
        out_d = np.empty(bound, dtype=np.float64)
        k = 0
        for i in range(n):
            base = key_of[i]
            xi = x[i]
            yi = y[i]
            for o in range(-1, 2):
                # one contiguous key run covers the three cells of a column
                t_lo = base + o * span - 1
                t_hi = base + o * span + 1
                lo = 0
                hi = n
                while lo < hi:  # first key >= t_lo
                    mid = (lo + hi) >> 1
                    if keys_sorted[mid] < t_lo:
                        lo = mid + 1
                    else:
                        hi = mid
                start = lo
                hi = n
                while lo < hi:  # first key > t_hi
                    mid = (lo + hi) >> 1
                    if keys_sorted[mid] <= t_hi:
                        lo = mid + 1
                    else:
                        hi = mid
                for p in range(start, lo):
                    j = order[p]
                    if j == i:
                        continue
                    dx = xi - x[j]
                    dy = yi - y[j]
                    d2 = dx * dx + dy * dy
                    if d2 <= r2_hi:
                        d = np.sqrt(d2)
                        if d <= r:
                            out_i[k] = i
                            out_j[k] = j
                            out_d[k] = d
                            k += 1
        pos = np.zeros(n + 1, dtype=np.int64)
        for p in range(k):
            pos[out_j[p] + 1] += 1
        for v in range(n):
            pos[v + 1] += pos[v]
        tmp_i = np.empty(k, dtype=np.int64)
        tmp_j = np.empty(k, dtype=np.int64)
        tmp_d = np.empty(k, dtype=np.float64)
        for p in range(k):
            q = pos[out_j[p]]
            pos[out_j[p]] += 1
            tmp_i[q] = out_i[p]
            tmp_j[q] = out_j[p]
            tmp_d[q] = out_d[p]
        fin_i = np.empty(k, dtype=np.int64)
        fin_j = np.empty(k, dtype=np.int64)
        fin_d = np.empty(k, dtype=np.float64)
        pos = np.zeros(n + 1, dtype=np.int64)
        for p in range(k):
            pos[tmp_i[p] + 1] += 1
        for v in range(n):
            pos[v + 1] += pos[v]
        for p in range(k):
            q = pos[tmp_i[p]]
            pos[tmp_i[p]] += 1
            fin_i[q] = tmp_i[p]
            fin_j[q] = tmp_j[p]
            fin_d[q] = tmp_d[p]
        return fin_i, fin_j, fin_d


@dataclass(frozen=True)
class VelocityVector:
    vx: float
    vy: float


@dataclass(frozen=True)
class NeighborRelation:
    other: str
    distance: float
    rel_speed: float
    heading_diff: float  # degrees in [0, 180]


@dataclass(frozen=True)
class FeatureEntry:
    state: VehicleState
    velocity: VelocityVector
    neighbors: tuple[NeighborRelation, ...]  # sorted by other-id
    degree: int
    avg_rel_speed: float
    avg_rel_dist: float


def heading_to_velocity(speed: float, angle: float) -> VelocityVector:
    """Compass convention: 0 degrees = north (+y), clockwise positive."""
    rad = math.radians(angle)
    return VelocityVector(vx=speed * math.sin(rad), vy=speed * math.cos(rad))


class GridIndex:
    """Uniform grid over vehicle positions with cell side R.

    Queries inspect the 3x3 cell block around the target cell and then
    filter candidates by exact Euclidean distance <= R.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, r: float):
        if r <= 0:
            raise ValueError("transmission range must be > 0")
        self.r = float(r)
        self.x = x
        self.y = y
        self.cx = np.floor(x / r).astype(np.int64)
        self.cy = np.floor(y / r).astype(np.int64)

    @cached_property
    def cells(self) -> dict[tuple[int, int], np.ndarray]:
        """Occupied cell -> ascending vehicle indices. Built on demand; the
        bulk pair sweep works on the sorted strips instead."""
        cells: dict[tuple[int, int], np.ndarray] = {}
        if len(self.x):
            order = np.lexsort((self.cy, self.cx))
            keys = np.stack([self.cx[order], self.cy[order]], axis=1)
            change = np.nonzero(np.any(np.diff(keys, axis=0) != 0, axis=1))[0] + 1
            for chunk in np.split(order, change):
                cells[(int(self.cx[chunk[0]]), int(self.cy[chunk[0]]))] = np.sort(chunk)
        return cells

    def cell_of(self, i: int) -> tuple[int, int]:
        return int(self.cx[i]), int(self.cy[i])

    def candidates(self, cx: int, cy: int) -> np.ndarray:
        """All vehicle indices in the 3x3 block around cell (cx, cy)."""
        blocks = [
            self.cells[(cx + dx, cy + dy)]
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
            if (cx + dx, cy + dy) in self.cells
        ]
        if not blocks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(blocks)

    def query_point(self, px: float, py: float) -> np.ndarray:
        """Indices of vehicles within R of (px, py), ascending index order."""
        cand = self.candidates(int(math.floor(px / self.r)), int(math.floor(py / self.r)))
        if not len(cand):
            return cand
        d2 = (self.x[cand] - px) ** 2 + (self.y[cand] - py) ** 2
        return np.sort(cand[d2 <= self.r * self.r])

    def neighbor_pairs(self, workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All directed pairs (i, j), i != j, with dist(i, j) <= R.

        Vehicles are bucketed once in (cx, cy) sorted order; a cell's members
        and each neighbor column's row band are then contiguous slices, so
        the sweep runs on views without per-cell gathers. Returns
        (i_idx, j_idx, dist) sorted lexicographically by (i, j), so the
        result is independent of worker scheduling.
        """
        n = len(self.x)
        if n == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy(), np.empty(0)
        r = self.r
        r2 = r * r
        # prefilter on squared distance with ulp slack, decide on the exact
        # sqrt so the stored distances and the <= R test never disagree
        r2_hi = r2 + 2.0 * np.spacing(r2)

        if _HAVE_NUMBA:
            # collision-free linear cell key with a one-cell guard band in y
            cys = self.cy - self.cy.min() + 1
            span = np.int64(int(cys.max()) + 2)
            key_of = (self.cx - self.cx.min()) * span + cys
            korder = np.argsort(key_of, kind="stable")
            keys_sorted = key_of[korder]
            # candidate upper bound: per vehicle, the sizes of the three
            # contiguous key runs that cover its 3x3 block
            bound = 0
            for o in (-span, np.int64(0), span):
                t = key_of + o
                bound += int(
                    np.sum(
                        np.searchsorted(keys_sorted, t + 1, side="right")
                        - np.searchsorted(keys_sorted, t - 1, side="left")
                    )
                )
            return _pair_sweep(
                keys_sorted, korder, key_of, self.x, self.y, span, r, r2_hi, bound
            )

        order = np.lexsort((self.cy, self.cx))
        scx = self.cx[order]
        scy = self.cy[order]
        sx = self.x[order]
        sy = self.y[order]
        pos_of = np.arange(n, dtype=np.int64)
        ucx, col_start = np.unique(scx, return_index=True)
        col_end = np.append(col_start[1:], n)
        col_of = {int(c): k for k, c in enumerate(ucx)}
        ncol = len(ucx)
        # occupied cells per column: (cy values, global start, global end)
        col_cys: list[np.ndarray] = []
        col_lo: list[np.ndarray] = []
        col_hi: list[np.ndarray] = []
        for k in range(ncol):
            cs, ce = int(col_start[k]), int(col_end[k])
            ys = scy[cs:ce]
            run = np.concatenate(([0], np.nonzero(np.diff(ys))[0] + 1))
            col_cys.append(ys[run])
            col_lo.append(run + cs)
            col_hi.append(np.append(run[1:] + cs, ce))

        def process(col_indices):
            out_i, out_j, out_d = [], [], []
            for k in col_indices:
                # row band [cy-1, cy+1] per adjacent column, for every cell
                # of this column at once
                bands = []
                for c in (int(ucx[k]) - 1, int(ucx[k]), int(ucx[k]) + 1):
                    kk = col_of.get(c)
                    if kk is None:
                        continue
                    cs, ce = int(col_start[kk]), int(col_end[kk])
                    ys = scy[cs:ce]
                    los = np.searchsorted(ys, col_cys[k] - 1, side="left") + cs
                    his = np.searchsorted(ys, col_cys[k] + 1, side="right") + cs
                    bands.append((los.tolist(), his.tolist()))
                for c_idx in range(len(col_cys[k])):
                    mlo = int(col_lo[k][c_idx])
                    mhi = int(col_hi[k][c_idx])
                    parts = [
                        (los[c_idx], his[c_idx])
                        for los, his in bands
                        if los[c_idx] < his[c_idx]
                    ]
                    cand_x = np.concatenate([sx[a:b] for a, b in parts])
                    cand_y = np.concatenate([sy[a:b] for a, b in parts])
                    cand_pos = np.concatenate([pos_of[a:b] for a, b in parts])
                    dx = sx[mlo:mhi, None] - cand_x[None, :]
                    dy = sy[mlo:mhi, None] - cand_y[None, :]
                    d2 = dx * dx + dy * dy
                    mi, mj = np.nonzero(d2 <= r2_hi)
                    pos_i = mi + mlo
                    pos_j = cand_pos[mj]
                    d = np.sqrt(d2[mi, mj])
                    keep = (d <= r) & (pos_i != pos_j)
                    out_i.append(pos_i[keep])
                    out_j.append(pos_j[keep])
                    out_d.append(d[keep])
            return out_i, out_j, out_d

        if workers > 1 and ncol > 1:
            chunks = [range(ncol)[k::workers] for k in range(min(workers, ncol))]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(process, chunks))
        else:
            results = [process(range(ncol))]
        parts_i = [a for res in results for a in res[0]]
        parts_j = [a for res in results for a in res[1]]
        parts_d = [a for res in results for a in res[2]]
        pi = np.concatenate(parts_i)
        pj = np.concatenate(parts_j)
        dist = np.concatenate(parts_d)
        i_idx = order[pi]
        j_idx = order[pj]
        # (i, j) keys are unique, so a single-key sort gives a total order
        final = np.argsort(i_idx * np.int64(n) + j_idx)
        return i_idx[final], j_idx[final], dist[final]


def build_neighbor_index(ts: Timestep, r: float) -> GridIndex:
    x = np.array([v.x for v in ts.vehicles], dtype=float)
    y = np.array([v.y for v in ts.vehicles], dtype=float)
    return GridIndex(x, y, r)


class FeatureFrame:
    """Feature bundle for one timestep at transmission range R."""

    def __init__(self, ts: Timestep, r: float, workers: int = 1):
        if r <= 0:
            raise ValueError("transmission range must be > 0")
        self.time = ts.time
        self.range = float(r)
        self.timestep = ts
        self.ids: tuple[str, ...] = tuple(v.id for v in ts.vehicles)
        self.index_of: dict[str, int] = {vid: i for i, vid in enumerate(self.ids)}
        n = len(self.ids)
        cols = np.array([v[1:] for v in ts.vehicles], dtype=float).reshape(n, 4)
        self.x = np.ascontiguousarray(cols[:, 0])
        self.y = np.ascontiguousarray(cols[:, 1])
        self.speed = np.ascontiguousarray(cols[:, 2])
        self.angle = np.ascontiguousarray(cols[:, 3])
        rad = np.radians(self.angle)
        self.vx = self.speed * np.sin(rad)
        self.vy = self.speed * np.cos(rad)

        self.grid = GridIndex(self.x, self.y, r)
        i_idx, j_idx, dist = self.grid.neighbor_pairs(workers=workers)
        self.nbr_i = i_idx
        self.nbr_j = j_idx
        self.nbr_dist = dist
        self.nbr_offsets = np.concatenate(
            [[0], np.cumsum(np.bincount(i_idx, minlength=n))]
        ).astype(np.int64)
        self.degree = np.diff(self.nbr_offsets).astype(np.int64)

    # Relative-motion aggregates are only read by the mobility algorithm and
    # the materialized per-vehicle views, so they are computed on first use.

    @cached_property
    def nbr_rel_speed(self) -> np.ndarray:
        dvx = self.vx[self.nbr_i] - self.vx[self.nbr_j]
        dvy = self.vy[self.nbr_i] - self.vy[self.nbr_j]
        return np.hypot(dvx, dvy)

    @cached_property
    def nbr_heading_diff(self) -> np.ndarray:
        da = np.abs(self.angle[self.nbr_i] - self.angle[self.nbr_j])
        return np.minimum(da, 360.0 - da)

    @cached_property
    def avg_rel_speed(self) -> np.ndarray:
        safe_deg = np.maximum(self.degree, 1)
        return np.bincount(self.nbr_i, weights=self.nbr_rel_speed, minlength=len(self.ids)) / safe_deg

    @cached_property
    def avg_rel_dist(self) -> np.ndarray:
        safe_deg = np.maximum(self.degree, 1)
        return np.bincount(self.nbr_i, weights=self.nbr_dist, minlength=len(self.ids)) / safe_deg

    def __len__(self) -> int:
        return len(self.ids)

    def neighbor_slice(self, i: int) -> slice:
        return slice(int(self.nbr_offsets[i]), int(self.nbr_offsets[i + 1]))

    def neighbor_indices(self, i: int) -> np.ndarray:
        return self.nbr_j[self.neighbor_slice(i)]

    def neighbor_dists(self, i: int) -> np.ndarray:
        return self.nbr_dist[self.neighbor_slice(i)]

    def pair_distance(self, i: int, j: int) -> float | None:
        """Distance between i and j if j is within range of i, else None."""
        lo = self.nbr_offsets[i]
        hi = self.nbr_offsets[i + 1]
        pos = lo + self.nbr_j[lo:hi].searchsorted(j)
        if pos < hi and self.nbr_j[pos] == j:
            return float(self.nbr_dist[pos])
        return None

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Exact Euclidean distances for index arrays a, b (bit-identical to
        the grid's own distance computation)."""
        dx = self.x[a] - self.x[b]
        dy = self.y[a] - self.y[b]
        return np.sqrt(dx * dx + dy * dy)

    def neighbors_of(self, vid: str) -> tuple[NeighborRelation, ...]:
        i = self.index_of[vid]
        sl = self.neighbor_slice(i)
        return tuple(
            NeighborRelation(
                other=self.ids[j],
                distance=float(self.nbr_dist[k]),
                rel_speed=float(self.nbr_rel_speed[k]),
                heading_diff=float(self.nbr_heading_diff[k]),
            )
            for k, j in zip(range(sl.start, sl.stop), self.nbr_j[sl])
        )

    def entry(self, vid: str) -> FeatureEntry:
        i = self.index_of[vid]
        return FeatureEntry(
            state=self.timestep.vehicles[i],
            velocity=VelocityVector(float(self.vx[i]), float(self.vy[i])),
            neighbors=self.neighbors_of(vid),
            degree=int(self.degree[i]),
            avg_rel_speed=float(self.avg_rel_speed[i]),
            avg_rel_dist=float(self.avg_rel_dist[i]),
        )

    def entries(self) -> list[FeatureEntry]:
        return [self.entry(vid) for vid in self.ids]


def compute_features(ts: Timestep, r: float, workers: int = 1) -> FeatureFrame:
    return FeatureFrame(ts, r, workers=workers)
