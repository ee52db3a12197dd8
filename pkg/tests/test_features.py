import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_neighbors, make_timestep, oracle_features, random_timestep
from vanetsim import features
from vanetsim.features import (
    GridIndex,
    build_neighbor_index,
    compute_features,
    heading_to_velocity,
)


def test_heading_north():
    v = heading_to_velocity(10, 0)
    assert v.vx == pytest.approx(0, abs=1e-12)
    assert v.vy == pytest.approx(10)


def test_heading_east():
    v = heading_to_velocity(10, 90)
    assert v.vx == pytest.approx(10)
    assert v.vy == pytest.approx(0, abs=1e-12)


def test_heading_45():
    v = heading_to_velocity(5, 45)
    assert v.vx == pytest.approx(3.535534, abs=1e-6)
    assert v.vy == pytest.approx(3.535534, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e3), st.floats(-720, 720))
def test_heading_preserves_magnitude(speed, angle):
    v = heading_to_velocity(speed, angle)
    assert math.hypot(v.vx, v.vy) == pytest.approx(speed, rel=1e-9, abs=1e-9)


def test_grid_same_cell_neighbors():
    ts = make_timestep(0, [("A", 0, 0, 0, 0), ("B", 50, 0, 0, 0)])
    idx = build_neighbor_index(ts, 100)
    assert idx.cell_of(0) == (0, 0) and idx.cell_of(1) == (0, 0)
    i, j, d = idx.neighbor_pairs()
    assert sorted(zip(i.tolist(), j.tolist())) == [(0, 1), (1, 0)]
    assert d[0] == pytest.approx(50)


def test_grid_adjacent_cells_exact_filter():
    ts = make_timestep(0, [("A", 0, 0, 0, 0), ("B", 150, 0, 0, 0)])
    idx = build_neighbor_index(ts, 100)
    assert idx.cell_of(0) == (0, 0) and idx.cell_of(1) == (1, 0)
    i, _, _ = idx.neighbor_pairs()
    assert len(i) == 0


def test_grid_matches_brute_force_500():
    rng = random.Random(7)
    ts = random_timestep(rng, 0.0, 500, size=2000.0)
    frame = compute_features(ts, 150.0)
    oracle = brute_force_neighbors(ts, 150.0)
    for vid in frame.ids:
        got = {r.other: r.distance for r in frame.neighbors_of(vid)}
        assert set(got) == set(oracle[vid])
        for other, dist in got.items():
            assert dist == pytest.approx(oracle[vid][other], abs=1e-9)


def test_t3_features(t3_scenario):
    frame = compute_features(t3_scenario.timesteps[0], 100.0)
    a, b, c = (frame.entry(v) for v in ("A", "B", "C"))
    assert (a.degree, b.degree, c.degree) == (1, 1, 0)
    (rel,) = a.neighbors
    assert rel.other == "B"
    assert rel.distance == pytest.approx(50)
    assert rel.rel_speed == pytest.approx(0, abs=1e-12)
    assert rel.heading_diff == pytest.approx(0)


def test_opposing_pair_vector_arithmetic():
    ts = make_timestep(0, [("A", 0, 0, 10, 90), ("C", 200, 0, 20, 270)])
    frame = compute_features(ts, 300.0)
    (rel,) = frame.neighbors_of("A")
    assert rel.distance == pytest.approx(200)
    assert rel.rel_speed == pytest.approx(30, rel=1e-12)
    assert rel.heading_diff == pytest.approx(180)


def test_single_vehicle_conventions():
    ts = make_timestep(0, [("A", 0, 0, 10, 90)])
    frame = compute_features(ts, 100.0)
    e = frame.entry("A")
    assert e.degree == 0
    assert e.avg_rel_speed == 0.0
    assert e.avg_rel_dist == 0.0


def test_colocated_vehicles_are_neighbors():
    ts = make_timestep(0, [("A", 5, 5, 1, 0), ("B", 5, 5, 2, 180)])
    frame = compute_features(ts, 10.0)
    assert frame.entry("A").degree == 1
    assert frame.neighbors_of("A")[0].distance == 0.0


def test_empty_timestep():
    ts = make_timestep(0, [])
    frame = compute_features(ts, 100.0)
    assert len(frame) == 0


def test_negative_coordinates_cells():
    # floor() bucketing must behave for negative positions too
    ts = make_timestep(0, [("A", -10, -10, 0, 0), ("B", 10, 10, 0, 0)])
    frame = compute_features(ts, 100.0)
    assert frame.entry("A").degree == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 60), st.sampled_from([50.0, 150.0, 300.0]))
def test_oracle_equivalence_and_symmetry(seed, n, r):
    rng = random.Random(seed)
    ts = random_timestep(rng, 0.0, n, size=600.0)
    frame = compute_features(ts, r)
    oracle = oracle_features(ts, r)
    for vid in frame.ids:
        e = frame.entry(vid)
        assert e.degree == oracle[vid]["degree"]
        assert 0 <= e.degree <= n - 1
        assert e.avg_rel_speed == pytest.approx(oracle[vid]["avg_rel_speed"], abs=1e-9)
        assert e.avg_rel_dist == pytest.approx(oracle[vid]["avg_rel_dist"], abs=1e-9)
        for rel in e.neighbors:
            # symmetry of the relation with equal distance and rel_speed
            back = {b.other: b for b in frame.neighbors_of(rel.other)}
            assert vid in back
            assert back[vid].distance == rel.distance
            assert back[vid].rel_speed == rel.rel_speed
            # triangle sanity
            i = frame.index_of[vid]
            j = frame.index_of[rel.other]
            assert rel.rel_speed <= frame.speed[i] + frame.speed[j] + 1e-9
            assert 0 <= rel.heading_diff <= 180


def test_neighbor_lists_sorted_by_id():
    rng = random.Random(3)
    ts = random_timestep(rng, 0.0, 80, size=300.0)
    frame = compute_features(ts, 150.0)
    for vid in frame.ids:
        others = [r.other for r in frame.neighbors_of(vid)]
        assert others == sorted(others, key=lambda s: s.encode())


def test_workers_do_not_change_results():
    rng = random.Random(11)
    ts = random_timestep(rng, 0.0, 300, size=1500.0)
    f1 = compute_features(ts, 150.0, workers=1)
    f4 = compute_features(ts, 150.0, workers=4)
    assert np.array_equal(f1.nbr_i, f4.nbr_i)
    assert np.array_equal(f1.nbr_j, f4.nbr_j)
    assert np.array_equal(f1.nbr_dist, f4.nbr_dist)
    assert np.array_equal(f1.avg_rel_speed, f4.avg_rel_speed)


def test_query_point():
    ts = make_timestep(0, [("A", 0, 0, 0, 0), ("B", 90, 0, 0, 0), ("C", 250, 0, 0, 0)])
    idx = build_neighbor_index(ts, 100)
    assert idx.query_point(0.0, 0.0).tolist() == [0, 1]


@pytest.mark.skipif(not features._HAVE_NUMBA, reason="numba not installed")
def test_compiled_sweep_matches_reference_sweep():
    rng = random.Random(29)
    for case, (n, size, r) in enumerate([(400, 1000.0, 150.0), (250, 500.0, 50.0), (300, 2000.0, 300.0)]):
        ts = random_timestep(rng, float(case), n, size=size)
        frame = compute_features(ts, r)
        idx = GridIndex(frame.x, frame.y, r)
        fast = idx.neighbor_pairs()
        features._HAVE_NUMBA = False
        try:
            ref = idx.neighbor_pairs()
        finally:
            features._HAVE_NUMBA = True
        for a, b in zip(fast, ref):
            assert np.array_equal(a, b)
