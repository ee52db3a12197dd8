import random
import threading

import pytest

from conftest import make_timestep, random_walk_scenario
from vanetsim.clustering import ClusterConfig, Role
from vanetsim.engine import RunConfig, run_simulation
from vanetsim.errors import ConfigError, RunCancelled
from vanetsim.postproc import emit_graph_csv, emit_report, summary_to_json
from vanetsim.trace_ingest import Scenario


def lowest_id_cfg(scenario, **kw):
    return RunConfig(
        scenario=scenario,
        cluster=ClusterConfig(range_m=100.0, algorithm="lowest_id"),
        **kw,
    )


def test_t3_two_step_run(t3_scenario):
    records = []
    result = run_simulation(lowest_id_cfg(t3_scenario), record_sink=records.extend)
    assert result.n_events == 2
    assert len(records) == 6
    by_veh = {(r.t, r.veh): r for r in records}
    for t in (0.0, 1.0):
        assert by_veh[(t, "A")].role is Role.CH
        assert by_veh[(t, "B")].role is Role.CM
        assert by_veh[(t, "B")].cluster == "A"
        assert by_veh[(t, "B")].dist_ch == pytest.approx(50.0)
        assert by_veh[(t, "C")].role is Role.UNCLUSTERED
        assert by_veh[(t, "C")].cluster is None


def test_single_vehicle_single_step():
    scenario = Scenario(
        name="solo", timesteps=(make_timestep(0.0, [("A", 0, 0, 5, 0)]),), nominal_dt=1.0
    )
    records = []
    result = run_simulation(lowest_id_cfg(scenario), record_sink=records.extend)
    assert len(records) == 1
    assert records[0].role is Role.UNCLUSTERED
    assert result.summary.avg_num_clusters == 0.0


def test_cancel_before_first_event(t3_scenario):
    flag = threading.Event()
    flag.set()
    records = []
    with pytest.raises(RunCancelled):
        run_simulation(lowest_id_cfg(t3_scenario), record_sink=records.extend, cancel=flag)
    assert records == []


def test_empty_scenario_rejected():
    scenario = Scenario(name="empty", timesteps=(), nominal_dt=1.0)
    with pytest.raises(ConfigError):
        run_simulation(lowest_id_cfg(scenario))


def test_record_count_matches_presence():
    scenario = random_walk_scenario(random.Random(21), n=15, steps=30)
    records = []
    run_simulation(lowest_id_cfg(scenario), record_sink=records.extend)
    expected = sum(len(ts.vehicles) for ts in scenario.timesteps)
    assert len(records) == expected


def test_records_in_time_then_id_order():
    scenario = random_walk_scenario(random.Random(23), n=10, steps=10)
    records = []
    run_simulation(lowest_id_cfg(scenario), record_sink=records.extend)
    keys = [(r.t, r.veh.encode()) for r in records]
    assert keys == sorted(keys)


def test_progress_non_decreasing_and_complete(t3_scenario):
    seen = []
    run_simulation(lowest_id_cfg(t3_scenario), progress=seen.append)
    assert seen == sorted(seen)
    assert seen[-1] == 1.0
    assert len(seen) >= len(t3_scenario.timesteps)


def test_replay_determinism_bytes():
    scenario = random_walk_scenario(random.Random(31), n=20, steps=25)
    cfg = ClusterConfig(range_m=150.0, algorithm="mobility")

    def run(workers):
        records = []
        result = run_simulation(
            RunConfig(scenario=scenario, cluster=cfg, workers=workers),
            record_sink=records.extend,
        )
        return (
            emit_report(records, fmt="jsonl"),
            emit_graph_csv(list(result.series)),
            summary_to_json(result.summary),
        )

    assert run(1) == run(1)
    assert run(1) == run(4)


def test_keep_states(t3_scenario):
    result = run_simulation(lowest_id_cfg(t3_scenario, keep_states=True))
    assert result.states is not None and len(result.states) == 2
    assert result.states[0].roles["A"] is Role.CH
