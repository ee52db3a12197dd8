"""Trace-driven VANET clustering simulator.

Ingests SUMO FCD (or CSV) mobility traces, extracts per-timestep
kinematic features, forms clusters and elects cluster heads under
pluggable algorithms, and reports per-event records plus aggregate
stability metrics. Usable as a library, a CLI, or an HTTP service.
"""

from .clustering import (
    AlgorithmDescriptor,
    ClusterConfig,
    ClusterState,
    Role,
    list_algorithms,
    score_vehicle,
    step_clustering,
)
from .engine import RunConfig, RunResult, TimestepRecord, run_simulation
from .features import (
    FeatureFrame,
    NeighborRelation,
    VelocityVector,
    build_neighbor_index,
    compute_features,
    heading_to_velocity,
)
from .postproc import (
    MetricsAccumulator,
    MetricsSummary,
    SeriesPoint,
    emit_graph_csv,
    emit_report,
    summary_to_json,
)
from .trace_ingest import (
    Scenario,
    Timestep,
    ValidationReport,
    VehicleState,
    parse_csv,
    parse_fcd_xml,
    parse_scenario,
    scenario_to_csv,
    validate_scenario,
)

__version__ = "0.1.0"
