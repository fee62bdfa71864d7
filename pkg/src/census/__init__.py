"""Size estimation for master/slave ad hoc networks.

Protocol implementations (token tours and gossip aggregation in original
and cluster-adapted forms) on top of a deterministic discrete-event
simulator with topology churn, plus an experiment harness and CLI.
"""

from .topology import (
    ChangeEvent,
    ChurnParams,
    GenParams,
    GraphStats,
    Role,
    Topology,
    classify_role,
    compute_stats,
    generate_topology,
    mutate_topology,
    size_from_role_stats,
    topology_from_text,
    topology_to_text,
    validate,
)
from .sim import Event, FloodJob, SeededRng, Simulator, route_to
from .random_tour import (
    AdaptedToken,
    BaselineToken,
    TourEngine,
    TourOutcome,
    TourParams,
    adapted_finalize,
    adapted_update,
    baseline_finalize,
    baseline_step,
    init_adapted,
    init_baseline,
    run_tour,
    select_next_hop,
)
from .gossip import (
    GossipResult,
    GossipState,
    PrecisionSpec,
    RoundRecord,
    baseline_round,
    cluster_round,
    estimate_of,
    init_gossip,
    is_converged,
    pairwise_exchange,
    run_adapted,
    run_baseline,
)
from .experiments import (
    ExperimentRecord,
    ScenarioConfig,
    SummaryStats,
    emit_csv,
    load_config,
    load_records,
    parse_config,
    render_config,
    run_batch,
    run_one,
    summarize,
)
from .presets import PRESETS, preset_scenarios, run_preset

__version__ = "0.1.0"
