"""Weighted covering/packing games: dynamics, broadcast strategies, and a
seeded Monte-Carlo verification harness."""

from .advertiser import (
    AdStrategy,
    LpSolution,
    StarCheck,
    advertise_lp,
    advertise_star_greedy,
    build_star_greedy,
    check_star_condition,
    delta1_star,
    make_strategy,
    repair_to_full_cover,
    round_lp,
    solve_lp_relaxation,
)
from .dynamics import (
    DynamicsTrace,
    LtdConfig,
    PhaseDiagnostics,
    PsaConfig,
    ScheduleConfig,
    TraceEvent,
    compute_diagnostics,
    default_step_cap,
    default_t_star,
    export_trace,
    run_best_response,
    run_ltd,
    run_psa,
)
from .game import (
    CoveringInstance,
    InstanceStats,
    JointState,
    NashResult,
    WeightedSet,
    agent_cost,
    best_response,
    compute_stats,
    is_nash,
    potential,
    social_cost,
    uncovered_sets,
)
from .harness import (
    AppendixRow,
    BruteForceResult,
    ExperimentConfig,
    NashEnumeration,
    TrialReport,
    TrialRow,
    brute_force_opt,
    check_appendix_bound,
    enumerate_nash,
    run_experiment,
    run_trial,
    splitmix64,
    trial_seed,
)
from .instances import (
    GeneratorSpec,
    ParseError,
    gen_grid_sensor,
    gen_poa_bipartite,
    gen_random_uniform,
    gen_star,
    load_instance,
    load_state,
    parse_instance,
    parse_state,
    save_instance,
    save_state,
    serialize_instance,
    serialize_state,
)
from .packing import (
    CorrespondenceReport,
    PackingView,
    is_packing_nash,
    nash_correspondence_check,
    packing_agent_cost,
    packing_social_cost,
    relabel_state,
)

__version__ = "0.1.0"
