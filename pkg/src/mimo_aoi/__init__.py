"""Age-of-information scheduling for uplink multiuser MIMO status updates."""

from mimo_aoi.channel import (
    ChannelConfig,
    build_outage_table,
    effective_noise_ratio,
    error_probability,
)
from mimo_aoi.mdp import (
    MdpSpec,
    make_spec,
    resolve_action,
    reward,
    state_from_index,
    state_index,
    transitions,
)
from mimo_aoi.policies import (
    GreedyPolicy,
    OptimalPolicy,
    StationaryPolicy,
    decide,
    greedy_decide,
    parse_policy,
)
from mimo_aoi.rvi import (
    bellman_backup,
    check_drift_condition,
    extract_policy,
    solve_rvi,
)
from mimo_aoi.simulator import SimConfig, SimResult, evaluate_policy_exact, simulate

__all__ = [
    "ChannelConfig",
    "GreedyPolicy",
    "MdpSpec",
    "OptimalPolicy",
    "SimConfig",
    "SimResult",
    "StationaryPolicy",
    "bellman_backup",
    "build_outage_table",
    "check_drift_condition",
    "decide",
    "effective_noise_ratio",
    "error_probability",
    "evaluate_policy_exact",
    "extract_policy",
    "greedy_decide",
    "make_spec",
    "parse_policy",
    "resolve_action",
    "reward",
    "simulate",
    "solve_rvi",
    "state_from_index",
    "state_index",
    "transitions",
]
