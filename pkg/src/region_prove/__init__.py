"""Sampling-based enumeration of safe input regions for ReLU networks."""

from .engine import (
    Classification,
    EngineConfig,
    Heuristic,
    ReachableEstimate,
    RegionRecord,
    VerificationOutcome,
    audit_safe_regions,
    choose_split,
    classify_region,
    compute_reachable_set,
    run_eprove,
)
from .geometry import Hyperrectangle, RegionSet, eps_align_shrink, split, total_volume, volume
from .network import (
    AugmentedNetwork,
    LinearConstraint,
    Network,
    SafetyProperty,
    augment,
    forward,
    forward_batch,
    parse_network_json,
    parse_nnet,
)
from .oracle import grid_safe_rate, mc_safe_rate, region_violation_fraction
from .tolerance import ToleranceParams, confidence_joint, confidence_single, doubling_m_schedule, required_sample_size

__version__ = "0.1.0"
