from .external import ExternalDetector
from .features import (
    Keypoint,
    Match,
    detect_and_compute,
    hamming_distance,
    hamming_matrix,
    knn_ratio_match,
)
from .oracle import OracleAgent, oracle_act
from .rule import (
    RuleAgentConfig,
    RuleAgentState,
    RuleBasedAgent,
    consensus,
    estimate_action,
)

__all__ = [
    "ExternalDetector",
    "Keypoint",
    "Match",
    "OracleAgent",
    "RuleAgentConfig",
    "RuleAgentState",
    "RuleBasedAgent",
    "consensus",
    "detect_and_compute",
    "estimate_action",
    "hamming_distance",
    "hamming_matrix",
    "knn_ratio_match",
    "oracle_act",
]
