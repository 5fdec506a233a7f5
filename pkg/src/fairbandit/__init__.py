"""Fair contextual bandits: chained confidence intervals and gap-based exploration."""

from .chaining import ChainPartition, ScoredInterval, chains, linked, partition_bounds, top_chain
from .estimator import ConfidenceInterval, DesignState, new_design_state
from .fairgap import FairGapParams, GapInstance, Polytope, approx_fairgap_round, fairgap_round
from .ridgefair import RidgeFairVariant, SelectionDistribution, at_most, exactly, ridgefair_round

__all__ = [
    "ChainPartition",
    "ConfidenceInterval",
    "DesignState",
    "FairGapParams",
    "GapInstance",
    "Polytope",
    "RidgeFairVariant",
    "ScoredInterval",
    "SelectionDistribution",
    "approx_fairgap_round",
    "at_most",
    "chains",
    "exactly",
    "fairgap_round",
    "linked",
    "new_design_state",
    "partition_bounds",
    "ridgefair_round",
    "top_chain",
]
__version__ = "0.1.0"
