"""Rashomon-set analysis for policies of explicit-state MDPs.

The package builds a stochastic taxi gridworld as an explicit MDP,
synthesizes an optimal policy by value iteration, clones it into neural
policies by behavioral cloning, proves behavioral equivalence of clones
through induced-Markov-chain model checking, tells equivalent policies
apart by gradient-based feature rankings, and stress-tests ensembles and
permissive policies under job-count distribution shift.
"""

from rashomon_mdp.mdp import (
    ExplicitDtmc,
    ExplicitMdp,
    FeatureSchema,
    ModelFormatError,
    StateCapError,
    Violation,
    model_fingerprint,
    read_explicit,
    validate_dtmc,
    validate_mdp,
    write_explicit,
)
from rashomon_mdp.proplang import (
    And,
    Atom,
    BoundPredicate,
    Not,
    Or,
    PredicateBindError,
    PropertyQuery,
    PropertySyntaxError,
    bind_predicate,
    format_predicate,
    format_property,
    parse_predicate,
    parse_property,
)
from rashomon_mdp.checker import (
    ConvergenceError,
    ReachabilityResult,
    TablePolicy,
    check_threshold,
    max_reach_mdp,
    min_reach_mdp,
    reach_prob_dtmc,
)
from rashomon_mdp.taxi import ACTIONS, TaxiParams, build_taxi, successor_distribution, taxi_schema
from rashomon_mdp.cloning import (
    ExpertDataset,
    MlpPolicy,
    TrainConfig,
    TrainReport,
    dataset_accuracy,
    extract_expert_dataset,
    init_policy,
    load_policy,
    read_dataset,
    save_policy,
    train,
    write_dataset,
)
from rashomon_mdp.attribution import (
    FeatureRanking,
    global_ranking,
    group_by_ranking,
    rankings_equal,
    saliency,
    saliency_batch,
)
from rashomon_mdp.rashomon import (
    EquivalenceClass,
    EquivalenceClasses,
    InducedDtmc,
    MajorityEnsemble,
    PermissivePolicy,
    ShiftReport,
    build_induced_dtmc,
    build_induced_mdp,
    build_rashomon_set,
    canonical_chain_bytes,
    dtmc_equivalent,
    majority_ensemble,
    partition_classes,
    shift_eval,
    union_permissive,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "And",
    "Atom",
    "BoundPredicate",
    "ConvergenceError",
    "EquivalenceClass",
    "EquivalenceClasses",
    "ExpertDataset",
    "ExplicitDtmc",
    "ExplicitMdp",
    "FeatureRanking",
    "FeatureSchema",
    "InducedDtmc",
    "MajorityEnsemble",
    "MlpPolicy",
    "ModelFormatError",
    "Not",
    "Or",
    "PermissivePolicy",
    "PredicateBindError",
    "PropertyQuery",
    "PropertySyntaxError",
    "ReachabilityResult",
    "ShiftReport",
    "StateCapError",
    "TablePolicy",
    "TaxiParams",
    "TrainConfig",
    "TrainReport",
    "Violation",
    "bind_predicate",
    "build_induced_dtmc",
    "build_induced_mdp",
    "build_rashomon_set",
    "build_taxi",
    "canonical_chain_bytes",
    "check_threshold",
    "dataset_accuracy",
    "dtmc_equivalent",
    "extract_expert_dataset",
    "format_predicate",
    "format_property",
    "global_ranking",
    "group_by_ranking",
    "init_policy",
    "load_policy",
    "majority_ensemble",
    "max_reach_mdp",
    "min_reach_mdp",
    "model_fingerprint",
    "parse_predicate",
    "parse_property",
    "partition_classes",
    "rankings_equal",
    "read_dataset",
    "read_explicit",
    "reach_prob_dtmc",
    "saliency",
    "saliency_batch",
    "save_policy",
    "shift_eval",
    "successor_distribution",
    "taxi_schema",
    "train",
    "union_permissive",
    "validate_dtmc",
    "validate_mdp",
    "write_dataset",
    "write_explicit",
]
