"""bitpareto: Pareto-optimal per-layer bit-width search under a memory budget."""

__version__ = "0.1.0"

from .engine import (
    Archive,
    ArchiveEntry,
    GreedyResult,
    NoCandidateError,
    SearchParams,
    SearchResult,
    TargetUnreachableError,
    greedy_search,
    initialize_archive,
    one_shot_search,
    pareto_front,
    search,
    select_candidates,
    select_optimal,
)
from .evaluators import (
    Evaluator,
    EvaluatorError,
    InteractionEvaluator,
    PooledEvaluator,
    SeparableEvaluator,
    SyntheticModel,
    TransformedEvaluator,
    make_synthetic_evaluator,
)
from .external import ExternalEvaluator, HandshakeError, ProtocolError, external_evaluator
from .metrics import jsd, kl_divergence, quality_score, softmax
from .moea import (
    NsgaParams,
    NsgaResult,
    ObjectivePoint,
    crossover,
    crowding_distance,
    dominates,
    mutate,
    non_dominated_sort,
    nsga2_run,
)
from .oracle import (
    FrontComparison,
    SpaceTooLargeError,
    compare_fronts,
    enumerate_front,
    hypervolume,
    verify_front_coincidence,
)
from .sensitivity import SensitivityProfile, measure_sensitivity, prune_space
from .space import (
    BitConfig,
    LayerSpec,
    QuantOverhead,
    SearchSpace,
    SpaceError,
    effective_bits,
    load_search_space,
    random_config,
)
from .surrogate import RbfFitError, RbfModel, encode, fit_rbf, predict

__all__ = [
    "Archive",
    "ArchiveEntry",
    "BitConfig",
    "Evaluator",
    "EvaluatorError",
    "ExternalEvaluator",
    "FrontComparison",
    "GreedyResult",
    "HandshakeError",
    "InteractionEvaluator",
    "LayerSpec",
    "NoCandidateError",
    "NsgaParams",
    "NsgaResult",
    "ObjectivePoint",
    "PooledEvaluator",
    "ProtocolError",
    "QuantOverhead",
    "RbfFitError",
    "RbfModel",
    "SearchParams",
    "SearchResult",
    "SearchSpace",
    "SensitivityProfile",
    "SeparableEvaluator",
    "SpaceError",
    "SpaceTooLargeError",
    "SyntheticModel",
    "TargetUnreachableError",
    "TransformedEvaluator",
    "compare_fronts",
    "crossover",
    "crowding_distance",
    "dominates",
    "effective_bits",
    "encode",
    "enumerate_front",
    "external_evaluator",
    "fit_rbf",
    "greedy_search",
    "hypervolume",
    "initialize_archive",
    "jsd",
    "kl_divergence",
    "load_search_space",
    "make_synthetic_evaluator",
    "measure_sensitivity",
    "mutate",
    "non_dominated_sort",
    "nsga2_run",
    "one_shot_search",
    "pareto_front",
    "predict",
    "prune_space",
    "quality_score",
    "random_config",
    "search",
    "select_candidates",
    "select_optimal",
    "softmax",
    "verify_front_coincidence",
]
