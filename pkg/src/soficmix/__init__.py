"""Finite permutation models of groups, model measures, and entropy certificates.

The library builds desk-scale permutation models of free-abelian and free
groups, equips them with a weighted vertex metric, constructs path-partition
and product model measures, and certifies entropy inequalities (uniform
model-mixing, covering-number bounds, chain inequalities, local weak*
convergence) exactly wherever the instances are finite.
"""

from .construction import (
    PathPartition,
    build_bernoulli_model,
    build_model_measure,
    check_condition_a,
    check_condition_b,
    extract_cycles,
    partition_paths,
    schedule_l,
)
from .errors import (
    BudgetExceededError,
    CapExceededError,
    MissingPatternError,
    PresentationMismatchError,
    ScheduleError,
    SoficmixError,
    ValidationError,
)
from .groups import (
    CosetDecomposition,
    GroupPresentation,
    GroupWord,
    coset_decompose,
    distance,
    metric_ball,
    same_coset,
    word_metric,
)
from .measures import (
    Block,
    BlockProductMeasure,
    ExplicitMeasure,
    MarkovPathLaw,
    binary_entropy,
    conditional_entropy,
    markov_subset_marginal,
    pattern_entropy,
    rokhlin_distance,
    shannon_entropy,
)
from .metric import ModelMetric, build_metric, good_vertices, separated_set_greedy
from .processes import (
    BernoulliProcess,
    CoinducedProcess,
    MarkovProcess,
    ProcessOracle,
    uniform_mixing_radius,
)
from .sofic import (
    LocalObservable,
    SoficMap,
    build_cycle_sofic,
    build_random_sofic,
    build_torus_sofic,
    defect_report,
    orbit_image,
    pullback_name,
    push_observable,
)
from .verify import (
    MixingCertificate,
    certify_uniform_model_mixing,
    check_chain_inequality,
    check_covering_bound,
    derive_mixing_parameters,
    diagnose_local_convergence,
    entropy_lower_bound_report,
    inflate_separation_radius,
)

__version__ = "0.1.0"
