"""Maximum-likelihood estimation of the merge hierarchy behind
single-linkage clustering, from a noisy dissimilarity measurement."""

from .core import (
    DegenerateStructureWarning,
    Dendrogram,
    Dissimilarity,
    HeightVector,
    Metric,
    Partition,
    SizeLimitError,
    Structure,
    TriangleViolation,
    Ultrametric,
    UltrametricViolation,
    compose,
    count_structures,
    cut,
    decompose,
    enumerate_structures,
    structure_at,
    structure_index,
    validate_metric,
    validate_ultrametric,
)
from .estimator import EstimateReport, EstimationError, mle_estimate, slhc_estimate
from .experiments import (
    BinHistogram,
    ExperimentSpec,
    RankDistribution,
    generate_ground_truth,
    run_comparison_study,
    run_frequency_study,
)
from .likelihood import LikelihoodConfig, phi, structure_log_likelihood
from .mh import (
    MHConfig,
    ProposalStuckError,
    StructureTally,
    mh_sample,
    mh_transition,
    prune,
    theta_membership,
)
from .noise import DomainError, LogNormalParams, NoiseSpec, log_density, params_for, sample_measurement
from .rng import substream
from .samplers import (
    FiberSample,
    InsufficientSamplesError,
    SamplerBudget,
    fiber_bounds,
    sample_cone,
    sample_fiber,
    sample_heights,
)
from .trees import (
    ConeSpec,
    KMaxExceededError,
    SpanningTree,
    cone_contains,
    mst,
    mst_set,
    path_bound,
    slhc,
)

__version__ = "0.1.0"
