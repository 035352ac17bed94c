"""Counterfactual attribution for ordinal outcomes.

Point identification and sharp bounds for the probability of necessity
(event probability among treated units with a given observed outcome) and
the probability of causation (its unconditional twin under randomization),
over a three-level assumption ladder, with LP and sampling self-checks.
"""

from .bounds import (
    BoundsResult,
    Method,
    UnsupportedEventError,
    monotone_consistent,
    pn_bounds_marginal,
    pn_bounds_monotone,
)
from .core import (
    ATOL,
    Assumptions,
    CausalAttributionError,
    Conditioning,
    EventSpec,
    EventSpecError,
    GapSequence,
    InvalidDistributionError,
    JointProbabilityMatrix,
    MarginalPair,
    OrdinalDistribution,
    ZeroEvidenceError,
    allowed_mask,
    fixed_zero_cells,
    make_event,
    pn_from_joint,
)
from .identify import (
    FalsificationError,
    FalsificationReport,
    falsification_check,
    gap_sequence,
    identify_joint,
    pn_point,
)
from .ingest import (
    ContingencyTable,
    DataFormatError,
    EmptyArmError,
    IncompatibleSourcesError,
    Source,
    StratifiedTable,
    counterfactual_margin_experimental,
    counterfactual_margin_unconfounded,
    empirical_margin,
    load_strata_json,
    load_table,
    randomized_margins,
)
from .lp import (
    CertificateError,
    LinearProgram,
    LpError,
    LpInfeasibleError,
    LPSolution,
    LpStatus,
    Sense,
    build_lp,
    pn_bounds_lp,
    solve,
)
from .oracle import (
    ConstructionError,
    Endpoint,
    SamplingError,
    VerificationReport,
    endpoint_witnesses,
    enumerate_vertices,
    extremal_witness_marginal,
    product_completion,
    sample_feasible,
    verify_bounds,
)
from .pc import pc_bounds, pc_point

__all__ = [
    "ATOL",
    "Assumptions",
    "BoundsResult",
    "CausalAttributionError",
    "CertificateError",
    "Conditioning",
    "ConstructionError",
    "ContingencyTable",
    "DataFormatError",
    "EmptyArmError",
    "Endpoint",
    "EventSpec",
    "EventSpecError",
    "FalsificationError",
    "FalsificationReport",
    "GapSequence",
    "IncompatibleSourcesError",
    "InvalidDistributionError",
    "JointProbabilityMatrix",
    "LPSolution",
    "LinearProgram",
    "LpError",
    "LpInfeasibleError",
    "LpStatus",
    "MarginalPair",
    "Method",
    "OrdinalDistribution",
    "SamplingError",
    "Sense",
    "Source",
    "StratifiedTable",
    "UnsupportedEventError",
    "VerificationReport",
    "ZeroEvidenceError",
    "allowed_mask",
    "build_lp",
    "counterfactual_margin_experimental",
    "counterfactual_margin_unconfounded",
    "empirical_margin",
    "endpoint_witnesses",
    "enumerate_vertices",
    "extremal_witness_marginal",
    "falsification_check",
    "fixed_zero_cells",
    "gap_sequence",
    "identify_joint",
    "load_strata_json",
    "load_table",
    "make_event",
    "monotone_consistent",
    "pc_bounds",
    "pc_point",
    "pn_bounds_lp",
    "pn_bounds_marginal",
    "pn_bounds_monotone",
    "pn_from_joint",
    "pn_point",
    "product_completion",
    "randomized_margins",
    "sample_feasible",
    "solve",
    "verify_bounds",
]

__version__ = "0.1.0"
