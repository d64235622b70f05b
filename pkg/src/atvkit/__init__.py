"""Exact adapted optimal transport on finite probability trees."""

from .adapted import (
    BicausalityReport,
    Coupling,
    adapted_transport,
    adapted_tv,
    atv_pair_cost,
    atv_weighted,
    build_gamma,
    check_bicausal,
    gamma_j,
    gamma_j_entropy_bound,
    lemma_rhs_terms,
    nested_distance,
    psi_j,
    psi_jensen_bound,
)
from .divergences import (
    adapted_rhs,
    bv_rhs,
    corollary_rhs_p,
    entropy_chain_terms,
    log_exp_moment,
    relative_entropy,
    weighted_tv,
)
from .ot_core import TransportPlan, TransportProblem, solve_transport, wasserstein
from .process_law import (
    Atom,
    PathMeasure,
    PathMetric,
    ProcessLaw,
    WeightFunction,
    kernel,
    law_from_path_measure,
    load_law,
    meet,
    projection,
    residual_parts,
    save_law,
    tail_law,
)

__version__ = "0.1.0"
