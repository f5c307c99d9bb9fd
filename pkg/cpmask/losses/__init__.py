from .gradcheck import gradient_check, pathway_checks, smooth_activations
from .oracle import affinity_params, brute_force_affinity
from .terms import (
    LossReport,
    LossWeights,
    RoILossTerms,
    affinity_loss,
    affinity_sums,
    boundary_loss,
    roi_loss_terms,
    segment_loss,
    total_loss
)

__all__ = [
    # Terms
    "LossReport",
    "LossWeights",
    "RoILossTerms",
    "affinity_loss",
    "affinity_sums",
    "boundary_loss",
    "roi_loss_terms",
    "segment_loss",
    "total_loss",
    # Oracle
    "affinity_params",
    "brute_force_affinity",
    # Gradient checks
    "gradient_check",
    "pathway_checks",
    "smooth_activations"
]
