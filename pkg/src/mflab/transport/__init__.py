"""Exact Wasserstein distances."""
from .core import (TransportPlan, TransportSolution, Witness, certify_lipschitz, constant_witness,
                   identity_witness, kantorovich_witness, solve_transport, w1_dual_gap,
                   w1_exact_1d, wp_discrete, wp_exact_1d)
from .onedim import w1_sorted_vs_law, wp_weighted_1d

__all__ = [
    "TransportPlan", "TransportSolution", "Witness", "certify_lipschitz", "constant_witness",
    "identity_witness", "kantorovich_witness", "solve_transport", "w1_dual_gap", "w1_exact_1d",
    "wp_discrete", "wp_exact_1d", "w1_sorted_vs_law", "wp_weighted_1d",
]
