"""Shared test configurations."""
from mflab.measures import PotentialSpec, parse_law

# quadratic test matrix for the second-moment bound: (beta, gamma, center, initial law)
GRONWALL_MATRIX = [
    (1.0, 0.0, 0.0, "gaussian(mean=0, std=0.3)"),
    (1.0, 0.5, 0.0, "gaussian(mean=0.5, std=1)"),
    (2.0, 0.5, 0.0, "gaussian(mean=-1, std=0.5)"),
    (0.5, 0.0, 0.0, "gaussian(mean=0, std=2)"),
    (1.0, -0.25, 0.0, "gaussian(mean=0, std=0.5)"),
    (1.0, -0.25, 0.0, "gaussian(mean=1, std=1)"),
    (1.0, 1.0, 0.0, "gaussian(mean=0, std=1.5)"),
    (1.0, 0.0, 1.0, "gaussian(mean=0, std=1)"),
    (2.0, -0.5, -0.5, "gaussian(mean=0.5, std=0.7)"),
    (0.5, 0.25, 0.0, "gaussian-mixture(weights=[0.5, 0.5], means=[-1, 1.5], stds=[0.4, 0.6])"),
]


def gronwall_case(k):
    beta, gamma, c, law = GRONWALL_MATRIX[k]
    return PotentialSpec.quadratic(beta, gamma, center=(c,)), parse_law(law)
