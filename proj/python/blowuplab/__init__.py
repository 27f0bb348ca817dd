"""Python access to the blowuplab C++ kernels."""

import json as _json

from ._blowuplab import (
    closed_form_check,
    constants,
    eps_interaction,
    kirchhoff_critical,
    predicted_lambda,
    project_bubble_radial,
    radial_ground_state,
    rate_experiment,
)
from ._blowuplab import solve_balancing as _solve_balancing

__all__ = [
    "closed_form_check",
    "constants",
    "eps_interaction",
    "kirchhoff_critical",
    "predicted_lambda",
    "project_bubble_radial",
    "radial_ground_state",
    "rate_experiment",
    "solve_balancing",
]


def solve_balancing(n, eps, potential, centers, lambdas, tol=1e-9):
    """Solve the reduced system; `potential` is a dict such as {"type": "constant", "v0": 1.0}."""
    return _solve_balancing(n, eps, _json.dumps(potential), centers, lambdas, tol)
