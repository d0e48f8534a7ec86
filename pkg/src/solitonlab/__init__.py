"""Numerical laboratory for doubly-warped-product Ricci solitons.

The library integrates a six-dimensional autonomous system whose orbits
encode shrinking, steady, and expanding soliton metrics of the form

    g = ds^2 + (p1-1) s^2 / x1(s) g_{S^p1} + (p2-1) s^2 / x2(s) g_{S^p2},

locates the special orbits (smooth fills, cones, the Ricci-flat
heteroclinic), and reproduces the oscillatory aperture mechanism that
yields several distinct expanding solitons asymptotic to one cone.
"""

from .dims import Dimensions, SolitonClass
from .core import (
    PhasePoint,
    AvgDiffState,
    IntegratorConfig,
    Trajectory,
    vector_field,
    jacobian,
    flow,
    invariant_J,
    invariant_F,
    lyapunov_W,
    to_avg_diff,
    from_avg_diff,
)

__version__ = "0.1.0"

__all__ = [
    "Dimensions",
    "SolitonClass",
    "PhasePoint",
    "AvgDiffState",
    "IntegratorConfig",
    "Trajectory",
    "vector_field",
    "jacobian",
    "flow",
    "invariant_J",
    "invariant_F",
    "lyapunov_W",
    "to_avg_diff",
    "from_avg_diff",
    "__version__",
]
