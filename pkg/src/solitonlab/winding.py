"""Winding-number certification for two-dimensional root finding.

A rectangle in parameter space certifies an interior root of a map
F: R^2 -> R^2 when the boundary image winds around the origin with a
nonzero degree.  The count is trusted only if consecutive boundary
samples turn by less than pi/2, which rules out aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class WindingResult:
    winding: int
    certified: bool
    max_increment: float
    min_radius: float


def winding_number(points: np.ndarray, increment_cap: float = np.pi / 2) -> WindingResult:
    """Degree of a closed sampled loop (complex values) about the origin."""
    z = np.asarray(points, dtype=complex)
    if abs(z[0] - z[-1]) > 0:
        z = np.append(z, z[0])
    radii = np.abs(z)
    if np.any(radii == 0):
        return WindingResult(0, False, np.inf, 0.0)
    args = np.angle(z)
    inc = np.diff(args)
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    total = float(np.sum(inc))
    w = int(np.rint(total / (2 * np.pi)))
    max_inc = float(np.max(np.abs(inc)))
    return WindingResult(w, max_inc < increment_cap, max_inc, float(np.min(radii)))


def rectangle_boundary(u_lo: float, u_hi: float, v_lo: float, v_hi: float, n_per_side: int) -> np.ndarray:
    """Counterclockwise boundary samples (u, v), corner-to-corner, not closed."""
    bottom = np.column_stack([np.linspace(u_lo, u_hi, n_per_side, endpoint=False), np.full(n_per_side, v_lo)])
    right = np.column_stack([np.full(n_per_side, u_hi), np.linspace(v_lo, v_hi, n_per_side, endpoint=False)])
    top = np.column_stack([np.linspace(u_hi, u_lo, n_per_side, endpoint=False), np.full(n_per_side, v_hi)])
    left = np.column_stack([np.full(n_per_side, u_lo), np.linspace(v_hi, v_lo, n_per_side, endpoint=False)])
    return np.vstack([bottom, right, top, left])


def certify_rectangle(fn, u_lo, u_hi, v_lo, v_hi, n_per_side: int = 16) -> tuple[WindingResult, np.ndarray]:
    """Evaluate fn on the boundary and compute its certified winding number.

    fn maps (u, v) -> (F1, F2); the image loop is F1 + i F2.
    """
    pts = rectangle_boundary(u_lo, u_hi, v_lo, v_hi, n_per_side)
    vals = np.array([complex(*fn(u, v)) for u, v in pts])
    return winding_number(vals), vals
