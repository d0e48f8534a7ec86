"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's own integration and
algebra paths: the vector field is re-derived symbolically, and the
reference integrator is a plain fixed-step classual RK4.
"""

from __future__ import annotations

import numpy as np
import sympy as sp


def symbolic_vector_field(state, p1: int, p2: int, lam: int) -> np.ndarray:
    """Evaluate the six rate equations via sympy exact arithmetic."""
    x1, y1, x2, y2, G, sig = [sp.nsimplify(c, rational=True) for c in state]
    lam = sp.Integer(lam)
    c = G + 1 - lam * sig
    rhs = [
        -2 * x1 * y1,
        x1 + c * y1 + G + 1,
        -2 * x2 * y2,
        x2 + c * y2 + G + 1,
        G + p1 * (1 + y1) ** 2 + p2 * (1 + y2) ** 2,
        2 * sig,
    ]
    return np.array([float(sp.N(r, 30)) for r in rhs])


def rk4(fn, y0: np.ndarray, t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Classical fixed-step RK4; the cross-integrator reference."""
    h = (t1 - t0) / n_steps
    y = np.array(y0, dtype=float)
    t = t0
    for _ in range(n_steps):
        k1 = fn(t, y)
        k2 = fn(t + h / 2, y + h / 2 * k1)
        k3 = fn(t + h / 2, y + h / 2 * k2)
        k4 = fn(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def soliton_rhs(p1: int, p2: int, lam: int):
    def fn(t, y):
        x1, y1, x2, y2, G, sig = y
        c = G + 1.0 - lam * sig
        return np.array(
            [
                -2 * x1 * y1,
                x1 + c * y1 + G + 1,
                -2 * x2 * y2,
                x2 + c * y2 + G + 1,
                G + p1 * (1 + y1) ** 2 + p2 * (1 + y2) ** 2,
                2 * sig,
            ]
        )

    return fn


def dense_derivative(traj, t: float, fn, window: float = 0.1, npts: int = 21, deg: int = 8) -> float:
    """Derivative of fn(state(t)) by local polynomial fit on the dense output.

    A least-squares window suppresses the interpolant's pointwise noise,
    which a bare finite-difference stencil would amplify by 1/h.  Only
    meaningful where the flow rates stay moderate across the window.
    """
    lo = max(traj.t0, t - window / 2)
    hi = min(traj.t1, t + window / 2)
    ts = np.linspace(lo, hi, npts)
    vals = [fn(traj.state(u)) for u in ts]
    p = np.polynomial.Polynomial.fit(ts, vals, deg)
    return float(p.deriv()(t))


def residual_sample_times(traj, dims, cls, window: float = 0.1, rate_cap: float = 5.0, k: int = 6):
    """Times where evolution-law residuals are well-posed (rates capped)."""
    from solitonlab import vector_field

    out = []
    for t in np.linspace(traj.t0 + 0.05, traj.t1 - 0.08, k):
        lo, hi = t - window / 2, t + window / 2
        if lo < traj.t0 or hi > traj.t1:
            continue
        rate = max(np.max(np.abs(vector_field(traj.state(u), dims, cls))) for u in (lo, t, hi))
        if rate <= rate_cap:
            out.append(t)
    return out
