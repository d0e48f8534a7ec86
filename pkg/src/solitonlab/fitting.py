"""Grid derivatives and asymptotic-fit helpers shared across modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


def fd_weights_all(x: np.ndarray, x0: float, max_order: int) -> np.ndarray:
    """Finite-difference weights for d^k/dx^k (k = 0..max_order) at x0.

    Fornberg's recursion on arbitrary nodes; exact for polynomials up to
    degree len(x)-1.  Returns shape (len(x), max_order+1).
    """
    x = np.asarray(x, dtype=float)
    npts = len(x)
    c = np.zeros((npts, max_order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, npts):
        mn = min(i, max_order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def fd_weights(x: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Weights for a single derivative order (see fd_weights_all)."""
    return fd_weights_all(x, x0, order)[:, order]


def derivative_on_grid(grid: np.ndarray, values: np.ndarray, order: int = 1, npts: int = 5) -> np.ndarray:
    """order-th derivative of sampled values on a (possibly nonuniform) grid."""
    grid = np.asarray(grid, float)
    values = np.asarray(values, float)
    m = len(grid)
    if m < npts:
        raise ValueError("grid too short for the stencil")
    out = np.empty(m)
    half = npts // 2
    for i in range(m):
        lo = min(max(i - half, 0), m - npts)
        idx = slice(lo, lo + npts)
        w = fd_weights(grid[idx], grid[i], order)
        out[i] = w @ values[idx]
    return out


@dataclass
class AsymptoticFit:
    """Least-squares expansion coefficients with their residual."""

    coefficients: list[tuple[str, float]]
    residual: float
    fit_window: tuple[float, float]

    def coefficient(self, name: str) -> float:
        for k, v in self.coefficients:
            if k == name:
                return v
        raise KeyError(name)


def fit_inverse_powers(
    s: np.ndarray,
    values: np.ndarray,
    powers: tuple[int, ...] = (0, 1, 2),
    window: tuple[float, float] | None = None,
) -> AsymptoticFit:
    """Fit values(s) ~ sum_k c_k s^-k over the window (defaults to upper half)."""
    s = np.asarray(s, float)
    values = np.asarray(values, float)
    if window is None:
        window = (s[-1] / 2.0, s[-1])
    mask = (s >= window[0]) & (s <= window[1])
    ss, vv = s[mask], values[mask]
    basis = np.vstack([ss ** (-float(k)) for k in powers]).T
    coef, res, *_ = np.linalg.lstsq(basis, vv, rcond=None)
    resid = float(np.sqrt(np.mean((basis @ coef - vv) ** 2)))
    names = [f"s^-{k}" if k > 0 else "1" for k in powers]
    return AsymptoticFit(list(zip(names, coef)), resid, window)


def fit_leading_power(s: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Fit values ~ C s^p by log-log regression; returns (C, p)."""
    s = np.asarray(s, float)
    v = np.asarray(values, float)
    mask = v != 0
    L = np.log(np.abs(v[mask]))
    X = np.vstack([np.ones(mask.sum()), np.log(s[mask])]).T
    (b, p), *_ = np.linalg.lstsq(X, L, rcond=None)
    sign = np.sign(v[mask][-1])
    return float(sign * np.exp(b)), float(p)


@dataclass
class DampedCosineFit:
    R: float
    rate: float  # decay exponent: amplitude ~ R e^{-rate * T}
    freq: float
    phase: float
    residual: float


def fit_damped_cosine(T: np.ndarray, values: np.ndarray, freq_guess: float, rate_guess: float) -> DampedCosineFit:
    """Fit values(T) ~ R e^{-rate T} cos(freq T + phase).

    Solved in two stages: zero crossings refine the frequency guess, then
    full nonlinear least squares on log-scaled residuals keeps the small
    late-T oscillations from being swamped by the early ones.
    """
    T = np.asarray(T, float)
    v = np.asarray(values, float)

    sign_change = np.where(np.diff(np.sign(v)) != 0)[0]
    if len(sign_change) >= 2:
        zeros = []
        for i in sign_change:
            t0, t1 = T[i], T[i + 1]
            v0, v1 = v[i], v[i + 1]
            zeros.append(t0 - v0 * (t1 - t0) / (v1 - v0))
        spacing = np.diff(zeros)
        freq_guess = float(np.pi / np.median(spacing))

    env = np.abs(v) + 1e-300

    def model(p):
        lr, rate, freq, phase = p
        return np.exp(lr) * np.exp(-rate * T) * np.cos(freq * T + phase)

    def resid(p):
        # weight by inverse local envelope so every oscillation counts
        w = np.exp(p[0]) * np.exp(-p[1] * T)
        return (model(p) - v) / (w + 1e-300)

    # initial phase/amplitude from the first sample
    lr0 = float(np.log(np.max(env * np.exp(rate_guess * T))))
    best = None
    for phase0 in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        try:
            out = least_squares(resid, [lr0, rate_guess, freq_guess, phase0], max_nfev=2000)
        except Exception:
            continue
        if best is None or out.cost < best.cost:
            best = out
    if best is None:
        raise RuntimeError("damped-cosine fit failed")
    lr, rate, freq, phase = best.x
    if freq < 0:
        freq, phase = -freq, -phase
    return DampedCosineFit(float(np.exp(lr)), float(rate), float(freq), float(phase % (2 * np.pi)), float(np.sqrt(2 * best.cost / len(T))))


def fit_loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Slope of log|y| against log x."""
    x = np.asarray(x, float)
    y = np.abs(np.asarray(y, float))
    mask = y > 0
    X = np.vstack([np.ones(mask.sum()), np.log(x[mask])]).T
    (_, slope), *_ = np.linalg.lstsq(X, np.log(y[mask]), rcond=None)
    return float(slope)
