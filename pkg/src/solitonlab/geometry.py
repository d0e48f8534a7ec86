"""Metric reconstruction, curvature, soliton residuals, and evolving slices.

A phase-space orbit with x_a > 0 and sigma > 0 encodes the warped metric

    g = ds^2 + phi_1(s)^2 g_{S^p1} + phi_2(s)^2 g_{S^p2},
    phi_a = s sqrt((p_a - 1)/x_a),

and the generator component f of the soliton field through
Gamma = s f + lam s^2 - sum p_a (1 + y_a).  Everything geometric reduces
to five sectional curvatures evaluated from phi and two derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import Trajectory
from .dims import Dimensions, SolitonClass
from .fitting import fd_weights, fit_loglog_slope


class LiftedTrajectory:
    """sigma = 0 steady orbit reinterpreted with sigma = sigma0 e^{2t}.

    A solution in the sigma = 0 plane for any dilation class solves the
    steady system once sigma is replaced by sigma0 e^{2t}; this thin view
    performs that substitution without re-integrating.
    """

    def __init__(self, traj: Trajectory, sigma0: float = 1.0):
        if abs(traj.states[:, 5]).max() != 0.0:
            raise ValueError("lift requires an orbit lying in the sigma = 0 plane")
        self._traj = traj
        self.sigma0 = sigma0
        self.t0 = traj.t0
        self.t1 = traj.t1

    def state(self, t: float) -> np.ndarray:
        st = np.array(self._traj.state(t))
        st[5] = self.sigma0 * math.exp(2.0 * t)
        return st


@dataclass
class WarpedMetricProfile:
    s_grid: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    f: np.ndarray
    lam: SolitonClass
    dims: Dimensions
    states: np.ndarray | None = None  # source orbit samples, shape (m, 6)

    def phi(self, alpha: int) -> np.ndarray:
        return self.phi1 if alpha == 1 else self.phi2

    def consistency_residual(self) -> float:
        """max |phi_a - s sqrt((p_a-1)/x_a)| / phi_a over the source orbit."""
        if self.states is None:
            return 0.0
        s = self.s_grid
        r = 0.0
        for alpha, col in ((1, 0), (2, 2)):
            phi = self.phi(alpha)
            want = s * np.sqrt((self.dims.p[alpha - 1] - 1) / self.states[:, col])
            r = max(r, float(np.max(np.abs(phi - want) / want)))
        return r


def reconstruct_metric(
    traj,
    dims: Dimensions,
    cls: SolitonClass,
    num: int = 1400,
    s_span: tuple[float, float] | None = None,
) -> WarpedMetricProfile:
    """Sample an orbit on a log-uniform s grid and read off (phi1, phi2, f)."""
    sig0 = float(traj.state(traj.t0)[5])
    if sig0 <= 0:
        raise ValueError("metric reconstruction needs sigma > 0 (lift steady orbits first)")
    s_lo = math.sqrt(sig0)
    s_hi = math.sqrt(float(traj.state(traj.t1)[5]))
    if s_span is not None:
        s_lo, s_hi = max(s_lo, s_span[0]), min(s_hi, s_span[1])
    s_grid = np.geomspace(s_lo * 1.0000001, s_hi * 0.9999999, num)
    t_grid = traj.t0 + 0.5 * np.log(s_grid**2 / sig0)
    states = np.array([traj.state(t) for t in t_grid])
    if np.any(states[:, 0] <= 0) or np.any(states[:, 2] <= 0):
        raise ValueError("orbit leaves x_a > 0; not a metric on the requested span")
    phi1 = s_grid * np.sqrt((dims.p1 - 1) / states[:, 0])
    phi2 = s_grid * np.sqrt((dims.p2 - 1) / states[:, 2])
    psum = dims.p1 * (1 + states[:, 1]) + dims.p2 * (1 + states[:, 3])
    f = (states[:, 4] + psum - cls.lam * s_grid**2) / s_grid
    return WarpedMetricProfile(s_grid, phi1, phi2, f, cls, dims, states)


@dataclass
class CurvatureSample:
    s: float
    kappa_1_1: float
    kappa_2_1: float
    kappa_1_2: float
    kappa_2_2: float
    kappa_12_1: float
    ricci_ss: float
    ricci_1: float
    ricci_2: float
    soliton_residual: tuple[float, float, float]

    def ricci_max(self) -> float:
        return max(abs(self.ricci_ss), abs(self.ricci_1), abs(self.ricci_2))

    def sectional_max(self) -> float:
        return max(
            abs(self.kappa_1_1),
            abs(self.kappa_2_1),
            abs(self.kappa_1_2),
            abs(self.kappa_2_2),
            abs(self.kappa_12_1),
        )


def _local_derivatives(grid: np.ndarray, vals: np.ndarray, s: float, npts: int = 7) -> tuple[float, float, float]:
    """(value, d/ds, d2/ds2) at s by stencil interpolation, stride-adapted.

    The stride widens until the sampled variation across the window is
    large enough that differencing is not roundoff-bound.
    """
    m = len(grid)
    i = int(np.searchsorted(grid, s))
    i = min(max(i, 0), m - 1)
    vscale = float(np.max(np.abs(vals[max(0, i - 3) : i + 4]))) + 1e-300
    j = min(i + 1, m - 1)
    step = abs(vals[j] - vals[i]) / vscale + abs(grid[j] / max(grid[i], 1e-300) - 1.0)
    stride = int(np.clip(0.04 / max(step, 1e-9), 1, 64))
    half = npts // 2
    stride = max(1, min(stride, max(i, 1) // half if i >= half else 1, max(m - 1 - i, 1) // half if m - 1 - i >= half else 1))
    lo = min(max(i - half * stride, 0), m - (npts - 1) * stride - 1)
    idx = lo + stride * np.arange(npts)
    from .fitting import fd_weights_all

    w = fd_weights_all(grid[idx], s, 2)
    res = vals[idx] @ w
    return float(res[0]), float(res[1]), float(res[2])


def curvature(profile: WarpedMetricProfile, s: float, npts: int = 7, method: str = "auto") -> CurvatureSample:
    """Sectional curvatures, Ricci components, and the soliton residual at s.

    Derivatives come from local stencils on the profile grid, independent of
    the equations the source orbit satisfied.  Near the inner (smooth fill)
    end the metric functions are even and analytic in sigma = s^2, where
    differencing phi is hopeless; there a least-squares power series in
    sigma replaces the stencils ("series" method, chosen automatically).
    """
    grid = profile.s_grid
    if not (grid[0] <= s <= grid[-1]):
        raise ValueError("boundary extrapolation refused")
    if method == "auto":
        if profile.states is not None:
            # the sigma-series is valid while the orbit hugs the smooth fill
            x2 = np.interp(s, grid, profile.states[:, 2])
            method = "series" if x2 < 0.1 * (profile.dims.p2 - 1) else "stencil"
        else:
            method = "stencil"
    if method == "series":
        return _curvature_from_series(profile, s)
    lam = profile.lam.lam
    p1, p2 = profile.dims.p1, profile.dims.p2
    f, f_s, _ = _local_derivatives(grid, profile.f, s, npts)
    ph1, ph1_s, ph1_ss = _local_derivatives(grid, profile.phi1, s, npts)
    ph2, ph2_s, ph2_ss = _local_derivatives(grid, profile.phi2, s, npts)
    k11 = (1 - ph1_s**2) / ph1**2
    k21 = (1 - ph2_s**2) / ph2**2
    k12_ = -ph1_ss / ph1
    k22_ = -ph2_ss / ph2
    k121 = -ph1_s * ph2_s / (ph1 * ph2)
    ricci_ss = p1 * k12_ + p2 * k22_
    ricci_1 = k12_ + (p1 - 1) * k11 + p2 * k121
    ricci_2 = k22_ + (p2 - 1) * k21 + p1 * k121
    res = (
        f_s + ricci_ss + lam,
        ricci_1 + f * ph1_s / ph1 + lam,
        ricci_2 + f * ph2_s / ph2 + lam,
    )
    return CurvatureSample(s, k11, k21, k12_, k22_, k121, ricci_ss, ricci_1, ricci_2, res)


def _curvature_from_series(profile: WarpedMetricProfile, s: float, deg: int = 5) -> CurvatureSample:
    """Curvature at small s from even power series of the orbit in sigma.

    Pointwise state data (x_a, y_a, Gamma) enter directly; only the single
    sigma-derivatives of y_a and Gamma are taken, from local least-squares
    series in sigma, where plain differencing of phi is roundoff-bound.
    """
    dims = profile.dims
    lam = profile.lam.lam
    grid = profile.s_grid
    st = profile.states
    sig = grid**2
    sig0 = s * s
    m = len(grid)
    i0 = int(np.clip(np.searchsorted(grid, s), 0, m - 1))
    lo = max(0, i0 - 60)
    hi = min(m, max(i0 + 60, lo + 120))
    S = sig[lo:hi]
    scale = float(S.max())
    P = np.column_stack([(S / scale) ** k for k in range(deg + 1)])

    def fit(vals):
        c, *_ = np.linalg.lstsq(P, vals, rcond=None)
        c = c / scale ** np.arange(deg + 1)
        val = sum(c[k] * sig0**k for k in range(deg + 1))
        dv = sum(k * c[k] * sig0 ** (k - 1) for k in range(1, deg + 1))
        return val, dv

    x1, _ = fit(st[lo:hi, 0])
    x2g, _ = fit(st[lo:hi, 2] / S)  # x2 = sigma * (fit)
    x2 = sig0 * x2g
    y1, y1d = fit(st[lo:hi, 1])
    y2, y2d = fit(st[lo:hi, 3])
    G, Gd = fit(st[lo:hi, 4])

    p1, p2 = dims.p1, dims.p2
    k11 = (x1 / (p1 - 1) - (1 + y1) ** 2) / sig0
    k21 = (x2 / (p2 - 1) - (1 + y2) ** 2) / sig0
    k12_ = -((1 + y1) ** 2 - (1 + y1) + 2 * sig0 * y1d) / sig0
    k22_ = -((1 + y2) ** 2 - (1 + y2) + 2 * sig0 * y2d) / sig0
    k121 = -(1 + y1) * (1 + y2) / sig0
    ricci_ss = p1 * k12_ + p2 * k22_
    ricci_1 = k12_ + (p1 - 1) * k11 + p2 * k121
    ricci_2 = k22_ + (p2 - 1) * k21 + p1 * k121
    fval = (G + p1 * (1 + y1) + p2 * (1 + y2) - lam * sig0) / s
    dF = Gd + p1 * y1d + p2 * y2d
    f_s = -fval / s + 2 * (dF - lam)
    res = (
        f_s + ricci_ss + lam,
        ricci_1 + fval * (1 + y1) / s + lam,
        ricci_2 + fval * (1 + y2) / s + lam,
    )
    return CurvatureSample(s, k11, k21, k12_, k22_, k121, ricci_ss, ricci_1, ricci_2, res)


def curvature_samples(profile: WarpedMetricProfile, s_values=None, margin: int = 8) -> list[CurvatureSample]:
    if s_values is None:
        s_values = profile.s_grid[margin:-margin:12]
    return [curvature(profile, float(s)) for s in s_values]


def smooth_fill_limits(profile: WarpedMetricProfile) -> dict:
    """Fitted s -> 0 boundary data: x1 limit and the x2 ~ C s^2 coefficient.

    Uses the even analyticity in sigma = s^2 of orbits emanating from a
    smooth fill: fits x_a against {1, sigma, sigma^2} near the inner edge.
    """
    st = profile.states
    s = profile.s_grid
    m = min(len(s) // 4, 200)
    sig = s[:m] ** 2
    X = np.column_stack([np.ones(m), sig, sig * sig])
    c1, *_ = np.linalg.lstsq(X, st[:m, 0], rcond=None)
    c2, *_ = np.linalg.lstsq(X, st[:m, 2] / sig, rcond=None)
    return {"x1_limit": float(c1[0]), "x2_quadratic_coeff": float(c2[0])}


def soliton_field_zeros(profile: WarpedMetricProfile) -> float:
    """Largest zero s0 of f on the grid (0 when f never vanishes).

    The tail is checked against f ~ -lam s + K_inf + K_1/s to confirm no
    zeros beyond the grid for lam != 0.
    """
    s, f = profile.s_grid, profile.f
    sign_change = np.where(np.diff(np.sign(f)) != 0)[0]
    if len(sign_change) == 0:
        return 0.0
    i = sign_change[-1]
    s0 = s[i] - f[i] * (s[i + 1] - s[i]) / (f[i + 1] - f[i])
    return float(s0)


def f_tail_fit(profile: WarpedMetricProfile, window: tuple[float, float] | None = None) -> dict:
    """Fit f(s) = slope*s + K_inf + K_1/s over the outer window."""
    s, f = profile.s_grid, profile.f
    if window is None:
        window = (s[-1] / 2, s[-1])
    mask = (s >= window[0]) & (s <= window[1])
    X = np.column_stack([s[mask], np.ones(mask.sum()), 1 / s[mask]])
    coef, *_ = np.linalg.lstsq(X, f[mask], rcond=None)
    return {"slope": float(coef[0]), "K_inf": float(coef[1]), "K_1": float(coef[2])}


# ---------------------------------------------------------------------------
# Evolving metrics


@dataclass
class SpacetimeSlice:
    t: float
    r_grid: np.ndarray
    g_rr: np.ndarray
    g_S1: np.ndarray
    g_S2: np.ndarray
    source: str
    rho: np.ndarray  # rho_t(s) on the profile grid


def _field_interpolator(profile: WarpedMetricProfile):
    """f(S) with odd-linear continuation below the grid and tail law above."""
    s, f = profile.s_grid, profile.f
    lam = profile.lam.lam
    tail = f_tail_fit(profile)
    s_lo, f_lo = s[0], f[0]
    s_hi = s[-1]

    def fi(S):
        S = np.asarray(S, float)
        out = np.interp(S, s, f)
        below = S < s_lo
        if np.any(below):
            out = np.where(below, f_lo * S / s_lo, out)
        above = S > s_hi
        if np.any(above):
            out = np.where(above, -lam * S + tail["K_inf"] + tail["K_1"] / np.maximum(S, s_hi), out)
        return out

    return fi


def spacetime_slices(profile: WarpedMetricProfile, t_list, num_r: int | None = None) -> list[SpacetimeSlice]:
    """Time slices g(t) of the flow the soliton generates.

    S_theta solves dS/dtheta = f(S) from S_0 = s with theta(t) =
    log(2 lam t)/(2 lam); the slice metric on the fixed s grid is
    g(t) = 2 lam t [S' ds]^2 + 2 lam t S^2 g_M(S).
    """
    lam = profile.lam.lam
    if lam == 0:
        raise ValueError("slices need an expanding or shrinking soliton")
    fi = _field_interpolator(profile)
    s = profile.s_grid
    out = []
    for t in t_list:
        if lam * t <= 0:
            raise ValueError(f"lam * t must be positive, got t={t}")
        theta = math.log(2 * lam * t) / (2 * lam)
        sol = solve_ivp(
            lambda th, S: fi(S),
            (0.0, theta),
            s,
            method="DOP853",
            rtol=1e-10,
            atol=1e-12,
            dense_output=False,
        )
        S = sol.y[:, -1]
        scale = 2 * lam * t
        rho = np.sqrt(scale) * S
        # S'(s) by stencils on the transported grid
        Sp = np.gradient(S, s, edge_order=2)
        x1S = np.interp(S, s, profile.states[:, 0]) if profile.states is not None else None
        x2S = np.interp(S, s, profile.states[:, 2]) if profile.states is not None else None
        g_rr = scale * Sp**2
        g_S1 = scale * S**2 * (profile.dims.p1 - 1) / x1S
        g_S2 = scale * S**2 * (profile.dims.p2 - 1) / x2S
        out.append(SpacetimeSlice(t, s.copy(), g_rr, g_S1, g_S2, "shrinker" if lam < 0 else "expander", rho))
    return out


def cone_slice(apertures: tuple[float, float], dims: Dimensions, r_grid: np.ndarray) -> SpacetimeSlice:
    xb1, xb2 = apertures
    return SpacetimeSlice(
        0.0,
        r_grid,
        np.ones_like(r_grid),
        r_grid**2 * (dims.p1 - 1) / xb1,
        r_grid**2 * (dims.p2 - 1) / xb2,
        "cone",
        r_grid.copy(),
    )


def cone_curvature_exponent(apertures: tuple[float, float], dims: Dimensions, r_window=(0.01, 1.0)) -> float:
    """Log-log slope of the cone's curvature norm near the vertex (exactly -2)."""
    xb1, xb2 = apertures
    rs = np.geomspace(*r_window, 40)
    p1, p2 = dims.p1, dims.p2
    k11 = (1 - (p1 - 1) / xb1) * xb1 / (p1 - 1) / rs**2
    k21 = (1 - (p2 - 1) / xb2) * xb2 / (p2 - 1) / rs**2
    k121 = -1.0 / rs**2
    norm = np.sqrt(k11**2 + k21**2 + k121**2)
    return fit_loglog_slope(rs, norm)


# ---------------------------------------------------------------------------
# Mechanical system


@dataclass
class MechanicalTrack:
    s_grid: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    lam: SolitonClass
    dims: Dimensions

    def invariant(self) -> np.ndarray:
        """I = p1 (u1'^2 + e^{-2u1}) + p2 (u2'^2 + e^{-2u2}) - v^2."""
        p1, p2 = self.dims.p1, self.dims.p2
        return (
            p1 * (self.du1**2 + np.exp(-2 * self.u1))
            + p2 * (self.du2**2 + np.exp(-2 * self.u2))
            - self.v**2
        )

    def equation_residual(self, normalized: bool = True) -> np.ndarray:
        """Stencil residuals of the three second-order mechanical equations.

        Normalized by the largest term: the friction and force terms grow
        like 1/s^2 toward a smooth fill, so an absolute bound would be
        meaningless there.
        """
        s = self.s_grid
        lam = self.lam.lam
        p1, p2 = self.dims.p1, self.dims.p2
        res = []
        for u, du in ((self.u1, self.du1), (self.u2, self.du2)):
            ddu = _stencil_first_derivative(s, du)
            rhs = self.v * du + np.exp(-2 * u) + lam
            r = np.abs(ddu - rhs)
            if normalized:
                r = r / np.maximum.reduce([np.abs(ddu), np.abs(rhs), np.ones_like(s)])
            res.append(r)
        dv = _stencil_first_derivative(s, self.v)
        rhs = p1 * self.du1**2 + p2 * self.du2**2 - lam
        r = np.abs(dv - rhs)
        if normalized:
            r = r / np.maximum.reduce([np.abs(dv), np.abs(rhs), np.ones_like(s)])
        res.append(r)
        return np.stack(res)[:, 8:-8]


def _stencil_first_derivative(grid: np.ndarray, vals: np.ndarray, npts: int = 7) -> np.ndarray:
    out = np.empty_like(vals)
    m = len(grid)
    for i in range(m):
        lo = min(max(i - npts // 2, 0), m - npts)
        idx = slice(lo, lo + npts)
        out[i] = fd_weights(grid[idx], grid[i], 1) @ vals[idx]
    return out


def mechanical_transform(profile: WarpedMetricProfile) -> MechanicalTrack:
    """(u1, u2, v) track of the equivalent mechanical system.

    u_a = log phi_a - log sqrt(p_a - 1); v = f - p1 u1' - p2 u2' reduces to
    (Gamma - lam s^2)/s on the source orbit.
    """
    dims = profile.dims
    s = profile.s_grid
    u1 = np.log(profile.phi1) - 0.5 * math.log(dims.p1 - 1)
    u2 = np.log(profile.phi2) - 0.5 * math.log(dims.p2 - 1)
    if profile.states is not None:
        du1 = (1 + profile.states[:, 1]) / s
        du2 = (1 + profile.states[:, 3]) / s
        v = (profile.states[:, 4] - profile.lam.lam * s**2) / s
    else:
        du1 = _stencil_first_derivative(s, u1)
        du2 = _stencil_first_derivative(s, u2)
        v = profile.f - dims.p1 * du1 - dims.p2 * du2
    return MechanicalTrack(s, u1, u2, v, du1, du2, profile.lam, dims)


def mechanical_forward_integrate(track: MechanicalTrack, s_end: float | None = None):
    """Integrate the mechanical equations from the track's initial data.

    Returns (s_grid_used, u1, u2, v) for comparison against the transform.
    """
    s = track.s_grid
    lam = track.lam.lam
    p1, p2 = track.dims.p1, track.dims.p2
    if s_end is None:
        s_end = float(s[-1])

    def rhs(t, y):
        u1, u2, w1, w2, v = y
        return [w1, w2, v * w1 + math.exp(-2 * u1) + lam, v * w2 + math.exp(-2 * u2) + lam, p1 * w1 * w1 + p2 * w2 * w2 - lam]

    y0 = [track.u1[0], track.u2[0], track.du1[0], track.du2[0], track.v[0]]
    sol = solve_ivp(rhs, (float(s[0]), s_end), y0, method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
    mask = s <= s_end
    vals = np.array([sol.sol(x) for x in s[mask]])
    return s[mask], vals[:, 0], vals[:, 1], vals[:, 4]


def mechanical_round_trip_residual(track: MechanicalTrack, profile: WarpedMetricProfile) -> float:
    """Reconstruct phi from u and compare: exp(u) sqrt(p-1) = phi."""
    r1 = np.max(np.abs(np.exp(track.u1) * math.sqrt(track.dims.p1 - 1) - profile.phi1) / profile.phi1)
    r2 = np.max(np.abs(np.exp(track.u2) * math.sqrt(track.dims.p2 - 1) - profile.phi2) / profile.phi2)
    return float(max(r1, r2))
