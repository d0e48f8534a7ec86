"""Fundamental solutions of the linearization along the cone soliton orbit.

Two scalar reductions govern the linearized flow: a third-order equation
for the averaged perturbation xi (simplified by psi = xi' + xi, which
satisfies a second-order equation with Gaussian weight), and a
second-order equation for the difference variable chi:

    psi'' + (n-3) psi' - 2(n-1) psi + lam s^2 psi' = 0
    chi'' + (n-1+lam s^2) chi'  + 2(n-1) chi       = 0

with ' = s d/ds.  Branch normalizations follow the asymptotic tables used
downstream: xi0 = 1/s, psi1 = s^{-(n-1)} e^{-lam s^2/2}, xi2 ~ s^2/3(n+1)
at s = 0, chi1 -> 1 at infinity, and chi2 the pure Gaussian branch with a
quarter-period phase shift against chi1 at s = 0.

Gaussian-weighted quantities are computed in forms whose exponents stay
nonpositive wherever possible, and profiles carry log-magnitudes so the
e^{s^2/2} branches remain meaningful at large s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp

from .dims import Dimensions, SolitonClass
from .fitting import fd_weights, fd_weights_all

_QUAD = dict(epsabs=1e-300, epsrel=5e-14, limit=200)


class BranchSeparationError(RuntimeError):
    """Raised when a Gaussian branch cannot be seeded cleanly at s_ref."""


def default_profile_grid(s_min: float = 0.05, s_max: float = 10.0) -> np.ndarray:
    """Graded grid: logarithmic near 0, then spacing ~ 0.01/s.

    The refinement at large s resolves the e^{+-s^2/2} modes well enough
    for stencil-based collocation residuals at the 1e-8 level.
    """
    pts = [s_min]
    while pts[-1] < s_max:
        s = pts[-1]
        pts.append(min(s + min(0.009 * s, 0.01 / s, 0.0055), s_max))
    return np.array(pts)


@dataclass
class ScalarProfile:
    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray  # t-derivative, s d/ds
    label: str
    lam: SolitonClass
    dims: Dimensions
    second: np.ndarray | None = None
    log_magnitude: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.log_magnitude is None:
            with np.errstate(divide="ignore"):
                self.log_magnitude = np.log(np.abs(self.values))

    def value_at(self, s: float) -> float:
        return float(np.interp(s, self.grid, self.values))

    def csv_rows(self):
        for i in range(len(self.grid)):
            yield (self.grid[i], self.values[i], self.derivative[i], self.log_magnitude[i])

    def ode_residual(self, normalized: bool = True, points: slice | None = None) -> np.ndarray:
        """Collocation residual from stencil derivatives of the stored values.

        Independent of construction: only sampled values enter.  The stencil
        stride adapts to the local variation of the profile, so slow
        branches on a finely graded grid are not roundoff-limited while the
        Gaussian branches keep the resolution they need.
        """
        s = self.grid
        v = self.values
        n = self.dims.n
        lam = self.lam.lam
        max_order = 3 if self.label.startswith("xi") else 2
        idx = np.arange(len(s))[points or slice(8, len(s) - 8)]
        out = np.empty(len(idx))
        for j, i in enumerate(idx):
            d = _adaptive_stencil(s, v, i, max_order)
            if d is None:
                # no centered stencil wide enough for a trustworthy estimate
                out[j] = np.nan
                continue
            D1 = s[i] * d[1]
            D2 = s[i] * d[1] + s[i] ** 2 * d[2]
            if self.label.startswith("psi"):
                terms = np.array([D2, (n - 3) * D1, -2 * (n - 1) * v[i], lam * s[i] ** 2 * D1])
            elif self.label.startswith("chi"):
                terms = np.array([D2, (n - 1 + lam * s[i] ** 2) * D1, 2 * (n - 1) * v[i]])
            else:
                D3 = s[i] * d[1] + 3 * s[i] ** 2 * d[2] + s[i] ** 3 * d[3]
                terms = np.array(
                    [D3, (n - 2) * D2, -(n + 1) * D1, -2 * (n - 1) * v[i], lam * s[i] ** 2 * (D2 + D1)]
                )
            r = abs(terms.sum())
            out[j] = r / max(np.max(np.abs(terms)), 1e-300) if normalized else r
        return out


def _stencil_derivative(s: np.ndarray, v: np.ndarray, order: int, npts: int = 9, stride: int = 1) -> np.ndarray:
    out = np.empty_like(v)
    m = len(s)
    half = (npts // 2) * stride
    for i in range(m):
        lo = min(max(i - half, 0), m - (npts - 1) * stride - 1)
        idx = lo + stride * np.arange(npts)
        w = fd_weights(s[idx], s[i], order)
        out[i] = w @ v[idx]
    return out


def _adaptive_stencil(s: np.ndarray, v: np.ndarray, i: int, max_order: int, npts: int = 13) -> np.ndarray:
    """Derivatives 0..max_order at s[i], stride chosen from local variation.

    The stride targets a relative change across the window large enough to
    dominate roundoff but small enough to keep truncation negligible; it
    shrinks near the ends so the stencil always stays centered.
    """
    m = len(s)
    vi = float(np.max(np.abs(v[max(0, i - 6) : i + 7]))) + 1e-300
    step = abs(v[min(i + 1, m - 1)] - v[i]) / vi + abs(s[min(i + 1, m - 1)] / s[i] - 1.0)
    want = int(np.clip(0.05 / max(step, 1e-9), 1, 96))
    half_pts = npts // 2
    centered_max = min(i // half_pts, (m - 1 - i) // half_pts)
    if centered_max < max(1, want // 2):
        return None
    stride = min(want, centered_max)
    half = half_pts * stride
    lo = min(max(i - half, 0), m - (npts - 1) * stride - 1)
    idx = lo + stride * np.arange(npts)
    w = fd_weights_all(s[idx], s[i], max_order)
    return v[idx] @ w


def _cumulative(fn, grid: np.ndarray, head: float = 0.0) -> np.ndarray:
    """out[i] = head + integral from grid[0] to grid[i] of fn."""
    out = np.empty(len(grid))
    out[0] = head
    for i in range(1, len(grid)):
        out[i] = out[i - 1] + quad(fn, grid[i - 1], grid[i], **_QUAD)[0]
    return out


def _reverse_cumulative(fn, grid: np.ndarray, tail: float) -> np.ndarray:
    """out[i] = tail + integral from grid[i] to grid[-1] of fn."""
    out = np.empty(len(grid))
    out[-1] = tail
    for i in range(len(grid) - 2, -1, -1):
        out[i] = out[i + 1] + quad(fn, grid[i], grid[i + 1], **_QUAD)[0]
    return out


def _cumulative_sampled(grid: np.ndarray, values: np.ndarray, head: float) -> np.ndarray:
    """Cumulative integral of a sampled integrand via local sextic panels."""
    out = np.empty_like(values)
    out[0] = head
    m = len(grid)
    for i in range(1, m):
        lo = min(max(i - 3, 0), m - 7)
        xs = grid[lo : lo + 7]
        ys = values[lo : lo + 7]
        c = np.polynomial.polynomial.polyfit(xs - grid[i - 1], ys, 6)
        h = grid[i] - grid[i - 1]
        out[i] = out[i - 1] + sum(c[k] * h ** (k + 1) / (k + 1) for k in range(7))
    return out


# ---------------------------------------------------------------------------
# psi branches


def _gauss_upper(n: int, s: float) -> float:
    """integral_s^inf r^n e^{(s^2 - r^2)/2} dr, exponent kept nonpositive."""
    return quad(lambda r: r**n * math.exp((s * s - r * r) / 2), s, np.inf, **_QUAD)[0]


def psi2_point(cls: SolitonClass, dims: Dimensions, s: float) -> float:
    n, lam = dims.n, cls.lam
    if lam > 0:
        inner = quad(lambda r: r**n * math.exp((r * r - s * s) / 2), 0, s, **_QUAD)[0]
        return s ** (-(n - 1)) * inner
    inner = quad(lambda r: r**n * math.exp(-r * r / 2), 0, s, **_QUAD)[0]
    return s ** (-(n - 1)) * math.exp(s * s / 2) * inner


def solve_psi(cls: SolitonClass, dims: Dimensions, branch: str, grid: np.ndarray) -> ScalarProfile:
    """psi1 (closed form / tail quadrature) or psi2 (reduction of order)."""
    grid = np.asarray(grid, float)
    if np.any(grid <= 0):
        raise ValueError("grid must lie in (0, inf)")
    n = dims.n
    lam = cls.lam

    if branch == "psi1":
        if lam >= 0:
            vals = grid ** (-(n - 1)) * np.exp(-lam * grid**2 / 2)
            logmag = -(n - 1) * np.log(grid) - lam * grid**2 / 2
            deriv = (-(n - 1) - lam * grid**2) * vals
        else:
            # bounded-at-infinity branch for shrinkers
            vals = np.array([s ** (-(n - 1)) * _gauss_upper(n, s) for s in grid])
            logmag = np.log(vals)
            deriv = (grid**2 - (n - 1)) * vals - grid**2
        return ScalarProfile(grid, vals, deriv, "psi1", cls, dims, log_magnitude=logmag)

    if branch != "psi2":
        raise ValueError(f"unknown psi branch {branch!r}")
    if lam == 0:
        raise ValueError("psi2 needs an expanding or shrinking class")

    if lam > 0:
        inner = _cumulative(
            lambda r: r**n * math.exp(r * r / 2),
            grid,
            head=quad(lambda r: r**n * math.exp(r * r / 2), 0, grid[0], **_QUAD)[0],
        )
        vals = grid ** (-(n - 1)) * np.exp(-(grid**2) / 2) * inner
        logmag = -(n - 1) * np.log(grid) - grid**2 / 2 + np.log(np.maximum(inner, 1e-300))
        deriv = (-(n - 1) - grid**2) * vals + grid**2
    else:
        inner = _cumulative(
            lambda r: r**n * math.exp(-r * r / 2),
            grid,
            head=quad(lambda r: r**n * math.exp(-r * r / 2), 0, grid[0], **_QUAD)[0],
        )
        vals = grid ** (-(n - 1)) * np.exp(+(grid**2) / 2) * inner
        logmag = -(n - 1) * np.log(grid) + grid**2 / 2 + np.log(np.maximum(inner, 1e-300))
        deriv = (grid**2 - (n - 1)) * vals + grid**2
    return ScalarProfile(grid, vals, deriv, "psi2", cls, dims, log_magnitude=logmag)


# ---------------------------------------------------------------------------
# xi branches


def _psi1m_series_tail(n: int, s: float) -> float:
    """integral_s^inf (psi1^- - 1) using the inverse-square expansion."""
    c = [n - 1.0, (n - 1.0) * (n - 3.0), (n - 1.0) * (n - 3.0) * (n - 5.0)]
    return c[0] / s + c[1] / (3 * s**3) + c[2] / (5 * s**5)


def solve_xi(cls: SolitonClass, dims: Dimensions, branch: str, grid: np.ndarray) -> ScalarProfile:
    """xi0 = 1/s, or the quadrature branches xi1, xi2 (table normalization)."""
    grid = np.asarray(grid, float)
    if np.any(grid <= 0):
        raise ValueError("grid must lie in (0, inf)")
    n = dims.n
    lam = cls.lam

    if branch == "xi0":
        vals = 1.0 / grid
        return ScalarProfile(grid, vals, -vals, "xi0", cls, dims, second=vals.copy())

    if branch == "xi1":
        psi1 = solve_psi(cls, dims, "psi1", grid)
        if lam > 0:
            tail = quad(lambda r: r ** (-(n - 1)) * math.exp(-r * r / 2), grid[-1], np.inf, **_QUAD)[0]
            integral = _reverse_cumulative(
                lambda r: r ** (-(n - 1)) * math.exp(-r * r / 2), grid, tail
            )
            vals = integral / grid
            deriv = -vals - psi1.values
            second = -deriv - psi1.derivative
        elif lam < 0:
            tail = _psi1m_series_tail(n, grid[-1])
            integral = _reverse_cumulative_sampled(grid, psi1.values - 1.0, tail)
            vals = 1.0 - integral / grid
            deriv = psi1.values - vals
            second = psi1.derivative - deriv
        else:
            raise ValueError("xi1 needs an expanding or shrinking class")
        return ScalarProfile(grid, vals, deriv, "xi1", cls, dims, second=second)

    if branch == "xi2":
        psi2 = solve_psi(cls, dims, "psi2", grid)
        head = quad(lambda r: psi2_point(cls, dims, r), 0, grid[0], points=[grid[0] / 2], **_QUAD)[0]
        integral = _cumulative_sampled(grid, psi2.values, head)
        vals = integral / grid
        deriv = psi2.values - vals
        second = psi2.derivative - deriv
        return ScalarProfile(grid, vals, deriv, "xi2", cls, dims, second=second)

    raise ValueError(f"unknown xi branch {branch!r}")


def _reverse_cumulative_sampled(grid: np.ndarray, values: np.ndarray, tail: float) -> np.ndarray:
    out = np.empty_like(values)
    out[-1] = tail
    m = len(grid)
    for i in range(m - 2, -1, -1):
        lo = min(max(i - 3, 0), m - 7)
        xs = grid[lo : lo + 7]
        ys = values[lo : lo + 7]
        c = np.polynomial.polynomial.polyfit(xs - grid[i], ys, 6)
        h = grid[i + 1] - grid[i]
        out[i] = out[i + 1] + sum(c[k] * h ** (k + 1) / (k + 1) for k in range(7))
    return out


# ---------------------------------------------------------------------------
# Phi reconstruction


@dataclass
class PhiProfile:
    grid: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    lam: SolitonClass
    dims: Dimensions

    def components(self) -> np.ndarray:
        return np.stack([self.xi, self.y, self.gamma])

    def system_residual(self) -> np.ndarray:
        """Residual of the averaged 3x3 linear system, stencil derivatives."""
        s, n, lam = self.grid, self.dims.n, self.lam.lam
        rows = []
        for comp, rhs in (
            (self.xi, -2 * (n - 1) * self.y),
            (self.y, self.xi - (n - 1 + lam * s * s) * self.y + self.gamma),
            (self.gamma, 2 * n * self.y + self.gamma),
        ):
            D1 = s * _stencil_derivative(s, comp, 1)
            scale = np.maximum.reduce([np.abs(D1), np.abs(rhs), np.ones_like(s)])
            rows.append(np.abs(D1 - rhs) / scale)
        return np.stack(rows)[:, 4:-4]


def phi_from_xi(profile: ScalarProfile, cls: SolitonClass, dims: Dimensions, scale: float = 1.0) -> PhiProfile:
    """Recover the averaged 3-vector from a xi branch (needs two derivatives)."""
    if profile.second is None:
        raise ValueError("xi profile must carry its second derivative")
    s = profile.grid
    n = dims.n
    lam = cls.lam
    xi, d1, d2 = profile.values, profile.derivative, profile.second
    y = -d1 / (2 * (n - 1))
    gamma = -(d2 + (n - 1 + lam * s * s) * d1 + 2 * (n - 1) * xi) / (2 * (n - 1))
    return PhiProfile(s, scale * xi, scale * y, scale * gamma, cls, dims)


def phi_fundamental(cls: SolitonClass, dims: Dimensions, index: int, grid: np.ndarray) -> PhiProfile:
    """Phi_0, Phi_1, Phi_2 with eigenvector-aligned normalizations.

    Phi_0 = s^{-1} V_{-1} + (0, 0, lam s) exactly; Phi_2 = s^2 V_2 + O(s^4);
    Phi_1 = s^{-(n-1)} V_{-(n-1)} + lower order at s = 0.
    """
    n = dims.n
    grid = np.asarray(grid, float)
    if index == 0:
        return PhiProfile(
            grid,
            2.0 * (n - 1) / grid,
            1.0 / grid,
            -float(n) / grid + cls.lam * grid,
            cls,
            dims,
        )
    if index == 1:
        prof = solve_xi(cls, dims, "xi1", grid)
        lead = prof.values[0] * grid[0] ** (n - 1)
        return phi_from_xi(prof, cls, dims, scale=2.0 / lead)
    if index == 2:
        prof = solve_xi(cls, dims, "xi2", grid)
        return phi_from_xi(prof, cls, dims, scale=-3.0 * (n + 1) * (n - 1))
    raise ValueError("index must be 0, 1, or 2")


# ---------------------------------------------------------------------------
# chi branches


def _riccati_bounded_series(dims: Dimensions, lam: int, n_terms: int = 10) -> dict[int, float]:
    """a_{2k} (k >= 2) in Z = sum a_{2k} s^{-2k} for the bounded branch."""
    a = {2: -2.0 * lam * (dims.n - 1)}
    n = dims.n
    for k in range(2, n_terms + 1):
        conv = sum(a[i] * a[k + 1 - i] for i in range(2, k) if 2 <= k + 1 - i <= k - 1)
        a[k + 1] = lam * ((2 * k - (n + 1)) * a[k] - conv)
    return a


def _riccati_gaussian_series(dims: Dimensions, lam: int, n_terms: int = 10) -> dict[int, float]:
    """b_{2k} (k >= 1) in Z = -lam + sum b_{2k} s^{-2k} for the Gaussian branch."""
    n = dims.n
    b = {1: -(n + 1.0)}
    for k in range(1, n_terms + 1):
        conv = sum(b[i] * b[k + 1 - i] for i in range(1, k + 1) if (k + 1 - i) in b)
        extra = 2.0 * (n - 1) if k == 1 else 0.0
        b[k + 1] = lam * ((n + 1 - 2 * k) * b[k] + extra + conv)
    return b


def _truncated_sum(terms: list[float]) -> tuple[float, float]:
    """Sum an asymptotic sequence up to its smallest term; returns (sum, trunc)."""
    total = 0.0
    prev = np.inf
    for t in terms:
        if abs(t) >= prev:
            return total, abs(t)
        total += t
        prev = abs(t)
    return total, prev if prev < np.inf else 0.0


def _chi_anchor(dims: Dimensions, lam: int, branch: str, s_ref: float):
    """(value, t-derivative, truncation estimate) of the branch at s_ref."""
    n = dims.n
    if branch == "chi1":
        a = _riccati_bounded_series(dims, lam)
        Z, trZ = _truncated_sum([a[k] * s_ref ** (-2 * k) for k in sorted(a)])
        logv, trL = _truncated_sum([-a[k] / ((2 * k - 2) * s_ref ** (2 * k - 2)) for k in sorted(a)])
        val = math.exp(logv)
        return val, s_ref**2 * Z * val, max(trZ * s_ref**2, trL)
    b = _riccati_gaussian_series(dims, lam)
    Z_corr, trZ = _truncated_sum([b[k] * s_ref ** (-2 * k) for k in sorted(b)])
    Z = -lam + Z_corr
    logv, trL = _truncated_sum(
        [-b[k] / ((2 * k - 2) * s_ref ** (2 * k - 2)) for k in sorted(b) if k >= 2]
    )
    logv += -(n + 1) * math.log(s_ref) - lam * s_ref**2 / 2
    val = math.exp(logv)
    return val, s_ref**2 * Z * val, max(trZ * s_ref**2, trL)


def _chi_ode_rhs(n: int, lam: int):
    def rhs(s, y):
        chi, chis = y
        return [chis, -(n / s + lam * s) * chis - 2.0 * (n - 1) / (s * s) * chi]

    return rhs


@lru_cache(maxsize=32)
def _frobenius_coeffs(n: int, lam: int, n_terms: int = 140) -> tuple[complex, ...]:
    A = (n - 1) / 2.0
    Om = math.sqrt((n - 1) * (9 - n)) / 2.0
    rho = complex(-A, Om)
    c = [complex(1.0)]
    for m in range(1, n_terms):
        c.append(-lam * (rho + 2 * m - 2) * c[m - 1] / (4.0 * m * (m + 1j * Om)))
    return tuple(c)


def _frobenius_eval(dims: Dimensions, lam: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex solution w ~ s^{-A+iOm)} near 0 and its t-derivative."""
    rho = complex(-dims.A, dims.Omega)
    c = _frobenius_coeffs(dims.n, lam)
    s = np.asarray(s, float)
    z = s * s
    w = np.zeros(len(s), dtype=complex)
    wp = np.zeros(len(s), dtype=complex)
    for m in range(len(c) - 1, -1, -1):
        w = w * z + c[m]
        wp = wp * z + c[m] * (rho + 2 * m)
    head = np.exp(rho * np.log(s))
    return head * w, head * wp


def solve_chi_pair(
    cls: SolitonClass,
    dims: Dimensions,
    grid: np.ndarray,
    s_match: float = 3.5,
    s_ref: float | None = None,
    seed_tol: float = 1e-6,
) -> tuple[ScalarProfile, ScalarProfile]:
    """Table-normalized pair (chi1, chi2).

    chi1 -> 1 at infinity; chi2 is the pure Gaussian branch.  Small-s
    structure comes from the convergent expansion at the regular singular
    point s = 0; normalizations at infinity come from the inverse-square
    series seeded at s_ref and transported along the stable direction.
    The quarter-period phase relation between the branches at s = 0 is a
    measured output for expanders (where both constructions are
    independent) and enforced by construction for shrinkers.
    """
    grid = np.asarray(grid, float)
    n = dims.n
    lam = cls.lam
    if lam == 0:
        raise ValueError("chi branches require an expanding or shrinking class")
    if s_ref is None:
        s_ref = max(float(grid[-1]), 8.0)
    s_match = min(s_match, float(grid[-1]))

    # complex basis (u1, u2) = (Im w, Re w) on the grid
    small_mask = grid <= s_match
    w_small, wp_small = _frobenius_eval(dims, lam, grid[small_mask])
    rhs = _chi_ode_rhs(n, lam)
    w0, wp0 = _frobenius_eval(dims, lam, np.array([s_match]))
    sol = solve_ivp(
        rhs,
        (s_match, max(float(grid[-1]), s_ref)),
        [w0[0], wp0[0] / s_match],
        method="DOP853",
        rtol=1e-13,
        atol=1e-300,
        dense_output=True,
    )
    big = grid[~small_mask]
    w_big = np.array([sol.sol(s)[0] for s in big], dtype=complex)
    wp_big = np.array([sol.sol(s)[1] * s for s in big], dtype=complex)
    w = np.concatenate([w_small, w_big])
    wp = np.concatenate([wp_small, wp_big])
    u1, u1p = w.imag, wp.imag
    u2, u2p = w.real, wp.real
    w_ref, ws_ref = sol.sol(s_ref)
    wp_ref = ws_ref * s_ref

    v1, d1, tr1 = _chi_anchor(dims, lam, "chi1", s_ref)
    v2, d2, tr2 = _chi_anchor(dims, lam, "chi2", s_ref)
    M = np.array([[v1, v2], [d1, d2]])

    if lam > 0:
        if tr1 / max(abs(v1), 1e-300) > seed_tol:
            raise BranchSeparationError("chi1 seed truncation too large; raise s_ref")
        L1 = np.linalg.solve(M, [w_ref.imag, wp_ref.imag])[0]
        L2 = np.linalg.solve(M, [w_ref.real, wp_ref.real])[0]
        denom = L1 * L1 + L2 * L2
        chi1_vals = (L1 * u1 + L2 * u2) / denom
        chi1_der = (L1 * u1p + L2 * u2p) / denom
        k1 = complex(L1, L2) / denom
        chi2_vals, chi2_der = _integrate_backward(rhs, grid, s_ref, v2, d2)
        kraw = _match_k(grid, chi2_vals, chi2_der, u1, u1p, u2, u2p)
        scale = abs(k1) / abs(kraw)
        if (kraw * scale / (1j * k1)).real < 0:
            scale = -scale
        chi2_vals, chi2_der = chi2_vals * scale, chi2_der * scale
        k2 = kraw * scale
        C_chi = scale
    else:
        if tr1 / max(abs(v1), 1e-300) > seed_tol:
            raise BranchSeparationError("chi1 seed truncation too large; raise s_ref")
        chi1_vals, chi1_der = _integrate_backward(rhs, grid, s_ref, v1, d1)
        k1 = _match_k(grid, chi1_vals, chi1_der, u1, u1p, u2, u2p)
        ik = 1j * k1
        chi2_vals = ik.real * u1 + ik.imag * u2
        chi2_der = ik.real * u1p + ik.imag * u2p
        k2 = ik
        chi2_ref = ik.real * w_ref.imag + ik.imag * w_ref.real
        chi2p_ref = ik.real * wp_ref.imag + ik.imag * wp_ref.real
        C_chi = float(np.linalg.solve(np.array([[v2, v1], [d2, d1]]), [chi2_ref, chi2p_ref])[0])

    p1 = ScalarProfile(grid, chi1_vals, chi1_der, "chi1", cls, dims, meta={"k_small_s": k1, "s_ref": s_ref})
    p2 = ScalarProfile(
        grid, chi2_vals, chi2_der, "chi2", cls, dims, meta={"k_small_s": k2, "s_ref": s_ref, "C_chi": C_chi}
    )
    return p1, p2


def _integrate_backward(rhs, grid, s_from, value, t_deriv):
    sol = solve_ivp(
        rhs,
        (s_from, float(grid[0])),
        [value, t_deriv / s_from],
        method="DOP853",
        rtol=1e-13,
        atol=1e-300,
        dense_output=True,
    )
    vals = np.empty(len(grid))
    ders = np.empty(len(grid))
    for i, s in enumerate(grid):
        v, d = sol.sol(min(s, s_from))
        vals[i] = v
        ders[i] = d * s
    return vals, ders


def _match_k(grid, vals, ders, u1, u1p, u2, u2p, idx: int = 3) -> complex:
    """Coefficients of a real solution in the (u1, u2) basis give its k."""
    idx = min(idx, len(grid) - 1)
    M = np.array([[u1[idx], u2[idx]], [u1p[idx], u2p[idx]]])
    c = np.linalg.solve(M, [vals[idx], ders[idx]])
    return complex(c[0], c[1])


def solve_chi(cls: SolitonClass, dims: Dimensions, branch: str, grid: np.ndarray) -> ScalarProfile:
    chi1, chi2 = solve_chi_pair(cls, dims, grid)
    if branch == "chi1":
        return chi1
    if branch == "chi2":
        return chi2
    raise ValueError(f"unknown chi branch {branch!r}")


def riccati_limit(prof: ScalarProfile, s_eval: float, extrapolate: bool = True) -> float:
    """Limit of s^4 Z with Z = chi_s / (s chi), measured near s_eval.

    The raw product carries an O(s^-2) correction; fitting {1, s^-2} over
    [s_eval/2, s_eval] removes it.
    """
    s = prof.grid
    Z = prof.derivative / (s * s * prof.values)
    if not extrapolate:
        i = int(np.argmin(np.abs(s - s_eval)))
        return float(s[i] ** 4 * Z[i])
    mask = (s >= s_eval / 2) & (s <= s_eval)
    ss = s[mask]
    X = np.column_stack([np.ones(mask.sum()), ss**-2.0, ss**-4.0])
    coef, *_ = np.linalg.lstsq(X, ss**4 * Z[mask], rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# zeta reconstruction from chi


@dataclass
class ZetaProfile:
    grid: np.ndarray
    zeta: np.ndarray  # complex
    x12: np.ndarray
    y12: np.ndarray
    lam: SolitonClass
    dims: Dimensions

    def difference_residual(self) -> np.ndarray:
        """Residual of the linear difference system, stencil derivatives."""
        s = self.grid
        n = self.dims.n
        lam = self.lam.lam
        Dx = s * _stencil_derivative(s, self.x12, 1)
        Dy = s * _stencil_derivative(s, self.y12, 1)
        r1 = Dx + 2 * (n - 1) * self.y12
        r2 = Dy - (self.x12 - (n - 1 + lam * s * s) * self.y12)
        scale = np.maximum.reduce(
            [np.abs(Dx), np.abs(Dy), np.abs(self.x12), (n - 1 + s * s) * np.abs(self.y12), np.ones_like(s)]
        )
        return (np.abs(r1) + np.abs(r2))[4:-4] / scale[4:-4]


def zeta_from_chi(prof: ScalarProfile, dims: Dimensions) -> ZetaProfile:
    A, Om = dims.A, dims.Omega
    x12 = prof.values
    y12 = -prof.derivative / (2 * (dims.n - 1))
    zeta = prof.derivative + (A + 1j * Om) * x12
    return ZetaProfile(prof.grid, zeta, x12, y12, prof.lam, dims)


def fit_small_s_constant(prof: ScalarProfile, window: tuple[float, float] | None = None) -> complex:
    """Fit chi ~ Im[k s^{-A+iOm}] over a small-s window; returns k."""
    dims = prof.dims
    s = prof.grid
    if window is None:
        window = (s[0], min(s[0] * 3, s[-1]))
    mask = (s >= window[0]) & (s <= window[1])
    ss, vv = s[mask], prof.values[mask]
    base = ss ** (-dims.A)
    th = dims.Omega * np.log(ss)
    X = np.column_stack([base * np.sin(th), base * np.cos(th)])
    (kr, ki), *_ = np.linalg.lstsq(X, vv, rcond=None)
    return complex(kr, ki)


def zero_crossing_frequency(prof: ScalarProfile, s_hi: float) -> float:
    """Fitted frequency of zeros in log s: pi / median spacing."""
    mask = prof.grid <= s_hi
    s, v = prof.grid[mask], prof.values[mask]
    idx = np.where(np.diff(np.sign(v)) != 0)[0]
    if len(idx) < 3:
        raise ValueError("not enough zero crossings in the window")
    zs = []
    for i in idx:
        u0, u1 = np.log(s[i]), np.log(s[i + 1])
        zs.append(u0 - v[i] * (u1 - u0) / (v[i + 1] - v[i]))
    return float(np.pi / np.median(np.diff(zs)))
