"""The Ricci-flat heteroclinic orbit from the smooth fill to the cone.

The connecting orbit lies in the invariant set {J = F = sigma = 0}, whose
normal directions are expanding (J grows like e^{2t}); a single long
integration in doubles would drift off the set exponentially, so the
orbit is advanced in short arcs with a projection back onto the set
between arcs.  Within each arc the flow is untouched, and the projection
corrections stay at the local-error level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    IntegratorConfig,
    PhasePoint,
    Termination,
    Trajectory,
    flow,
    grad_F,
    grad_J,
    invariant_F,
    invariant_J,
    jacobian,
    lyapunov_W,
    project_to_E,
    to_avg_diff,
)
from .dims import Dimensions, SolitonClass
from .equilibria import gf_E_tangent_data, good_fill, ricci_flat_cone


@dataclass
class BohmOrbit:
    trajectory: Trajectory
    epsilon: float
    converged: bool
    final_distance_to_RFC: float
    W_samples: list[tuple[float, float]]
    dims: Dimensions

    def invariant_bounds(self, k: int = 200) -> tuple[float, float]:
        ts = np.linspace(self.trajectory.t0, self.trajectory.t1, k)
        Js = [abs(invariant_J(self.trajectory.state(t), self.dims)) for t in ts]
        Fs = [abs(invariant_F(self.trajectory.state(t), self.dims)) for t in ts]
        return float(max(Js)), float(max(Fs))


class ShootDivergence(RuntimeError):
    def __init__(self, msg, epsilon, sign):
        super().__init__(msg)
        self.epsilon = epsilon
        self.sign = sign


def shoot_bohm(
    dims: Dimensions,
    epsilon: float = 1e-6,
    cfg: IntegratorConfig = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13),
    target_distance: float = 1e-6,
    t_max: float = 60.0,
    chunk: float = 0.5,
    direction_sign: int = +1,
) -> BohmOrbit:
    """Shoot along the in-set unstable direction of the smooth fill.

    The offset direction is the unique unstable eigenvector tangent to
    {J = F = 0}, signed so x2 becomes positive (direction_sign = -1 picks
    the other branch, which diverges and is rejected).  Convergence
    requires the distance to the cone point below target_distance and the
    Lyapunov quantity W to have flattened onto its cone value.
    """
    if not 0 < epsilon <= 1e-4:
        raise ValueError("epsilon must lie in (0, 1e-4]")
    u, *_ = gf_E_tangent_data(dims)
    u = u / np.linalg.norm(u)
    if u[2] < 0:
        u = -u
    u = direction_sign * u
    gf = good_fill(dims).as_array()
    rfc = ricci_flat_cone(dims).as_array()
    W_rfc = lyapunov_W(rfc, dims)

    y = project_to_E(gf + epsilon * u, dims)
    if y[2] <= 0:
        raise ShootDivergence(
            f"offset has x2 <= 0 after projection (sign {direction_sign}, epsilon {epsilon:g})",
            epsilon,
            direction_sign,
        )

    parts: list[Trajectory] = []
    W_samples: list[tuple[float, float]] = [(0.0, lyapunov_W(y, dims))]
    t = 0.0
    converged = False
    dist = float(np.linalg.norm(y - rfc))
    while t < t_max:
        part = flow(y, t, t + chunk, dims, SolitonClass.STEADY, cfg)
        if part.termination is not Termination.REACHED_T1:
            raise ShootDivergence(
                f"orbit left the region at t={part.t1:.2f} ({part.termination.value})",
                epsilon,
                +1,
            )
        parts.append(part)
        t = part.t1
        y = project_to_E(part.final_state(), dims)
        if y[2] <= 0:
            raise ShootDivergence("x2 crossed zero: wrong branch or epsilon too large", epsilon, +1)
        W_samples.append((t, lyapunov_W(y, dims)))
        dist = float(np.linalg.norm(y - rfc))
        if dist < target_distance and abs(W_samples[-1][1] - W_rfc) < 1e-9:
            converged = True
            break

    traj = Trajectory.concatenate(parts)
    return BohmOrbit(traj, epsilon, converged, dist, W_samples, dims)


def bohm_point(orbit: BohmOrbit, target_distance: float) -> tuple[float, PhasePoint, complex]:
    """First time the orbit is within target_distance of the cone point.

    Also returns zeta there, the complex difference-variable coordinate
    needed by the exit-map amplitude and phase constants.
    """
    rfc = ricci_flat_cone(orbit.dims).as_array()
    traj = orbit.trajectory
    d0 = np.linalg.norm(traj.state(traj.t0) - rfc)
    if target_distance >= d0:
        raise ValueError("target_distance exceeds the initial separation")
    ts = np.linspace(traj.t0, traj.t1, 4000)
    for t in ts:
        st = traj.state(t)
        if np.linalg.norm(st - rfc) <= target_distance:
            # bisect the bracket for the first crossing
            lo, hi = max(traj.t0, t - (ts[1] - ts[0])), t
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if np.linalg.norm(traj.state(mid) - rfc) <= target_distance:
                    hi = mid
                else:
                    lo = mid
            st = traj.state(hi)
            p = PhasePoint.from_array(st)
            zeta = to_avg_diff(p, orbit.dims).zeta(orbit.dims)
            return float(hi), p, zeta
    raise ValueError("orbit never reaches the requested distance")


def section_time(orbit: BohmOrbit, x2_value: float) -> float:
    """Crossing time of the section x2 = x2_value (x2 is monotone early on)."""
    traj = orbit.trajectory
    ts = np.linspace(traj.t0, traj.t1, 3000)
    x2 = np.array([traj.state(t)[2] for t in ts])
    idx = np.where(np.diff(np.sign(x2 - x2_value)) != 0)[0]
    if len(idx) == 0:
        raise ValueError("section not crossed")
    i = idx[0]
    t0, t1v = ts[i], ts[i + 1]
    f0 = x2[i] - x2_value
    f1 = x2[i + 1] - x2_value
    return float(t0 - f0 * (t1v - t0) / (f1 - f0))


def zeta_decay_fit(orbit: BohmOrbit, inner_distance: float = 0.1) -> dict:
    """Fitted decay rate and rotation frequency of zeta near the cone point.

    Inside the linear regime, zeta ~ e^{(-A + i Omega) t} zeta_0.
    """
    dims = orbit.dims
    rfc = ricci_flat_cone(dims).as_array()
    traj = orbit.trajectory
    ts = np.linspace(traj.t0, traj.t1, 2500)
    t_sel, zs = [], []
    for t in ts:
        st = traj.state(t)
        if np.linalg.norm(st - rfc) <= inner_distance:
            z = to_avg_diff(PhasePoint.from_array(st), dims).zeta(dims)
            if abs(z) > 1e-13:
                t_sel.append(t)
                zs.append(z)
    t_sel = np.array(t_sel)
    zs = np.array(zs)
    X = np.column_stack([np.ones(len(t_sel)), t_sel])
    (_, rate), *_ = np.linalg.lstsq(X, np.log(np.abs(zs)), rcond=None)
    phase = np.unwrap(np.angle(zs))
    (_, freq), *_ = np.linalg.lstsq(X, phase, rcond=None)
    return {"rate": float(rate), "freq": float(abs(freq)), "n_samples": len(t_sel)}


def transversality_diagnostic(orbit: BohmOrbit, t_probe: float | None = None) -> dict:
    """Smallest singular value of (d sigma, dJ) acting on the transported
    unstable frame: nonzero values evidence transversality of the stable
    and unstable manifolds along the orbit.  Diagnostic only.
    """
    dims = orbit.dims
    traj = orbit.trajectory
    if t_probe is None:
        t_probe = min(traj.t1, traj.t0 + 0.75 * (traj.t1 - traj.t0))
    from .equilibria import gf_unstable_vectors

    E1, E2, Es = gf_unstable_vectors(dims, SolitonClass.STEADY)
    frame = np.stack([E1 / np.linalg.norm(E1), Es], axis=1)  # 6 x 2

    # transport the frame with the tangent flow along the stored orbit
    from scipy.integrate import solve_ivp

    def rhs(t, v):
        V = v.reshape(6, 2)
        M = jacobian(traj.state(t), dims, SolitonClass.STEADY)
        out = M @ V
        # renormalize continuously to tame the e^{2t} growth
        return (out - V * np.sum(V * out, axis=0)).ravel()

    sol = solve_ivp(rhs, (traj.t0, t_probe), frame.ravel(), method="DOP853", rtol=1e-9, atol=1e-12)
    V = sol.y[:, -1].reshape(6, 2)
    st = traj.state(t_probe)
    dsig = np.zeros(6)
    dsig[5] = 1.0
    rows = np.stack([dsig, grad_J(st, dims)])
    sv = np.linalg.svd(rows @ V, compute_uv=False)
    return {"t_probe": float(t_probe), "smallest_singular_value": float(sv[-1])}
