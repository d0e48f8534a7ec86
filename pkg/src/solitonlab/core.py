"""Phase space, vector field, conserved quantities, and the flow integrator.

State ordering everywhere: (x1, y1, x2, y2, Gamma, sigma), with sigma = s^2.
The independent variable t is logarithmic in arclength: s = e^t sqrt(sigma0),
so sigma(t) = sigma(0) e^{2t} exactly along every orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .dims import Dimensions, SolitonClass

BOUNDING_BOX = 1.0e6


@dataclass(frozen=True)
class PhasePoint:
    x1: float
    y1: float
    x2: float
    y2: float
    Gamma: float
    sigma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2, self.Gamma, self.sigma])

    @staticmethod
    def from_array(v: Sequence[float]) -> "PhasePoint":
        return PhasePoint(*(float(c) for c in v))

    @property
    def s(self) -> float:
        if self.sigma < 0:
            raise ValueError("sigma < 0 has no arclength interpretation")
        return math.sqrt(self.sigma)

    def is_metric(self) -> bool:
        """Whether the state can represent a warped-product metric."""
        return self.x1 > 0 and self.x2 > 0 and self.sigma > 0


@dataclass(frozen=True)
class AvgDiffState:
    """Averaged/difference coordinates centered on the Ricci-flat cone.

    xi  = sum_a (p_a/n)(x_a - (n-1))     averaged aperture deviation
    y   = sum_a (p_a/n) y_a
    gamma = Gamma + n
    x12 = x1 - x2, y12 = y1 - y2         oscillatory pair
    s   = sqrt(sigma)
    """

    xi: float
    y: float
    gamma: float
    x12: float
    y12: float
    s: float

    def zeta(self, dims: Dimensions) -> complex:
        """zeta = (A + i Omega) x12 - (A^2 + Omega^2) y12."""
        return (dims.A + 1j * dims.Omega) * self.x12 - (dims.A**2 + dims.Omega**2) * self.y12


def vector_field(state, dims: Dimensions, cls: SolitonClass) -> np.ndarray:
    """Right-hand side of the soliton system at a state (array or PhasePoint)."""
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2, G, sig = (float(c) for c in state)
    p1, p2 = dims.p1, dims.p2
    lam = cls.lam
    c = G + 1.0 - lam * sig
    return np.array(
        [
            -2.0 * x1 * y1,
            x1 + c * y1 + G + 1.0,
            -2.0 * x2 * y2,
            x2 + c * y2 + G + 1.0,
            G + p1 * (1.0 + y1) ** 2 + p2 * (1.0 + y2) ** 2,
            2.0 * sig,
        ]
    )


def jacobian(state, dims: Dimensions, cls: SolitonClass) -> np.ndarray:
    """Analytic Jacobian of the vector field (defined on all of R^6)."""
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2, G, sig = (float(c) for c in state)
    p1, p2 = dims.p1, dims.p2
    lam = cls.lam
    c = G + 1.0 - lam * sig
    J = np.zeros((6, 6))
    J[0, 0] = -2.0 * y1
    J[0, 1] = -2.0 * x1
    J[1, 0] = 1.0
    J[1, 1] = c
    J[1, 4] = y1 + 1.0
    J[1, 5] = -lam * y1
    J[2, 2] = -2.0 * y2
    J[2, 3] = -2.0 * x2
    J[3, 2] = 1.0
    J[3, 3] = c
    J[3, 4] = y2 + 1.0
    J[3, 5] = -lam * y2
    J[4, 1] = 2.0 * p1 * (1.0 + y1)
    J[4, 3] = 2.0 * p2 * (1.0 + y2)
    J[4, 4] = 1.0
    J[5, 5] = 2.0
    return J


# ---------------------------------------------------------------------------
# Monitored quantities


def invariant_J(state, dims: Dimensions) -> float:
    """J = (1/2) sum p_a {x_a + (1+y_a)^2} - Gamma^2 / 2."""
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2, G = (float(c) for c in state[:5])
    return 0.5 * (
        dims.p1 * (x1 + (1.0 + y1) ** 2) + dims.p2 * (x2 + (1.0 + y2) ** 2)
    ) - 0.5 * G * G


def invariant_F(state, dims: Dimensions) -> float:
    """F = Gamma + sum p_a (1 + y_a); equals s f + lambda s^2 on metric orbits."""
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2, G = (float(c) for c in state[:5])
    return G + dims.p1 * (1.0 + y1) + dims.p2 * (1.0 + y2)


def grad_J(state, dims: Dimensions) -> np.ndarray:
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2, G = (float(c) for c in state[:5])
    return np.array(
        [
            0.5 * dims.p1,
            dims.p1 * (1.0 + y1),
            0.5 * dims.p2,
            dims.p2 * (1.0 + y2),
            -G,
            0.0,
        ]
    )


def grad_F(state, dims: Dimensions) -> np.ndarray:
    return np.array([0.0, dims.p1, 0.0, dims.p2, 1.0, 0.0])


def lyapunov_W(state, dims: Dimensions) -> float:
    """W = (1/2) sum p_a {x_a - (n-1) log x_a + y_a^2}, defined for x_a > 0."""
    if isinstance(state, PhasePoint):
        state = state.as_array()
    x1, y1, x2, y2 = (float(c) for c in state[:4])
    if x1 <= 0 or x2 <= 0:
        raise ValueError("lyapunov_W requires x1 > 0 and x2 > 0")
    n1 = dims.n - 1
    return 0.5 * (
        dims.p1 * (x1 - n1 * math.log(x1) + y1 * y1)
        + dims.p2 * (x2 - n1 * math.log(x2) + y2 * y2)
    )


# ---------------------------------------------------------------------------
# Averaged / difference coordinates


def to_avg_diff(p: PhasePoint, dims: Dimensions) -> AvgDiffState:
    if p.sigma < 0:
        raise ValueError("cannot convert a state with sigma < 0")
    n = dims.n
    w1, w2 = dims.p1 / n, dims.p2 / n
    return AvgDiffState(
        xi=w1 * (p.x1 - (n - 1)) + w2 * (p.x2 - (n - 1)),
        y=w1 * p.y1 + w2 * p.y2,
        gamma=p.Gamma + n,
        x12=p.x1 - p.x2,
        y12=p.y1 - p.y2,
        s=math.sqrt(p.sigma),
    )


def from_avg_diff(a: AvgDiffState, dims: Dimensions) -> PhasePoint:
    if a.s < 0:
        raise ValueError("s must be nonnegative")
    n = dims.n
    w1, w2 = dims.p1 / n, dims.p2 / n
    xbar = a.xi + (n - 1)
    ybar = a.y
    return PhasePoint(
        x1=xbar + w2 * a.x12,
        y1=ybar + w2 * a.y12,
        x2=xbar - w1 * a.x12,
        y2=ybar - w1 * a.y12,
        Gamma=a.gamma - n,
        sigma=a.s * a.s,
    )


# ---------------------------------------------------------------------------
# Flow integration


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-12
    max_step: float = np.inf
    max_steps: int = 1_000_000
    dense_output: bool = True
    bounding_box: float = BOUNDING_BOX

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


class Termination(Enum):
    REACHED_T1 = "reached_t1"
    EXITED_REGION = "exited_region"
    BLOWUP = "blowup"
    STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class Event:
    """Zero crossing of fn(t, state) located on the dense output.

    direction: as in solve_ivp (0 = any). Terminal events stop the flow
    and mark the trajectory as EXITED_REGION.
    """

    name: str
    fn: Callable[[float, np.ndarray], float]
    terminal: bool = False
    direction: float = 0.0


def sigma_event(value: float, name: str | None = None, terminal: bool = True) -> Event:
    return Event(name or f"sigma={value:g}", lambda t, y: y[5] - value, terminal, 1.0)


def s_event(s_target: float, terminal: bool = True) -> Event:
    return Event(f"s={s_target:g}", lambda t, y: y[5] - s_target * s_target, terminal, 1.0)


def x12_zero_event() -> Event:
    return Event("x12=0", lambda t, y: y[0] - y[2], terminal=False)


def J_event(value: float, dims: Dimensions, terminal: bool = False) -> Event:
    return Event(f"J={value:g}", lambda t, y: invariant_J(y, dims) - value, terminal)


def x_alpha_zero_event(alpha: int, terminal: bool = True) -> Event:
    idx = 0 if alpha == 1 else 2
    return Event(f"x{alpha}=0", lambda t, y: y[idx], terminal)


class Trajectory:
    """Densely sampled orbit with continuous interpolation across segments."""

    INTERPOLATION_ORDER = 7  # DOP853 dense output

    def __init__(
        self,
        times: np.ndarray,
        states: np.ndarray,
        dense_segments: list,
        termination: Termination,
        events: dict[str, list[tuple[float, np.ndarray]]] | None = None,
    ):
        self.times = np.asarray(times)
        self.states = np.asarray(states)  # shape (m, 6)
        self._segments = dense_segments  # list of (t_lo, t_hi, OdeSolution)
        self.termination = termination
        self.events = events or {}
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def state(self, t: float) -> np.ndarray:
        """Dense-output state at any t in [t0, t1]."""
        if not (self.t0 - 1e-12 <= t <= self.t1 + 1e-12):
            raise ValueError(f"t={t} outside trajectory span [{self.t0}, {self.t1}]")
        for t_lo, t_hi, sol in self._segments:
            if t_lo - 1e-12 <= t <= t_hi + 1e-12:
                return np.asarray(sol(t))
        return np.asarray(self._segments[-1][2](t))

    def state_many(self, ts: Iterable[float]) -> np.ndarray:
        return np.array([self.state(t) for t in ts])

    def point(self, t: float) -> PhasePoint:
        return PhasePoint.from_array(self.state(t))

    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @staticmethod
    def concatenate(parts: Sequence["Trajectory"]) -> "Trajectory":
        times = [parts[0].times]
        states = [parts[0].states]
        segments = list(parts[0]._segments)
        events: dict[str, list] = {k: list(v) for k, v in parts[0].events.items()}
        for part in parts[1:]:
            times.append(part.times[1:])
            states.append(part.states[1:])
            segments.extend(part._segments)
            for k, v in part.events.items():
                events.setdefault(k, []).extend(v)
        return Trajectory(
            np.concatenate(times),
            np.vstack(states),
            segments,
            parts[-1].termination,
            events,
        )


def flow(
    p0,
    t0: float,
    t1: float,
    dims: Dimensions,
    cls: SolitonClass,
    cfg: IntegratorConfig = IntegratorConfig(),
    events: Sequence[Event] = (),
    method: str = "DOP853",
) -> Trajectory:
    """Integrate the soliton system from t0 to t1 with event detection.

    Always watches the bounding box; leaving it terminates the orbit with
    Termination.BLOWUP (escape in finite time is generic off the special
    sets, so this is an expected outcome, not an error).
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    y0 = p0.as_array() if isinstance(p0, PhasePoint) else np.asarray(p0, dtype=float)
    p1, p2 = dims.p1, dims.p2
    lam = cls.lam

    def rhs(t, y):
        x1, y1, x2, y2, G, sig = y
        c = G + 1.0 - lam * sig
        return (
            -2.0 * x1 * y1,
            x1 + c * y1 + G + 1.0,
            -2.0 * x2 * y2,
            x2 + c * y2 + G + 1.0,
            G + p1 * (1.0 + y1) ** 2 + p2 * (1.0 + y2) ** 2,
            2.0 * sig,
        )

    box = cfg.bounding_box

    def box_event(t, y):
        return box - float(np.max(np.abs(y)))

    box_event.terminal = True
    box_event.direction = -1.0

    ev_fns = [box_event]
    for ev in events:
        fn = ev.fn

        def wrapped(t, y, fn=fn):
            return fn(t, y)

        wrapped.terminal = ev.terminal
        wrapped.direction = ev.direction
        ev_fns.append(wrapped)

    if t1 == t0:
        return Trajectory(
            np.array([t0]),
            y0[None, :],
            [(t0, t0, lambda t: y0)],
            Termination.REACHED_T1,
        )

    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method=method,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=True,
        events=ev_fns,
    )

    if sol.status == -1:
        termination = Termination.STEP_UNDERFLOW
    elif sol.status == 1:
        fired = [i for i, te in enumerate(sol.t_events) if te.size > 0]
        termination = (
            Termination.BLOWUP
            if 0 in fired and all(not ev_fns[i].terminal for i in fired if i != 0)
            else Termination.EXITED_REGION
        )
    else:
        termination = Termination.REACHED_T1

    event_hits: dict[str, list[tuple[float, np.ndarray]]] = {}
    for i, ev in enumerate(events):
        te, ye = sol.t_events[i + 1], sol.y_events[i + 1]
        if te.size:
            event_hits[ev.name] = [(float(t), np.asarray(y)) for t, y in zip(te, ye)]

    times = sol.t
    states = sol.y.T
    # append the terminal event state so the trajectory ends exactly there
    if termination in (Termination.EXITED_REGION, Termination.BLOWUP) and sol.t_events:
        t_end = max(
            (te[-1] for te in sol.t_events if te.size > 0),
            default=times[-1],
        )
        if t_end > times[-1] + 1e-15:
            y_end = sol.sol(t_end)
            times = np.append(times, t_end)
            states = np.vstack([states, y_end])

    segments = [(float(times[0]), float(times[-1]), sol.sol)]
    return Trajectory(times, states, segments, termination, event_hits)


def flow_to_s(
    p0,
    s_target: float,
    dims: Dimensions,
    cls: SolitonClass,
    cfg: IntegratorConfig = IntegratorConfig(),
    events: Sequence[Event] = (),
) -> Trajectory:
    """Flow forward until s = s_target (requires sigma(p0) > 0)."""
    y0 = p0.as_array() if isinstance(p0, PhasePoint) else np.asarray(p0, dtype=float)
    sig0 = float(y0[5])
    if sig0 <= 0:
        raise ValueError("flow_to_s requires sigma > 0")
    t1 = 0.5 * math.log(s_target * s_target / sig0)
    if t1 <= 0:
        raise ValueError("s_target must exceed the initial s")
    return flow(y0, 0.0, t1, dims, cls, cfg, events=events)


def project_to_E(state: np.ndarray, dims: Dimensions, tol: float = 1e-15) -> np.ndarray:
    """Minimal-norm Newton projection onto the invariant set {J = F = 0, sigma = 0}."""
    y = np.array(state, dtype=float)
    y[5] = 0.0
    for _ in range(4):
        r = np.array([invariant_J(y, dims), invariant_F(y, dims)])
        if abs(r[0]) < tol and abs(r[1]) < tol:
            break
        G = np.vstack([grad_J(y, dims), grad_F(y, dims)])  # 2 x 6
        delta, *_ = np.linalg.lstsq(G, -r, rcond=None)
        y = y + delta
        y[5] = 0.0
    return y
