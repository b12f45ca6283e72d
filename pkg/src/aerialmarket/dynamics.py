"""Mean-field market dynamics after an unlicensed entrant (the USP) appears.

Customers of the two licensed providers (LSPs) and non-subscribers revise
their provider choice through gossip, curiosity and dissatisfaction. The
USP reprices multiplicatively with the change of its customer base.

State vectors are ordered ``(y0, y1, y2, p0)``: USP-connected shares coming
from non-subscribers, LSP1 and LSP2, and the USP price.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Protocol

import numpy as np

from .channel import CellCapacity
from .equilibrium import EquilibriumResult
from .quality import QualityParams, quality

STATE_FIELDS = ("y0", "y1", "y2", "p0")
CSV_COLUMNS = ("t", "y0", "y1", "y2", "x1", "x2", "p0", "T0", "T1", "T2",
               "profit0", "profit1", "profit2")
PROJECTION_TOL = 1e-6


class InvariantViolation(RuntimeError):
    """A state left its admissible region by more than the projection tolerance."""


@dataclass(frozen=True)
class BehaviorFactors:
    xi: float = 1.0
    gamma: float = 0.05
    alpha_c: float = 0.05
    delta: float = 0.1
    c_u: float = 0.1
    c_price: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise ValueError(f"{f.name} must be non-negative")
        for name in ("gamma", "alpha_c", "delta"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class MarketState:
    y0: float
    y1: float
    y2: float
    p0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y0, self.y1, self.y2, self.p0])

    @classmethod
    def from_array(cls, v) -> "MarketState":
        return cls(*map(float, v))

    def shares(self, eq: EquilibriumResult) -> tuple[float, float]:
        return eq.D1 - self.y1, eq.D2 - self.y2

    def check(self, eq: EquilibriumResult, tol: float = PROJECTION_TOL):
        bounds = {"y0": eq.D0, "y1": eq.D1, "y2": eq.D2}
        for name, hi in bounds.items():
            v = getattr(self, name)
            if v < -tol or v > hi + tol:
                raise InvariantViolation(f"{name}={v:.6g} outside [0, {hi:.6g}]")
        if not self.p0 > 0:
            raise InvariantViolation(f"USP price must stay positive, got {self.p0}")


@dataclass(frozen=True)
class QCoefficients:
    """Average switching probabilities per revision, by channel and direction."""

    q_g_1to0: float = 0.0
    q_g_2to0: float = 0.0
    q_g_0to1: float = 0.0
    q_g_0to2: float = 0.0
    q_d_1to0: float = 0.0
    q_d_2to0: float = 0.0
    q_d_0to1: float = 0.0
    q_d_0to2: float = 0.0
    q_none_to0: float = 0.0
    q_0tonone: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def switch_probability(delta_u, c_u: float):
    """Probability of acting on a utility gain ``delta_u``; zero for no gain.

    ``2 / (1 + exp(-c_u x)) - 1`` rewritten as ``tanh(c_u x / 2)``.
    """
    du = np.asarray(delta_u, dtype=float)
    out = np.where(du > 0, np.tanh(0.5 * c_u * np.maximum(du, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def _logcosh(x):
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def _tanh_integral(u_lo: float, step: float) -> float:
    """``log cosh(u_lo + step) - log cosh(u_lo)`` for ``u_lo, step >= 0`` without cancellation."""
    if step > 20.0:
        return _logcosh(u_lo + step) - _logcosh(u_lo)
    return math.log1p(2.0 * math.sinh(0.5 * step) ** 2 + math.tanh(u_lo) * math.sinh(step))


def positive_gain_interval(lo: float, hi: float, slope_k: float, offset: float) -> tuple[float, float]:
    """Sub-interval of ``[lo, hi]`` where ``slope_k * theta - offset > 0`` (may be empty)."""
    if slope_k > 0:
        return max(lo, offset / slope_k), hi
    if slope_k < 0:
        return lo, min(hi, offset / slope_k)
    return (lo, hi) if offset < 0 else (lo, lo)


def logistic_mean_integral(lo: float, hi: float, slope_k: float, offset: float,
                           normalizer: float) -> float:
    """Integral of ``tanh((slope_k*theta - offset)/2)`` over the positive-gain part of ``[lo, hi]``, divided by ``normalizer``.

    With ``slope_k = c_u * (s_new - s_old)`` and ``offset = c_u * (p_new - p_old)``
    the integrand is the switch probability of a customer with taste
    ``theta``, so dividing by the interval length gives its group average.
    """
    if not normalizer > 0:
        raise ValueError("normalizer must be positive")
    if not hi > lo:
        return 0.0
    a, b = positive_gain_interval(lo, hi, slope_k, offset)
    if not b > a:
        return 0.0
    width = b - a
    if abs(slope_k) * width < 1e-9:
        # nearly constant integrand: midpoint rule, error O((k * width)^3)
        return width * math.tanh(0.5 * (slope_k * 0.5 * (a + b) - offset)) / normalizer
    u_lo = max(min(0.5 * (slope_k * a - offset), 0.5 * (slope_k * b - offset)), 0.0)
    step = 0.5 * abs(slope_k) * width  # not u_hi - u_lo: that cancels badly for small slopes
    val = 2.0 / abs(slope_k) * _tanh_integral(u_lo, step)
    return min(max(val, 0.0), width) / normalizer


def group_average(interval: tuple[float, float], ds: float, dp: float, c_u: float) -> float:
    """Mean switch probability over a taste group for gain ``theta*ds - dp``."""
    lo, hi = interval
    if not hi > lo:
        return 0.0
    q = logistic_mean_integral(lo, hi, c_u * ds, c_u * dp, hi - lo)
    return min(max(q, 0.0), 1.0)


def transition_coefficients(state: MarketState, eq: EquilibriumResult, throughputs,
                            behavior: BehaviorFactors, qp: QualityParams) -> QCoefficients:
    """All ten switching coefficients for the current throughputs ``(T0, T1, T2)``.

    Gossip compares experienced qualities at the posted prices;
    dissatisfaction compares announced LSP quality with what is actually
    delivered; non-subscribers weigh USP utility against staying out.
    """
    T0, T1, T2 = throughputs
    S0, S1, S2 = (float(quality(T, qp)) for T in (T0, T1, T2))
    groups = eq.taste_intervals()
    I1, I2, I0 = groups["lsp1"], groups["lsp2"], groups["none"]
    p0, p1, p2 = state.p0, eq.p1, eq.p2
    cu = behavior.c_u
    return QCoefficients(
        q_g_1to0=group_average(I1, S0 - S1, p0 - p1, cu),
        q_g_2to0=group_average(I2, S0 - S2, p0 - p2, cu),
        q_g_0to1=group_average(I1, S1 - S0, p1 - p0, cu),
        q_g_0to2=group_average(I2, S2 - S0, p2 - p0, cu),
        q_d_1to0=group_average(I1, eq.s1 - S1, 0.0, cu),
        q_d_2to0=group_average(I2, eq.s2 - S2, 0.0, cu),
        q_d_0to1=group_average(I1, eq.s1 - S0, p1 - p0, cu),
        q_d_0to2=group_average(I2, eq.s2 - S0, p2 - p0, cu),
        q_none_to0=group_average(I0, S0, p0, cu),
        q_0tonone=group_average(I0, -S0, -p0, cu),
    )


def lsp_flow(x: float, y: float, usp_mass: float, q_g_out: float, q_g_back: float,
             q_d_out: float, q_d_back: float, b: BehaviorFactors, weight: float = 1.0) -> float:
    """Net flow from an LSP group (connected mass ``x``) to the USP (mass ``y``).

    ``weight`` scales the inflow; it is 1 without cooperation.
    """
    inflow = x * weight * b.xi * (b.gamma * usp_mass * q_g_out + b.alpha_c * (1 - b.gamma)
                                  + b.delta * (1 - b.gamma) * q_d_out)
    outflow = y * b.xi * (b.gamma * x * q_g_back + b.alpha_c * (1 - b.gamma)
                          + b.delta * (1 - b.gamma) * q_d_back)
    return inflow - outflow


def inactive_flow(D0: float, y0: float, usp_mass: float, q: QCoefficients, b: BehaviorFactors) -> float:
    inflow = (D0 - y0) * b.xi * (b.gamma * usp_mass * q.q_none_to0 + b.alpha_c * (1 - b.gamma))
    return inflow - y0 * b.xi * q.q_0tonone


class System(Protocol):
    def rhs(self, v: np.ndarray) -> np.ndarray: ...

    def project(self, v: np.ndarray) -> tuple[np.ndarray, float]: ...


@dataclass
class MarketModel:
    """Non-cooperative mean-field market: equilibrium, cell capacities and behaviour."""

    eq: EquilibriumResult
    qp: QualityParams
    capacity: tuple[CellCapacity, CellCapacity, CellCapacity]  # USP, LSP1, LSP2
    behavior: BehaviorFactors
    nu: float

    def throughputs(self, state: MarketState) -> tuple[float, float, float]:
        x1, x2 = state.shares(self.eq)
        Y = state.y0 + state.y1 + state.y2
        c0, c1, c2 = self.capacity
        return c0.throughput(Y), c1.throughput(x1), c2.throughput(x2)

    def initial_state(self, p0: float | None = None) -> MarketState:
        return MarketState(0.0, 0.0, 0.0, self.eq.p2 / 2 if p0 is None else p0)

    def rhs(self, v: np.ndarray) -> np.ndarray:
        return market_derivative(MarketState.from_array(v), self)

    def project(self, v: np.ndarray) -> tuple[np.ndarray, float]:
        hi = np.array([self.eq.D0, self.eq.D1, self.eq.D2, np.inf])
        lo = np.array([0.0, 0.0, 0.0, 0.0])
        out = np.clip(v, lo, hi)
        return out, float(np.max(np.abs(out - v)))

    def columns(self, t: np.ndarray, V: np.ndarray) -> dict[str, np.ndarray]:
        eq = self.eq
        y0, y1, y2, p0 = V.T
        x1, x2 = eq.D1 - y1, eq.D2 - y2
        T = np.array([self.throughputs(MarketState.from_array(v)) for v in V]).reshape(-1, 3)
        pr = profits(p0, y0 + y1 + y2, x1, x2, eq, self.nu)
        return {"t": t, "y0": y0, "y1": y1, "y2": y2, "x1": x1, "x2": x2, "p0": p0,
                "T0": T[:, 0], "T1": T[:, 1], "T2": T[:, 2],
                "profit0": pr[0], "profit1": pr[1], "profit2": pr[2]}


def market_derivative(state: MarketState, model: MarketModel) -> np.ndarray:
    """Time derivative of ``(y0, y1, y2, p0)``; throughputs follow the current shares."""
    eq, b = model.eq, model.behavior
    T = model.throughputs(state)
    q = transition_coefficients(state, eq, T, b, model.qp)
    x1, x2 = state.shares(eq)
    Y = state.y0 + state.y1 + state.y2
    dy1 = lsp_flow(x1, state.y1, Y, q.q_g_1to0, q.q_g_0to1, q.q_d_1to0, q.q_d_0to1, b)
    dy2 = lsp_flow(x2, state.y2, Y, q.q_g_2to0, q.q_g_0to2, q.q_d_2to0, q.q_d_0to2, b)
    dy0 = inactive_flow(eq.D0, state.y0, Y, q, b)
    dp0 = b.c_price * state.p0 * (dy0 + dy1 + dy2)
    return np.array([dy0, dy1, dy2, dp0])


def profits(p0, usp_mass, x1, x2, eq: EquilibriumResult, nu: float):
    """Per-minute profits: USP revenue, and LSP revenue on live shares minus cost sunk at provisioned demand."""
    pi0 = np.asarray(p0) * np.asarray(usp_mass)
    pi1 = eq.p1 * np.asarray(x1) - nu * eq.s1 * eq.D1
    pi2 = eq.p2 * np.asarray(x2) - nu * eq.s2 * eq.D2
    return pi0, pi1, pi2


def rk4_step(f: Callable[[np.ndarray], np.ndarray], v: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(v)
    k2 = f(v + 0.5 * dt * k1)
    k3 = f(v + 0.5 * dt * k2)
    k4 = f(v + dt * k3)
    return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_states(v0, horizon: float, dt: float, system: System,
                     tol: float = PROJECTION_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 with projection onto the admissible region after each step.

    Returns:
        (t, V) with ``V[k]`` the state at ``t[k] = k * dt``.

    Raises:
        InvariantViolation: if a step leaves the region by more than ``tol``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    n = int(round(horizon / dt))
    if not math.isclose(n * dt, horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
    V = np.empty((n + 1, len(v0)))
    v, err = system.project(np.asarray(v0, dtype=float))
    if err > tol:
        raise InvariantViolation(f"initial state outside admissible region by {err:.3g}")
    V[0] = v
    for k in range(n):
        v, err = system.project(rk4_step(system.rhs, v, dt))
        if err > tol:
            raise InvariantViolation(f"step {k + 1} (t={(k + 1) * dt:g}) left the region by {err:.3g}")
        V[k + 1] = v
    return np.arange(n + 1) * dt, V


@dataclass
class Trajectory:
    """Sampled trajectory: named columns of equal length, starting with ``t``."""

    columns: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def __len__(self):
        return len(self.t)

    def to_csv(self, path, order: tuple[str, ...] | None = None, extra: dict | None = None):
        order = tuple(order or self.columns)
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(order + tuple(extra))
            for k in range(len(self)):
                w.writerow([repr(float(self.columns[c][k])) for c in order] + list(extra.values()))

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(x) for x in row] for row in reader]).reshape(-1, len(header))
        return cls({h: rows[:, i] for i, h in enumerate(header)})


def integrate(state0: MarketState, horizon: float, dt: float, model: MarketModel) -> Trajectory:
    """Integrate the non-cooperative market from ``state0`` over ``horizon`` minutes."""
    state0.check(model.eq)
    t, V = integrate_states(state0.as_array(), horizon, dt, model)
    return Trajectory(model.columns(t, V))


def settling_time(t: np.ndarray, V: np.ndarray, system: System, share_idx, tol: float = 1e-4) -> float:
    """Earliest sample time after which ``max |d share / dt|`` stays below ``tol``; inf if never."""
    rates = np.array([np.max(np.abs(system.rhs(v)[list(share_idx)])) for v in V])
    above = np.nonzero(rates >= tol)[0]
    if above.size == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return math.inf
    return float(t[above[-1] + 1])
