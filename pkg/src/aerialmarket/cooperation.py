"""LSP mutual assistance: customers may be served by the nearest AAP of either LSP.

Shares ``z1, z2`` count USP-connected customers who, while still with their
LSP, were served through the partner's ("proxy") AAPs. A constant fraction
``epsilon`` of each LSP's connected customers is proxy-served.

Coop state vectors are ordered ``(y0, y1, y2, z1, z2, p0)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import CrowdParams, Fleet, RadioParams, avg_spectral_efficiency, group_throughput
from .dynamics import (PROJECTION_TOL, BehaviorFactors, InvariantViolation, MarketState, Trajectory,
                       inactive_flow, integrate_states, lsp_flow, profits, transition_coefficients,
                       group_average)
from .equilibrium import EquilibriumResult
from .quality import QualityParams, quality

COOP_FIELDS = ("y0", "y1", "y2", "z1", "z2", "p0")
COOP_CSV_COLUMNS = ("t", "y0", "y1", "y2", "z1", "z2", "x1", "x2", "p0", "T0", "T1", "T2",
                    "profit0", "profit1", "profit2")
_BLOCK = 1 << 16
_EPS_CACHE: dict = {}


@dataclass(frozen=True)
class CoopState:
    y0: float
    y1: float
    y2: float
    z1: float
    z2: float
    p0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.y0, self.y1, self.y2, self.z1, self.z2, self.p0])

    @classmethod
    def from_array(cls, v) -> "CoopState":
        return cls(*map(float, v))

    @property
    def usp_mass(self) -> float:
        return self.y0 + self.y1 + self.y2 + self.z1 + self.z2

    def connected(self, eq: EquilibriumResult) -> tuple[float, float]:
        """LSP-connected shares (own or proxy service)."""
        return eq.D1 - self.y1 - self.z1, eq.D2 - self.y2 - self.z2


@dataclass(frozen=True)
class CoopGeometry:
    epsilon: float
    eta1_coop: float
    eta2_coop: float
    r_aap_coop: float

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


def _nearest_distance(points: np.ndarray, aaps: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - aaps[None, :, :]) ** 2).sum(axis=-1)
    return d2.min(axis=1)


def foreign_share(fleet1: Fleet, fleet2: Fleet, samples: int = 200_000, seed: int = 0) -> float:
    """Probability that a uniform point in the area is nearest to an AAP of ``fleet2``.

    Ties go to ``fleet1``. Points are drawn in fixed-size blocks, each from
    its own child seed, so the estimate does not depend on how blocks are
    scheduled.
    """
    if len(fleet1) == 0 or len(fleet2) == 0:
        return 0.0
    if samples < 1:
        raise ValueError("samples must be >= 1")
    key = (fleet1.positions.tobytes(), fleet2.positions.tobytes(), fleet1.deploy.R, samples, seed)
    if key in _EPS_CACHE:
        return _EPS_CACHE[key]
    R = fleet1.deploy.R
    n_blocks = math.ceil(samples / _BLOCK)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    foreign = 0
    for k, ss in enumerate(children):
        n = min(_BLOCK, samples - k * _BLOCK)
        pts = np.random.default_rng(ss).uniform(0.0, R, size=(n, 2))
        foreign += int(np.count_nonzero(_nearest_distance(pts, fleet2.positions)
                                        < _nearest_distance(pts, fleet1.positions)))
    eps = foreign / samples
    _EPS_CACHE[key] = eps
    return eps


def coop_radius(fleet_i: Fleet, fleet_j: Fleet) -> float:
    """Cell radius once the partner's AAPs join: same ground split over the distinct union sites."""
    union = np.unique(np.vstack([fleet_i.positions, fleet_j.positions]), axis=0)
    r = fleet_i.r_aap * math.sqrt(len(fleet_i) / len(union))
    return min(r, fleet_i.deploy.reach)


def coop_spectral_efficiency(fleet_i: Fleet, fleet_j: Fleet, crowd: CrowdParams,
                             radio_i: RadioParams | None = None) -> float:
    """Average spectral efficiency of LSP ``i`` customers over the combined deployment."""
    radio = fleet_i.radio if radio_i is None else radio_i
    return avg_spectral_efficiency(coop_radius(fleet_i, fleet_j), crowd, radio, fleet_i.deploy)


def coop_geometry(fleet1: Fleet, fleet2: Fleet, crowd: CrowdParams, samples: int = 200_000,
                  seed: int = 0) -> CoopGeometry:
    return CoopGeometry(
        epsilon=foreign_share(fleet1, fleet2, samples, seed),
        eta1_coop=coop_spectral_efficiency(fleet1, fleet2, crowd),
        eta2_coop=coop_spectral_efficiency(fleet2, fleet1, crowd),
        r_aap_coop=coop_radius(fleet1, fleet2),
    )


def proxy_throughput(B_j: float, eff_bw_factor: float, eta_i_coop: float, n_heads) -> float:
    """Rate of an LSP ``i`` customer on a partner AAP of bandwidth ``B_j`` shared by ``n_heads``."""
    return group_throughput(B_j, eff_bw_factor, eta_i_coop, n_heads)


def shapley_split(v1: float, v2: float, v12: float) -> tuple[float, float]:
    """Two-player Shapley values: own stand-alone value plus half the coalition surplus."""
    surplus = v12 - (v1 + v2)  # commutative sum keeps the split exactly symmetric
    return v1 + surplus / 2, v2 + surplus / 2


def shapley_summary(v1: float, v2: float, v12: float) -> dict:
    phi1, phi2 = shapley_split(v1, v2, v12)
    return {"v1": v1, "v2": v2, "v12": v12, "phi1": phi1, "phi2": phi2}


@dataclass
class CoopModel:
    eq: EquilibriumResult
    qp: QualityParams
    behavior: BehaviorFactors
    nu: float
    geometry: CoopGeometry
    fleets: tuple[Fleet, Fleet]  # LSP1, LSP2
    usp_rate_mbps: float
    usp_devices_full: float
    mu0: float

    def _heads(self, X1: float, X2: float) -> tuple[float, float]:
        eps = self.geometry.epsilon
        f1, f2 = self.fleets
        h1 = self.mu0 * math.pi * f1.r_aap ** 2 * ((1 - eps) * X1 + eps * X2)
        h2 = self.mu0 * math.pi * f2.r_aap ** 2 * ((1 - eps) * X2 + eps * X1)
        return h1, h2

    def throughputs(self, state: CoopState):
        """``(T0, T1, T2, Tz1, Tz2)``: USP, own-service and proxy-service rates in Mbit/s."""
        X1, X2 = state.connected(self.eq)
        h1, h2 = self._heads(X1, X2)
        f1, f2 = self.fleets
        g = self.geometry
        eff1, eff2 = f1.radio.eff_bw_factor, f2.radio.eff_bw_factor
        T0 = self.usp_rate_mbps / max(self.usp_devices_full * state.usp_mass, 1.0)
        T1 = f1.radio.B * eff1 * g.eta1_coop / 1e6 / max(h1, 1.0)
        T2 = f2.radio.B * eff2 * g.eta2_coop / 1e6 / max(h2, 1.0)
        Tz1 = proxy_throughput(f2.radio.B, eff2, g.eta1_coop, h2)
        Tz2 = proxy_throughput(f1.radio.B, eff1, g.eta2_coop, h1)
        return T0, T1, T2, Tz1, Tz2

    def rhs(self, v: np.ndarray) -> np.ndarray:
        return coop_derivative(CoopState.from_array(v), self)

    def project(self, v: np.ndarray) -> tuple[np.ndarray, float]:
        eq = self.eq
        out = np.maximum(v, 0.0)
        out[0] = min(out[0], eq.D0)
        for yi, zi, D in ((1, 3, eq.D1), (2, 4, eq.D2)):
            tot = out[yi] + out[zi]
            if tot > D:
                out[yi] *= D / tot
                out[zi] *= D / tot
        return out, float(np.max(np.abs(out - v)))

    def columns(self, t: np.ndarray, V: np.ndarray) -> dict[str, np.ndarray]:
        eq = self.eq
        y0, y1, y2, z1, z2, p0 = V.T
        x1, x2 = eq.D1 - y1 - z1, eq.D2 - y2 - z2
        T = np.array([self.throughputs(CoopState.from_array(v))[:3] for v in V]).reshape(-1, 3)
        pr = profits(p0, y0 + y1 + y2 + z1 + z2, x1, x2, eq, self.nu)
        return {"t": t, "y0": y0, "y1": y1, "y2": y2, "z1": z1, "z2": z2, "x1": x1, "x2": x2,
                "p0": p0, "T0": T[:, 0], "T1": T[:, 1], "T2": T[:, 2],
                "profit0": pr[0], "profit1": pr[1], "profit2": pr[2]}

    def initial_state(self, p0: float) -> CoopState:
        return CoopState(0.0, 0.0, 0.0, 0.0, 0.0, p0)


def coop_derivative(state: CoopState, model: CoopModel) -> np.ndarray:
    """Time derivative of ``(y0, y1, y2, z1, z2, p0)``.

    Own-service flows are weighted by ``1 - epsilon`` and proxy-service
    flows by ``epsilon``; coefficients for the latter use proxy throughput.
    """
    eq, b, eps = model.eq, model.behavior, model.geometry.epsilon
    T0, T1, T2, Tz1, Tz2 = model.throughputs(state)
    Y = state.usp_mass
    plain = MarketState(state.y0, state.y1, state.y2, state.p0)
    q = transition_coefficients(plain, eq, (T0, T1, T2), b, model.qp)
    S0 = float(quality(T0, model.qp))
    Sz1, Sz2 = float(quality(Tz1, model.qp)), float(quality(Tz2, model.qp))
    groups = eq.taste_intervals()
    I1, I2 = groups["lsp1"], groups["lsp2"]
    cu, p0 = b.c_u, state.p0
    X1, X2 = state.connected(eq)

    dy1 = lsp_flow(X1, state.y1, Y, q.q_g_1to0, q.q_g_0to1, q.q_d_1to0, q.q_d_0to1, b, 1 - eps)
    dy2 = lsp_flow(X2, state.y2, Y, q.q_g_2to0, q.q_g_0to2, q.q_d_2to0, q.q_d_0to2, b, 1 - eps)
    dz1 = lsp_flow(X1, state.z1, Y,
                   group_average(I1, S0 - Sz1, p0 - eq.p1, cu),
                   group_average(I1, Sz1 - S0, eq.p1 - p0, cu),
                   group_average(I1, eq.s1 - Sz1, 0.0, cu),
                   q.q_d_0to1, b, eps)
    dz2 = lsp_flow(X2, state.z2, Y,
                   group_average(I2, S0 - Sz2, p0 - eq.p2, cu),
                   group_average(I2, Sz2 - S0, eq.p2 - p0, cu),
                   group_average(I2, eq.s2 - Sz2, 0.0, cu),
                   q.q_d_0to2, b, eps)
    dy0 = inactive_flow(eq.D0, state.y0, Y, q, b)
    dp0 = b.c_price * p0 * (dy0 + dy1 + dy2 + dz1 + dz2)
    return np.array([dy0, dy1, dy2, dz1, dz2, dp0])


def check_coop_state(state: CoopState, eq: EquilibriumResult, tol: float = PROJECTION_TOL):
    v = state.as_array()
    if np.any(v[:5] < -tol):
        raise InvariantViolation("negative share in cooperative state")
    if state.y0 > eq.D0 + tol or state.y1 + state.z1 > eq.D1 + tol or state.y2 + state.z2 > eq.D2 + tol:
        raise InvariantViolation("cooperative shares exceed provisioned demand")
    if not state.p0 > 0:
        raise InvariantViolation("USP price must stay positive")


def integrate_coop(state0: CoopState, horizon: float, dt: float, model: CoopModel) -> Trajectory:
    check_coop_state(state0, model.eq)
    t, V = integrate_states(state0.as_array(), horizon, dt, model)
    return Trajectory(model.columns(t, V))


def build_coop_model(scenario, geometry: CoopGeometry | None = None) -> CoopModel:
    """Cooperative model for a built scenario; ``geometry`` defaults to the Monte Carlo estimate."""
    run = scenario.config.run
    f1, f2 = scenario.fleets["lsp1"], scenario.fleets["lsp2"]
    if geometry is None:
        geometry = coop_geometry(f1, f2, scenario.crowd, run.eps_samples, run.seed)
    usp = scenario.capacity[0]
    return CoopModel(eq=scenario.eq, qp=scenario.qp, behavior=scenario.behavior, nu=scenario.econ.nu,
                     geometry=geometry, fleets=(f1, f2), usp_rate_mbps=usp.rate_mbps,
                     usp_devices_full=usp.devices_full_share, mu0=scenario.crowd.mu0)


def standalone_geometry(scenario) -> CoopGeometry:
    """Geometry that switches assistance off (``epsilon = 0``, stand-alone efficiencies)."""
    crowd = scenario.crowd
    f1, f2 = scenario.fleets["lsp1"], scenario.fleets["lsp2"]
    eta1 = avg_spectral_efficiency(f1.r_aap, crowd, f1.radio, f1.deploy)
    eta2 = avg_spectral_efficiency(f2.r_aap, crowd, f2.radio, f2.deploy)
    return CoopGeometry(0.0, eta1, eta2, f1.r_aap)


@dataclass(frozen=True)
class CooperationOutcome:
    standalone: Trajectory
    cooperative: Trajectory
    v1: float
    v2: float
    v12: float
    coop_profit1: float
    coop_profit2: float

    @property
    def shapley(self) -> dict:
        return shapley_summary(self.v1, self.v2, self.v12)

    def to_json(self) -> str:
        return json.dumps(self.shapley, indent=2)


def evaluate_cooperation(scenario, horizon: float | None = None, dt: float | None = None,
                         geometry: CoopGeometry | None = None) -> CooperationOutcome:
    """Profits at the end of the horizon with and without assistance, and the coalition values."""
    from .dynamics import integrate

    run = scenario.config.run
    horizon = run.horizon if horizon is None else horizon
    dt = run.dt if dt is None else dt
    p0 = scenario.p0_initial()
    base = integrate(MarketState(0.0, 0.0, 0.0, p0), horizon, dt, scenario.model)
    model = build_coop_model(scenario, geometry)
    coop = integrate_coop(model.initial_state(p0), horizon, dt, model)
    v1, v2 = float(base["profit1"][-1]), float(base["profit2"][-1])
    c1, c2 = float(coop["profit1"][-1]), float(coop["profit2"][-1])
    return CooperationOutcome(base, coop, v1, v2, c1 + c2, c1, c2)
