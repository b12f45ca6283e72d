"""AAP deployment geometry, body blockage, received power and spectral efficiency.

All distances are in metres, angles in radians, powers in watts and
bandwidths in hertz. ``d`` is always the horizontal distance between a
device and the ground projection of its serving AAP.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

SPEED_OF_LIGHT = 3e8


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


class LinkState(enum.IntEnum):
    BLOCKED = 0
    NLOS = 1
    LOS = 2


@dataclass(frozen=True)
class DeploymentParams:
    R: float = 200.0
    h: float = 15.0
    phi: float = math.radians(10.0)
    beta_max: float = math.radians(60.0)
    alpha_view: float = math.radians(270.0)  # metadata only

    def __post_init__(self):
        if not (self.R > 0 and self.h > 0):
            raise ValueError("R and h must be positive")
        if not 0 < self.phi < math.pi / 2:
            raise ValueError(f"beam half-angle must lie in (0, pi/2), got {self.phi}")
        if not 0 < self.beta_max < math.pi / 2:
            raise ValueError(f"beta_max must lie in (0, pi/2), got {self.beta_max}")

    @property
    def reach(self) -> float:
        """Largest horizontal distance a beam can serve, ``h tan(beta_max)``."""
        return self.h * math.tan(self.beta_max)


@dataclass(frozen=True)
class CrowdParams:
    mu: float = 2.0
    mu0: float = 0.2
    h_b: float = 1.7
    r_b: float = 0.2
    h_d: float = 1.2

    def __post_init__(self):
        if not 0 < self.mu0 < self.mu:
            raise ValueError(f"need 0 < mu0 < mu, got mu0={self.mu0}, mu={self.mu}")
        if not 0 <= self.h_d < self.h_b:
            raise ValueError(f"need h_d < h_b, got h_d={self.h_d}, h_b={self.h_b}")
        if self.r_b <= 0:
            raise ValueError("body radius must be positive")


@dataclass(frozen=True)
class RadioParams:
    p_tx: float = 0.2
    f: float = 28e9
    B: float = 2e9
    eff_bw_factor: float = 0.5
    N0: float = float(dbm_to_watt(-80.0))
    G_nlos: float = float(db_to_linear(-30.0))
    snr_max: float = float(db_to_linear(20.0))

    def __post_init__(self):
        for name in ("p_tx", "f", "B", "N0", "G_nlos", "snr_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.G_nlos > 1:
            raise ValueError("reflection attenuation G_nlos must not exceed 1 (linear)")
        if not 0 < self.eff_bw_factor <= 1:
            raise ValueError("eff_bw_factor must lie in (0, 1]")

    @property
    def path_gain(self) -> float:
        return (SPEED_OF_LIGHT / (4 * math.pi * self.f)) ** 2

    @property
    def effective_bandwidth(self) -> float:
        return self.B * self.eff_bw_factor


@dataclass
class Fleet:
    """One provider's AAPs: 2-D ground positions plus shared radio settings."""

    positions: np.ndarray
    deploy: DeploymentParams
    radio: RadioParams
    r_aap: float
    name: str = ""

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if self.r_aap > self.deploy.reach * (1 + 1e-12):
            raise ValueError(f"r_aap={self.r_aap:.3f} exceeds beam reach {self.deploy.reach:.3f}")

    @property
    def h(self) -> float:
        return self.deploy.h

    def __len__(self):
        return len(self.positions)

    def to_json(self) -> str:
        return json.dumps(self.positions.tolist())


def min_aap_count(R: float, h: float, beta_max: float) -> int:
    """Lower bound on the number of AAPs for a hexagonal cover, literal printed form."""
    w = 2 * h * math.tan(beta_max)
    first = math.ceil(R / w + 1 - math.sqrt(2))
    # the printed denominator groups as (2 h tan(beta) + 1 - sqrt(8/3))
    second = math.ceil(R * math.sqrt(4 / 3) / (w + 1 - math.sqrt(8 / 3)))
    return max(first, 1) * max(second, 1) + math.floor(max(second, 1))


def coverage_radius_formula(R: float, h: float, beta_max: float) -> float:
    """Printed cell-radius estimate; kept for reference only (may exceed the beam reach)."""
    k = math.ceil(R / (2 * h * math.tan(beta_max)) + 1 - math.sqrt(2))
    return R / (math.sqrt(2) + k - 1)


def _hex_layouts(n: int):
    """Row layouts (n_rows, long_row, short_row) of a hexagonal lattice with n points."""
    for m in range(1, n + 1):
        n_long, n_short = (m + 1) // 2, m // 2
        for k in range(1, n + 1):
            for k2 in (k, k - 1):
                if k2 < 1 and n_short:
                    continue
                if n_long * k + n_short * k2 == n:
                    yield m, k, k2


def hex_grid(R: float, n_target: int, reach: float | None = None) -> tuple[np.ndarray, float]:
    """Regular hexagonal lattice of ``n_target`` points centred in an ``R x R`` square.

    The lattice spacing is the area-equivalent one (each AAP owns ``R^2/n``
    of ground) shrunk if needed to keep every point inside the square. Among
    the row layouts that total ``n_target`` points, the one whose cells best
    match the square's aspect is used.

    Returns:
        (positions, r_aap) with ``r_aap`` half the nearest-neighbour spacing,
        capped at ``reach`` when given.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    centre = np.array([R / 2, R / 2])
    if n_target == 1:
        r = R / math.sqrt(2)
        return centre[None, :], min(r, reach) if reach is not None else r

    a0 = math.sqrt(2 * R * R / (math.sqrt(3) * n_target))
    best = None
    for m, k, k2 in _hex_layouts(n_target):
        equal_rows = k2 == k and m > 1
        width_units = (k - 1) + (0.5 if equal_rows else 0.0)
        height_units = (m - 1) * math.sqrt(3) / 2
        a = a0
        if width_units > 0:
            a = min(a, R / width_units)
        if height_units > 0:
            a = min(a, R / height_units)
        k_mean = n_target / m
        score = abs(math.log(k_mean * a / R)) + abs(math.log(m * a * math.sqrt(3) / 2 / R))
        if best is None or score < best[0] - 1e-12:
            best = (score, m, k, k2, a)
    _, m, k, k2, a = best

    rows = []
    dy = a * math.sqrt(3) / 2
    for j in range(m):
        count = k if j % 2 == 0 else k2
        y = centre[1] + (j - (m - 1) / 2) * dy
        xs = centre[0] + (np.arange(count) - (count - 1) / 2) * a
        if k2 == k and m > 1:
            xs = xs + (a / 4 if j % 2 else -a / 4)
        rows.append(np.column_stack([xs, np.full(count, y)]))
    pos = np.vstack(rows)
    r = nearest_neighbour_spacing(pos) / 2
    if reach is not None:
        r = min(r, reach)
    return pos, r


def nearest_neighbour_spacing(positions: np.ndarray) -> float:
    pos = np.unique(np.asarray(positions, dtype=float).reshape(-1, 2), axis=0)
    if len(pos) < 2:
        return math.inf
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())


def make_fleet(deploy: DeploymentParams, radio: RadioParams, n_aap: int,
               offset=(0.0, 0.0), name: str = "") -> Fleet:
    pos, r = hex_grid(deploy.R, n_aap, reach=deploy.reach)
    return Fleet(pos + np.asarray(offset, dtype=float), deploy, radio, r, name)


def lattice_half_vector(fleet: Fleet) -> np.ndarray:
    """Half of the shortest lattice vector of a hexagonal fleet (used to interleave two fleets)."""
    spacing = nearest_neighbour_spacing(fleet.positions)
    if not math.isfinite(spacing):
        return np.zeros(2)
    return 0.5 * spacing * np.array([0.5, math.sqrt(3) / 2])


# --- link probabilities -------------------------------------------------------

def _check_distance(d, h: float, reach: float | None):
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ValueError("distance must be non-negative")
    if reach is not None and np.any(d_arr > reach * (1 + 1e-12)):
        raise ValueError(f"distance beyond beam reach {reach:.3f} m")
    return d_arr


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def blocker_shadow_length(d, crowd: CrowdParams, h: float):
    return np.asarray(d, dtype=float) * (crowd.h_b - crowd.h_d) / (h - crowd.h_d)


def q_los_raw(d, crowd: CrowdParams, h: float):
    return np.exp(-crowd.mu * 2 * crowd.r_b * blocker_shadow_length(d, crowd, h))


def q_los(d, crowd: CrowdParams, h: float, reach: float | None = None):
    """Probability that no body centre falls in the shadow strip of the link."""
    if h <= crowd.h_b:
        raise ValueError(f"AAP altitude {h} must exceed body height {crowd.h_b}")
    return _out(q_los_raw(_check_distance(d, h, reach), crowd, h))


def beam_area_ratio_raw(d, h: float, phi: float):
    d = np.asarray(d, dtype=float)
    sin2 = d * d / (d * d + h * h)
    gap = math.cos(phi) ** 2 - sin2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(gap > 0, math.cos(phi) / np.sqrt(np.where(gap > 0, gap, 1.0)), np.inf)


def beam_area_ratio(d, h: float, phi: float):
    """Ground footprint of an inclined beam relative to the nadir footprint.

    Raises:
        ValueError: when the beam no longer cuts the ground in an ellipse.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    if np.any(math.cos(phi) ** 2 <= d * d / (d * d + h * h)):
        raise ValueError("unbounded beam footprint: cos^2(phi) <= d^2/(d^2+h^2)")
    return _out(beam_area_ratio_raw(d, h, phi))


def q_nlos_raw(d, crowd: CrowdParams, h: float, phi: float):
    footprint = math.pi * (h * math.tan(phi)) ** 2 * beam_area_ratio_raw(d, h, phi)
    return (1.0 - np.exp(-crowd.mu * footprint)) * (1.0 - q_los_raw(d, crowd, h))


def q_nlos(d, crowd: CrowdParams, deploy: DeploymentParams, check_reach: bool = True):
    """Probability of no LOS but a body-reflected path inside the beam footprint."""
    if deploy.h <= crowd.h_b:
        raise ValueError(f"AAP altitude {deploy.h} must exceed body height {crowd.h_b}")
    d = _check_distance(d, deploy.h, deploy.reach if check_reach else None)
    beam_area_ratio(d, deploy.h, deploy.phi)  # precondition
    return _out(q_nlos_raw(d, crowd, deploy.h, deploy.phi))


def antenna_gain(phi: float) -> float:
    return 2.0 / (1.0 - math.cos(phi))


def los_power_raw(d, radio: RadioParams, deploy: DeploymentParams):
    d = np.asarray(d, dtype=float)
    return radio.p_tx * antenna_gain(deploy.phi) * radio.path_gain / (deploy.h ** 2 + d * d)


def received_power(d, link_state: LinkState, radio: RadioParams, deploy: DeploymentParams):
    """Free-space received power; zero when blocked or beyond the beam reach."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ValueError("distance must be non-negative")
    p = los_power_raw(d_arr, radio, deploy)
    state = LinkState(link_state)
    if state is LinkState.NLOS:
        p = p * radio.G_nlos
    elif state is LinkState.BLOCKED:
        p = np.zeros_like(p)
    p = np.where(d_arr <= deploy.reach * (1 + 1e-12), p, 0.0)
    return _out(p)


def in_reach(d, deploy: DeploymentParams):
    return np.asarray(d) <= deploy.reach * (1 + 1e-12)


def mean_snr_raw(d, crowd: CrowdParams, radio: RadioParams, deploy: DeploymentParams):
    """SNR with the LOS/NLOS mixture folded into the received power."""
    mix = q_los_raw(d, crowd, deploy.h) + q_nlos_raw(d, crowd, deploy.h, deploy.phi) * radio.G_nlos
    return los_power_raw(d, radio, deploy) * mix / radio.N0


def shannon(snr, radio: RadioParams):
    """Capped spectral efficiency in bit/s/Hz."""
    return np.log2(1.0 + np.minimum(snr, radio.snr_max))


def avg_spectral_efficiency(r_aap: float, crowd: CrowdParams, radio: RadioParams,
                            deploy: DeploymentParams, method: str = "quadrature") -> float:
    """Spectral efficiency averaged over a disc of radius ``r_aap`` under the AAP.

    ``quadrature`` integrates against the uniform-in-disc density ``2x/r^2``;
    ``closed_form`` evaluates the integrand at the mean distance ``2r/3``.
    """
    if r_aap < 0:
        raise ValueError("r_aap must be non-negative")
    if r_aap > deploy.reach * (1 + 1e-12):
        raise ValueError(f"r_aap={r_aap:.3f} exceeds beam reach {deploy.reach:.3f}")
    if deploy.h <= crowd.h_b:
        raise ValueError("AAP altitude must exceed body height")

    def eta(x):
        return float(shannon(mean_snr_raw(x, crowd, radio, deploy), radio))

    if method == "closed_form":
        return eta(2.0 * r_aap / 3.0)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if r_aap == 0:
        return eta(0.0)

    # the SNR cap introduces a kink; split the integral there
    breaks = []
    excess = lambda x: mean_snr_raw(x, crowd, radio, deploy) - radio.snr_max
    if excess(0.0) > 0 > excess(r_aap):
        breaks.append(optimize.brentq(excess, 0.0, r_aap, xtol=1e-12))
    edges = [0.0, *breaks, r_aap]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda x: eta(x) * 2 * x, lo, hi, epsabs=1e-9 * r_aap ** 2,
                                epsrel=1e-12, limit=200)
        total += val
    return total / r_aap ** 2


def devices_per_aap(mu0: float, r_aap: float, share: float) -> float:
    """Expected served devices on one AAP for a group holding ``share`` of the market."""
    return mu0 * math.pi * r_aap ** 2 * share


def group_throughput(B: float, eff_bw_factor: float, eta_bar: float, n_devices) -> float:
    """Per-device throughput in Mbit/s under equal airtime sharing."""
    n = np.maximum(np.asarray(n_devices, dtype=float), 1.0)
    if np.any(np.asarray(n_devices) < 0):
        raise ValueError("device count must be non-negative")
    return _out(B * eff_bw_factor * eta_bar / n / 1e6)


@dataclass(frozen=True)
class CellCapacity:
    """Per-AAP rate budget and device scale of one fleet, as seen by the mean-field model."""

    rate_mbps: float  # B * eff * eta_bar, Mbit/s per AAP
    devices_full_share: float  # mu0 * pi * r_aap^2

    def throughput(self, share: float) -> float:
        return self.rate_mbps / max(self.devices_full_share * share, 1.0)


def cell_capacity(fleet: Fleet, crowd: CrowdParams, r_aap: float | None = None,
                  method: str = "quadrature") -> CellCapacity:
    r = fleet.r_aap if r_aap is None else r_aap
    eta = avg_spectral_efficiency(r, crowd, fleet.radio, fleet.deploy, method)
    return CellCapacity(fleet.radio.effective_bandwidth * eta / 1e6, crowd.mu0 * math.pi * fleet.r_aap ** 2)
