"""Agent-based Monte Carlo counterpart of the mean-field market.

Every customer has a fixed position, taste and LSP subscription. Each step
it experiences the rate of its nearest AAP (random LOS/NLOS/blocked link,
equal airtime share among the AAP's users) and may revise its provider
through one of the behavioural channels. All agents update synchronously
from the previous snapshot.

Provider codes: ``-1`` disconnected, ``0`` USP, ``1``/``2`` the LSPs.
Subscription codes: ``0`` none, ``1``/``2`` the LSPs.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import CrowdParams, Fleet, los_power_raw, q_los_raw, q_nlos_raw, shannon
from .cooperation import COOP_CSV_COLUMNS
from .dynamics import CSV_COLUMNS, Trajectory, profits, switch_probability
from .equilibrium import Game
from .quality import quality

DISCONNECTED, USP = -1, 0


@dataclass
class ServingGeometry:
    """Nearest AAP (global index) and its horizontal distance, per agent."""

    aap: np.ndarray
    dist: np.ndarray
    fleet_of_aap: np.ndarray  # position in World.fleets of each global AAP index
    n_aap: int


@dataclass
class World:
    pos: np.ndarray
    theta: np.ndarray
    sub: np.ndarray
    cur: np.ndarray
    p0: float
    clock: float
    rng: np.random.Generator
    fleets: tuple[Fleet, ...]  # USP, LSP1, LSP2
    serving: dict  # provider code -> ServingGeometry
    prices: tuple[float, float]
    qualities: tuple[float, float]
    foreign: np.ndarray  # agent's union-nearest AAP belongs to the other LSP
    coop: bool
    crowd: CrowdParams

    @property
    def n(self) -> int:
        return len(self.theta)


def _nearest(pos: np.ndarray, aaps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((pos[:, None, :] - aaps[None, :, :]) ** 2).sum(axis=-1)
    idx = d2.argmin(axis=1)  # first index wins ties
    return idx, np.sqrt(d2[np.arange(len(pos)), idx])


def _serving(pos, fleets, members) -> ServingGeometry:
    aaps = np.vstack([fleets[k].positions for k in members])
    owner = np.concatenate([np.full(len(fleets[k]), k) for k in members])
    idx, dist = _nearest(pos, aaps)
    return ServingGeometry(idx, dist, owner, len(aaps))


def init_population(scenario, seed: int, coop: bool | None = None) -> World:
    """Place agents uniformly, draw tastes and assign subscriptions by the equilibrium thresholds."""
    cfg = scenario.config
    coop = cfg.run.coop if coop is None else coop
    eq = scenario.eq
    rng = np.random.default_rng(seed)
    n = cfg.run.n_agents
    R = cfg.area.R
    pos = rng.uniform(0.0, R, size=(n, 2))
    theta = rng.uniform(0.0, eq.theta_max, size=n)
    split = rng.random(n)
    t02, t12 = eq.points.theta_none_2, eq.points.theta_1_2
    sub = np.zeros(n, dtype=np.int8)
    if scenario.game is Game.BERTRAND:
        sub[theta > t12] = 1
        sub[(theta > t02) & (theta <= t12)] = 2
    else:
        buyers = theta > t02
        sub[buyers & (split < 0.5)] = 1
        sub[buyers & (split >= 0.5)] = 2
    cur = np.where(sub == 0, DISCONNECTED, sub).astype(np.int8)

    fleets = (scenario.fleets["usp"], scenario.fleets["lsp1"], scenario.fleets["lsp2"])
    serving = {USP: _serving(pos, fleets, (0,))}
    union = _serving(pos, fleets, (1, 2))
    own = {k: _serving(pos, fleets, (k,)) for k in (1, 2)}
    if coop:
        serving[1] = serving[2] = union
    else:
        serving.update(own)
    owner = union.fleet_of_aap[union.aap]
    foreign = (sub > 0) & (owner != sub)
    return World(pos=pos, theta=theta, sub=sub, cur=cur, p0=scenario.p0_initial(), clock=0.0, rng=rng,
                 fleets=fleets, serving=serving, prices=(eq.p1, eq.p2), qualities=(eq.s1, eq.s2),
                 foreign=foreign, coop=coop, crowd=scenario.crowd)


def sample_link_rates(world: World, u_link: np.ndarray) -> np.ndarray:
    """Per-agent throughput (Mbit/s) under random link states and equal airtime per AAP."""
    rate = np.zeros(world.n)
    groups = [(USP, (world.cur == USP))]
    if world.coop:
        groups.append((1, world.cur > 0))
    else:
        groups += [(1, world.cur == 1), (2, world.cur == 2)]
    crowd = world.crowd
    for code, mask in groups:
        if not mask.any():
            continue
        geo = world.serving[code]
        aap, d = geo.aap[mask], geo.dist[mask]
        load = np.bincount(aap, minlength=geo.n_aap)
        owner = geo.fleet_of_aap[aap]
        for k in np.unique(owner):
            sel = owner == k
            fleet = world.fleets[k]
            dk = d[sel]
            q_l = q_los_raw(dk, crowd, fleet.h)
            q_n = q_nlos_raw(dk, crowd, fleet.h, fleet.deploy.phi)
            u = u_link[mask][sel]
            gain = np.where(u < q_l, 1.0, np.where(u < q_l + q_n, fleet.radio.G_nlos, 0.0))
            snr = los_power_raw(dk, fleet.radio, fleet.deploy) * gain / fleet.radio.N0
            eff = shannon(snr, fleet.radio)
            r = fleet.radio.effective_bandwidth * eff / load[aap[sel]] / 1e6
            idx = np.flatnonzero(mask)[sel]
            rate[idx] = r
    return rate


def observe(world: World) -> np.ndarray:
    """Draw this step's link states and return every agent's rate."""
    return sample_link_rates(world, world.rng.random(world.n))


def revise(world: World, rate: np.ndarray, dt: float, behavior, qp):
    """Apply one synchronous round of provider revisions given the observed rates."""
    rng = world.rng
    n = world.n
    u_channel = rng.random(n)
    u_switch = rng.random(n)
    peer = rng.integers(0, n, size=n)

    s_exp = quality(rate, qp)
    cur, sub, theta = world.cur, world.sub, world.theta
    p_lsp = np.array([0.0, *world.prices])[sub]
    s_ann = np.array([0.0, *world.qualities])[sub]
    p0 = world.p0

    b = behavior
    p_rev = min(b.xi * dt, 1.0)
    c_g = p_rev * b.gamma
    c_c = c_g + p_rev * (1 - b.gamma) * b.alpha_c
    c_d = c_c + p_rev * (1 - b.gamma) * (1 - b.alpha_c) * b.delta
    gossip = u_channel < c_g
    curious = (u_channel >= c_g) & (u_channel < c_c)
    dissat = (u_channel >= c_c) & (u_channel < c_d)

    on_lsp = (sub > 0) & (cur == sub)
    lsp_on_usp = (sub > 0) & (cur == USP)
    idle = (sub == 0) & (cur == DISCONNECTED)
    none_on_usp = (sub == 0) & (cur == USP)

    peer_cur, peer_s = cur[peer], s_exp[peer]
    gain = np.zeros(n)
    # gossip: compare against a random peer of the alternative
    m = gossip & on_lsp & (peer_cur == USP)
    gain[m] = theta[m] * (peer_s[m] - s_exp[m]) - (p0 - p_lsp[m])
    m = gossip & lsp_on_usp & (peer_cur == sub)
    gain[m] = theta[m] * (peer_s[m] - s_exp[m]) - (p_lsp[m] - p0)
    m = gossip & idle & (peer_cur == USP)
    gain[m] = theta[m] * peer_s[m] - p0
    # dissatisfaction: announced LSP quality against what is delivered
    m = dissat & on_lsp
    gain[m] = theta[m] * (s_ann[m] - s_exp[m])
    m = dissat & lsp_on_usp
    gain[m] = theta[m] * (s_ann[m] - s_exp[m]) - (p_lsp[m] - p0)
    m = none_on_usp & (u_channel < p_rev)
    gain[m] = p0 - theta[m] * s_exp[m]

    switch = (u_switch < switch_probability(gain, b.c_u)) | (curious & (on_lsp | lsp_on_usp | idle))
    new = cur.copy()
    new[switch & on_lsp] = USP
    new[switch & lsp_on_usp] = sub[switch & lsp_on_usp]
    new[switch & idle] = USP
    new[switch & none_on_usp] = DISCONNECTED

    y_old = np.count_nonzero(cur == USP) / n
    y_new = np.count_nonzero(new == USP) / n
    world.cur = new
    world.p0 = p0 * math.exp(b.c_price * (y_new - y_old))
    world.clock += dt


def step(world: World, dt: float, behavior, qp) -> np.ndarray:
    """Advance one step in place; returns the rates experienced at the start of the step."""
    rate = observe(world)
    revise(world, rate, dt, behavior, qp)
    return rate


def _snapshot(world: World, rate: np.ndarray, eq, nu: float) -> dict:
    n = world.n
    cur, sub = world.cur, world.sub
    row = {"t": world.clock, "y0": np.count_nonzero((sub == 0) & (cur == USP)) / n}
    for i in (1, 2):
        on_usp = (sub == i) & (cur == USP)
        if world.coop:
            row[f"y{i}"] = np.count_nonzero(on_usp & ~world.foreign) / n
            row[f"z{i}"] = np.count_nonzero(on_usp & world.foreign) / n
        else:
            row[f"y{i}"] = np.count_nonzero(on_usp) / n
        row[f"x{i}"] = np.count_nonzero((sub == i) & (cur == i)) / n
    row["p0"] = world.p0
    for code, name in ((USP, "T0"), (1, "T1"), (2, "T2")):
        m = cur == code
        row[name] = float(rate[m].mean()) if m.any() else 0.0
    usp_mass = np.count_nonzero(cur == USP) / n
    pr = profits(world.p0, usp_mass, row["x1"], row["x2"], eq, nu)
    row["profit0"], row["profit1"], row["profit2"] = (float(v) for v in pr)
    return row


def simulate(scenario, seed: int, horizon: float | None = None, dt: float | None = None,
             coop: bool | None = None) -> Trajectory:
    """One seeded agent-based run sampled every ``dt`` minutes."""
    cfg = scenario.config
    horizon = cfg.run.horizon if horizon is None else horizon
    dt = cfg.run.abm_dt if dt is None else dt
    world = init_population(scenario, seed, coop)
    n_steps = int(round(horizon / dt))
    rows = []
    for _ in range(n_steps):
        rate = observe(world)
        rows.append(_snapshot(world, rate, scenario.eq, scenario.econ.nu))
        revise(world, rate, dt, scenario.behavior, scenario.qp)
    rows.append(_snapshot(world, observe(world), scenario.eq, scenario.econ.nu))
    cols = COOP_CSV_COLUMNS if world.coop else CSV_COLUMNS
    return Trajectory({c: np.array([r[c] for r in rows], dtype=float) for c in cols})


@dataclass
class AbmRun:
    seeds: list[int]
    runs: list[Trajectory]
    mean: Trajectory
    std: Trajectory

    def write(self, out_dir, prefix: str = "abm"):
        order = tuple(self.mean.columns)
        for seed, traj in zip(self.seeds, self.runs):
            traj.to_csv(os.path.join(out_dir, f"{prefix}_seed{seed}.csv"), order, {"seed": seed})
        self.mean.to_csv(os.path.join(out_dir, f"{prefix}_mean.csv"), order)
        self.std.to_csv(os.path.join(out_dir, f"{prefix}_std.csv"), order)


def worker_count(n_tasks: int) -> int:
    """Threads to use: ``SIM_THREADS`` caps the default of one per CPU."""
    cap = os.environ.get("SIM_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ValueError(f"SIM_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))


def run(scenario, horizon: float | None = None, seeds=None, coop: bool | None = None) -> AbmRun:
    """Independent seeded runs plus their pointwise mean and standard deviation.

    ``seeds`` is a count (seeds ``base, base+1, ...``) or an explicit list.
    """
    cfg = scenario.config
    if seeds is None:
        seeds = cfg.run.seeds
    if isinstance(seeds, int):
        if seeds < 1:
            raise ValueError("need at least one seed")
        seeds = [cfg.run.seed + k for k in range(seeds)]
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    with ThreadPoolExecutor(max_workers=worker_count(len(seeds))) as pool:
        runs = list(pool.map(lambda s: simulate(scenario, s, horizon, coop=coop), seeds))
    cols = tuple(runs[0].columns)
    stack = {c: np.stack([r[c] for r in runs]) for c in cols}
    mean = Trajectory({c: stack[c].mean(axis=0) for c in cols})
    std = Trajectory({c: (stack[c].std(axis=0) if c != "t" else stack[c][0]) for c in cols})
    return AbmRun(seeds, runs, mean, std)


def compare(abm_traj: Trajectory, ode_traj: Trajectory, columns=None) -> dict:
    """Max-absolute and RMS deviations of the USP-side shares on the agent-based time grid.

    The mean-field trajectory is linearly interpolated onto the agent-based
    sample times. Both must span the same horizon.
    """
    t_a, t_o = abm_traj.t, ode_traj.t
    if not (math.isclose(t_a[0], t_o[0], abs_tol=1e-9) and math.isclose(t_a[-1], t_o[-1], abs_tol=1e-9)):
        raise ValueError(f"horizons differ: [{t_a[0]}, {t_a[-1]}] vs [{t_o[0]}, {t_o[-1]}]")
    if columns is None:
        columns = [c for c in ("y0", "y1", "y2", "z1", "z2")
                   if c in abm_traj.columns and c in ode_traj.columns]
    report = {"max_abs": {}, "rms": {}}
    for c in columns:
        diff = abm_traj[c] - np.interp(t_a, t_o, ode_traj[c])
        report["max_abs"][c] = float(np.max(np.abs(diff)))
        report["rms"][c] = float(np.sqrt(np.mean(diff ** 2)))
    report["max_deviation"] = max(report["max_abs"].values(), default=0.0)
    return report


def report_json(report: dict, threshold: float | None = None) -> str:
    doc = dict(report)
    if threshold is not None:
        doc["threshold"] = threshold
        doc["pass"] = report["max_deviation"] <= threshold
    return json.dumps(doc, indent=2, sort_keys=True)
