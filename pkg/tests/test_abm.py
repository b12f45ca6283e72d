import math

import numpy as np
import pytest

from aerialmarket import abm
from aerialmarket.channel import q_los_raw, q_nlos_raw
from aerialmarket.cooperation import foreign_share
from aerialmarket.dynamics import BehaviorFactors, Trajectory
from aerialmarket.scenario import build_scenario


@pytest.fixture(scope="module")
def small(default_config):
    cfg = default_config.replace(run__n_agents=1000)
    return build_scenario(cfg, "bertrand")


@pytest.mark.parametrize("game", ["bertrand", "cournot"])
def test_initial_subscriptions_follow_demand(request, game):
    sc = request.getfixturevalue(game)
    w = abm.init_population(sc, seed=5)
    n = w.n
    tol = 2 / math.sqrt(n)
    assert abs(np.mean(w.sub == 1) - sc.eq.D1) <= tol
    assert abs(np.mean(w.sub == 2) - sc.eq.D2) <= tol
    assert np.array_equal(w.cur[w.sub > 0], w.sub[w.sub > 0])
    assert np.all(w.cur[w.sub == 0] == abm.DISCONNECTED)


def test_bertrand_initial_fractions(bertrand):
    w = abm.init_population(bertrand, seed=0)
    assert np.mean(w.sub == 1) == pytest.approx(0.58, abs=0.02)
    assert np.mean(w.sub == 2) == pytest.approx(0.29, abs=0.02)


def test_population_and_run_are_seed_deterministic(small):
    a, b = abm.init_population(small, 9), abm.init_population(small, 9)
    for f in ("pos", "theta", "sub", "cur"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    ta, tb = abm.simulate(small, 9, horizon=15), abm.simulate(small, 9, horizon=15)
    for c in ta.columns:
        assert np.array_equal(ta[c], tb[c])
    tc = abm.simulate(small, 10, horizon=15)
    assert not np.array_equal(ta["y1"], tc["y1"])


def test_closed_channels_freeze_agents(small):
    cfg = small.config.replace(behavior__gamma=0.0, behavior__alpha_c=0.0, behavior__delta=0.0)
    sc = build_scenario(cfg, "bertrand")
    traj = abm.simulate(sc, 1, horizon=20)
    for c in ("y0", "y1", "y2"):
        assert np.all(traj[c] == 0)
    assert np.all(traj["p0"] == traj["p0"][0])


def test_gossip_rate_for_dominant_usp(small):
    w = abm.init_population(small, 2)
    n = w.n
    w.sub[:] = 0
    w.cur[:] = abm.DISCONNECTED
    w.cur[: n // 2] = abm.USP
    w.p0 = 1e-9
    b = BehaviorFactors(xi=0.5, gamma=1.0, alpha_c=0.0, delta=0.0, c_u=1e9, c_price=0.0)
    idle = w.cur == abm.DISCONNECTED
    abm.revise(w, np.full(n, 1e6), 1.0, b, small.qp)
    frac = np.count_nonzero(idle & (w.cur == abm.USP)) / np.count_nonzero(idle)
    expected = 0.5 * 0.5  # revision rate times chance of meeting a USP peer
    se = math.sqrt(expected * (1 - expected) / np.count_nonzero(idle))
    assert abs(frac - expected) <= 4 * se


def test_agents_only_hold_allowed_providers(small):
    w = abm.init_population(small, 4)
    counts = [np.count_nonzero(w.sub == i) for i in (1, 2)]
    for _ in range(30):
        abm.step(w, 1.0, small.behavior, small.qp)
        lsp = w.sub > 0
        assert np.all((w.cur[lsp] == w.sub[lsp]) | (w.cur[lsp] == abm.USP))
        assert np.all(np.isin(w.cur[~lsp], (abm.USP, abm.DISCONNECTED)))
        assert [np.count_nonzero(w.sub == i) for i in (1, 2)] == counts


@pytest.mark.parametrize("coop", [False, True])
def test_snapshot_shares_partition_subscribers(small, coop):
    traj = abm.simulate(small, 3, horizon=20, coop=coop)
    w = abm.init_population(small, 3, coop)
    for i in (1, 2):
        total = traj[f"x{i}"] + traj[f"y{i}"] + (traj[f"z{i}"] if coop else 0)
        assert np.allclose(total, np.mean(w.sub == i), atol=1e-12)


def test_link_state_frequencies(small):
    w = abm.init_population(small, 0)
    usp = w.fleets[abm.USP]
    n = w.n
    w.pos = np.tile(usp.positions[0] + np.array([6.0, 0.0]), (n, 1))
    w.serving[abm.USP] = abm._serving(w.pos, w.fleets, (abm.USP,))
    w.cur[:] = abm.USP
    u = np.random.default_rng(1).random(n)
    rate = abm.sample_link_rates(w, u)
    d = w.serving[abm.USP].dist[0]
    ql = q_los_raw(d, w.crowd, usp.h)
    qn = q_nlos_raw(d, w.crowd, usp.h, usp.deploy.phi)
    top = rate.max()
    nlos = (rate > 0) & (rate < top)
    for freq, p in ((np.mean(rate == top), ql), (np.mean(nlos), qn), (np.mean(rate == 0), 1 - ql - qn)):
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / n) + 1e-12
    assert 0 < ql < 1 and qn > 0


def test_coop_foreign_region_matches_epsilon(bertrand):
    w = abm.init_population(bertrand, 6, coop=True)
    subs = w.sub > 0
    frac = np.mean(w.foreign[subs])
    eps = foreign_share(bertrand.fleets["lsp1"], bertrand.fleets["lsp2"], 200_000)
    assert abs(frac - eps) <= 4 * math.sqrt(eps * (1 - eps) / subs.sum())
    assert w.serving[1] is w.serving[2]


def test_compare_cases():
    t = np.arange(0, 11, 1.0)
    a = Trajectory({"t": t, "y1": np.sin(t), "y2": np.cos(t)})
    assert abm.compare(a, a)["max_deviation"] == 0
    b = Trajectory({"t": t, "y1": np.sin(t) + 0.03, "y2": np.cos(t)})
    r = abm.compare(b, a)
    assert r["max_abs"]["y1"] == pytest.approx(0.03) and r["rms"]["y1"] == pytest.approx(0.03)
    fine = np.linspace(0, 10, 101)
    lin = Trajectory({"t": fine, "y1": 0.1 * fine, "y2": 0 * fine})
    coarse = Trajectory({"t": t, "y1": 0.1 * t, "y2": 0 * t})
    assert abm.compare(coarse, lin)["max_deviation"] == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        abm.compare(a, Trajectory({"t": t[:5], "y1": t[:5], "y2": t[:5]}))


def test_single_seed_run_has_zero_spread(small):
    r = abm.run(small, horizon=10, seeds=[7])
    for c in r.mean.columns:
        assert np.array_equal(r.mean[c], r.runs[0][c])
        if c != "t":
            assert np.all(r.std[c] == 0)


def test_run_writes_seed_column(tmp_path, small):
    r = abm.run(small, horizon=5, seeds=2)
    r.write(tmp_path, "abm_x")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["abm_x_mean.csv", "abm_x_seed0.csv", "abm_x_seed1.csv", "abm_x_std.csv"]
    header = (tmp_path / "abm_x_seed1.csv").read_text().splitlines()[0].split(",")
    assert header[-1] == "seed"
    with pytest.raises(ValueError):
        abm.run(small, seeds=0)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SIM_THREADS", "2")
    assert abm.worker_count(10) == 2 and abm.worker_count(1) == 1
    monkeypatch.setenv("SIM_THREADS", "many")
    with pytest.raises(ValueError):
        abm.worker_count(3)


@pytest.mark.slow
def test_standard_error_scales_with_seed_count(small):
    r = abm.run(small, horizon=10, seeds=64)
    final = np.array([t["y1"][-1] for t in r.runs])
    counts = np.array([8, 16, 32, 64])
    se = np.array([final[:m].std(ddof=1) / math.sqrt(m) for m in counts])
    slope = np.polyfit(np.log(counts), np.log(se), 1)[0]
    assert abs(slope + 0.5) <= 0.15
