"""An unlicensed provider (USP) enters the market.

Integrates the mean-field share dynamics for both initial games, reports
when the licensed providers' losses level off, and replays a few seeds of
the agent-based model for comparison.

    python demos/usp_entry.py [--seeds 3]
"""

import argparse

from aerialmarket import abm, build_scenario, ScenarioConfig
from aerialmarket.dynamics import integrate, integrate_states, settling_time


def describe(sc, seeds):
    traj = integrate(sc.initial_state(), 120.0, 0.05, sc.model)
    print(f"\n== {sc.game.value} ==")
    print("   t    x1     x2     USP    p0     profit1  profit2")
    for minute in (0, 5, 15, 30, 60, 120):
        k = int(round(minute / 0.05))
        usp = traj["y0"][k] + traj["y1"][k] + traj["y2"][k]
        print(f"{minute:4d}  {traj['x1'][k]:.3f}  {traj['x2'][k]:.3f}  {usp:.3f}  {traj['p0'][k]:5.2f}"
              f"  {traj['profit1'][k]:7.2f}  {traj['profit2'][k]:7.2f}")
    t, V = integrate_states(sc.initial_state().as_array(), 120.0, 0.05, sc.model)
    print(f"shares settle (rates below 1e-4 per min) after {settling_time(t, V, sc.model, (0, 1, 2)):.1f} min")

    run = abm.run(sc, horizon=120.0, seeds=seeds)
    rep = abm.compare(run.mean, traj)
    print(f"agent-based mean of {seeds} seeds deviates by at most {rep['max_deviation']:.3f} in any share")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    cfg = ScenarioConfig()
    for game in ("bertrand", "cournot"):
        describe(build_scenario(cfg, game), args.seeds)


if __name__ == "__main__":
    main()
