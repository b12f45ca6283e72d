"""Should the licensed providers let each other's customers use their drones?

For weak and strong word-of-mouth (gossip) this compares stand-alone and
cooperative profits after two hours and splits the joint profit with the
Shapley value.

    python demos/lsp_cooperation.py
"""

from aerialmarket import ScenarioConfig, build_scenario
from aerialmarket.cooperation import coop_geometry, evaluate_cooperation


def main():
    base = ScenarioConfig()
    sc = build_scenario(base, "bertrand")
    g = coop_geometry(sc.fleets["lsp1"], sc.fleets["lsp2"], sc.crowd, base.run.eps_samples)
    print(f"share of area nearer to the partner's drones: {g.epsilon:.3f}")
    print(f"cell radius with pooled sites: {g.r_aap_coop:.1f} m (alone {sc.fleets['lsp1'].r_aap:.1f} m)\n")

    for game in ("bertrand", "cournot"):
        for gamma in (0.001, 0.5):
            sc = build_scenario(base.replace(behavior__gamma=gamma), game)
            out = evaluate_cooperation(sc)
            sh = out.shapley
            print(f"{game:8s} gossip {gamma:<5}  alone ({out.v1:6.2f}, {out.v2:6.2f})"
                  f"  together ({out.coop_profit1:6.2f}, {out.coop_profit2:6.2f})"
                  f"  Shapley ({sh['phi1']:6.2f}, {sh['phi2']:6.2f})")
    print("\nThe Shapley split hands each partner half of the surplus v12 - v1 - v2; "
          "a negative surplus means the pair earns less together than apart.")


if __name__ == "__main__":
    main()
