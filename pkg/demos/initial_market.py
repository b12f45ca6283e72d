"""Initial market: price vs quantity competition between the two licensed providers.

Solves both games at the reference parameters, checks them against a brute
force grid search and compares who gains what.

    python demos/initial_market.py
"""

import numpy as np

from aerialmarket import ScenarioConfig
from aerialmarket.equilibrium import grid_oracle, solve_bertrand, solve_cournot, table_rows


def main():
    econ = ScenarioConfig().econ_params()
    print(f"top quality s_max = {econ.s_max:.4f}, taste range [0, {econ.theta_max}], unit cost {econ.nu}\n")

    b, c = solve_bertrand(econ), solve_cournot(econ)
    print(table_rows(b, c), "\n")

    # price competition pushes LSP2 down the quality ladder; quantity competition does not
    print(f"LSP2 quality / LSP1 quality: price game {b.s2 / b.s1:.4f}, quantity game {c.s2 / c.s1:.4f}")
    print(f"customers served: {b.total_demand:.3f} vs {c.total_demand:.3f}")
    print(f"industry profit:  {b.aggregate_profit:.2f} vs {c.aggregate_profit:.2f}")
    print(f"consumer surplus: {b.consumer_surplus:.2f} vs {c.consumer_surplus:.2f}\n")

    s_grid = econ.s_max * np.arange(1, 501) / 500
    g = grid_oracle("bertrand", s_grid, econ.s_max * econ.theta_max * np.arange(501) / 500, econ)
    print(f"grid search (500 steps) finds prices ({g.x1:.2f}, {g.x2:.2f}) "
          f"vs analytic ({b.p1:.2f}, {b.p2:.2f})")


if __name__ == "__main__":
    main()
