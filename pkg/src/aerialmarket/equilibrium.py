"""Initial-stage duopoly: quality choice followed by price (Bertrand) or quantity (Cournot) competition.

Both providers pay ``nu`` per unit of quality per served customer, so
profit is ``D_i * (p_i - nu * s_i)``. Taste is uniform on ``[0, theta_max]``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .quality import IndifferencePoints, indifference_points

LOW_QUALITY_RATIO = 4.0 / 7.0  # argmax of s2 (s1 - s2) / (4 s1 - s2)^2


class Game(str, enum.Enum):
    BERTRAND = "bertrand"
    COURNOT = "cournot"


class DegenerateDifferentiation(ValueError):
    """Raised when a price game is asked for with equal qualities."""


@dataclass(frozen=True)
class EconParams:
    s_max: float
    theta_max: float
    nu: float

    def __post_init__(self):
        if not self.s_max > 0:
            raise ValueError(f"s_max must be positive, got {self.s_max}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")
        if not self.theta_max > self.nu:
            raise ValueError(f"need theta_max > nu, got theta_max={self.theta_max}, nu={self.nu}")


@dataclass(frozen=True)
class EquilibriumResult:
    game: Game
    s1: float
    s2: float
    p1: float
    p2: float
    D1: float
    D2: float
    profit1: float
    profit2: float
    costs1: float
    costs2: float
    points: IndifferencePoints
    consumer_surplus: float
    theta_max: float = field(default=1.0, repr=False)

    @property
    def D0(self) -> float:
        return 1.0 - self.D1 - self.D2

    @property
    def total_demand(self) -> float:
        return self.D1 + self.D2

    @property
    def aggregate_profit(self) -> float:
        return self.profit1 + self.profit2

    def taste_intervals(self) -> dict[str, tuple[float, float]]:
        """Taste ranges of LSP1, LSP2 and non-subscribers.

        Homogeneous products split the upper interval evenly, so both LSPs
        are given the whole purchasing range.
        """
        t02, t12 = self.points.theta_none_2, self.points.theta_1_2
        if self.game is Game.COURNOT and self.s1 == self.s2:
            return {"lsp1": (t02, self.theta_max), "lsp2": (t02, self.theta_max), "none": (0.0, t02)}
        return {"lsp1": (t12, self.theta_max), "lsp2": (t02, t12), "none": (0.0, t02)}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["game"] = self.game.value
        d["total_demand"] = self.total_demand
        d["aggregate_profit"] = self.aggregate_profit
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _profit(D, p, s, nu):
    return D * (p - nu * s)


def bertrand_stage2_prices(s1: float, s2: float, econ: EconParams) -> tuple[float, float]:
    """Simultaneous price best responses for fixed qualities ``s1 > s2 > 0``.

    Each profit is concave in own price, so the stationary point of the
    two first-order conditions is the unique interior equilibrium.
    """
    if not s2 > 0:
        raise ValueError(f"s2 must be positive, got {s2}")
    if not s1 > s2:
        raise DegenerateDifferentiation(f"need s1 > s2 for price competition, got s1={s1}, s2={s2}")
    theta, nu = econ.theta_max, econ.nu
    ds = s1 - s2
    # d(profit1)/dp1 = 0 and d(profit2)/dp2 = 0, both linear in (p1, p2)
    A = np.array([[-2.0, 1.0], [s2, -2.0 * s1]])
    rhs = np.array([-(theta * ds + nu * s1), -nu * s1 * s2])
    p1, p2 = np.linalg.solve(A, rhs)
    return float(p1), float(p2)


def _bertrand_outcome(s1, s2, p1, p2, econ):
    theta = econ.theta_max
    t12 = (p1 - p2) / (s1 - s2)
    t02 = p2 / s2
    D1 = np.clip((theta - t12) / theta, 0.0, 1.0)
    D2 = np.clip((t12 - t02) / theta, 0.0, 1.0 - D1)
    return D1, D2, t02, t12


def _bertrand_profits_vec(s1, s2, econ):
    """Stage-2 equilibrium profits for arrays of quality pairs with ``s1 > s2``."""
    theta, nu = econ.theta_max, econ.nu
    den = 4 * s1 - s2
    p1 = s1 * (2 * theta * (s1 - s2) + nu * (2 * s1 + s2)) / den
    p2 = s2 * (theta * (s1 - s2) + 3 * nu * s1) / den
    D1, D2, _, _ = _bertrand_outcome(s1, s2, p1, p2, econ)
    return _profit(D1, p1, s1, nu), _profit(D2, p2, s2, nu)


def solve_bertrand(econ: EconParams) -> EquilibriumResult:
    """Subgame-perfect Bertrand equilibrium with optimal quality differentiation."""
    s1 = econ.s_max  # high-quality profit rises with s1, so the border is optimal
    s2 = LOW_QUALITY_RATIO * s1
    p1, p2 = bertrand_stage2_prices(s1, s2, econ)
    D1, D2, t02, t12 = _bertrand_outcome(s1, s2, p1, p2, econ)
    D1, D2 = float(D1), float(D2)
    pts = IndifferencePoints(theta_none_2=float(t02), theta_1_2=float(t12))
    return EquilibriumResult(
        game=Game.BERTRAND, s1=s1, s2=s2, p1=p1, p2=p2, D1=D1, D2=D2,
        profit1=_profit(D1, p1, s1, econ.nu), profit2=_profit(D2, p2, s2, econ.nu),
        costs1=econ.nu * s1 * D1, costs2=econ.nu * s2 * D2, points=pts,
        consumer_surplus=consumer_surplus(Game.BERTRAND, s1, s2, econ),
        theta_max=econ.theta_max,
    )


def cournot_inverse_prices(D1, D2, s1, s2, theta_max):
    """Prices that clear the quantities ``(D1, D2)`` under uniform taste."""
    p1 = theta_max * (s1 - D1 * s1 - D2 * s2)
    p2 = theta_max * s2 * (1 - D1 - D2)
    return p1, p2


def cournot_stage2(s1: float, s2: float, econ: EconParams):
    """Quantity equilibrium for fixed qualities ``s1 >= s2 > 0``.

    Returns:
        (D1, D2, p1, p2, profit1, profit2)
    """
    if not s2 > 0:
        raise ValueError(f"s2 must be positive, got {s2}")
    if s1 < s2:
        raise ValueError(f"need s1 >= s2, got s1={s1}, s2={s2}")
    theta, nu = econ.theta_max, econ.nu
    k = (theta - nu) / theta
    D1 = k * (2 * s1 - s2) / (4 * s1 - s2)
    D2 = k * s1 / (4 * s1 - s2)
    p1, p2 = cournot_inverse_prices(D1, D2, s1, s2, theta)
    return D1, D2, p1, p2, _profit(D1, p1, s1, nu), _profit(D2, p2, s2, nu)


def _cournot_profits_vec(s1, s2, econ):
    theta, nu = econ.theta_max, econ.nu
    k = (theta - nu) / theta
    D1 = k * (2 * s1 - s2) / (4 * s1 - s2)
    D2 = k * s1 / (4 * s1 - s2)
    p1, p2 = cournot_inverse_prices(D1, D2, s1, s2, theta)
    return _profit(D1, p1, s1, nu), _profit(D2, p2, s2, nu)


def solve_cournot(econ: EconParams) -> EquilibriumResult:
    """Cournot equilibrium; both providers pick the top quality and split the market."""
    s = econ.s_max
    D1, D2, p1, p2, pi1, pi2 = cournot_stage2(s, s, econ)
    t02 = p2 / s
    pts = IndifferencePoints(theta_none_2=t02, theta_1_2=t02)
    return EquilibriumResult(
        game=Game.COURNOT, s1=s, s2=s, p1=p1, p2=p2, D1=D1, D2=D2,
        profit1=pi1, profit2=pi2, costs1=econ.nu * s * D1, costs2=econ.nu * s * D2,
        points=pts, consumer_surplus=consumer_surplus(Game.COURNOT, s, s, econ),
        theta_max=econ.theta_max,
    )


def solve(game: Game | str, econ: EconParams) -> EquilibriumResult:
    return solve_bertrand(econ) if Game(game) is Game.BERTRAND else solve_cournot(econ)


def _surplus_on(lo, hi, s, p, theta_max):
    """Integral of (theta s - p) d theta / theta_max over [lo, hi]."""
    if hi <= lo:
        return 0.0
    return (s * (hi * hi - lo * lo) / 2 - p * (hi - lo)) / theta_max


def consumer_surplus(game: Game | str, s1: float, s2: float, econ: EconParams) -> float:
    """Aggregate surplus of purchasing customers at the stage-2 equilibrium for ``(s1, s2)``."""
    game = Game(game)
    theta = econ.theta_max
    if game is Game.BERTRAND:
        p1, p2 = bertrand_stage2_prices(s1, s2, econ)
        _, _, t02, t12 = _bertrand_outcome(s1, s2, p1, p2, econ)
        t12 = min(max(t12, 0.0), theta)
        t02 = min(max(t02, 0.0), t12)
    else:
        _, _, p1, p2, _, _ = cournot_stage2(s1, s2, econ)
        t02 = min(max(p2 / s2, 0.0), theta)
        t12 = t02 if s1 == s2 else min(max((p1 - p2) / (s1 - s2), t02), theta)
    return _surplus_on(t12, theta, s1, p1, theta) + _surplus_on(t02, t12, s2, p2, theta)


# --- brute-force oracle --------------------------------------------------------

@dataclass(frozen=True)
class GridEquilibrium:
    """Fixed point of best-response iteration on finite grids (``found`` False if none)."""

    game: Game
    s1: float
    s2: float
    x1: float  # price (Bertrand) or quantity (Cournot)
    x2: float
    found: bool
    iterations: int


def _best_response_fixed_point(grid, payoff1, payoff2, start, max_iter=200):
    """Alternating argmax on a grid; ties go to the lowest index.

    ``payoff1(g, x2)`` gives player 1's payoff over the grid ``g`` against ``x2``
    (and likewise for player 2). Returns (i1, i2, found, iterations).
    """
    i1, i2 = start
    seen = set()
    for it in range(1, max_iter + 1):
        n1 = int(np.argmax(payoff1(grid, grid[i2])))
        n2 = int(np.argmax(payoff2(grid, grid[n1])))
        if (n1, n2) == (i1, i2):
            # confirm mutual best response against the final profile
            ok = int(np.argmax(payoff1(grid, grid[n2]))) == n1
            return n1, n2, ok, it
        if (n1, n2) in seen:
            return n1, n2, False, it
        seen.add((n1, n2))
        i1, i2 = n1, n2
    return i1, i2, False, max_iter


def _pair_profit(own, other, econ, game):
    """Own stage-2 profit for arrays of own qualities against a rival quality."""
    own = np.asarray(own, dtype=float)
    out = np.zeros_like(own)
    hi, lo = own > other, own < other
    profits = _bertrand_profits_vec if game is Game.BERTRAND else _cournot_profits_vec
    if hi.any():
        out[hi] = profits(own[hi], np.full(hi.sum(), other), econ)[0]
    if lo.any():
        out[lo] = profits(np.full(lo.sum(), other), own[lo], econ)[1]
    eq = ~(hi | lo)
    if eq.any() and game is Game.COURNOT:
        out[eq] = profits(own[eq], own[eq], econ)[0]
    # equal qualities under price competition drive margins to zero
    return out


def grid_oracle(game: Game | str, s_grid, x_grid, econ: EconParams) -> GridEquilibrium:
    """Independent check of an equilibrium by best-response iteration on grids.

    ``s_grid`` holds candidate qualities; ``x_grid`` candidate prices
    (Bertrand) or quantities (Cournot). Qualities are chosen against the
    stage-2 payoffs, then the stage-2 game is solved by brute force on
    ``x_grid`` at the chosen qualities.
    """
    game = Game(game)
    s_grid = np.sort(np.asarray(s_grid, dtype=float))
    x_grid = np.sort(np.asarray(x_grid, dtype=float))
    if s_grid.size == 0 or x_grid.size == 0 or not np.all(np.isfinite(s_grid)) or not np.all(np.isfinite(x_grid)):
        raise ValueError("grids must be finite and non-empty")
    nu, theta = econ.nu, econ.theta_max

    start = (s_grid.size - 1, max(s_grid.size // 2 - 1, 0))
    i1, i2, found_s, it_s = _best_response_fixed_point(
        s_grid,
        lambda g, other: _pair_profit(g, other, econ, game),
        lambda g, other: _pair_profit(g, other, econ, game),
        start,
    )
    s1, s2 = s_grid[i1], s_grid[i2]
    if s1 < s2:
        s1, s2 = s2, s1
    if game is Game.BERTRAND and s1 == s2:
        return GridEquilibrium(game, s1, s2, float("nan"), float("nan"), False, it_s)

    if game is Game.BERTRAND:
        def pay1(g, p2):
            D1, D2, _, _ = _bertrand_outcome(s1, s2, g, np.full_like(g, p2), econ)
            return _profit(D1, g, s1, nu)

        def pay2(g, p1):
            D1, D2, _, _ = _bertrand_outcome(s1, s2, np.full_like(g, p1), g, econ)
            return _profit(D2, g, s2, nu)
    else:
        def pay1(g, D2):
            p1, _ = cournot_inverse_prices(g, D2, s1, s2, theta)
            return _profit(g, p1, s1, nu)

        def pay2(g, D1):
            _, p2 = cournot_inverse_prices(D1, g, s1, s2, theta)
            return _profit(g, p2, s2, nu)

    j1, j2, found_x, it_x = _best_response_fixed_point(x_grid, pay1, pay2, (0, 0))
    return GridEquilibrium(game, float(s1), float(s2), float(x_grid[j1]), float(x_grid[j2]),
                           bool(found_s and found_x), it_s + it_x)


def table_rows(bertrand: EquilibriumResult, cournot: EquilibriumResult) -> str:
    """Plain-text side-by-side comparison of the two games."""
    rows = [
        ("quality s1", "s1"), ("quality s2", "s2"), ("price p1", "p1"), ("price p2", "p2"),
        ("demand D1", "D1"), ("demand D2", "D2"), ("total demand", "total_demand"),
        ("point theta_02", None), ("point theta_12", None),
        ("profit 1", "profit1"), ("profit 2", "profit2"), ("aggregate profit", "aggregate_profit"),
        ("costs 1", "costs1"), ("costs 2", "costs2"), ("consumer surplus", "consumer_surplus"),
    ]
    out = [f"{'':<18}{'bertrand':>14}{'cournot':>14}"]
    for label, attr in rows:
        if attr is None:
            key = "theta_none_2" if label.endswith("02") else "theta_1_2"
            vals = [getattr(r.points, key) for r in (bertrand, cournot)]
        else:
            vals = [getattr(r, attr) for r in (bertrand, cournot)]
        out.append(f"{label:<18}{vals[0]:>14.4f}{vals[1]:>14.4f}")
    return "\n".join(out)
