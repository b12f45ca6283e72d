"""Assemble fleets, equilibrium and the mean-field model from a ScenarioConfig."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CellCapacity, CrowdParams, Fleet, cell_capacity, lattice_half_vector, make_fleet
from .config import ScenarioConfig
from .dynamics import BehaviorFactors, MarketModel, MarketState
from .equilibrium import EconParams, EquilibriumResult, Game, solve
from .quality import QualityParams

FLEETS = ("usp", "lsp1", "lsp2")


@dataclass
class Scenario:
    config: ScenarioConfig
    game: Game
    econ: EconParams
    eq: EquilibriumResult
    qp: QualityParams
    crowd: CrowdParams
    fleets: dict[str, Fleet]
    capacity: tuple[CellCapacity, CellCapacity, CellCapacity]
    behavior: BehaviorFactors

    @property
    def model(self) -> MarketModel:
        return MarketModel(self.eq, self.qp, self.capacity, self.behavior, self.econ.nu)

    def p0_initial(self) -> float:
        run = self.config.run
        if run.p0_initial is not None:
            return run.p0_initial
        return self.eq.p2 / 2 if run.p0_rule == "half_p2" else self.eq.p2

    def initial_state(self) -> MarketState:
        return MarketState(0.0, 0.0, 0.0, self.p0_initial())


def lsp_offsets(cfg: ScenarioConfig, lsp1_unshifted: Fleet) -> tuple[np.ndarray, np.ndarray]:
    """Translations of the two LSP grids; ``interleave`` splits half a lattice vector between them."""
    off = cfg.run.lsp2_offset
    if off == "none":
        return np.zeros(2), np.zeros(2)
    if off == "interleave":
        v = lattice_half_vector(lsp1_unshifted)
    else:
        v = np.asarray(off, dtype=float)
    return -v / 2, v / 2


def build_fleets(cfg: ScenarioConfig) -> dict[str, Fleet]:
    fleets = {}
    for name in FLEETS:
        fleets[name] = make_fleet(cfg.deployment(name), cfg.radio_params(name),
                                  getattr(cfg.fleets, name).n_aap, name=name)
    o1, o2 = lsp_offsets(cfg, fleets["lsp1"])
    for name, off in (("lsp1", o1), ("lsp2", o2)):
        f = fleets[name]
        fleets[name] = Fleet(f.positions + off, f.deploy, f.radio, f.r_aap, name)
    return fleets


def build_scenario(cfg: ScenarioConfig, game: Game | str | None = None) -> Scenario:
    game = Game(game) if game is not None else cfg.game
    econ = cfg.econ_params()
    crowd = cfg.crowd_params()
    fleets = build_fleets(cfg)
    capacity = tuple(cell_capacity(fleets[name], crowd) for name in FLEETS)
    return Scenario(config=cfg, game=game, econ=econ, eq=solve(game, econ), qp=cfg.quality_params(),
                    crowd=crowd, fleets=fleets, capacity=capacity, behavior=cfg.behavior_factors())
