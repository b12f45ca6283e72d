"""Command-line scenario runner.

Exit codes: 0 success, 1 validation failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import abm
from .config import ConfigError, ScenarioConfig, load_config
from .cooperation import COOP_CSV_COLUMNS, build_coop_model, evaluate_cooperation, integrate_coop
from .dynamics import CSV_COLUMNS, Trajectory, integrate
from .equilibrium import solve_bertrand, solve_cournot, table_rows
from .scenario import build_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario (defaults for omitted keys)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    common.add_argument("--game", choices=("bertrand", "cournot"))
    common.add_argument("--coop", choices=("on", "off"))
    common.add_argument("--seeds", type=int, metavar="N")
    common.add_argument("--horizon", type=float, metavar="MIN")
    common.add_argument("--dt", type=float, metavar="MIN")

    p = argparse.ArgumentParser(prog="aerialmarket", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common], help="initial-stage equilibria of both games")
    sub.add_parser("dynamics", parents=[common], help="mean-field trajectory CSV")
    sub.add_parser("coop", parents=[common], help="trajectories with and without assistance, Shapley split")
    sub.add_parser("abm", parents=[common], help="agent-based runs: per-seed, mean and std CSVs")
    sub.add_parser("validate", parents=[common], help="mean-field vs agent-based deviation report")
    cols = sub.add_parser("columns", help="print selected CSV columns, whitespace separated")
    cols.add_argument("csv", help="trajectory CSV")
    cols.add_argument("--select", required=True, help="comma-separated column names, e.g. t,y1,y2")
    return p


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.game:
        overrides["run__game"] = args.game
    if args.coop:
        overrides["run__coop"] = args.coop == "on"
    if args.seeds is not None:
        overrides["run__seeds"] = args.seeds
    if args.horizon is not None:
        overrides["run__horizon"] = args.horizon
    if args.dt is not None:
        overrides["run__dt"] = args.dt
    return cfg.replace(**overrides) if overrides else cfg


def _out_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def cmd_equilibrium(cfg: ScenarioConfig, out: str) -> int:
    econ = cfg.econ_params()
    b, c = solve_bertrand(econ), solve_cournot(econ)
    with open(os.path.join(out, "equilibrium.json"), "w") as fh:
        json.dump({"bertrand": b.to_dict(), "cournot": c.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = table_rows(b, c)
    with open(os.path.join(out, "equilibrium.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _mean_field(cfg: ScenarioConfig) -> tuple[Trajectory, tuple[str, ...]]:
    sc = build_scenario(cfg)
    run = cfg.run
    if run.coop:
        model = build_coop_model(sc)
        return integrate_coop(model.initial_state(sc.p0_initial()), run.horizon, run.dt, model), COOP_CSV_COLUMNS
    return integrate(sc.initial_state(), run.horizon, run.dt, sc.model), CSV_COLUMNS


def cmd_dynamics(cfg: ScenarioConfig, out: str) -> int:
    traj, order = _mean_field(cfg)
    suffix = "_coop" if cfg.run.coop else ""
    path = os.path.join(out, f"dynamics_{cfg.run.game}{suffix}.csv")
    traj.to_csv(path, order)
    print(path)
    return EXIT_OK


def cmd_coop(cfg: ScenarioConfig, out: str) -> int:
    sc = build_scenario(cfg)
    res = evaluate_cooperation(sc)
    game = cfg.run.game
    res.standalone.to_csv(os.path.join(out, f"coop_{game}_standalone.csv"), CSV_COLUMNS)
    res.cooperative.to_csv(os.path.join(out, f"coop_{game}.csv"), COOP_CSV_COLUMNS)
    with open(os.path.join(out, f"shapley_{game}.json"), "w") as fh:
        fh.write(res.to_json() + "\n")
    print(res.to_json())
    return EXIT_OK


def cmd_abm(cfg: ScenarioConfig, out: str) -> int:
    sc = build_scenario(cfg)
    result = abm.run(sc)
    result.write(out, prefix=f"abm_{cfg.run.game}{'_coop' if cfg.run.coop else ''}")
    print(f"{len(result.seeds)} seeds written to {out}")
    return EXIT_OK


def cmd_validate(cfg: ScenarioConfig, out: str) -> int:
    traj, _ = _mean_field(cfg)
    sc = build_scenario(cfg)
    result = abm.run(sc)
    report = abm.compare(result.mean, traj)
    text = abm.report_json(report, cfg.run.max_deviation)
    with open(os.path.join(out, f"validate_{cfg.run.game}.json"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK if report["max_deviation"] <= cfg.run.max_deviation else EXIT_FAIL


def cmd_columns(path: str, select: str) -> int:
    traj = Trajectory.from_csv(path)
    names = [c.strip() for c in select.split(",") if c.strip()]
    missing = [c for c in names if c not in traj.columns]
    if missing:
        raise ConfigError(f"unknown column(s) {', '.join(missing)} in {path}")
    print("# " + " ".join(names))
    for k in range(len(traj)):
        print(" ".join(repr(float(traj[c][k])) for c in names))
    return EXIT_OK


COMMANDS = {"equilibrium": cmd_equilibrium, "dynamics": cmd_dynamics, "coop": cmd_coop,
            "abm": cmd_abm, "validate": cmd_validate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "columns":
            return cmd_columns(args.csv, args.select)
        cfg = _config(args)
        out = _out_dir(args.out)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
