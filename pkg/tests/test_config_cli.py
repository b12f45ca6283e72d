import json
import subprocess
import sys

import numpy as np
import pytest

from aerialmarket.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from aerialmarket.config import ConfigError, ScenarioConfig, from_dict, load_config
from aerialmarket.dynamics import Trajectory

FAST = {"run": {"horizon": 10.0, "n_agents": 1500, "seeds": 2, "eps_samples": 20000}}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_empty_document_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert load_config(path) == ScenarioConfig()
    assert load_config(_write(tmp_path, {})) == ScenarioConfig()


def test_defaults_carry_reference_parameters():
    cfg = ScenarioConfig()
    assert cfg.economics.theta_max == 234.03 and cfg.economics.nu == 0.0647
    assert (cfg.fleets.lsp1.n_aap, cfg.fleets.usp.n_aap) == (18, 5)
    assert cfg.run.n_agents == 8000
    assert cfg.econ_params().s_max == pytest.approx(1.974412, abs=1e-6)


@pytest.mark.parametrize("doc, key", [
    ({"crowd": {"mu0": 3.0}}, "crowd.mu0"),
    ({"economics": {"theta_max": 0.05}}, "economics.theta_max"),
    ({"economics": {"nu": 1.0, "theta_max": 1.0}}, "economics.theta_max"),
    ({"behavior": {"gamma": 1.5}}, "behavior.gamma"),
    ({"run": {"game": "auction"}}, "run.game"),
    ({"run": {"seeds": 1.5}}, "run.seeds"),
    ({"run": {"coop": "yes"}}, "run.coop"),
    ({"fleets": {"usp": {"altitude": 1.0}}}, "fleets.usp.altitude"),
    ({"radio": {"bogus": 1}}, "radio.bogus"),
    ({"extra": {}}, "extra"),
])
def test_invalid_documents_name_the_key(doc, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        from_dict(doc)


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_replace_and_round_trip():
    cfg = ScenarioConfig().replace(behavior__gamma=0.5, fleets__lsp2__n_aap=9)
    assert cfg.behavior.gamma == 0.5 and cfg.fleets.lsp2.n_aap == 9
    assert from_dict(json.loads(cfg.to_json())) == cfg


def test_equilibrium_command_reference_table(tmp_path, capsys):
    cfg = _write(tmp_path, {"economics": {"theta_max": 1.0, "nu": 0.0, "b": 0.0, "c": 0.0}})
    assert main(["equilibrium", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    doc = json.loads((tmp_path / "o" / "equilibrium.json").read_text())
    assert doc["bertrand"]["profit1"] == pytest.approx(0.1458, abs=5e-5)
    assert doc["cournot"]["D1"] == pytest.approx(1 / 3)
    assert "0.1458" in (tmp_path / "o" / "equilibrium.txt").read_text()
    assert "0.1458" in capsys.readouterr().out


def test_dynamics_command_initial_shares(tmp_path):
    out = tmp_path / "o"
    assert main(["dynamics", "--game", "bertrand", "--horizon", "5", "--out", str(out)]) == EXIT_OK
    traj = Trajectory.from_csv(out / "dynamics_bertrand.csv")
    assert traj["x1"][0] == pytest.approx(0.58, abs=0.005)
    assert traj["x2"][0] == pytest.approx(0.29, abs=0.005)
    assert traj["y1"][0] == traj["y2"][0] == traj["y0"][0] == 0
    assert main(["dynamics", "--coop", "on", "--horizon", "5", "--out", str(out)]) == EXIT_OK
    assert "z1" in Trajectory.from_csv(out / "dynamics_bertrand_coop.csv").columns


def test_validate_zero_noise_passes(tmp_path):
    cfg = _write(tmp_path, {**FAST, "behavior": {"gamma": 0.0, "alpha_c": 0.0, "delta": 0.0}})
    assert main(["validate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "validate_bertrand.json").read_text())
    assert rep["max_deviation"] == 0 and rep["pass"] is True


def test_validate_reports_failure(tmp_path):
    cfg = _write(tmp_path, {"run": {**FAST["run"], "max_deviation": 1e-9}})
    assert main(["validate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_FAIL


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, {"crowd": {"mu0": 5.0}})
    assert main(["equilibrium", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "crowd.mu0" in capsys.readouterr().err
    assert main(["dynamics", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["equilibrium", "--out", str(blocker / "sub")]) == EXIT_CONFIG
    assert main(["dynamics", "--horizon", "1", "--dt", "0.3", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["dynamics", "--game", "auction"])
    assert exc.value.code == 2


def _run_all(cfg, out):
    for cmd in ("equilibrium", "dynamics", "coop", "abm"):
        assert main([cmd, "--config", cfg, "--out", str(out)]) == EXIT_OK
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_outputs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, FAST)
    a = _run_all(cfg, tmp_path / "a")
    b = _run_all(cfg, tmp_path / "b")
    assert a == b
    assert {"coop_bertrand.csv", "coop_bertrand_standalone.csv", "shapley_bertrand.json",
            "abm_bertrand_mean.csv", "abm_bertrand_std.csv", "abm_bertrand_seed1.csv"} <= set(a)
    for name in a:
        if name.endswith(".csv"):
            traj = Trajectory.from_csv(tmp_path / "a" / name)
            assert np.all(np.isfinite(traj.t))


def test_columns_command(tmp_path, capsys):
    out = tmp_path / "o"
    main(["dynamics", "--horizon", "1", "--dt", "0.5", "--out", str(out)])
    capsys.readouterr()
    csv = str(out / "dynamics_bertrand.csv")
    assert main(["columns", csv, "--select", "t,y1"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# t y1" and len(lines) == 4
    assert [float(v) for v in lines[1].split()] == [0.0, 0.0]
    assert main(["columns", csv, "--select", "t,nope"]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "aerialmarket", "equilibrium", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and (tmp_path / "equilibrium.json").exists()
