import os

import pytest
import yaml

from mmvgame import cli
from mmvgame.config import DEFAULT_TOLERANCES, ConfigError, from_dict, load_config

OU_PARAMS = {"kappa": 1.0, "m": 0.0, "beta": 0.5, "sigma0": 0.2, "lam0": 0.3, "lam1": 0.1}
BS_PARAMS = {"mu": 0.1, "sigma": 0.2, "a": 0.0, "b": 0.3}
OU = {"family": "ou_tanh", "params": OU_PARAMS}

SMALL = {
    "model": dict(OU, rho=0.5),
    "grid": {"z_lo": -3.0, "z_hi": 3.0, "n_z": 61, "n_t": 41},
    "mc": {"n_paths": 400, "n_steps": 16, "seed": 5},
    "anchor": {"x0": 1.0, "y0": 0.5, "z0": 0.0},
    "probes": [[0.0, 0.0], [0.6, 0.5]],
    "n_scan": 11,
}


def _write(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def test_defaults_and_round_trip():
    cfg = from_dict({"model": {"family": "constant", "params": dict(BS_PARAMS)}})
    assert cfg.tolerances == DEFAULT_TOLERANCES and not cfg.explicit_tolerances
    m = cfg.build_model()
    assert m.horizon_T == 1.0 and cfg.build_grid(m).n_z >= 4
    assert cfg.with_seed(11).mc.seed == 11


@pytest.mark.parametrize("doc, field", [
    ({}, "model"),
    ({"model": {}}, "model.family"),
    ({"model": {"family": "nope"}}, "model.family"),
    ({"model": dict(OU, rho=2.0)}, "model.rho"),
    ({"model": {"family": "ou_tanh", "params": dict(OU_PARAMS, kappa="x")}}, "model.params.kappa"),
    ({"model": OU, "mc": {"n_paths": 1.5}}, "mc.n_paths"),
    ({"model": OU, "anchor": {"y0": -1}}, "anchor.y0"),
    ({"model": OU, "tolerances": {"bogus": 1}}, "tolerances.bogus"),
    ({"model": OU, "probes": [[0.0]]}, "probes[0]"),
    ({"model": OU, "n_scan": 3}, "n_scan"),
    ({"model": OU, "mv_moments": "x"}, "mv_moments"),
])
def test_invalid_config_names_field(doc, field):
    with pytest.raises(ConfigError) as ei:
        from_dict(doc)
    assert field in str(ei.value)


def test_explicit_tolerance_recorded():
    cfg = from_dict({"model": OU, "tolerances": {"reduction_max": 0.05}})
    assert cfg.tolerances["reduction_max"] == 0.05 and "reduction_max" in cfg.explicit_tolerances


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_exit_code_two_for_config_errors(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "missing.yaml"), "solve"]) == 2
    p = _write(tmp_path, {"model": dict(OU, rho=3)})
    assert cli.main(["--config", p, "solve"]) == 2
    assert "model.rho" in capsys.readouterr().err
    assert cli.main(["solve"]) == 2
    p = _write(tmp_path, SMALL, "ok.yaml")
    assert cli.main(["--config", p, "--seed", "-1", "solve"]) == 2


def test_solve_outputs_are_byte_identical(tmp_path):
    p = _write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert cli.main(["--config", p, "--out", str(tmp_path / d), "solve"]) == 0
    for name in ("G_surface.csv", "solve_summary.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
    head = (tmp_path / "a" / "G_surface.csv").read_text().splitlines()[0]
    assert head == "t,z,G,G_z,F,residual"


def test_output_directory_precedence(tmp_path, monkeypatch):
    doc = dict(SMALL, output_dir=str(tmp_path / "from_cfg"))
    p = _write(tmp_path, doc)
    assert cli.main(["--config", p, "solve"]) == 0
    assert (tmp_path / "from_cfg" / "solve_summary.csv").exists()
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "from_env"))
    assert cli.main(["--config", p, "solve"]) == 0
    assert (tmp_path / "from_env" / "solve_summary.csv").exists()
    assert cli.main(["--config", p, "--out", str(tmp_path / "from_flag"), "solve"]) == 0
    assert (tmp_path / "from_flag" / "solve_summary.csv").exists()


def test_oracle_and_seed_reproducibility(tmp_path):
    p = _write(tmp_path, SMALL)
    outs = []
    for d in ("a", "b"):
        assert cli.main(["--config", p, "--seed", "9", "--out", str(tmp_path / d), "oracle"]) in (0, 1)
        outs.append((tmp_path / d / "oracle.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().splitlines()[0] == "z,t,F_pde,F_mc,se,z_score,pass"


def test_strategy_and_verify_commands(tmp_path):
    p = _write(tmp_path, SMALL)
    out = str(tmp_path / "o")
    assert cli.main(["--config", p, "--out", out, "strategy"]) == 0
    assert cli.main(["--config", p, "--out", out, "verify"]) == 0
    assert os.path.exists(os.path.join(out, "verify_summary.csv"))
    lines = open(os.path.join(out, "strategy.csv")).read().splitlines()
    assert lines[0] == "z,t,pi_star,eta1_star,eta2_star,zeta,reduced_pi"


def test_compare_mv_constant_family(tmp_path):
    doc = {"model": {"family": "constant", "params": dict(BS_PARAMS)},
           "grid": {"z_lo": -1.0, "z_hi": 1.0, "n_z": 41, "n_t": 4001}}
    p = _write(tmp_path, doc)
    assert cli.main(["--config", p, "--out", str(tmp_path), "compare-mv"]) == 0
    doc["model"]["params"]["mu"] = 0.02
    p = _write(tmp_path, doc, "zero.yaml")
    assert cli.main(["--config", p, "--out", str(tmp_path / "z"), "compare-mv"]) == 1


def test_example_bs_without_config(capsys):
    assert cli.main(["example-bs"]) == 0
    assert "theta" in capsys.readouterr().out


def test_simulate_small_run(tmp_path):
    doc = dict(SMALL, mc={"n_paths": 2000, "n_steps": 64, "seed": 3},
               grid={"z_lo": -6.0, "z_hi": 6.0, "n_z": 201, "n_t": 201})
    p = _write(tmp_path, doc)
    code = cli.main(["--config", p, "--out", str(tmp_path), "simulate"])
    assert code == 0
    summary = dict(l.split(",") for l in (tmp_path / "simulate_summary.csv").read_text().splitlines()[1:])
    assert summary["saddle_pass"] == "1" and summary["reduction_pass"] == "1"
