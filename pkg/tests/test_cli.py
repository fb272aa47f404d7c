import csv
import json

import pytest
import yaml

from admkit.cli import main
from admkit.config import ConfigError, flatten, parse_config
from admkit.hier import REFERENCE_THETA

THETA = REFERENCE_THETA.to_dict()


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def sim_config(tmp_path, **kw):
    cfg = {"seed": 4, "theta": THETA,
           "datasets": [{"name": "a", "n_boards": 60, "tau_c": 4500, "censor_years": 1},
                        {"name": "b", "n_boards": 40, "tau_c": 3000, "censor_hours": 8760}],
           "output": {"dir": "data"}}
    cfg.update(kw)
    return write(tmp_path, "sim.yaml", cfg)


def fit_config(tmp_path, **kw):
    cfg = {"seed": 5, "datasets": ["data/a.csv", "data/b.csv"], "theta0": THETA,
           "chain": {"burn_in": 30, "thin": 2, "n_draws": 6, "pilot_size": 20},
           "calibration": {"candidates": [2.0, 8.0], "pilot_iterations": 20},
           "output": {"chain": "out/chain.jsonl"}}
    cfg.update(kw)
    return write(tmp_path, "fit.yaml", cfg)


def rel_config(tmp_path, **kw):
    cfg = {"seed": 6, "theta": THETA,
           "reliability": {"n_rep": 300, "block": 100, "phi_grid": [0.5, 1.5, 3.0],
                           "beta_targets": [1.5], "horizon_years": 5, "example_phi": 2.0},
           "output": {"curves": "rel/curves.csv", "kd": "rel/kd.csv",
                      "load_path": "rel/path.csv", "failure_times": "rel/times.csv"}}
    cfg.update(kw)
    return write(tmp_path, "rel.yaml", cfg)


def test_flatten_and_unknown_keys(tmp_path):
    assert flatten({"a": {"b": 1, "c": {"d": 2}}, "e": 3}) == {"a.b": 1, "a.c.d": 2, "e": 3}
    p = sim_config(tmp_path, bogus=1)
    with pytest.raises(ConfigError, match="bogus"):
        parse_config("simulate", p)
    assert main(["simulate", "--config", str(p)]) == 2


def test_missing_seed_and_file(tmp_path):
    p = sim_config(tmp_path)
    raw = yaml.safe_load(p.read_text())
    del raw["seed"]
    p.write_text(yaml.safe_dump(raw))
    assert main(["simulate", "--config", str(p)]) == 2
    assert main(["simulate", "--config", str(p), "--seed", "1"]) == 0
    assert main(["simulate", "--config", str(tmp_path / "none.yaml")]) == 2


def test_bad_values_are_config_errors(tmp_path):
    assert main(["simulate", "--config", str(sim_config(tmp_path, seed="x"))]) == 2
    bad_ds = [{"name": "a", "n_boards": 10, "censor_hours": 1, "censor_years": 1}]
    assert main(["simulate", "--config", str(sim_config(tmp_path, datasets=bad_ds))]) == 2
    assert main(["fit", "--config", str(fit_config(tmp_path))]) == 2  # datasets not written yet
    p = rel_config(tmp_path, chain="x.jsonl")
    assert main(["reliability", "--config", str(p)]) == 2


def test_full_pipeline(tmp_path, capsys):
    assert main(["simulate", "--config", str(sim_config(tmp_path))]) == 0
    header = (tmp_path / "data" / "a.csv").read_text().splitlines()[0]
    assert header == "board_id,time_hours,censored"
    assert len((tmp_path / "data" / "a.csv").read_text().splitlines()) == 61

    assert main(["fit", "--config", str(fit_config(tmp_path))]) == 0
    lines = (tmp_path / "out" / "chain.jsonl").read_text().splitlines()
    meta = json.loads(lines[0])["meta"]
    assert meta["delta"] in (2.0, 8.0) and "calibration" in meta and meta["config"]["seed"] == 5
    assert len(lines) == 7
    row = json.loads(lines[1])
    assert set(row) == {"iteration", "theta", "p_hat", "kernel_log", "acceptance_rate"}
    assert len(row["p_hat"]) == 2

    oracle = {"seed": 1, "chain": "out/chain.jsonl", "datasets": ["data/a.csv"],
              "oracle": {"n_sim": 2000}, "theta_true": THETA, "output": {"table": "out/oracle.csv"}}
    assert main(["oracle", "--config", str(write(tmp_path, "or.yaml", oracle))]) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "oracle.csv").open()))
    assert rows[0]["draw"] == "true" and rows[0]["rank"] == "0"
    assert len(rows) == 7
    lls = [float(r["ll"]) for r in rows[1:]]
    assert lls == sorted(lls, reverse=True)

    oracle.update({"oracle": {"n_sim": 2000, "draws": []}, "output": {"table": "out/empty.csv"}})
    del oracle["theta_true"]
    assert main(["oracle", "--config", str(write(tmp_path, "or2.yaml", oracle))]) == 0
    assert len((tmp_path / "out" / "empty.csv").read_text().splitlines()) == 1
    oracle["oracle"]["draws"] = [99]
    assert main(["oracle", "--config", str(write(tmp_path, "or3.yaml", oracle))]) == 2

    rel = {"seed": 2, "chain": "out/chain.jsonl",
           "reliability": {"n_draws": 3, "n_rep": 200, "phi_grid": [0.5, 2.0, 3.0], "beta_targets": [1.0]},
           "output": {"curves": "out/c.csv", "kd": "out/k.csv"}}
    code = main(["reliability", "--config", str(write(tmp_path, "rel2.yaml", rel))])
    assert code in (0, 3)
    assert (tmp_path / "out" / "c.csv").exists()


def test_empty_dataset_simulates(tmp_path):
    ds = [{"name": "z", "n_boards": 0, "tau_c": 4500, "censor_years": 1}]
    assert main(["simulate", "--config", str(sim_config(tmp_path, datasets=ds))]) == 0
    assert (tmp_path / "data" / "z.csv").read_text() == "board_id,time_hours,censored\n"


def test_reliability_outputs(tmp_path):
    assert main(["reliability", "--config", str(rel_config(tmp_path))]) == 0
    out = tmp_path / "rel"
    curves = list(csv.DictReader((out / "curves.csv").open()))
    assert [r["mode"] for r in curves] == ["dol"] * 3 + ["nodol"] * 3
    assert len((out / "kd.csv").read_text().splitlines()) == 2
    assert (out / "path.csv").read_text().startswith("t_hours,tau_psi\n")
    assert len((out / "times.csv").read_text().splitlines()) == 301


def test_unbracketed_target_exits_numerical(tmp_path):
    p = rel_config(tmp_path, reliability={"n_rep": 100, "phi_grid": [1.0], "beta_targets": [2.0]})
    assert main(["reliability", "--config", str(p)]) == 3
    # the curves are still written
    assert (tmp_path / "rel" / "curves.csv").exists()


def test_reliability_rejects_bad_grid(tmp_path):
    p = rel_config(tmp_path, reliability={"phi_grid": [2.0, 1.0]})
    assert main(["reliability", "--config", str(p)]) == 2


def test_rerun_is_byte_identical(tmp_path):
    sim = sim_config(tmp_path)
    assert main(["simulate", "--config", str(sim)]) == 0
    first = (tmp_path / "data" / "a.csv").read_bytes()
    assert main(["simulate", "--config", str(sim), "--threads", "3"]) == 0
    assert (tmp_path / "data" / "a.csv").read_bytes() == first

    fit = fit_config(tmp_path)
    assert main(["fit", "--config", str(fit)]) == 0
    chain = (tmp_path / "out" / "chain.jsonl").read_bytes()
    assert main(["fit", "--config", str(fit), "--threads", "2"]) == 0
    assert (tmp_path / "out" / "chain.jsonl").read_bytes() == chain

    rel = rel_config(tmp_path)
    outs = ["curves.csv", "kd.csv", "path.csv", "times.csv"]
    assert main(["reliability", "--config", str(rel), "--threads", "1"]) == 0
    first = [(tmp_path / "rel" / f).read_bytes() for f in outs]
    assert main(["reliability", "--config", str(rel), "--threads", "3"]) == 0
    assert [(tmp_path / "rel" / f).read_bytes() for f in outs] == first


def test_seed_override_changes_output(tmp_path):
    sim = sim_config(tmp_path)
    assert main(["simulate", "--config", str(sim)]) == 0
    a = (tmp_path / "data" / "a.csv").read_bytes()
    assert main(["simulate", "--config", str(sim), "--seed", "99"]) == 0
    assert (tmp_path / "data" / "a.csv").read_bytes() != a
