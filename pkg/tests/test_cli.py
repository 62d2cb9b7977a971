import csv
import json

import numpy as np
import pytest
import yaml

from wavelab.cli import ConfigError, config_hash, dump_config, load_config, main, resolve_config
from wavelab.spectral import Grid, read_field_binary, read_field_csv

SMALL = {
    "model": {"name": "klein_gordon"},
    "packets": [{"kstar": [1.0], "amplitude": 0.3}, {"kstar": [2.0], "amplitude": 0.3}],
    "grid": {"K": 8.0, "N": 512},
    "integrator": {"min_steps": 200, "estimate_error": False, "snapshots": 5},
    "sweep": {"betas": [0.5, 0.4, 0.3]},
    "simulate": {"beta": 0.4},
}


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return str(p)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_resolve_is_idempotent_and_round_trips():
    cfg = resolve_config(SMALL)
    assert resolve_config(cfg) == cfg
    assert resolve_config(yaml.safe_load(dump_config(cfg))) == cfg
    assert cfg["packets"][0]["components"]  # shorthand expanded


def test_hash_semantics():
    a = resolve_config(SMALL)
    b = resolve_config(dict(SMALL, output="elsewhere", jobs=4))
    c = resolve_config(dict(SMALL, simulate={"beta": 0.3}))
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    reordered = json.loads(json.dumps(a))
    reordered = dict(reversed(list(reordered.items())))
    assert config_hash(reordered) == config_hash(a)


@pytest.mark.parametrize("bad", [
    {"model": {"name": "toda"}},
    {"sweep": {"betas": [0.1, 0.2, 0.3]}},
    {"sweep": {"betas": [0.9]}},
    {"schema": 2},
    {"colour": "blue"},
    {"packets": [{"amplitude": 1.0}]},
    {"probe": {"tree": "1,0"}},
    {"jobs": 0},
])
def test_bad_configs_rejected(bad):
    with pytest.raises(ConfigError):
        resolve_config(bad)


def test_bad_config_exit_code(tmp_path):
    assert main(["sweep", "--config", write_cfg(tmp_path, {"schema": 7}), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["expand-monomials", "--m", "9", "--out", str(tmp_path / "o")]) == 2


def test_duplicate_centers_exit_one(tmp_path):
    cfg = dict(SMALL, packets=[{"kstar": [1.0]}, {"kstar": [1.0]}])
    out = tmp_path / "dup"
    assert main(["check-genericity", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and man["stages"][0]["passed"] is False


def test_check_genericity_ok(tmp_path):
    out = tmp_path / "gen"
    assert main(["check-genericity", "--config", write_cfg(tmp_path, SMALL), "--out", str(out)]) == 0
    rows = read_rows(out / "genericity.csv")
    assert len(rows) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_sha256"] == config_hash(load_config(str(out / "config.resolved.yaml")))


def test_expand_monomials(tmp_path):
    out = tmp_path / "exp"
    assert main(["expand-monomials", "--m", "4", "--S", "2", "3", "--out", str(out)]) == 0
    rows = read_rows(out / "trees.csv")
    assert len(rows) == 11
    assert sum(int(r["c_T"]) for r in rows) == 10
    assert (out / "trees.csv").read_bytes().count(b"\r") == 0


@pytest.mark.parametrize("fmt", ["csv", "binary"])
def test_linear_simulate_conserves_norm(tmp_path, fmt):
    cfg = dict(SMALL, sweep={"betas": [0.5, 0.4, 0.3], "linear": True})
    out = tmp_path / fmt
    assert main(["simulate", "--config", write_cfg(tmp_path, cfg), "--out", str(out), "--format", fmt]) == 0
    rows = read_rows(out / "trajectory.csv")
    assert len(rows) == 5
    norms = np.array([float(r["l1_k"]) for r in rows])
    assert np.ptp(norms) <= 1e-10 * norms[0]
    last = out / rows[-1]["file"]
    f = read_field_binary(last) if fmt == "binary" else read_field_csv(last, Grid(1, 512, "box", 8.0))
    assert f.values.shape == (2, 512)


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", write_cfg(tmp_path, SMALL), "--out", str(out), "--jobs", "2"]) == 0
    rows = read_rows(out / "remainder.csv")
    assert [float(r["beta"]) for r in rows] == [0.5, 0.4, 0.3]
    assert all(float(r["supL1"]) > 0 for r in rows)
    fit = read_rows(out / "remainder_fit.csv")
    assert len(fit) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["config"]["jobs"] == 2


def test_runtime_failure_exit_three(tmp_path):
    # amplitude far outside the convergence radius with the radius check enforced
    cfg = dict(SMALL, packets=[{"kstar": [1.0], "amplitude": 50.0}],
               series={"beta": 0.3, "M": 2, "norm_fraction": None})
    out = tmp_path / "rt"
    assert main(["verify-series", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == "runtime-error"
