"""CLI driver: subcommands, exit codes, reproducibility, manifests."""

import json
import math
from pathlib import Path

import pytest

from exceedance_lab import io
from exceedance_lab.cli import main
from exceedance_lab.config import (ConfigError, parse_model_flag, resolve)


def run(*argv):
    return main(list(argv))


def test_no_subcommand_is_usage_error(capsys):
    assert run() == 2


def test_unknown_subcommand_is_usage_error():
    assert run("frobnicate") == 2


def test_missing_config_file(tmp_path):
    assert run("theta", "--config", str(tmp_path / "nope.toml")) == 2


def test_invalid_model_flag():
    assert run("theta", "--model", "bogus=1") == 2
    assert run("theta", "--model", "a=2.0,alpha=1") == 2


def test_theta_subcommand(tmp_path):
    out = tmp_path / "run"
    rc = run("theta", "--model", "a=0.5,alpha=1", "--reps", "20000",
             "--seed", "5", "--out", str(out))
    assert rc == 0
    payload = io.read_json(out / "theta.json")
    assert payload["theta_analytic"] == 0.5
    assert abs(payload["theta_mc"] - 0.5) <= 3 * payload["se"]
    manifest = io.read_json(out / "manifest.json")
    io.validate_manifest(manifest)
    assert manifest["command"] == "theta"
    assert manifest["outputs"] == ["theta.json"]


def test_config_file_plus_override(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        "seed = 9\nreps = 5000\n[model]\na = 0.3\nalpha = 2.0\nsites = 2\n")
    out = tmp_path / "run"
    rc = run("theta", "--config", str(cfg), "--out", str(out),
             "--reps", "8000")
    assert rc == 0
    payload = io.read_json(out / "theta.json")
    assert payload["theta_analytic"] == pytest.approx(1 - 0.3 ** 2)
    assert payload["reps"] == 8000  # flag overrides file
    manifest = io.read_json(out / "manifest.json")
    assert manifest["config"]["model"]["a"] == 0.3
    assert manifest["seed"] == 9


def test_simulate_and_pattern_reproducible(tmp_path):
    args = ("--model", "a=0.5,alpha=1,sites=2", "--n", "5000", "--seed", "77")
    outs = []
    for d in ("r1", "r2"):
        out = tmp_path / d
        assert run("simulate", *args, "--out", str(out)) == 0
        assert run("pattern", *args, "--out", str(out)) == 0
        outs.append(out)
    for name in ("series.csv", "pattern.csv", "pattern.json"):
        b1 = (outs[0] / name).read_bytes()
        b2 = (outs[1] / name).read_bytes()
        assert b1 == b2, name
    # manifests share the config hash (wall time may differ)
    m1 = io.read_json(outs[0] / "manifest.json")
    m2 = io.read_json(outs[1] / "manifest.json")
    assert m1["config_hash"] == m2["config_hash"]


def test_different_seed_changes_payload(tmp_path):
    base = ("tail", "--model", "a=0.5,alpha=1", "--reps", "200")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(*base, "--seed", "1", "--out", str(out1)) == 0
    assert run(*base, "--seed", "2", "--out", str(out2)) == 0
    assert (out1 / "tail_paths.csv").read_bytes() != \
           (out2 / "tail_paths.csv").read_bytes()


def test_pattern_rejects_uncertified_u(tmp_path):
    rc = run("pattern", "--model", "a=0.5,alpha=1", "--u", "0.25",
             "--n", "1000", "--out", str(tmp_path / "x"))
    assert rc == 2


def test_cluster_subcommand(tmp_path):
    out = tmp_path / "c"
    rc = run("cluster", "--model", "a=0.5,alpha=1", "--reps", "2000",
             "--seed", "3", "--out", str(out))
    assert rc == 0
    summary = io.read_json(out / "cluster_summary.json")
    assert abs(summary["acceptance_rate"] - 0.5) < 0.05
    cols, rows = io.read_csv(out / "clusters.csv")
    assert cols[:2] == ["lag", "path"]
    assert len(rows) == 2000 * (2 * summary["window"] + 1)


def test_limit_sample_subcommand(tmp_path):
    out = tmp_path / "l"
    rc = run("limit-sample", "--model", "a=0.5,alpha=1,sites=2",
             "--samples", "50", "--seed", "8", "--mark", "affected-fraction",
             "--out", str(out))
    assert rc == 0
    cols, rows = io.read_csv(out / "limit_pattern.csv")
    assert cols == ["sample", "t", "site", "x_s0", "x_s1", "mark", "cluster"]
    manifest = io.read_json(out / "manifest.json")
    io.validate_manifest(manifest)


def test_laplace_compare_subcommand(tmp_path):
    out = tmp_path / "lc"
    rc = run("laplace-compare", "--model", "a=0.5,alpha=1", "--n", "2000",
             "--reps", "8000", "--seed", "4",
             "--test-functions", "flat-indicator", "--out", str(out))
    assert rc == 0
    data = io.read_json(out / "laplace_compare.json")
    provs = {r["provenance"] for r in data["records"]}
    assert provs == {"empirical-finite-n", "limit-tail", "limit-spectral",
                     "superposition"}
    assert all(c["within_3se"] for c in data["comparisons"])
    # closed form for this model and g: exp(-1/3)
    for r in data["records"]:
        if r["provenance"] != "empirical-finite-n":
            assert abs(r["value"] - math.exp(-1.0 / 3.0)) < 5 * r["se"] + 1e-9
    cols, rows = io.read_csv(out / "laplace_compare.csv")
    assert len(rows) == 4


def test_lemma1_subcommand(tmp_path):
    out = tmp_path / "lm"
    rc = run("lemma1-check", "--model", "a=0.5,alpha=1", "--n", "4000",
             "--reps", "20000", "--seed", "6",
             "--test-functions", "flat-indicator",
             "--v-scales", "1.0", "--t-nodes", "0.5", "--out", str(out))
    assert rc == 0
    data = io.read_json(out / "lemma1.json")
    assert len(data["rows"]) == 1
    row = data["rows"][0]
    assert row["accepted_blocks"] > 50
    assert abs(row["diff"]) <= 4 * row["combined_se"]


def test_diag_subcommands(tmp_path):
    out = tmp_path / "dm"
    rc = run("diag-M", "--model", "a=0,alpha=1,kind=iid-frechet",
             "--n-grid", "200,400", "--reps", "400", "--seed", "2",
             "--out", str(out))
    assert rc == 0
    rep = io.read_json(out / "condition_M.json")
    assert rep["condition"] == "mixing-M"
    assert rep["verdict"] is True

    out2 = tmp_path / "da"
    rc = run("diag-AC", "--model", "a=0.5,alpha=1", "--n-grid", "2000",
             "--m-grid", "1,3,8", "--reps", "600", "--r-exponent", "0.5",
             "--seed", "2", "--out", str(out2))
    assert rc == 0
    rep = io.read_json(out2 / "condition_AC.json")
    ests = [r["estimate"] for r in rep["rows"]]
    assert ests == sorted(ests, reverse=True)


def test_parse_model_flag():
    d = parse_model_flag("a=0.5,alpha=2,sites=3,lam=0.1,seed=9")
    assert d == {"a": 0.5, "alpha": 2.0, "sites": 3, "lam": 0.1, "seed": 9}
    with pytest.raises(ConfigError):
        parse_model_flag("a:0.5")
    with pytest.raises(ConfigError):
        parse_model_flag("unknown=1")


def test_resolve_validation():
    with pytest.raises(ConfigError):
        resolve(overrides={"risk": "nope"})
    with pytest.raises(ConfigError):
        resolve(overrides={"test_functions": ["nope"]})
    with pytest.raises(ConfigError):
        resolve(overrides={"u": -1.0})
    exp = resolve(overrides={"model": {"a": 0.2, "alpha": 1.5}})
    assert exp.model.a == 0.2
    assert exp.config_hash() == resolve(
        overrides={"model": {"a": 0.2, "alpha": 1.5},
                   "out_dir": "elsewhere", "workers": 7}).config_hash()


def test_every_output_file_carries_config_hash(tmp_path):
    out = tmp_path / "h"
    rc = run("pattern", "--model", "a=0.5,alpha=1", "--n", "2000",
             "--seed", "3", "--out", str(out))
    assert rc == 0
    manifest = io.read_json(out / "manifest.json")
    h = manifest["config_hash"]
    assert f"# config-hash: {h}".encode() in (out / "pattern.csv").read_bytes()
    assert io.read_json(out / "pattern.json")["config_hash"] == h


def test_manifest_schema_rejects_malformed():
    import jsonschema
    good = io.build_manifest("theta", {}, "0" * 64, 1, [], 0.1, "numba", "0.1.0")
    io.validate_manifest(good)
    bad = dict(good)
    bad["backend"] = "cuda"
    with pytest.raises(jsonschema.ValidationError):
        io.validate_manifest(bad)
