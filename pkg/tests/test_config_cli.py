import json
import subprocess
import sys

import pytest

from markdown_pricing.cli import EXIT_INFEASIBLE, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, cli_run
from markdown_pricing.config import (
    ExperimentSpec,
    FamilySpec,
    NoiseSpec,
    merge_sections,
    parse_ini,
    spec_from_ini,
)
from markdown_pricing.errors import ConfigFormatError

INI = """\
[experiment]
policies = cm, icm
horizons = 1000, 10000
replications = 3
seed = 9

[family]
name = poly1
theta = 0.95, -0.8

[noise]
kind = bernoulli
sigma = 0.1
"""


def test_ini_parses_typed_values():
    spec = spec_from_ini(INI)
    assert spec.policies == ("cm", "icm")
    assert spec.horizons == (1000, 10_000)
    assert spec.replications == 3 and spec.seed == 9
    assert spec.family.theta == (0.95, -0.8)
    assert spec.noise == NoiseSpec("bernoulli", 0.1)


def test_ini_round_trip():
    spec = ExperimentSpec(policies=("cm", "fixed:0.7"), family=FamilySpec("logit", theta=(0.7, 0.1), c_sg=0.3),
                          noise=NoiseSpec("gaussian_clipped", 0.05), horizons=(500,), replications=2, seed=4,
                          icm_m=2, test_mode=True)
    back = spec_from_ini(spec.to_ini())
    assert back == spec
    assert back.config_hash() == spec.config_hash()


def test_hash_ignores_key_order_and_execution_fields():
    lines = INI.splitlines()
    shuffled = "\n".join([lines[0], lines[4], lines[3], lines[2], lines[1]] + lines[5:]) + "\n"
    assert spec_from_ini(shuffled).config_hash() == spec_from_ini(INI).config_hash()
    spec = spec_from_ini(INI)
    assert spec.replace(workers=4, output_dir="x").config_hash() == spec.config_hash()
    assert spec.replace(seed=10).config_hash() != spec.config_hash()


@pytest.mark.parametrize("text,line", [
    ("[experiment]\nseed = 1\nbogus = 2\n", 3),
    ("[experiment]\nseed = 1\n\n[colour]\nx = 1\n", 4),
    ("[experiment]\nreplications = many\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigFormatError, match=f"line {line}:"):
        parse_ini(text)


def test_config_semantic_errors():
    with pytest.raises(ConfigFormatError):
        spec_from_ini("[family]\nname = cubic\n")
    with pytest.raises(ConfigFormatError):
        spec_from_ini("[experiment]\nreplications = 0\n")
    with pytest.raises(ConfigFormatError):
        spec_from_ini("not an ini")


def test_flags_override_config():
    merged = merge_sections(parse_ini(INI), {"experiment": {"seed": 1, "replications": None}})
    assert merged["experiment"]["seed"] == 1
    assert merged["experiment"]["replications"] == 3


def test_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MARKDOWN_PRICING_OUT", str(tmp_path))
    assert cli_run(["bogus"]) == EXIT_USAGE
    assert cli_run(["simulate", "--policy", "faulty", "--n", "100"]) == EXIT_USAGE
    assert cli_run(["simulate", "--policy", "faulty", "--test-mode", "--n", "100"]) == EXIT_INVARIANT
    assert cli_run(["batch", "--policy", "faulty", "--test-mode", "--n", "100", "--reps", "2"]) == EXIT_INVARIANT
    assert cli_run(["tune", "--n", "100", "--k", "5"]) == EXIT_INFEASIBLE
    assert cli_run(["batch", "--policy", "cm", "--n", "50"]) == EXIT_INFEASIBLE
    err = capsys.readouterr().err
    assert "round 51" in err and "replication=0" in err


def test_bad_config_file_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nseed = x\n")
    assert cli_run(["batch", "--config", str(cfg)]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    assert cli_run(["batch", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE


def test_tune_output(capsys):
    assert cli_run(["tune", "--n", "1000000", "--k", "1"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    rows = {ln.split()[0]: ln.split()[1] for ln in out[2:6]}
    assert float(rows["h"]) == pytest.approx(0.1, rel=1e-6)
    assert int(rows["n_1"]) == 10_000
    assert rows["rho"] == "0.6667"
    assert "h=0.01" in out[-1]


def test_simulate_file(tmp_path, capsys):
    assert cli_run(["simulate", "--policy", "cm", "--n", "2000", "--seed", "3", "--out", str(tmp_path)]) == EXIT_OK
    (path,) = tmp_path.glob("trajectory_cm_2000_0_*.csv")
    lines = path.read_text().splitlines()
    head = dict(ln[2:].split("=", 1) for ln in lines if ln.startswith("# "))
    assert head["seed"] == "3" and head["n"] == "2000" and head["price_increases"] == "0"
    assert path.name.endswith(head["config_hash"] + ".csv")
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "t,price,demand,regret"
    assert len(body) == 2001
    # 17 significant digits make the file a lossless record
    regret = sum(float(ln.split(",")[3]) for ln in body[1:])
    assert regret == pytest.approx(float(head["total_regret"]), rel=1e-12)


def test_output_dir_precedence(tmp_path, monkeypatch):
    env_dir, cfg_dir, flag_dir = tmp_path / "env", tmp_path / "cfg", tmp_path / "flag"
    monkeypatch.setenv("MARKDOWN_PRICING_OUT", str(env_dir))
    base = ["simulate", "--policy", "oracle", "--n", "100"]
    assert cli_run(base) == EXIT_OK
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[experiment]\noutput_dir = {cfg_dir}\n")
    assert cli_run(base + ["--config", str(cfg)]) == EXIT_OK
    assert cli_run(base + ["--config", str(cfg), "--out", str(flag_dir)]) == EXIT_OK
    for d in (env_dir, cfg_dir, flag_dir):
        assert len(list(d.glob("trajectory_oracle_*.csv"))) == 1


def test_batch_files_identical_across_workers(tmp_path):
    args = ["batch", "--policy", "cm,mle_greedy", "--n", "500", "2000", "--reps", "3", "--seed", "5"]
    assert cli_run(args + ["--out", str(tmp_path / "a"), "--workers", "1"]) == EXIT_OK
    assert cli_run(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == EXIT_OK
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    summary = json.loads(next((tmp_path / "a").glob("*.json")).read_text())
    assert [c["policy"] for c in summary["cells"]] == ["cm", "cm", "mle_greedy", "mle_greedy"]


def test_fixtures(tmp_path, capsys):
    assert cli_run(["fixtures", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data == json.loads((tmp_path / "fixtures.json").read_text())
    lb = [r for r in data["fixtures"] if r["kind"] == "lower_bound_k0"]
    assert [r["t"] for r in lb] == [100, 400, 900]
    assert lb[0]["delta"] == pytest.approx(0.30348, abs=1e-5)
    pairs = [r for r in data["fixtures"] if r["kind"] == "polynomial_pair"]
    assert [r["k"] for r in pairs] == [1, 2, 3]


def test_fixtures_reject_out_of_regime_t(capsys):
    assert cli_run(["fixtures", "--t", "10000", "--pair-k"]) == EXIT_USAGE


def test_verify_quick():
    assert cli_run(["verify", "--quick"]) == EXIT_OK


def test_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "markdown_pricing.cli", "tune", "--n", "100", "--k", "5"],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_INFEASIBLE
    assert "infeasible" in res.stderr
