"""CLI subcommands end to end, exit codes, and manifest reproducibility."""

import json

import numpy as np

from loadforge.cli import main
from loadforge.dataio import (
    read_factor_model,
    read_transition_table,
    sha256_file,
    write_current_matrix,
    write_power_series,
)
from loadforge.factorize import CurrentMatrix
from loadforge.stats import PowerSeries


def planted_current_file(path, rank, seed=0, n=40, t=90):
    # archetype signatures keep the power projection positive so
    # normalization after learning succeeds
    from loadforge.presets import signature_template

    rng = np.random.default_rng(seed)
    kinds = ("resistive", "motor", "rectifier")
    signatures = np.column_stack([
        signature_template(kinds[i], n_samples=n).template[:, 0] for i in range(rank)
    ])
    activations = rng.uniform(200.0, 1500.0, size=(rank, t))
    write_current_matrix(path, CurrentMatrix(signatures @ activations))


def test_version_subcommand(capsys):
    assert main(["version"]) == 0
    assert "loadforge" in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error():
    assert main(["bogus"]) == 2


def test_missing_required_flag_is_usage_error():
    assert main(["learn", "--input", "x.csv"]) == 2


def test_missing_file_is_parse_error(tmp_path):
    out = tmp_path / "model.csv"
    assert main(["learn", "--input", str(tmp_path / "nope.csv"), "--out", str(out)]) == 3


def test_learn_auto_selects_planted_rank(tmp_path, capsys):
    data = tmp_path / "current.csv"
    planted_current_file(data, rank=2, seed=1)
    out = tmp_path / "model.csv"
    code = main([
        "learn", "--input", str(data), "--k", "auto", "--snr-target", "50",
        "--seed", "3", "--out", str(out),
    ])
    assert code == 0
    assert "selected k=2" in capsys.readouterr().out
    model = read_factor_model(out)
    assert model.k == 2
    manifest = json.loads((tmp_path / "model.csv.manifest.json").read_text())
    assert manifest["files"]["model.csv"] == sha256_file(out)
    assert manifest["seed"] == 3


def test_learn_fixed_k(tmp_path):
    data = tmp_path / "current.csv"
    planted_current_file(data, rank=1, seed=2)
    out = tmp_path / "model.csv"
    assert main(["learn", "--input", str(data), "--k", "1", "--out", str(out)]) == 0
    assert read_factor_model(out).k == 1


def test_learn_rejects_nan_input(tmp_path):
    data = tmp_path / "current.csv"
    data.write_text("2,2\n1,nan\n3,4\n")
    assert main(["learn", "--input", str(data), "--out", str(tmp_path / "m.csv")]) == 3


def test_analyze_power_report(tmp_path):
    t = np.arange(3 * 2880)
    watts = 500.0 + 200.0 * np.sin(2 * np.pi * t / 2880.0)
    rng = np.random.default_rng(3)
    watts += rng.normal(0, 5, watts.size)
    data = tmp_path / "power.csv"
    write_power_series(data, PowerSeries(30.0 * t, watts, 30.0))
    report = tmp_path / "report.csv"
    code = main([
        "analyze", "--input", str(data), "--kind", "power",
        "--resample", "30s,1h", "--report", str(report),
    ])
    assert code == 0
    rows = dict(
        line.split(",") for line in report.read_text().strip().splitlines()[1:]
    )
    for key in ("kurtosis", "entropy_nats", "laplace_scale", "acf_1day_30s", "acf_1day_1h"):
        assert key in rows and np.isfinite(float(rows[key]))
    assert "thd_mean_percent" not in rows


def test_analyze_current_report_includes_thd(tmp_path):
    rng = np.random.default_rng(4)
    n = 100
    v_shape = np.sin(2 * np.pi * np.arange(n) / n)
    periods = 3 * 2880
    amps = 2.0 + 0.5 * np.sin(2 * np.pi * np.arange(periods) / 2880.0)
    values = np.outer(v_shape, amps) + 0.01 * rng.normal(size=(n, periods))
    data = tmp_path / "current.csv"
    write_current_matrix(data, CurrentMatrix(values))
    report = tmp_path / "report.csv"
    code = main([
        "analyze", "--input", str(data), "--kind", "current", "--report", str(report),
    ])
    assert code == 0
    rows = dict(
        line.split(",") for line in report.read_text().strip().splitlines()[1:]
    )
    assert "thd_mean_percent" in rows and float(rows["thd_mean_percent"]) >= 0.0


def test_infer_activations_hourly(tmp_path):
    rng = np.random.default_rng(5)
    t = np.arange(14 * 2880)
    on = (np.sin(2 * np.pi * t / 2880.0) > 0.2) & (rng.random(t.size) > 0.1)
    data = tmp_path / "power.csv"
    write_power_series(data, PowerSeries(30.0 * t, 500.0 * on, 30.0))
    out = tmp_path / "table.csv"
    code = main([
        "infer-activations", "--power", str(data), "--partition", "hourly",
        "--out", str(out),
    ])
    assert code == 0
    table = read_transition_table(out)
    np.testing.assert_allclose(table.gamma.sum(axis=1), 1.0, atol=1e-9)


def test_infer_activations_halfminute(tmp_path):
    t = np.arange(14 * 2880)
    data = tmp_path / "power.csv"
    write_power_series(data, PowerSeries(30.0 * t, np.full(t.size, 320.0), 30.0))
    out = tmp_path / "template.csv"
    code = main([
        "infer-activations", "--power", str(data), "--partition", "halfminute",
        "--out", str(out),
    ])
    assert code == 0
    from loadforge.dataio import read_activation_template

    template = read_activation_template(out)
    observed = template.values[template.values > 0]
    np.testing.assert_allclose(observed, 320.0, rtol=1e-8)


def test_generate_default_recipe_and_determinism(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["generate", "--seed", "5", "--span-days", "0.05"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    manifest_a = json.loads((out_a / "manifest.json").read_text())
    manifest_b = json.loads((out_b / "manifest.json").read_text())
    assert manifest_a == manifest_b
    assert len(manifest_a["buildings"]) == 8
    for building, payload in manifest_a["buildings"].items():
        for rel, digest in payload["files"].items():
            assert sha256_file(out_a / building / rel) == digest
            assert sha256_file(out_b / building / rel) == digest


def test_generate_custom_config(tmp_path):
    config = tmp_path / "site.toml"
    config.write_text(
        """
seed = 9

[[building]]
name = "lab"
span_days = 0.05
hf_ground_truth = true

[[building.category]]
id = "heater"

[[building.category.device]]
name = "heater_1"
class = "A"
signature = "resistive"
transitions = "office"
on_power_watts = 1500.0

[[building.category]]
id = "hvac"

[[building.category.device]]
name = "ahu"
class = "D"
k = 2
signature = "motor"
template = "office"
scale_watts = 8000.0
alpha = [5.0, 5.0]
"""
    )
    out = tmp_path / "site"
    assert main(["generate", "--config", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9
    files = manifest["buildings"]["lab"]["files"]
    assert "cat_heater_current.csv" in files and "cat_hvac_current.csv" in files


def test_generate_rejects_malformed_toml(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[[building]\nname=")
    assert main(["generate", "--config", str(config), "--out", str(tmp_path / "o")]) == 3


def test_generate_rejects_three_phase_config(tmp_path):
    config = tmp_path / "threephase.toml"
    config.write_text(
        """
[[building]]
name = "plant"
span_days = 0.05
mains = { phases = 3 }

[[building.category]]
id = "x"

[[building.category.device]]
name = "d"
class = "A"
transitions = "office"
on_power_watts = 100.0
"""
    )
    assert main(["generate", "--config", str(config), "--out", str(tmp_path / "o")]) == 3
