import pytest

from likelihood_embeddings.cli import create_parser, launch_app
from likelihood_embeddings.config import get_settings
from likelihood_embeddings.utils.file_utils import file_checksum, load_json

SMALL_VALIDATE = ["--datasets", "5", "--grid-resolution", "9,9", "--n", "30"]


def run(command, out, *extra, seed=7):
    return launch_app([command, "--seed", str(seed), "--out", str(out), *extra])


def test_seed_is_required():
    with pytest.raises(SystemExit):
        create_parser().parse_args(["validate"])


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        launch_app(["calibrate", "--seed", "1"])


def test_validate_writes_series_and_manifest(tmp_path):
    out = tmp_path / "validate"
    assert run("validate", out, *SMALL_VALIDATE) == 0

    lines = (out / "pointwise_validation.csv").read_text().splitlines()
    assert lines[0] == "m,epsilon_n,delta_n,bound_2n_eps,tightness"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]

    summary = load_json(out / "summary.json")
    assert summary["bound_violations"] == 0
    assert summary["reference"]["tightness_m1"] == 0.43
    m2 = summary["rows"][1]
    assert m2["epsilon_n"] <= 1e-10
    assert m2["tightness"] is None

    manifest = load_json(out / "manifest.json")
    assert manifest["exit_code"] == 0
    assert manifest["config"]["params"]["datasets"] == 5
    assert manifest["config"]["params"]["grid_resolution"] == [9, 9]
    assert manifest["outputs"]["pointwise_validation.csv"] == file_checksum(out / "pointwise_validation.csv")
    assert set(manifest["outputs"]) == {"pointwise_validation.csv", "reports.csv", "summary.json"}


def test_runs_are_reproducible_across_thread_counts(tmp_path):
    assert run("validate", tmp_path / "a", *SMALL_VALIDATE, "--threads", "1") == 0
    assert run("validate", tmp_path / "b", *SMALL_VALIDATE, "--threads", "3") == 0
    assert run("validate", tmp_path / "c", *SMALL_VALIDATE, "--threads", "1") == 0
    for name in ("pointwise_validation.csv", "reports.csv"):
        reference = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == reference
        assert (tmp_path / "c" / name).read_bytes() == reference


def test_different_seeds_give_different_results(tmp_path):
    run("validate", tmp_path / "a", *SMALL_VALIDATE, seed=1)
    run("validate", tmp_path / "b", *SMALL_VALIDATE, seed=2)
    assert (tmp_path / "a" / "reports.csv").read_bytes() != (tmp_path / "b" / "reports.csv").read_bytes()


def test_default_output_directory_comes_from_settings(tmp_path):
    assert launch_app(["validate", "--seed", "3", *SMALL_VALIDATE]) == 0
    assert (tmp_path / "results" / "validate" / "manifest.json").exists()


def test_unknown_parameter_is_an_operational_error(tmp_path):
    out = tmp_path / "bad"
    assert run("validate", out, "--bogus", "1") == 1
    assert load_json(out / "manifest.json")["exit_code"] == 1


def test_invalid_settings_stop_the_run(tmp_path, monkeypatch):
    monkeypatch.setattr(get_settings(), "gmm_weights", (0.5, 0.6, 0.2))
    out = tmp_path / "bad"
    assert run("validate", out, *SMALL_VALIDATE) == 1
    assert load_json(out / "manifest.json")["exit_code"] == 1
    assert not (out / "summary.json").exists()


def test_bad_parameter_value_is_an_operational_error(tmp_path):
    assert run("validate", tmp_path / "bad", "--datasets", "many") == 1


def test_non_positive_threads_rejected(tmp_path):
    assert run("validate", tmp_path / "bad", *SMALL_VALIDATE, "--threads", "0") == 1


def test_toml_config_with_cli_override(tmp_path):
    config = tmp_path / "config.toml"
    config.write_text("[experiment]\ndatasets = 2\ngrid_resolution = [5, 5]\nm_values = [2]\nn = 50\n")
    out = tmp_path / "toml"
    assert launch_app(["validate", "--seed", "1", "--out", str(out), "--config", str(config), "--n", "20"]) == 0
    params = load_json(out / "manifest.json")["config"]["params"]
    assert params["datasets"] == 2
    assert params["m_values"] == [2]
    assert params["n"] == 20


@pytest.mark.parametrize(
    "text",
    [
        "[experiment]\ndatasets = 2\n[extra]\nx = 1\n",
        "[experiment\ndatasets = 2\n",
        "datasets = 2\n",
        "[experiment]\nunknown_key = 2\n",
    ],
)
def test_bad_toml_config_is_rejected(tmp_path, text):
    config = tmp_path / "config.toml"
    config.write_text(text)
    assert launch_app(["validate", "--seed", "1", "--out", str(tmp_path / "out"), "--config", str(config)]) == 1


def test_missing_config_file(tmp_path):
    missing = tmp_path / "no.toml"
    assert launch_app(["validate", "--seed", "1", "--out", str(tmp_path / "out"), "--config", str(missing)]) == 1


def test_phase_transition_small_run(tmp_path):
    out = tmp_path / "phase"
    assert run("phase-transition", out, "--datasets", "3", "--grid-resolution", "7,7", "--n", "40") == 0
    lines = (out / "phase_transition.csv").read_text().splitlines()
    assert lines[0] == "m,epsilon_n,delta_n,epsilon_se,delta_se"
    assert len(lines) == 5
    summary = load_json(out / "summary.json")
    assert summary["selected_m"] == 2
    assert summary["delta_normalization"] == "per_sample"
    epsilon = {row["m"]: row["epsilon_n"] for row in summary["rows"]}
    assert epsilon[1] > 1e-3
    assert epsilon[2] <= 1e-10


def test_cauchy_decay_small_run(tmp_path):
    out = tmp_path / "cauchy"
    assert run("cauchy-decay", out, "--datasets", "3", "--grid-points", "21", "--m-values", "1,4") == 0
    rows = load_json(out / "summary.json")["rows"]
    assert [row["m"] for row in rows] == [1, 4]
    assert all(row["epsilon_n"] > 0 for row in rows)


def test_clinical_trial_small_run(tmp_path):
    out = tmp_path / "trial"
    extra = ["--n-sims", "10", "--beta-grid", "0,0.3", "--sites", "2", "--n-per-site", "30"]
    assert run("clinical-trial", out, *extra, "--threads", "2") == 0
    lines = (out / "power_curve.csv").read_text().splitlines()
    assert lines[0] == "beta,method,rejections,n_sims,power,ci_lo,ci_hi"
    assert len(lines) == 1 + 2 * 5
    report = load_json(out / "trial_report.json")
    assert len(report["seeds"]) == 10
    summary = load_json(out / "summary.json")
    assert set(summary["type1"]) == {"pooled", "full16", "mid12", "treat8", "meta"}


def test_train_gmm_small_run(tmp_path):
    out = tmp_path / "gmm"
    extra = [
        "--iterations", "30", "--checkpoint-every", "10", "--pool-size", "6", "--embed-dim", "4",
        "--encoder-hidden", "8", "--decoder-hidden", "8", "--n", "50", "--data-dim", "3",
    ]
    assert run("train-gmm", out, *extra) == 0
    log_lines = (out / "train_log.csv").read_text().splitlines()
    assert log_lines[0] == "iteration,loss,eps_heldout,delta_heldout"
    assert [line.split(",")[0] for line in log_lines[1:]] == ["10", "20", "30"]
    weights = load_json(out / "weights.json")
    assert weights["encoder"]["layers"][0]["shape"] == [8, 3]
    summary = load_json(out / "summary.json")
    assert summary["ratio_calibration"]["pairs"] == 15
    assert -1.0 <= summary["loglik_calibration"]["r"] <= 1.0


@pytest.mark.slow
def test_train_gmm_full_run_is_calibrated(tmp_path):
    out = tmp_path / "gmm"
    assert run("train-gmm", out, "--threads", "4", seed=2024) == 0
    summary = load_json(out / "summary.json")
    assert summary["loglik_calibration"]["r"] > 0.95
    assert summary["ratio_calibration"]["r"] > 0.95


@pytest.mark.slow
def test_phase_transition_full_run(tmp_path):
    out = tmp_path / "phase"
    assert run("phase-transition", out, "--threads", "4", seed=2024) == 0
    summary = load_json(out / "summary.json")
    epsilon = {row["m"]: row["epsilon_n"] for row in summary["rows"]}
    assert epsilon[1] > 0.5
    assert epsilon[2] / epsilon[1] < 1e-8
    assert epsilon[3] <= epsilon[2] + 1e-10
    assert epsilon[4] <= epsilon[2] + 1e-10
    assert summary["selected_m"] == 2
    assert summary["bound_violations"] == 0


@pytest.mark.slow
def test_cauchy_decay_full_run(tmp_path):
    out = tmp_path / "cauchy"
    assert run("cauchy-decay", out, "--threads", "4", seed=2024) == 0
    rows = load_json(out / "summary.json")["rows"]
    assert [row["m"] for row in rows] == list(range(1, 9))
    for prev, cur in zip(rows, rows[1:]):
        assert cur["epsilon_n"] <= prev["epsilon_n"] + 2.0 * max(prev["epsilon_se"], cur["epsilon_se"])
    assert rows[-1]["epsilon_n"] > 0.01
    assert rows[-1]["epsilon_n"] < rows[0]["epsilon_n"]
    assert rows[-1]["delta_n"] < rows[0]["delta_n"]
