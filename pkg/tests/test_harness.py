import json
import os

import numpy as np
import pytest

from wflow.cli import cli_main
from wflow.harness import (BASE_COLUMNS, BUNDLE_COLUMNS, ExperimentSpec,
                           format_value, replay_sidecar, resolve_plans,
                           run_experiment)


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.genfromtxt(fh, delimiter=",")
    if data.ndim == 1:
        data = data[None, :]
    return header, data


def _col(header, data, name):
    return data[:, header.index(name)]


def test_custom_zero_iterations_single_row(tmp_path):
    spec = ExperimentSpec("custom", overrides={"n": 20, "max_iters": 0},
                          seeds=[1], output_dir=tmp_path)
    paths = run_experiment(spec)
    assert len(paths) == 1
    header, data = _read_csv(paths[0])
    assert header == list(BASE_COLUMNS)
    assert data.shape[0] == 1 and data[0, 0] == 0


def test_sweep_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        spec = ExperimentSpec("custom", overrides={"n": 60},
                              seeds=[0, 1], output_dir=tmp_path / name)
        paths = run_experiment(spec)
        outs.append({p.name: p.read_bytes() for p in paths})
    assert outs[0] == outs[1]


def test_thread_count_does_not_change_bytes(tmp_path):
    blobs = []
    for threads in ("1", "4"):
        os.environ["WF_THREADS"] = threads
        try:
            spec = ExperimentSpec("custom", overrides={"n": 40},
                                  seeds=[0, 1, 2],
                                  output_dir=tmp_path / f"t{threads}")
            paths = run_experiment(spec)
            blobs.append({p.name: p.read_bytes() for p in paths})
        finally:
            del os.environ["WF_THREADS"]
    assert blobs[0] == blobs[1]


def test_sidecar_replay_reproduces_csv(tmp_path):
    spec = ExperimentSpec("custom", overrides={"n": 50}, seeds=[3],
                          output_dir=tmp_path)
    (csv_path,) = run_experiment(spec)
    sidecar = csv_path.with_suffix(".json")
    replayed = replay_sidecar(sidecar, tmp_path / "replayed.csv")
    assert replayed.read_bytes() == csv_path.read_bytes()


def test_bundle_plan_csv_schema_and_replay(tmp_path):
    spec = ExperimentSpec("fig4a", overrides={"n": 40, "max_iters": 120,
                                              "tol": 1e-6, "loo_count": 3},
                          seeds=[2], output_dir=tmp_path)
    (csv_path,) = run_experiment(spec)
    header, data = _read_csv(csv_path)
    assert header == list(BUNDLE_COLUMNS)
    assert _col(header, data, "d_loo")[0] == 0.0
    sidecar = json.loads(csv_path.with_suffix(".json").read_text())
    assert len(sidecar["config"]["loo_indices"]) == 3
    replayed = replay_sidecar(csv_path.with_suffix(".json"),
                              tmp_path / "replay.csv")
    assert replayed.read_bytes() == csv_path.read_bytes()


def test_population_family_avoids_saddle(tmp_path):
    spec = ExperimentSpec("fig3b", seeds=[0], output_dir=tmp_path)
    paths = run_experiment(spec)
    assert len(paths) == 3  # one per step size
    for p in paths:
        header, data = _read_csv(p)
        alpha = _col(header, data, "alpha")
        beta = _col(header, data, "beta")
        d_saddle = np.sqrt(alpha ** 2 + (beta - 1 / np.sqrt(3.0)) ** 2)
        assert np.min(d_saddle) > 0.0
        assert _col(header, data, "dist_rel")[-1] <= 1e-4


def test_manifest_lists_outputs_and_divergence_is_not_fatal(tmp_path):
    spec = ExperimentSpec("custom", overrides={"n": 20, "eta": 80.0},
                          seeds=[0], output_dir=tmp_path)
    paths = run_experiment(spec)
    assert paths == []
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"][0]["error"]
    assert manifest["version"]


def test_manifest_sorted_and_complete(tmp_path):
    spec = ExperimentSpec("custom", overrides={"n": 30}, seeds=[5, 1, 3],
                          output_dir=tmp_path)
    paths = run_experiment(spec)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    labels = [o["label"] for o in manifest["outputs"]]
    assert labels == sorted(labels)
    assert len(paths) == 3
    for entry in manifest["outputs"]:
        assert (tmp_path / entry["csv"]).exists()
        assert (tmp_path / entry["sidecar"]).exists()


def test_seventeen_digit_round_trip():
    vals = [1 / 3, np.pi, 1e-300, 123456.789, 0.1]
    for v in vals:
        assert float(format_value(v)) == v
    assert format_value(7) == "7"


def test_resolve_plans_families():
    fig1 = resolve_plans(ExperimentSpec("fig1", seeds=[0, 1]))
    assert len(fig1) == 10
    assert {p["n"] for p in fig1} == {100, 200, 500, 800, 1000}
    assert all(p["m"] == 10 * p["n"] for p in fig1)
    fig5 = resolve_plans(ExperimentSpec("fig5", seeds=[0]))
    assert fig5[0]["design"] == "rademacher" and fig5[0]["signal"] == "random"
    with pytest.raises(ValueError):
        resolve_plans(ExperimentSpec("fig1", overrides={"bogus": 1}))
    with pytest.raises(ValueError):
        ExperimentSpec("fig9000")
    with pytest.raises(ValueError):
        ExperimentSpec("fig1", seeds=[])


def test_cli_simulate_deterministic(tmp_path):
    args = ["simulate", "--n", "50", "--m", "500", "--eta", "0.1",
            "--seed", "42"]
    assert cli_main(args + ["--out", str(tmp_path / "r1")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "r2")]) == 0
    (c1,) = (tmp_path / "r1").glob("*.csv")
    (c2,) = (tmp_path / "r2").glob("*.csv")
    assert c1.read_bytes() == c2.read_bytes()


def test_cli_usage_errors():
    assert cli_main(["simulate", "--eta", "-1"]) == 1
    assert cli_main(["simulate", "--bogus-flag", "3"]) == 1
    assert cli_main(["nonsense"]) == 1
    assert cli_main([]) == 1


def test_cli_divergence_exit_code(tmp_path):
    code = cli_main(["simulate", "--n", "20", "--m", "200", "--eta", "80",
                     "--seed", "0", "--out", str(tmp_path)])
    assert code == 2


def test_cli_population_and_bundle(tmp_path):
    assert cli_main(["population", "--n", "100", "--eta", "0.1",
                     "--out", str(tmp_path / "pop")]) == 0
    assert cli_main(["bundle", "--n", "30", "--m", "300", "--iters", "80",
                     "--loo-count", "2", "--out", str(tmp_path / "bun")]) == 0
    (csv_path,) = (tmp_path / "bun").glob("*.csv")
    header, _ = _read_csv(csv_path)
    assert header == list(BUNDLE_COLUMNS)


def test_cli_figure_runs_family(tmp_path):
    code = cli_main(["figure", "custom", "--n", "40", "--seeds", "0,1",
                     "--out", str(tmp_path)])
    assert code == 0
    assert len(list(tmp_path.glob("*.csv"))) == 2
    assert (tmp_path / "manifest.json").exists()


def test_cli_fixed_init(tmp_path):
    vec = tmp_path / "x0.txt"
    np.savetxt(vec, np.full(30, 0.1))
    code = cli_main(["simulate", "--n", "30", "--m", "300", "--init", "fixed",
                     "--init-file", str(vec), "--out", str(tmp_path)])
    assert code == 0
    (csv_path,) = tmp_path.glob("*.csv")
    header, data = _read_csv(csv_path)
    # alpha at t=0 equals the fixed first coordinate
    assert _col(header, data, "alpha")[0] == pytest.approx(0.1, abs=1e-12)


def test_headers_stable_across_runs_of_one_subcommand(tmp_path):
    for seed in (0, 1):
        cli_main(["simulate", "--n", "30", "--m", "300", "--seed", str(seed),
                  "--out", str(tmp_path)])
    headers = {p.read_text().splitlines()[0] for p in tmp_path.glob("*.csv")}
    assert headers == {",".join(BASE_COLUMNS)}
