import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ndtlime.bench import (
    ExperimentConfig,
    config_from_dict,
    fmt6,
    prepare_out_dir,
    resolve_dataset,
    round6,
    run_boundary_grid,
    run_depth_sweep,
    run_k_sweep,
    run_stability_matrix,
    run_table,
    write_boundary_grid,
    write_depth_sweep,
    write_k_sweep,
    write_stability_matrix,
    write_table,
)
from ndtlime.cli import main as cli_main

TINY_TABLE = ExperimentConfig(
    dataset="iris",
    n_seeds=1,
    n_test_instances=6,
    n_repeats=3,
    n_samples=200,
    mlp_epochs=30,
    finetune_epochs=50,
    seed=0,
)

TINY_GRID = ExperimentConfig(
    dataset="blobs",
    n_rows=300,
    blob_features=2,
    n_seeds=1,
    n_samples=200,
    mlp_epochs=40,
    finetune_epochs=50,
    seed=0,
)


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- formatting


def test_round6_and_fmt6():
    assert round6(1.2345678) == 1.23457
    assert round6(0.5) == 0.5
    assert fmt6(float("nan")) == "NA"
    assert fmt6(None) == "NA"
    assert fmt6(np.int64(3)) == "3"
    assert fmt6(0.5) == "0.5"
    assert fmt6(1.2345678) == "1.23457"


def test_config_from_dict():
    cfg = config_from_dict({"dataset": "wine", "surrogates": ["LR"], "seed": 5})
    assert cfg.dataset == "wine"
    assert cfg.surrogates == ("LR",)
    assert cfg.seed == 5
    assert cfg.hidden_sizes == (64, 32)  # untouched default
    cfg = config_from_dict({"hidden_sizes": [8, 4], "features": None})
    assert cfg.hidden_sizes == (8, 4)
    assert cfg.features is None
    with pytest.raises(ValueError):
        config_from_dict({"n_sample": 100})


def test_resolve_dataset_generators_and_feature_selection():
    cfg = ExperimentConfig(dataset="friedman1", n_rows=50)
    a = resolve_dataset(cfg, run_seed=1)
    b = resolve_dataset(cfg, run_seed=2)
    assert a.X.shape == (50, 10)
    assert not np.array_equal(a.X, b.X)

    sel = ExperimentConfig(dataset="friedman1", n_rows=50, features=("x2", 0))
    d = resolve_dataset(sel, run_seed=1)
    assert d.feature_names == ("x2", "x1")
    assert np.array_equal(d.X[:, 1], a.X[:, 0])

    blobs = resolve_dataset(ExperimentConfig(dataset="blobs", n_rows=40), run_seed=0)
    assert blobs.task == "classification" and blobs.X.shape == (40, 2)


# ---------------------------------------------------------------- run-table


def test_run_table_structure_and_determinism():
    payload = run_table(TINY_TABLE)
    assert payload["kind"] == "table"
    assert payload["dataset"] == "iris"
    assert payload["surrogates"] == ["LR", "DT", "NDT"]
    assert payload["errors"] == []
    for sur in ("LR", "DT", "NDT"):
        for metric in ("fidelity", "stability", "regularity"):
            cell = payload["cells"][sur][metric]
            assert set(cell) == {"mean", "std", "n_used"}
            assert cell["n_used"] == 6
            assert np.isfinite(cell["mean"])
    again = run_table(TINY_TABLE)
    assert json.dumps(payload, sort_keys=True) == json.dumps(again, sort_keys=True)


def test_write_table_files(tmp_path):
    payload = run_table(TINY_TABLE)
    paths = write_table(payload, tmp_path)
    assert [p.name for p in paths] == ["table.csv", "table.json"]
    rows = read_csv_rows(tmp_path / "table.csv")
    assert rows[0][0] == "dataset"
    assert len(rows[0]) == 1 + 9  # three metrics for each of three surrogates
    assert rows[1][0] == "iris"
    assert all("±" in cell for cell in rows[1][1:])
    doc = json.loads((tmp_path / "table.json").read_text())
    assert doc["cells"]["LR"]["fidelity"]["mean"] == payload["cells"]["LR"]["fidelity"]["mean"]


# ---------------------------------------------------------------- sweeps


def test_depth_sweep_rows():
    cfg = ExperimentConfig(
        dataset="friedman1",
        n_rows=200,
        n_seeds=1,
        surrogates=("LR",),
        n_test_instances=5,
        n_samples=200,
        mlp_epochs=20,
        seed=0,
    )
    payload = run_depth_sweep(cfg, [1, 2])
    assert payload["kind"] == "depth_sweep"
    assert [(r["depth"], r["surrogate"]) for r in payload["rows"]] == [
        (1, "LR"),
        (2, "LR"),
    ]
    for r in payload["rows"]:
        assert r["n_used"] == 5
        assert np.isfinite(r["fidelity_mean"])
    with pytest.raises(ValueError):
        run_depth_sweep(cfg, [])


def test_k_sweep_rows_and_max_k_guard():
    cfg = ExperimentConfig(
        dataset="blobs",
        n_rows=200,
        blob_features=2,
        n_seeds=1,
        surrogates=("LR",),
        n_test_instances=6,
        n_samples=200,
        mlp_epochs=20,
        seed=0,
    )
    payload = run_k_sweep(cfg, [1, 2, 3])
    assert [(r["k"], r["surrogate"]) for r in payload["rows"]] == [
        (1, "LR"),
        (2, "LR"),
        (3, "LR"),
    ]
    again = run_k_sweep(cfg, [1, 2, 3])
    assert json.dumps(payload, sort_keys=True) == json.dumps(again, sort_keys=True)

    # a k larger than the instance pool is recorded, not raised
    blocked = run_k_sweep(cfg, [10])
    assert blocked["rows"] == []
    assert any("max k" in e["error"] for e in blocked["errors"])
    with pytest.raises(ValueError):
        run_k_sweep(cfg, [])


def test_sweep_writers(tmp_path):
    cfg = ExperimentConfig(
        dataset="blobs",
        n_rows=200,
        blob_features=2,
        n_seeds=1,
        surrogates=("LR",),
        n_test_instances=6,
        n_samples=200,
        mlp_epochs=20,
        seed=0,
    )
    d = tmp_path / "depth"
    d.mkdir()
    payload = run_depth_sweep(cfg, [1])
    write_depth_sweep(payload, d)
    rows = read_csv_rows(d / "depth_sweep.csv")
    assert rows[0] == ["dataset", "depth", "surrogate", "fidelity_mean", "fidelity_std", "n_used"]
    assert len(rows) == 2

    k = tmp_path / "k"
    k.mkdir()
    payload = run_k_sweep(cfg, [1, 2])
    write_k_sweep(payload, k)
    rows = read_csv_rows(k / "k_sweep.csv")
    assert rows[0][1] == "k"
    assert len(rows) == 3


# ---------------------------------------------------------------- boundary grid


def test_boundary_grid_classification():
    payload = run_boundary_grid(TINY_GRID, resolution=20)
    assert payload["kind"] == "boundary_grid"
    assert payload["classification"] is True
    assert payload["columns"] == [
        "x1",
        "x2",
        "f_pred",
        "dt_pred",
        "ndt_init_pred",
        "ndt_tuned_pred",
    ]
    rows = payload["rows"]
    assert len(rows) == 400
    assert all(len(r) == 6 for r in rows)
    # x varies slowest: the first resolution rows share an x and sweep y
    assert rows[0][0] == rows[19][0]
    assert rows[0][1] != rows[1][1]
    assert rows[20][0] != rows[0][0]
    # class-index columns stay within the label set
    for r in rows:
        assert r[3] in (0, 1) and r[2] in (0, 1)
    diag = payload["diagnostics"]
    for key in ("init_loss", "tuned_loss", "finetune_diverged", "init_agreement", "tuned_agreement"):
        assert key in diag
    assert 0.0 <= diag["init_agreement"] <= 1.0


def test_boundary_grid_regression_variant():
    cfg = ExperimentConfig(
        dataset="friedman1",
        n_rows=300,
        features=("x1", "x2"),
        n_seeds=1,
        n_samples=200,
        mlp_epochs=40,
        finetune_epochs=50,
        seed=0,
    )
    payload = run_boundary_grid(cfg, resolution=10)
    assert payload["classification"] is False
    assert len(payload["rows"]) == 100
    assert "init_agreement" not in payload["diagnostics"]
    # regression predictions are real-valued on the grid
    assert any(isinstance(r[2], float) for r in payload["rows"])


def test_boundary_grid_validation(tmp_path):
    with pytest.raises(ValueError):
        run_boundary_grid(replace_cfg(TINY_GRID, dataset="iris"))
    with pytest.raises(ValueError):
        run_boundary_grid(TINY_GRID, resolution=1)
    with pytest.raises(ValueError):
        run_boundary_grid(TINY_GRID, instance_index=10_000)


def replace_cfg(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def test_write_boundary_grid(tmp_path):
    payload = run_boundary_grid(TINY_GRID, resolution=10)
    write_boundary_grid(payload, tmp_path)
    rows = read_csv_rows(tmp_path / "boundary_grid.csv")
    assert rows[0] == payload["columns"]
    assert len(rows) == 101
    doc = json.loads((tmp_path / "boundary_grid.json").read_text())
    assert doc["diagnostics"]["tuned_loss"] == payload["diagnostics"]["tuned_loss"]


# ---------------------------------------------------------------- stability matrix


def test_run_stability_matrix_structure(tmp_path):
    cfg = replace_cfg(TINY_TABLE, surrogates=("LR",), n_repeats=4)
    payload = run_stability_matrix(cfg, instance_index=2)
    assert payload["instance_index"] == 2
    entry = payload["matrices"]["LR"]
    M = np.asarray(entry["matrix"])
    assert M.shape == (4, 4)
    assert np.array_equal(M, M.T)
    assert np.array_equal(np.diag(M), np.ones(4))
    upper = M[np.triu_indices(4, k=1)]
    assert entry["stability"] == pytest.approx(upper.mean(), abs=1e-5)

    write_stability_matrix(payload, tmp_path)
    rows = read_csv_rows(tmp_path / "stability_matrix_LR.csv")
    assert len(rows) == 4 and len(rows[0]) == 4
    assert (tmp_path / "stability_matrix.json").exists()

    with pytest.raises(ValueError):
        run_stability_matrix(cfg, instance_index=-1)


# ---------------------------------------------------------------- output dirs


def test_prepare_out_dir(tmp_path):
    target = tmp_path / "a" / "b"
    path = prepare_out_dir(target)
    assert path.is_dir()
    # an empty existing directory is fine
    assert prepare_out_dir(target) == path
    (target / "junk.txt").write_text("x")
    with pytest.raises(FileExistsError):
        prepare_out_dir(target)
    assert prepare_out_dir(target, overwrite=True) == path


# ---------------------------------------------------------------- CLI


def write_config(tmp_path) -> Path:
    doc = {
        "dataset": "iris",
        "n_seeds": 1,
        "n_test_instances": 6,
        "n_repeats": 3,
        "n_samples": 200,
        "mlp_epochs": 30,
        "finetune_epochs": 50,
        "surrogates": ["LR", "DT"],
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def test_cli_run_table_end_to_end(tmp_path, capsys):
    cfgp = write_config(tmp_path)
    out = tmp_path / "out"
    code = cli_main(
        ["run-table", "--config", str(cfgp), "--out", str(out), "--seed", "0"]
    )
    assert code == 0
    assert (out / "table.csv").exists()
    assert (out / "table.json").exists()
    assert (out / "errors.json").exists()
    assert (out / "table.png").stat().st_size > 0
    printed = capsys.readouterr().out
    assert "table.csv" in printed

    # a second run into the same directory must refuse to clobber
    code = cli_main(
        ["run-table", "--config", str(cfgp), "--out", str(out), "--seed", "0"]
    )
    assert code == 1

    # and --overwrite allows it
    code = cli_main(
        ["run-table", "--config", str(cfgp), "--out", str(out), "--seed", "0", "--overwrite"]
    )
    assert code == 0


def test_cli_no_figures_skips_png(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "out"
    code = cli_main(
        ["run-table", "--config", str(cfgp), "--out", str(out), "--no-figures"]
    )
    assert code == 0
    assert (out / "table.csv").exists()
    assert not (out / "table.png").exists()


def test_cli_bad_dataset_reports_error(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli_main(
        ["boundary-grid", "--dataset", "iris", "--out", str(out), "--no-figures"]
    )
    assert code == 1
    doc = json.loads((out / "errors.json").read_text())
    assert doc["errors"]
    assert "2 features" in doc["errors"][0]["error"]


def test_cli_unknown_config_key_fails_fast(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"bogus": 1}))
    out = tmp_path / "out"
    code = cli_main(["run-table", "--config", str(p), "--out", str(out)])
    assert code == 1
    assert not out.exists()


def test_cli_seed_flag_changes_outputs(tmp_path):
    cfgp = write_config(tmp_path)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, seed in ((a, "0"), (b, "0"), (c, "123")):
        code = cli_main(
            ["run-table", "--config", str(cfgp), "--out", str(out), "--seed", seed, "--no-figures"]
        )
        assert code == 0
    same = (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()
    diff = (a / "table.csv").read_bytes() != (c / "table.csv").read_bytes()
    assert same and diff
