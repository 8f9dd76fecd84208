"""Benchmark harness: seeded experiment runs emitting CSV reports with JSON twins.

Seed layout: run s uses run_seed = seed + 1_000_000 s for data generation,
splitting, and (offset) black-box training; instance i explains with
inst_seed = run_seed + 1000 (i + 1), and stability repeats use
inst_seed + 0 .. inst_seed + R - 1. Every output value is a pure function of
the configuration, so a rerun reproduces files byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .blackbox import MlpTrainConfig, mlp_train
from .data import Dataset, bundled_path, load_csv, standardize_split, synth_blobs, synth_friedman1
from .explain import NeighborhoodConfig, SurrogateConfig, explain_instance, perturb, proximity_weights
from .metrics import average_metric, regularity_k, stability, stability_matrix
from .ndt import FinetuneConfig, convert_dt_to_ndt, ndt_finetune, ndt_forward
from .tree import fit_weighted_cart, tree_predict

GENERATORS = ("friedman1", "blobs")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "iris"
    target_column: str = "target"
    task: str = "auto"
    features: tuple[str, ...] | None = None  # restrict columns (boundary grid)
    n_rows: int = 2000  # synthetic generators only
    noise_std: float = 0.0
    blob_features: int = 2
    blob_classes: int = 2
    blob_separation: float = 4.0
    test_fraction: float = 0.25
    hidden_sizes: tuple[int, ...] = (64, 32)
    mlp_learning_rate: float = 0.05
    mlp_epochs: int = 150
    mlp_batch_size: int = 32
    surrogates: tuple[str, ...] = ("LR", "DT", "NDT")
    n_samples: int = 800
    kernel_width: float | None = None
    perturb_scale: float = 1.0
    max_depth: int = 4
    gamma1: float = 1.0
    gamma2: float = 1.0
    finetune_learning_rate: float = 0.01
    finetune_epochs: int = 200
    n_test_instances: int = 20
    n_repeats: int = 5
    k: int = 2
    n_seeds: int = 3
    seed: int = 0


def config_from_dict(overrides: dict) -> ExperimentConfig:
    """Build a config from a flat key-value document, rejecting unknown keys."""
    base = asdict(ExperimentConfig())
    for key, value in overrides.items():
        if key not in base:
            raise ValueError(f"unknown configuration key {key!r}")
        if isinstance(base[key], tuple) or key in ("hidden_sizes", "surrogates", "features"):
            value = tuple(value) if value is not None else None
        base[key] = value
    return ExperimentConfig(**base)


def _neighborhood(cfg: ExperimentConfig) -> NeighborhoodConfig:
    return NeighborhoodConfig(
        n_samples=cfg.n_samples,
        kernel_width=cfg.kernel_width,
        perturb_scale=cfg.perturb_scale,
        seed=0,
    )


def _surrogate_cfg(cfg: ExperimentConfig) -> SurrogateConfig:
    return SurrogateConfig(
        max_depth=cfg.max_depth,
        gamma1=cfg.gamma1,
        gamma2=cfg.gamma2,
        learning_rate=cfg.finetune_learning_rate,
        epochs=cfg.finetune_epochs,
    )


def resolve_dataset(cfg: ExperimentConfig, run_seed: int) -> Dataset:
    name = cfg.dataset
    if name == "friedman1":
        data = synth_friedman1(cfg.n_rows, cfg.noise_std, seed=run_seed)
    elif name == "blobs":
        data = synth_blobs(
            cfg.n_rows,
            d=cfg.blob_features,
            C=cfg.blob_classes,
            separation=cfg.blob_separation,
            seed=run_seed,
        )
    elif name in ("iris", "wine"):
        data = load_csv(bundled_path(name), "target", task="classification")
    else:
        data = load_csv(name, cfg.target_column, cfg.task)
    if cfg.features is not None:
        idx = []
        for sel in cfg.features:
            if isinstance(sel, str) and sel in data.feature_names:
                idx.append(data.feature_names.index(sel))
            else:
                idx.append(int(sel))
        data = Dataset(
            X=data.X[:, idx],
            y=data.y,
            feature_names=tuple(data.feature_names[i] for i in idx),
            task=data.task,
        )
    return data


@dataclass
class RunContext:
    train: Dataset
    test: Dataset
    f: object
    feature_std: np.ndarray
    instances: np.ndarray
    run_seed: int


def _prepare_run(
    cfg: ExperimentConfig, run_seed: int, hidden_sizes=None
) -> RunContext:
    data = resolve_dataset(cfg, run_seed)
    train, test = standardize_split(data, cfg.test_fraction, seed=run_seed)
    model = mlp_train(
        train,
        list(hidden_sizes or cfg.hidden_sizes),
        MlpTrainConfig(
            learning_rate=cfg.mlp_learning_rate,
            epochs=cfg.mlp_epochs,
            batch_size=cfg.mlp_batch_size,
            seed=run_seed + 777,
        ),
    )
    n_inst = min(cfg.n_test_instances, test.n)
    return RunContext(
        train=train,
        test=test,
        f=model.predict,
        feature_std=train.X.std(axis=0),
        instances=test.X[:n_inst],
        run_seed=run_seed,
    )


def _inst_seed(run_seed: int, i: int) -> int:
    return run_seed + 1000 * (i + 1)


def _vector_fn(ctx: RunContext, surrogate: str, ncfg, scfg):
    def fn(x, seed):
        expl = explain_instance(
            ctx.f, x, surrogate, replace(ncfg, seed=seed), scfg, ctx.feature_std
        )
        return expl.vector

    return fn


def round6(v: float) -> float:
    return float(f"{float(v):.6g}")


def fmt6(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


# ---------------------------------------------------------------- run-table


def run_table(cfg: ExperimentConfig) -> dict:
    """Fidelity, stability, and regularity per surrogate, pooled over seeds."""
    ncfg, scfg = _neighborhood(cfg), _surrogate_cfg(cfg)
    per = {
        s: {"fidelity": [], "stability": [], "regularity": []} for s in cfg.surrogates
    }
    errors: list[dict] = []
    for s_idx in range(cfg.n_seeds):
        run_seed = cfg.seed + 1_000_000 * s_idx
        try:
            ctx = _prepare_run(cfg, run_seed)
        except Exception as exc:
            errors.append({"where": f"run[{s_idx}]", "error": str(exc)})
            continue
        for sur in cfg.surrogates:
            vectors = []
            for i, x in enumerate(ctx.instances):
                seed_i = _inst_seed(run_seed, i)
                try:
                    expl = explain_instance(
                        ctx.f, x, sur, replace(ncfg, seed=seed_i), scfg, ctx.feature_std
                    )
                    per[sur]["fidelity"].append(expl.local_fidelity)
                    vectors.append(expl.vector)
                except Exception as exc:
                    errors.append(
                        {"where": f"run[{s_idx}]/{sur}/fidelity[{i}]", "error": str(exc)}
                    )
                    per[sur]["fidelity"].append(float("nan"))
                    vectors.append(np.zeros(ctx.train.d))
                try:
                    st = stability(
                        _vector_fn(ctx, sur, ncfg, scfg), x, cfg.n_repeats, seed_i
                    )
                    per[sur]["stability"].append(st)
                except Exception as exc:
                    errors.append(
                        {"where": f"run[{s_idx}]/{sur}/stability[{i}]", "error": str(exc)}
                    )
                    per[sur]["stability"].append(float("nan"))
            try:
                regs = regularity_k(np.asarray(vectors), ctx.instances, cfg.k)
                per[sur]["regularity"].extend(regs.tolist())
            except Exception as exc:
                errors.append(
                    {"where": f"run[{s_idx}]/{sur}/regularity", "error": str(exc)}
                )

    cells: dict[str, dict] = {}
    for sur in cfg.surrogates:
        cells[sur] = {}
        for metric in ("fidelity", "stability", "regularity"):
            try:
                mean, std, n_used = average_metric(per[sur][metric])
                cells[sur][metric] = {
                    "mean": round6(mean),
                    "std": round6(std),
                    "n_used": n_used,
                }
            except Exception as exc:
                errors.append({"where": f"{sur}/{metric}", "error": str(exc)})
                cells[sur][metric] = None
    return {
        "kind": "table",
        "dataset": cfg.dataset,
        "surrogates": list(cfg.surrogates),
        "cells": cells,
        "errors": errors,
        "config": _config_echo(cfg),
    }


def write_table(payload: dict, out_dir: Path) -> list[Path]:
    header = ["dataset"]
    row = [payload["dataset"]]
    for sur in payload["surrogates"]:
        for metric in ("fidelity", "stability", "regularity"):
            header.append(f"{sur}_{metric}")
            cell = payload["cells"][sur][metric]
            if cell is None:
                row.append("NA")
            else:
                row.append(f"{fmt6(cell['mean'])}±{fmt6(cell['std'])}")
    csv_path = out_dir / "table.csv"
    _write_csv(csv_path, header, [row])
    json_path = out_dir / "table.json"
    _write_json(json_path, payload)
    return [csv_path, json_path]


# ---------------------------------------------------------------- sweeps


def run_depth_sweep(cfg: ExperimentConfig, depths) -> dict:
    """Fidelity per surrogate while the black box grows one hidden layer at a time."""
    depths = list(depths)
    if not depths:
        raise ValueError("depth range must be non-empty")
    ncfg, scfg = _neighborhood(cfg), _surrogate_cfg(cfg)
    per = {(depth, sur): [] for depth in depths for sur in cfg.surrogates}
    errors: list[dict] = []
    for s_idx in range(cfg.n_seeds):
        run_seed = cfg.seed + 1_000_000 * s_idx
        for depth in depths:
            try:
                ctx = _prepare_run(cfg, run_seed, hidden_sizes=[16] * depth)
            except Exception as exc:
                errors.append(
                    {"where": f"run[{s_idx}]/depth[{depth}]", "error": str(exc)}
                )
                continue
            for sur in cfg.surrogates:
                for i, x in enumerate(ctx.instances):
                    seed_i = _inst_seed(run_seed, i)
                    try:
                        expl = explain_instance(
                            ctx.f,
                            x,
                            sur,
                            replace(ncfg, seed=seed_i),
                            scfg,
                            ctx.feature_std,
                        )
                        per[(depth, sur)].append(expl.local_fidelity)
                    except Exception as exc:
                        errors.append(
                            {
                                "where": f"run[{s_idx}]/depth[{depth}]/{sur}[{i}]",
                                "error": str(exc),
                            }
                        )
    rows = []
    for depth in depths:
        for sur in cfg.surrogates:
            try:
                mean, std, n_used = average_metric(per[(depth, sur)])
                rows.append(
                    {
                        "dataset": cfg.dataset,
                        "depth": depth,
                        "surrogate": sur,
                        "fidelity_mean": round6(mean),
                        "fidelity_std": round6(std),
                        "n_used": n_used,
                    }
                )
            except Exception as exc:
                errors.append({"where": f"depth[{depth}]/{sur}", "error": str(exc)})
    return {
        "kind": "depth_sweep",
        "rows": rows,
        "errors": errors,
        "config": _config_echo(cfg),
    }


def write_depth_sweep(payload: dict, out_dir: Path) -> list[Path]:
    header = ["dataset", "depth", "surrogate", "fidelity_mean", "fidelity_std", "n_used"]
    rows = [
        [r["dataset"], r["depth"], r["surrogate"], fmt6(r["fidelity_mean"]),
         fmt6(r["fidelity_std"]), r["n_used"]]
        for r in payload["rows"]
    ]
    csv_path = out_dir / "depth_sweep.csv"
    _write_csv(csv_path, header, rows)
    json_path = out_dir / "depth_sweep.json"
    _write_json(json_path, payload)
    return [csv_path, json_path]


def run_k_sweep(cfg: ExperimentConfig, ks) -> dict:
    """Regularity as the neighbor count grows; explanations are fit once per run."""
    ks = list(ks)
    if not ks:
        raise ValueError("k range must be non-empty")
    ncfg, scfg = _neighborhood(cfg), _surrogate_cfg(cfg)
    per = {(k, sur): [] for k in ks for sur in cfg.surrogates}
    errors: list[dict] = []
    for s_idx in range(cfg.n_seeds):
        run_seed = cfg.seed + 1_000_000 * s_idx
        try:
            ctx = _prepare_run(cfg, run_seed)
        except Exception as exc:
            errors.append({"where": f"run[{s_idx}]", "error": str(exc)})
            continue
        if max(ks) >= len(ctx.instances):
            errors.append(
                {
                    "where": f"run[{s_idx}]",
                    "error": f"max k {max(ks)} needs more than {len(ctx.instances)} instances",
                }
            )
            continue
        for sur in cfg.surrogates:
            vectors = []
            for i, x in enumerate(ctx.instances):
                seed_i = _inst_seed(run_seed, i)
                try:
                    expl = explain_instance(
                        ctx.f, x, sur, replace(ncfg, seed=seed_i), scfg, ctx.feature_std
                    )
                    vectors.append(expl.vector)
                except Exception as exc:
                    errors.append(
                        {"where": f"run[{s_idx}]/{sur}[{i}]", "error": str(exc)}
                    )
                    vectors.append(np.zeros(ctx.train.d))
            E = np.asarray(vectors)
            for k in ks:
                per[(k, sur)].extend(regularity_k(E, ctx.instances, k).tolist())
    rows = []
    for k in ks:
        for sur in cfg.surrogates:
            try:
                mean, std, n_used = average_metric(per[(k, sur)])
                rows.append(
                    {
                        "dataset": cfg.dataset,
                        "k": k,
                        "surrogate": sur,
                        "regularity_mean": round6(mean),
                        "regularity_std": round6(std),
                        "n_used": n_used,
                    }
                )
            except Exception as exc:
                errors.append({"where": f"k[{k}]/{sur}", "error": str(exc)})
    return {
        "kind": "k_sweep",
        "rows": rows,
        "errors": errors,
        "config": _config_echo(cfg),
    }


def write_k_sweep(payload: dict, out_dir: Path) -> list[Path]:
    header = ["dataset", "k", "surrogate", "regularity_mean", "regularity_std", "n_used"]
    rows = [
        [r["dataset"], r["k"], r["surrogate"], fmt6(r["regularity_mean"]),
         fmt6(r["regularity_std"]), r["n_used"]]
        for r in payload["rows"]
    ]
    csv_path = out_dir / "k_sweep.csv"
    _write_csv(csv_path, header, rows)
    json_path = out_dir / "k_sweep.json"
    _write_json(json_path, payload)
    return [csv_path, json_path]


# ---------------------------------------------------------------- boundary grid


def run_boundary_grid(
    cfg: ExperimentConfig,
    resolution: int = 100,
    instance_index: int = 0,
    bounds=None,
) -> dict:
    """Predictions of the black box, the tree, and both NDT stages on a 2-d lattice.

    The surrogates are fit on the perturbation neighborhood of one test
    instance, then evaluated over the grid. Classification columns hold class
    indices, regression columns values.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    run_seed = cfg.seed
    ctx = _prepare_run(cfg, run_seed)
    if ctx.train.d != 2:
        raise ValueError(
            f"boundary grid needs exactly 2 features, dataset has {ctx.train.d}"
        )
    if not 0 <= instance_index < ctx.test.n:
        raise ValueError(f"instance index {instance_index} out of range")
    x = ctx.test.X[instance_index]
    ncfg = replace(_neighborhood(cfg), seed=_inst_seed(run_seed, instance_index))
    scfg = _surrogate_cfg(cfg)

    Xp = perturb(x, ctx.feature_std, ncfg)
    F = np.asarray(ctx.f(Xp), dtype=float)
    w = proximity_weights(Xp, x, ncfg.resolved_width(2))
    classification = F.ndim == 2

    if classification:
        labels = np.argmax(F, axis=1).astype(np.int64)
        if np.all(labels == labels[0]):
            raise ValueError(
                "the black box predicts a single class on the whole neighborhood; "
                "pick an instance closer to a decision boundary"
            )
        dt = fit_weighted_cart(
            Xp,
            labels,
            w,
            max_depth=cfg.max_depth,
            task="classification",
            n_classes=F.shape[1],
        )
        targets = F
    else:
        dt = fit_weighted_cart(Xp, F, w, max_depth=cfg.max_depth, task="regression")
        targets = F
    if dt.n_leaves < 2:
        raise ValueError("the surrogate tree collapsed to a single leaf")

    ndt_init = convert_dt_to_ndt(dt, cfg.gamma1, cfg.gamma2, mode="soft")
    result = ndt_finetune(
        ndt_init,
        Xp,
        targets,
        w,
        FinetuneConfig(cfg.finetune_learning_rate, cfg.finetune_epochs),
    )

    def fit_loss(G):
        R = G.reshape(len(G), -1) - targets.reshape(len(targets), -1)
        return float(w @ np.einsum("ij,ij->i", R, R))

    diag = {
        "init_loss": round6(fit_loss(ndt_forward(ndt_init, Xp))),
        "tuned_loss": round6(fit_loss(ndt_forward(result.params, Xp))),
        "finetune_diverged": result.diverged,
    }
    if classification:
        f_cls = np.argmax(F, axis=1)

        def agreement(G):
            return float(w @ (np.argmax(G, axis=1) == f_cls) / w.sum())

        diag["init_agreement"] = round6(agreement(ndt_forward(ndt_init, Xp)))
        diag["tuned_agreement"] = round6(agreement(ndt_forward(result.params, Xp)))

    if bounds is None:
        lo = ctx.train.X.min(axis=0) - 0.5
        hi = ctx.train.X.max(axis=0) + 0.5
    else:
        (x0, x1), (y0, y1) = bounds
        lo, hi = np.array([x0, y0], float), np.array([x1, y1], float)
    gx = np.linspace(lo[0], hi[0], resolution)
    gy = np.linspace(lo[1], hi[1], resolution)
    P = np.column_stack(
        [np.repeat(gx, resolution), np.tile(gy, resolution)]
    )  # x varies slowest, y fastest

    def grid_pred(raw):
        raw = np.asarray(raw)
        if classification:
            return np.argmax(raw, axis=1).astype(int)
        return raw

    preds = {
        "f_pred": grid_pred(ctx.f(P)),
        "dt_pred": grid_pred(tree_predict(dt, P)),
        "ndt_init_pred": grid_pred(ndt_forward(ndt_init, P)),
        "ndt_tuned_pred": grid_pred(ndt_forward(result.params, P)),
    }
    names = list(ctx.train.feature_names)
    rows = []
    for idx in range(P.shape[0]):
        row = [round6(P[idx, 0]), round6(P[idx, 1])]
        for key in ("f_pred", "dt_pred", "ndt_init_pred", "ndt_tuned_pred"):
            v = preds[key][idx]
            row.append(int(v) if classification else round6(v))
        rows.append(row)
    return {
        "kind": "boundary_grid",
        "columns": names + ["f_pred", "dt_pred", "ndt_init_pred", "ndt_tuned_pred"],
        "classification": classification,
        "rows": rows,
        "diagnostics": diag,
        "instance": [round6(v) for v in x],
        "errors": [],
        "config": _config_echo(cfg),
    }


def write_boundary_grid(payload: dict, out_dir: Path) -> list[Path]:
    csv_path = out_dir / "boundary_grid.csv"
    rows = [[fmt6(v) for v in row] for row in payload["rows"]]
    _write_csv(csv_path, payload["columns"], rows)
    json_path = out_dir / "boundary_grid.json"
    _write_json(json_path, payload)
    return [csv_path, json_path]


# ---------------------------------------------------------------- stability matrix


def run_stability_matrix(cfg: ExperimentConfig, instance_index: int = 0) -> dict:
    """The R x R rerun-similarity matrix per surrogate for one instance."""
    run_seed = cfg.seed
    ctx = _prepare_run(cfg, run_seed)
    if not 0 <= instance_index < ctx.test.n:
        raise ValueError(f"instance index {instance_index} out of range")
    x = ctx.test.X[instance_index]
    ncfg, scfg = _neighborhood(cfg), _surrogate_cfg(cfg)
    base_seed = _inst_seed(run_seed, instance_index)
    matrices = {}
    errors: list[dict] = []
    for sur in cfg.surrogates:
        try:
            M = stability_matrix(
                _vector_fn(ctx, sur, ncfg, scfg), x, cfg.n_repeats, base_seed
            )
            upper = M[np.triu_indices(cfg.n_repeats, k=1)]
            matrices[sur] = {
                "matrix": [[round6(v) for v in row] for row in M],
                "stability": round6(upper.mean()),
            }
        except Exception as exc:
            errors.append({"where": f"stability_matrix/{sur}", "error": str(exc)})
    return {
        "kind": "stability_matrix",
        "instance_index": instance_index,
        "matrices": matrices,
        "errors": errors,
        "config": _config_echo(cfg),
    }


def write_stability_matrix(payload: dict, out_dir: Path) -> list[Path]:
    paths = []
    for sur, entry in payload["matrices"].items():
        csv_path = out_dir / f"stability_matrix_{sur}.csv"
        rows = [[fmt6(v) for v in row] for row in entry["matrix"]]
        _write_csv(csv_path, None, rows)
        paths.append(csv_path)
    json_path = out_dir / "stability_matrix.json"
    _write_json(json_path, payload)
    paths.append(json_path)
    return paths


# ---------------------------------------------------------------- file plumbing


def _config_echo(cfg: ExperimentConfig) -> dict:
    doc = asdict(cfg)
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
    return doc


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        writer.writerows(rows)


def _clean_nan(obj):
    if isinstance(obj, float) and np.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean_nan(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean_nan(v) for v in obj]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean_nan(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def prepare_out_dir(out, overwrite: bool = False) -> Path:
    """Refuse to clobber a non-empty directory unless explicitly allowed."""
    path = Path(out)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise FileExistsError(
            f"output directory {path} is not empty; pass --overwrite to replace it"
        )
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_errors(payload: dict, out_dir: Path) -> Path:
    path = out_dir / "errors.json"
    _write_json(path, {"errors": payload.get("errors", [])})
    return path
