"""Matplotlib rendering of benchmark outputs, written next to the data files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRICS = ("fidelity", "stability", "regularity")


def render_table(payload: dict, out_dir: Path) -> list[Path]:
    surrogates = payload["surrogates"]
    fig, axes = plt.subplots(1, len(_METRICS), figsize=(4 * len(_METRICS), 3.2))
    for ax, metric in zip(np.atleast_1d(axes), _METRICS):
        means, stds, labels = [], [], []
        for sur in surrogates:
            cell = payload["cells"][sur][metric]
            if cell is None:
                continue
            means.append(cell["mean"])
            stds.append(cell["std"])
            labels.append(sur)
        ax.bar(labels, means, yerr=stds, capsize=3)
        ax.set_title(metric)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle(f"dataset: {payload['dataset']}")
    fig.tight_layout()
    path = out_dir / "table.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def _render_sweep(rows, x_key, y_key, y_err, title, path: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    surrogates = sorted({r["surrogate"] for r in rows})
    for sur in surrogates:
        pts = [r for r in rows if r["surrogate"] == sur]
        pts.sort(key=lambda r: r[x_key])
        xs = [r[x_key] for r in pts]
        ys = [r[y_key] for r in pts]
        es = [r[y_err] for r in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=sur)
    ax.set_xlabel(x_key)
    ax.set_ylabel(y_key.replace("_mean", ""))
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_depth_sweep(payload: dict, out_dir: Path) -> list[Path]:
    return _render_sweep(
        payload["rows"],
        "depth",
        "fidelity_mean",
        "fidelity_std",
        "fidelity vs black-box depth",
        out_dir / "depth_sweep.png",
    )


def render_k_sweep(payload: dict, out_dir: Path) -> list[Path]:
    return _render_sweep(
        payload["rows"],
        "k",
        "regularity_mean",
        "regularity_std",
        "regularity vs neighbor count",
        out_dir / "k_sweep.png",
    )


def render_boundary_grid(payload: dict, out_dir: Path) -> list[Path]:
    rows = np.asarray(payload["rows"], dtype=float)
    res = int(round(np.sqrt(rows.shape[0])))
    xs = rows[:, 0].reshape(res, res)
    ys = rows[:, 1].reshape(res, res)
    panels = payload["columns"][2:]
    fig, axes = plt.subplots(2, 2, figsize=(9, 8))
    for ax, name, col in zip(axes.ravel(), panels, rows[:, 2:].T):
        Z = col.reshape(res, res)
        mesh = ax.pcolormesh(xs, ys, Z, shading="auto")
        fig.colorbar(mesh, ax=ax, shrink=0.85)
        ax.plot(*payload["instance"], marker="*", color="red", markersize=12)
        ax.set_title(name)
        ax.set_xlabel(payload["columns"][0])
        ax.set_ylabel(payload["columns"][1])
    fig.tight_layout()
    path = out_dir / "boundary_grid.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_stability_matrix(payload: dict, out_dir: Path) -> list[Path]:
    paths = []
    for sur, entry in payload["matrices"].items():
        M = np.asarray(entry["matrix"], dtype=float)
        fig, ax = plt.subplots(figsize=(4, 3.5))
        mesh = ax.imshow(M, vmin=-1.0, vmax=1.0, cmap="viridis")
        fig.colorbar(mesh, ax=ax)
        ax.set_title(f"{sur} rerun similarity ({entry['stability']:.3g})")
        ax.set_xlabel("rerun")
        ax.set_ylabel("rerun")
        fig.tight_layout()
        path = out_dir / f"stability_matrix_{sur}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
