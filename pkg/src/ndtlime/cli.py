"""Command-line entry point for the benchmark harness."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench


def _parse_int_list(text: str) -> list[int]:
    """Accept '1,2,3' and '1-4' style ranges."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset", help="iris, wine, friedman1, blobs, or a CSV path")
    sub.add_argument("--target", dest="target_column", help="target column for CSV input")
    sub.add_argument("--task", choices=["auto", "regression", "classification"])
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--config", help="JSON file of flat configuration overrides")
    sub.add_argument("--surrogates", help="comma list, e.g. LR,DT,NDT")
    sub.add_argument("--instances", dest="n_test_instances", type=int)
    sub.add_argument("--repeats", dest="n_repeats", type=int)
    sub.add_argument("--n-seeds", dest="n_seeds", type=int)
    sub.add_argument("--overwrite", action="store_true")
    sub.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndtlime",
        description=(
            "Benchmark local surrogate explanations (linear, tree, and neural "
            "decision tree) against an in-repo MLP black box."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run-table", help="fidelity/stability/regularity table")
    _add_common(p)

    p = subs.add_parser("depth-sweep", help="fidelity while the black box deepens")
    _add_common(p)
    p.add_argument("--depths", default="1-4", help="e.g. 1-4 or 1,2,3")

    p = subs.add_parser("k-sweep", help="regularity as the neighbor count grows")
    _add_common(p)
    p.add_argument("--ks", default="1-10", help="e.g. 1-10 or 1,3,5")

    p = subs.add_parser("boundary-grid", help="surrogate decision surfaces on a 2-d lattice")
    _add_common(p)
    p.add_argument("--features", help="two column names or indices, e.g. x1,x2")
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--resolution", type=int, default=100)

    p = subs.add_parser("stability-matrix", help="rerun similarity matrix per surrogate")
    _add_common(p)
    p.add_argument("--instance", type=int, default=0)

    return parser


def _build_config(args: argparse.Namespace) -> bench.ExperimentConfig:
    overrides: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("--config must hold a flat JSON object")
        overrides.update(doc)
    for key in (
        "dataset",
        "target_column",
        "task",
        "seed",
        "n_test_instances",
        "n_repeats",
        "n_seeds",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "surrogates", None):
        overrides["surrogates"] = [s.strip() for s in args.surrogates.split(",")]
    if getattr(args, "features", None):
        parts = [p.strip() for p in args.features.split(",")]
        overrides["features"] = [int(p) if p.lstrip("-").isdigit() else p for p in parts]
    return bench.config_from_dict(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        out_dir = bench.prepare_out_dir(args.out, overwrite=args.overwrite)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run-table":
            payload = bench.run_table(cfg)
            paths = bench.write_table(payload, out_dir)
        elif args.command == "depth-sweep":
            payload = bench.run_depth_sweep(cfg, _parse_int_list(args.depths))
            paths = bench.write_depth_sweep(payload, out_dir)
        elif args.command == "k-sweep":
            payload = bench.run_k_sweep(cfg, _parse_int_list(args.ks))
            paths = bench.write_k_sweep(payload, out_dir)
        elif args.command == "boundary-grid":
            payload = bench.run_boundary_grid(
                cfg, resolution=args.resolution, instance_index=args.instance
            )
            paths = bench.write_boundary_grid(payload, out_dir)
        else:
            payload = bench.run_stability_matrix(cfg, instance_index=args.instance)
            paths = bench.write_stability_matrix(payload, out_dir)
    except Exception as exc:
        bench.write_errors({"errors": [{"where": args.command, "error": str(exc)}]}, out_dir)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    paths.append(bench.write_errors(payload, out_dir))
    if not args.no_figures:
        from . import figures

        render = {
            "run-table": figures.render_table,
            "depth-sweep": figures.render_depth_sweep,
            "k-sweep": figures.render_k_sweep,
            "boundary-grid": figures.render_boundary_grid,
            "stability-matrix": figures.render_stability_matrix,
        }[args.command]
        paths.extend(render(payload, out_dir))

    for path in paths:
        print(path)
    if payload.get("errors"):
        print(f"{len(payload['errors'])} cell error(s); see errors.json", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
