"""Acceptance checks for the package's core claims.

Each test is one claim with a pinned protocol and tolerance; the -v test line
is the pass/fail record. The heavier trend checks (fidelity ordering, depth
sweep) run scaled-down benchmark protocols and assert orderings, not
magnitudes.
"""

import json

import numpy as np

from ndtlime.bench import ExperimentConfig, run_depth_sweep, run_table, write_table
from ndtlime.blackbox import MlpTrainConfig, mlp_train
from ndtlime.data import bundled_path, load_csv, standardize_split, synth_blobs, synth_friedman1
from ndtlime.explain import (
    NeighborhoodConfig,
    explain_instance,
    perturb,
    proximity_weights,
)
from ndtlime.metrics import cosine, fidelity_r2, regularity_k, stability
from ndtlime.ndt import (
    FinetuneConfig,
    convert_dt_to_ndt,
    ndt_finetune,
    ndt_forward,
    ndt_input_gradient,
    ndt_loss_and_param_grads,
    taylor_residual_check,
)
from ndtlime.tree import fit_weighted_cart, tree_predict


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _random_tree(rng, n=150, d=4, depth=3, task="regression"):
    X = rng.standard_normal((n, d))
    if task == "regression":
        y = rng.standard_normal(n)
    else:
        y = rng.integers(0, 3, size=n).astype(np.int64)
    w = rng.uniform(0.2, 2.0, size=n)
    return X, fit_weighted_cart(X, y, w, max_depth=depth, task=task)


def _margins(tree, P):
    ts = [nd.threshold for nd in tree.nodes if not nd.is_leaf]
    fs = [nd.feature for nd in tree.nodes if not nd.is_leaf]
    return np.min(np.abs(P[:, fs] - np.array(ts)), axis=1)


# 1 ---------------------------------------------------------------------------


def test_conversion_exactness_on_random_trees():
    rng = np.random.default_rng(0)
    checked = 0
    trees = 0
    while trees < 100:
        d = int(rng.integers(2, 11))
        depth = int(rng.integers(1, 6))
        task = "regression" if trees % 2 == 0 else "classification"
        _, tree = _random_tree(rng, n=150, d=d, depth=depth, task=task)
        if tree.n_leaves < 2:
            continue
        trees += 1
        params = convert_dt_to_ndt(tree)
        P = rng.standard_normal((200, d))
        P = P[_margins(tree, P) > 1e-9]
        got = ndt_forward(params, P)
        want = tree_predict(tree, P)
        if task == "classification":
            assert np.array_equal(np.argmax(got, axis=1), np.argmax(want, axis=1))
        else:
            assert np.array_equal(got, want)
        checked += len(P)
    _report(
        "conversion exactness",
        trees == 100,
        f"hard network matched the tree bit for bit on {checked} points from {trees} trees",
    )


# 2 ---------------------------------------------------------------------------


def test_soft_mode_converges_to_hard_mode():
    rng = np.random.default_rng(1)
    checked = 0
    failures = 0
    while checked < 10_000:
        _, tree = _random_tree(rng, d=4, depth=4)
        if tree.n_leaves < 2:
            continue
        hard = convert_dt_to_ndt(tree)
        soft = convert_dt_to_ndt(tree, gamma1=1e4, gamma2=1e4, mode="soft")
        P = rng.standard_normal((800, 4))
        P = P[_margins(tree, P) >= 1e-2]
        diff = np.abs(ndt_forward(soft, P) - ndt_forward(hard, P))
        failures += int(np.sum(diff >= 1e-3))
        checked += len(P)
    _report(
        "soft-to-hard limit",
        failures == 0,
        f"{failures} of {checked} margin-1e-2 points differed by 1e-3 or more at gamma 1e4",
    )


# 3 ---------------------------------------------------------------------------


def test_gradients_match_finite_differences_and_taylor_decay():
    rng = np.random.default_rng(2)
    worst_rel = 0.0

    for _ in range(25):  # input gradients
        _, tree = _random_tree(rng, d=4, depth=2)
        if tree.n_leaves < 2:
            continue
        params = convert_dt_to_ndt(tree, mode="soft")
        x = rng.standard_normal(4)
        g = ndt_input_gradient(params, x)
        fd = np.zeros(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1e-5
            fd[j] = (ndt_forward(params, x + e) - ndt_forward(params, x - e)) / 2e-5
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8)
        worst_rel = max(worst_rel, rel)

    from dataclasses import replace

    for _ in range(25):  # parameter gradients
        _, tree = _random_tree(rng, n=60, d=3, depth=2)
        if tree.n_leaves < 2:
            continue
        params = convert_dt_to_ndt(tree, mode="soft")
        X = rng.standard_normal((30, 3))
        y = rng.standard_normal(30)
        w = rng.uniform(0.2, 1.0, size=30)
        _, grads = ndt_loss_and_param_grads(params, X, y, w)
        for name in ("W1", "b1", "W2", "b2", "Wout", "bout"):
            arr = getattr(params, name)
            g_num = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                bumped = arr.copy()
                bumped[idx] += 1e-6
                up = ndt_loss_and_param_grads(replace(params, **{name: bumped}), X, y, w)[0]
                bumped[idx] -= 2e-6
                dn = ndt_loss_and_param_grads(replace(params, **{name: bumped}), X, y, w)[0]
                g_num[idx] = (up - dn) / 2e-6
                it.iternext()
            rel = np.linalg.norm((grads[name] - g_num).ravel()) / max(
                np.linalg.norm(g_num.ravel()), 1e-8
            )
            worst_rel = max(worst_rel, rel)

    grad_ok = worst_rel < 1e-4

    hits = 0
    for i in range(20):  # cubic decay of the second-order expansion residual
        Xf = np.random.default_rng(100 + i).standard_normal((300, 4))
        yf = np.sin(Xf[:, 0]) + 0.5 * Xf[:, 1] ** 2 + 0.3 * Xf[:, 2]
        tree = fit_weighted_cart(Xf, yf, np.ones(300), max_depth=3, task="regression")
        params = convert_dt_to_ndt(tree, mode="soft")
        x0 = np.random.default_rng(200 + i).standard_normal(4) * 0.5
        res = taylor_residual_check(params, x0, [0.02, 0.01])
        ratio = res[0] / res[1]
        hits += 6.0 <= ratio <= 10.0
    taylor_ok = hits >= 18

    _report(
        "gradient correctness",
        grad_ok and taylor_ok,
        f"worst finite-difference relative error {worst_rel:.2e} (tolerance 1e-4); "
        f"halving ratio in [6, 10] at {hits}/20 base points (need 18)",
    )


# 4 ---------------------------------------------------------------------------


def test_metric_implementations_match_brute_force():
    exact = (
        fidelity_r2([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == 0.5
        and abs(cosine([1.0, 1.0], [1.0, 0.0]) - 1.0 / np.sqrt(2.0)) < 1e-15
        and abs(
            stability(
                lambda x, s: {0: [1.0, 0.0], 1: [1.0, 0.0], 2: [0.0, 1.0]}[s],
                np.zeros(2),
                R=3,
            )
            - 1.0 / 3.0
        )
        < 1e-15
    )

    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 21))
        d = int(rng.integers(1, 6))
        f = rng.standard_normal(n)
        g = rng.standard_normal(n)
        mean = sum(f) / n
        r2 = 1.0 - sum((a - b) ** 2 for a, b in zip(f, g)) / sum((v - mean) ** 2 for v in f)
        worst = max(worst, abs(fidelity_r2(f, g) - r2))

        a, b = rng.standard_normal(d), rng.standard_normal(d)
        cs = sum(u * v for u, v in zip(a, b)) / (
            np.sqrt(sum(u * u for u in a)) * np.sqrt(sum(v * v for v in b))
        )
        worst = max(worst, abs(cosine(a, b) - cs))

        R = int(rng.integers(2, 7))
        table = {s: rng.standard_normal(d) for s in range(R)}
        pairs = [
            cosine(table[r], table[rp]) for r in range(R) for rp in range(r + 1, R)
        ]
        got = stability(lambda x, s: table[s], np.zeros(d), R=R)
        worst = max(worst, abs(got - np.mean(pairs)))

        m = int(rng.integers(3, 21))
        F = rng.standard_normal((m, d))
        E = rng.standard_normal((m, d))
        k = int(rng.integers(1, min(m, 6)))
        got_reg = regularity_k(E, F, k)
        for i in range(m):
            ds = sorted((np.linalg.norm(F[i] - F[j]), j) for j in range(m) if j != i)
            want = np.mean([cosine(E[i], E[j]) for _, j in ds[:k]])
            worst = max(worst, abs(got_reg[i] - want))

    _report(
        "metric oracles",
        exact and worst < 1e-12,
        f"hand examples exact: {exact}; worst brute-force gap {worst:.2e} (tolerance 1e-12)",
    )


# 5 ---------------------------------------------------------------------------


def test_finetuning_reduces_weighted_loss():
    wins = 0
    for s in range(20):
        data = synth_blobs(600, d=2, C=2, separation=4.0, seed=s)
        train, test = standardize_split(data, 0.25, seed=s)
        model = mlp_train(train, [64, 32], MlpTrainConfig(seed=s + 777))
        x = test.X[0]
        ncfg = NeighborhoodConfig(seed=s)
        Xp = perturb(x, train.X.std(axis=0), ncfg)
        F = np.asarray(model.predict(Xp))
        c = int(np.argmax(model.predict(x[None, :])[0]))
        y = F[:, c]
        w = proximity_weights(Xp, x, ncfg.resolved_width(2))
        try:
            dt = fit_weighted_cart(Xp, y, w, max_depth=4, task="regression")
            params = convert_dt_to_ndt(dt, mode="soft")
            res = ndt_finetune(params, Xp, y, w, FinetuneConfig())
            wins += bool(res.loss_trace[-1] < res.loss_trace[0])
        except ValueError:
            pass  # a degenerate neighborhood counts as a miss
    _report(
        "fine-tuning efficacy",
        wins >= 19,
        f"weighted loss fell below its initialization in {wins}/20 seeded runs (need 19)",
    )


# 6 ---------------------------------------------------------------------------


def _fidelity_ordering_wins(dataset: str) -> int:
    wins = 0
    for s in range(10):
        if dataset == "friedman1":
            data = synth_friedman1(2000, seed=s)
        else:
            data = synth_blobs(2000, d=5, C=2, separation=4.0, seed=s)
        train, test = standardize_split(data, 0.25, seed=s)
        model = mlp_train(train, [64, 32], MlpTrainConfig(seed=s + 777))
        fstd = train.X.std(axis=0)
        fids = {sur: [] for sur in ("LR", "DT", "NDT")}
        for i in range(20):
            x = test.X[i]
            ncfg = NeighborhoodConfig(seed=100_000 * s + 1000 * (i + 1))
            for sur in fids:
                e = explain_instance(model.predict, x, sur, ncfg, None, fstd)
                fids[sur].append(e.local_fidelity)
        means = {sur: np.nanmean(v) for sur, v in fids.items()}
        wins += bool(means["NDT"] > means["LR"] and means["NDT"] > means["DT"])
    return wins


def test_ndt_fidelity_ordering_beats_lr_and_dt():
    w_fried = _fidelity_ordering_wins("friedman1")
    w_blobs = _fidelity_ordering_wins("blobs")
    _report(
        "fidelity ordering",
        w_fried >= 8 and w_blobs >= 8,
        f"NDT led both baselines in {w_fried}/10 regression and {w_blobs}/10 "
        "classification seeds (need 8 each)",
    )


# 7 ---------------------------------------------------------------------------


def test_deeper_blackbox_widens_ndt_advantage():
    drop_wins = 0
    gap_wins = 0
    for s in range(10):
        cfg = ExperimentConfig(
            dataset="friedman1",
            n_rows=2000,
            noise_std=1.0,
            seed=s,
            n_seeds=1,
            surrogates=("LR", "NDT"),
            n_test_instances=20,
            mlp_epochs=800,
            finetune_epochs=600,
        )
        payload = run_depth_sweep(cfg, [1, 4])
        fid = {
            (r["depth"], r["surrogate"]): r["fidelity_mean"] for r in payload["rows"]
        }
        drop_wins += bool(fid[(4, "LR")] < fid[(1, "LR")])
        gap_wins += bool(
            fid[(4, "NDT")] - fid[(4, "LR")] >= fid[(1, "NDT")] - fid[(1, "LR")]
        )
    _report(
        "depth-sweep trend",
        drop_wins >= 7 and gap_wins >= 7,
        f"linear fidelity fell with depth in {drop_wins}/10 seeds and the NDT "
        f"advantage grew in {gap_wins}/10 (need 7 each)",
    )


# 8 ---------------------------------------------------------------------------


def test_lr_stability_high_on_benchmark_data():
    data = load_csv(bundled_path("iris"), "target", task="classification")
    train, test = standardize_split(data, 0.25, seed=0)
    model = mlp_train(train, [64, 32], MlpTrainConfig(seed=777))
    fstd = train.X.std(axis=0)

    def fn(x, seed):
        return explain_instance(
            model.predict, x, "LR", NeighborhoodConfig(seed=seed), None, fstd
        ).vector

    scores = [
        stability(fn, test.X[i], 5, base_seed=1000 * (i + 1)) for i in range(10)
    ]
    mean_score = float(np.mean(scores))

    const = stability(lambda x, s: np.array([0.2, -0.4, 0.1, 0.8]), test.X[0], 5)

    _report(
        "stability sanity",
        mean_score >= 0.95 and const == 1.0,
        f"mean linear-surrogate stability {mean_score:.4f} (need 0.95); "
        f"deterministic explainer scored {const}",
    )


# 9 ---------------------------------------------------------------------------


def test_run_table_reruns_are_byte_identical(tmp_path):
    cfg = ExperimentConfig(
        dataset="iris",
        n_seeds=1,
        n_test_instances=6,
        n_repeats=3,
        n_samples=200,
        mlp_epochs=30,
        finetune_epochs=50,
        seed=0,
    )
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    write_table(run_table(cfg), a)
    write_table(run_table(cfg), b)
    csv_same = (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()
    json_same = (a / "table.json").read_bytes() == (b / "table.json").read_bytes()
    _report(
        "rerun determinism",
        csv_same and json_same,
        "two runs of one configuration wrote byte-identical CSV and JSON"
        if csv_same and json_same
        else "reruns disagreed",
    )
