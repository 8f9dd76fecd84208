"""Weighted CART trees: the DT surrogate and the initialization source for NDTs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class Node:
    # feature == -1 marks a leaf; value is a scalar mean (regression) or a
    # class-probability vector (classification)
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: object = None
    weight_mass: float = 0.0
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class DecisionTree:
    nodes: list[Node]
    root: int
    n_features: int
    task: str
    n_classes: int = 0

    @property
    def n_leaves(self) -> int:
        return sum(1 for nd in self.nodes if nd.is_leaf)

    def leaf_ids(self) -> list[int]:
        """Leaves in left-to-right order, the ordering used for NDT leaf units."""
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            nd = self.nodes[nid]
            if nd.is_leaf:
                out.append(nid)
            else:
                stack.append(nd.right)
                stack.append(nd.left)
        return out

    def internal_ids(self) -> list[int]:
        """Internal nodes in depth-first preorder, the ordering of NDT split units."""
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            nd = self.nodes[nid]
            if not nd.is_leaf:
                out.append(nid)
                stack.append(nd.right)
                stack.append(nd.left)
        return out


def _node_impurity(W, S, Q, counts, task):
    if task == "regression":
        return Q - S * S / W
    return W - counts @ counts / W


def _best_split(X, y, w, Y_onehot, task, min_leaf_weight, tol):
    """Return (gain, feature, threshold) of the best candidate or None.

    Ties within tol prefer the lowest feature index, then the lowest
    threshold; both fall out of scanning features and sorted candidate
    positions in ascending order and requiring strict improvement.
    """
    n, d = X.shape
    W_tot = w.sum()
    if task == "regression":
        S_tot, Q_tot = w @ y, w @ (y * y)
        parent = _node_impurity(W_tot, S_tot, Q_tot, None, task)
    else:
        counts_tot = w @ Y_onehot
        parent = _node_impurity(W_tot, None, None, counts_tot, task)

    best = None
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        distinct = np.nonzero(xs[:-1] < xs[1:])[0]
        if distinct.size == 0:
            continue
        ws = w[order]
        cw = np.cumsum(ws)
        W_L = cw[distinct]
        W_R = W_tot - W_L
        if task == "regression":
            ys = y[order]
            cS = np.cumsum(ws * ys)
            cQ = np.cumsum(ws * ys * ys)
            S_L = cS[distinct]
            Q_L = cQ[distinct]
            child = (
                Q_L
                - S_L * S_L / W_L
                + (Q_tot - Q_L)
                - (S_tot - S_L) ** 2 / W_R
            )
        else:
            cC = np.cumsum(ws[:, None] * Y_onehot[order], axis=0)
            C_L = cC[distinct]
            C_R = counts_tot - C_L
            child = (
                W_L
                - np.einsum("ij,ij->i", C_L, C_L) / W_L
                + W_R
                - np.einsum("ij,ij->i", C_R, C_R) / W_R
            )
        gains = parent - child

        thresholds = 0.5 * (xs[distinct] + xs[distinct + 1])
        ok = thresholds > xs[distinct]  # midpoint may collapse onto v_i
        if min_leaf_weight > 0:
            ok &= (W_L >= min_leaf_weight) & (W_R >= min_leaf_weight)
        if not ok.any():
            continue
        gains = np.where(ok, gains, -np.inf)
        gmax = gains.max()
        pos = int(np.argmax(gains >= gmax - tol))
        if best is None or gains[pos] > best[0] + tol:
            best = (float(gains[pos]), j, float(thresholds[pos]))
    return best


def fit_weighted_cart(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    max_depth: int = 4,
    min_leaf_weight: float = 0.0,
    task: str | None = None,
    n_classes: int | None = None,
) -> DecisionTree:
    """Greedy weighted CART with midpoint split candidates.

    Minimizes weighted squared error (regression) or weighted Gini
    (classification). A node becomes a leaf at the depth limit, when it is
    pure, or when no candidate split improves the criterion. Zero-weight rows
    are dropped up front so they can never influence the fit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    w = np.asarray(sample_weight, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d matrix")
    if len(y) != X.shape[0] or len(w) != X.shape[0]:
        raise ValueError("y and sample_weight must match the row count of X")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if np.any(w < 0):
        raise ValueError("sample weights must be nonnegative")
    keep = w > 0
    if not keep.any():
        raise ValueError("at least one sample weight must be positive")
    X, y, w = X[keep], y[keep], w[keep]

    if task is None:
        task = "classification" if np.issubdtype(y.dtype, np.integer) else "regression"
    if task == "classification":
        y = y.astype(np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1
        elif n_classes <= int(y.max()):
            raise ValueError("n_classes must exceed the largest label")
        Y_onehot = np.zeros((len(y), n_classes))
        Y_onehot[np.arange(len(y)), y] = 1.0
    else:
        y = y.astype(float)
        n_classes = 0
        Y_onehot = None

    nodes: list[Node] = []

    def leaf_value(idx):
        W = w[idx].sum()
        if task == "regression":
            return float(w[idx] @ y[idx] / W), W
        probs = w[idx] @ Y_onehot[idx] / W
        return probs, W

    def build(idx, depth):
        Wn = w[idx].sum()
        if task == "regression":
            Q = w[idx] @ (y[idx] * y[idx])
            scale = max(1.0, Q)
        else:
            scale = max(1.0, Wn)
        tol = 1e-12 * scale

        split = None
        if depth < max_depth:
            Yo = Y_onehot[idx] if Y_onehot is not None else None
            split = _best_split(X[idx], y[idx], w[idx], Yo, task, min_leaf_weight, tol)
            if split is not None and split[0] <= tol:
                split = None
        if split is None:
            value, W = leaf_value(idx)
            nodes.append(Node(value=value, weight_mass=W))
            return len(nodes) - 1

        gain, j, t = split
        go_right = X[idx, j] >= t
        left_id = build(idx[~go_right], depth + 1)
        right_id = build(idx[go_right], depth + 1)
        nodes.append(
            Node(
                feature=j,
                threshold=t,
                left=left_id,
                right=right_id,
                weight_mass=Wn,
                gain=gain,
            )
        )
        return len(nodes) - 1

    root = build(np.arange(len(y)), 0)
    return DecisionTree(
        nodes=nodes, root=root, n_features=X.shape[1], task=task, n_classes=n_classes
    )


def tree_predict(tree: DecisionTree, points: np.ndarray) -> np.ndarray:
    """Route points down the tree; x >= threshold goes right, including exact ties."""
    X = np.asarray(points, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[None, :]
    if X.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {X.shape[1]}")
    m = X.shape[0]
    if tree.task == "regression":
        out = np.empty(m)
    else:
        out = np.empty((m, tree.n_classes))
    stack = [(tree.root, np.arange(m))]
    while stack:
        nid, idx = stack.pop()
        if idx.size == 0:
            continue
        nd = tree.nodes[nid]
        if nd.is_leaf:
            out[idx] = nd.value
        else:
            go_right = X[idx, nd.feature] >= nd.threshold
            stack.append((nd.right, idx[go_right]))
            stack.append((nd.left, idx[~go_right]))
    return out[0] if squeeze else out


def tree_feature_importance(tree: DecisionTree) -> np.ndarray:
    """Per-feature share of total weighted impurity decrease, summing to 1.

    A single-leaf tree has no splits to attribute, so every feature gets the
    same 1/d share; callers treat that case as degenerate.
    """
    imp = np.zeros(tree.n_features)
    for nd in tree.nodes:
        if not nd.is_leaf:
            imp[nd.feature] += nd.gain
    total = imp.sum()
    if total <= 0:
        return np.full(tree.n_features, 1.0 / tree.n_features)
    return imp / total


def tree_to_dict(tree: DecisionTree) -> dict:
    recs = []
    for i, nd in enumerate(tree.nodes):
        if nd.is_leaf:
            value = nd.value if tree.task == "regression" else list(map(float, nd.value))
            recs.append(
                {"id": i, "kind": "leaf", "value": value, "weight": nd.weight_mass}
            )
        else:
            recs.append(
                {
                    "id": i,
                    "kind": "split",
                    "feature": nd.feature,
                    "threshold": nd.threshold,
                    "left": nd.left,
                    "right": nd.right,
                    "weight": nd.weight_mass,
                    "gain": nd.gain,
                }
            )
    return {
        "nodes": recs,
        "root": tree.root,
        "n_features": tree.n_features,
        "task": tree.task,
        "n_classes": tree.n_classes,
    }


def tree_from_dict(doc: dict) -> DecisionTree:
    nodes = []
    for rec in doc["nodes"]:
        if rec["kind"] == "leaf":
            value = rec["value"]
            if doc["task"] == "classification":
                value = np.asarray(value, dtype=float)
            nodes.append(Node(value=value, weight_mass=rec["weight"]))
        else:
            nodes.append(
                Node(
                    feature=rec["feature"],
                    threshold=rec["threshold"],
                    left=rec["left"],
                    right=rec["right"],
                    weight_mass=rec["weight"],
                    gain=rec["gain"],
                )
            )
    return DecisionTree(
        nodes=nodes,
        root=doc["root"],
        n_features=doc["n_features"],
        task=doc["task"],
        n_classes=doc["n_classes"],
    )


def tree_save(tree: DecisionTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree_to_dict(tree), fh)


def tree_load(path) -> DecisionTree:
    with open(path, encoding="utf-8") as fh:
        return tree_from_dict(json.load(fh))
