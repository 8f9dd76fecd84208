"""Multilayer-perceptron black box trained with plain mini-batch gradient descent."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class MlpTrainConfig:
    learning_rate: float = 0.05
    epochs: int = 150
    batch_size: int = 32
    seed: int = 0


@dataclass
class MlpModel:
    """Rectifier network with an identity (regression) or logit (classification) head.

    Regression targets are standardized for training; y_mean and y_scale fold
    the inverse transform back into prediction, so callers always see original
    units.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    task: str
    y_mean: float = 0.0
    y_scale: float = 1.0
    final_loss: float = float("nan")
    config: MlpTrainConfig | None = None

    def __post_init__(self):
        sizes = self.layer_sizes
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} shape mismatch")

    def predict(self, points: np.ndarray) -> np.ndarray:
        return mlp_predict(self, points)


def _forward(model: MlpModel, X: np.ndarray) -> np.ndarray:
    H = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        H = H @ W + b
        if i < last:
            H = np.maximum(H, 0.0)
    return H


def _loss(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    out = _forward(model, X)
    if model.task == "regression":
        pred = out[:, 0] * model.y_scale + model.y_mean
        return float(np.mean((pred - y) ** 2))
    # softmax cross-entropy, shifted for overflow safety
    z = out - out.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(y)), y].mean())


def _init_params(sizes: list[int], rng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return weights, biases


def mlp_train(
    train: Dataset, hidden_sizes: list[int], config: MlpTrainConfig | None = None
) -> MlpModel:
    """Fit the black box; deterministic for a fixed config seed.

    Regression minimizes mean squared error, classification softmax
    cross-entropy over logits. Raises on a non-finite loss so a divergent
    learning rate fails loudly instead of producing a silent NaN model.
    """
    if not hidden_sizes:
        raise ValueError("hidden_sizes must be non-empty")
    config = config or MlpTrainConfig()
    X, y = train.X, train.y
    n, d = X.shape
    n_out = 1 if train.task == "regression" else train.n_classes
    sizes = [d, *hidden_sizes, n_out]
    rng = np.random.default_rng(config.seed)
    weights, biases = _init_params(sizes, rng)
    model = MlpModel(sizes, weights, biases, train.task, config=config)

    if train.task == "regression":
        model.y_mean = float(y.mean())
        spread = float(y.std())
        model.y_scale = spread if spread > 0 else 1.0
        y_fit = (y - model.y_mean) / model.y_scale
    else:
        y_fit = y

    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb, yb = X[idx], y_fit[idx]
            m = len(idx)

            acts = [Xb]
            H = Xb
            for i in range(len(weights)):
                H = H @ weights[i] + biases[i]
                if i < len(weights) - 1:
                    H = np.maximum(H, 0.0)
                acts.append(H)

            out = acts[-1]
            if train.task == "regression":
                delta = 2.0 * (out - yb[:, None]) / m
            else:
                z = out - out.max(axis=1, keepdims=True)
                p = np.exp(z)
                p /= p.sum(axis=1, keepdims=True)
                p[np.arange(m), yb] -= 1.0
                delta = p / m

            for i in range(len(weights) - 1, -1, -1):
                gW = acts[i].T @ delta
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ weights[i].T) * (acts[i] > 0)
                weights[i] -= lr * gW
                biases[i] -= lr * gb

        epoch_loss = _loss(model, X, y)
        if not np.isfinite(epoch_loss):
            raise FloatingPointError(
                f"non-finite training loss {epoch_loss}; lower the learning rate"
            )

    model.final_loss = _loss(model, X, y)
    return model


def mlp_predict(model: MlpModel, points: np.ndarray) -> np.ndarray:
    """Evaluate the network; regression gives a vector, classification m x C logits."""
    points = np.asarray(points, dtype=float)
    squeeze = points.ndim == 1
    if squeeze:
        points = points[None, :]
    if points.shape[1] != model.layer_sizes[0]:
        raise ValueError(
            f"expected {model.layer_sizes[0]} features, got {points.shape[1]}"
        )
    out = _forward(model, points)
    if model.task == "regression":
        out = out[:, 0] * model.y_scale + model.y_mean
    return out[0] if squeeze else out


def mlp_to_dict(model: MlpModel) -> dict:
    return {
        "layer_sizes": list(model.layer_sizes),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "task": model.task,
        "activation": "relu",
        "y_mean": model.y_mean,
        "y_scale": model.y_scale,
        "final_loss": None if np.isnan(model.final_loss) else model.final_loss,
    }


def mlp_from_dict(doc: dict) -> MlpModel:
    model = MlpModel(
        layer_sizes=list(doc["layer_sizes"]),
        weights=[np.asarray(W, dtype=float) for W in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        task=doc["task"],
        y_mean=float(doc.get("y_mean", 0.0)),
        y_scale=float(doc.get("y_scale", 1.0)),
    )
    if doc.get("final_loss") is not None:
        model.final_loss = float(doc["final_loss"])
    return model


def mlp_save(model: MlpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mlp_to_dict(model), fh)


def mlp_load(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        return mlp_from_dict(json.load(fh))
