"""Explanation quality measures: fidelity, stability, regularity, and averaging."""

from __future__ import annotations

import numpy as np


def fidelity_r2(f_vals: np.ndarray, g_vals: np.ndarray) -> float:
    """Coefficient of determination of the surrogate against the black box.

    Returns NaN when the black-box values are constant on the neighborhood:
    the denominator vanishes and reporting 1 there would reward a surrogate
    for mimicking a flat function.
    """
    f_vals = np.asarray(f_vals, dtype=float)
    g_vals = np.asarray(g_vals, dtype=float)
    if f_vals.shape != g_vals.shape or f_vals.ndim != 1:
        raise ValueError("f_vals and g_vals must be equal-length vectors")
    if f_vals.size < 2:
        raise ValueError("need at least 2 points")
    ss_tot = float(np.sum((f_vals - f_vals.mean()) ** 2))
    if ss_tot < 1e-12:
        return float("nan")
    ss_res = float(np.sum((f_vals - g_vals) ** 2))
    return 1.0 - ss_res / ss_tot


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity with a 0 convention for near-zero vectors.

    Identical nonzero inputs return exactly 1.0 so that repeat-comparison
    metrics of a deterministic explainer cannot drift below 1 through
    rounding.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("vectors must share a shape")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("vectors must be finite")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _pairwise_upper_mean(vectors: list[np.ndarray]) -> float:
    R = len(vectors)
    total = 0.0
    for r in range(R - 1):
        for rp in range(r + 1, R):
            total += cosine(vectors[r], vectors[rp])
    return total / (R * (R - 1) / 2)


def stability(explain_fn, x: np.ndarray, R: int, base_seed: int = 0) -> float:
    """Mean pairwise cosine of explanations across R reseeded reruns.

    explain_fn(x, seed) must rerun the full pipeline, sampling included; the
    repeats use seeds base_seed + 0 .. base_seed + R - 1. NaN when every
    rerun returns a zero vector.
    """
    if R < 2:
        raise ValueError("stability needs R >= 2")
    vectors = [np.asarray(explain_fn(x, base_seed + r), dtype=float) for r in range(R)]
    if all(np.linalg.norm(v) < 1e-12 for v in vectors):
        return float("nan")
    return _pairwise_upper_mean(vectors)


def stability_matrix(
    explain_fn, x: np.ndarray, R: int, base_seed: int = 0
) -> np.ndarray:
    """The full R x R cosine matrix behind the stability score."""
    if R < 2:
        raise ValueError("stability_matrix needs R >= 2")
    vectors = [np.asarray(explain_fn(x, base_seed + r), dtype=float) for r in range(R)]
    M = np.empty((R, R))
    for r in range(R):
        M[r, r] = cosine(vectors[r], vectors[r])
        for rp in range(r + 1, R):
            M[r, rp] = M[rp, r] = cosine(vectors[r], vectors[rp])
    return M


def regularity_k(
    explanations: np.ndarray, features: np.ndarray, k: int
) -> np.ndarray:
    """Mean cosine between each instance's explanation and its k nearest peers.

    Neighbors are found by Euclidean distance on the feature rows with the
    instance itself excluded; distance ties resolve toward the lower row
    index so duplicated rows stay deterministic.
    """
    E = np.asarray(explanations, dtype=float)
    F = np.asarray(features, dtype=float)
    n = F.shape[0]
    if E.shape[0] != n:
        raise ValueError("explanations and features must have matching rows")
    if not 1 <= k < n:
        raise ValueError("need test set size > k >= 1")
    diff = F[:, None, :] - F[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    out = np.empty(n)
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")  # stable sort breaks ties by index
        neighbors = [j for j in order if j != i][:k]
        out[i] = np.mean([cosine(E[i], E[j]) for j in neighbors])
    return out


def average_metric(per_instance) -> tuple[float, float, int]:
    """Arithmetic mean and sample stddev over non-missing entries.

    Missing values are NaN; they are excluded and the surviving count is
    returned so aggregates stay honest about degenerate instances.
    """
    vals = np.asarray(per_instance, dtype=float)
    kept = vals[~np.isnan(vals)]
    if kept.size == 0:
        raise ValueError("all values are missing")
    mean = float(kept.mean())
    std = float(kept.std(ddof=1)) if kept.size > 1 else 0.0
    return mean, std, int(kept.size)
