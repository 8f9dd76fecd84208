"""Local explanation pipeline: perturb, weight, fit a surrogate, extract a vector."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metrics import fidelity_r2
from .ndt import FinetuneConfig, convert_dt_to_ndt, ndt_finetune, ndt_forward, ndt_input_gradient
from .tree import fit_weighted_cart, tree_feature_importance, tree_predict

SURROGATES = ("LR", "DT", "NDT")


@dataclass(frozen=True)
class NeighborhoodConfig:
    """Sampling and kernel settings shared by every surrogate.

    kernel_width None resolves to 0.75 * sqrt(d), which keeps the effective
    neighborhood size comparable across dimensionalities on standardized
    features.
    """

    n_samples: int = 800
    kernel_width: float | None = None
    perturb_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 10:
            raise ValueError("n_samples must be at least 10")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")
        if self.perturb_scale < 0:
            raise ValueError("perturb_scale must be nonnegative")

    def resolved_width(self, d: int) -> float:
        if self.kernel_width is not None:
            return self.kernel_width
        return 0.75 * float(np.sqrt(d))


@dataclass(frozen=True)
class SurrogateConfig:
    max_depth: int = 4
    gamma1: float = 1.0
    gamma2: float = 1.0
    learning_rate: float = 0.01
    epochs: int = 200


@dataclass(frozen=True)
class Explanation:
    vector: np.ndarray
    surrogate: str
    local_fidelity: float  # NaN when the neighborhood is degenerate
    instance: np.ndarray
    seed: int
    flags: tuple[str, ...] = ()


def perturb(x: np.ndarray, feature_std: np.ndarray, cfg: NeighborhoodConfig) -> np.ndarray:
    """Gaussian perturbations around x, one column scale per feature."""
    x = np.asarray(x, dtype=float)
    std = np.broadcast_to(np.asarray(feature_std, dtype=float), x.shape)
    rng = np.random.default_rng(cfg.seed)
    noise = rng.standard_normal((cfg.n_samples, x.size))
    return x + noise * (cfg.perturb_scale * std)


def proximity_weights(X_pert: np.ndarray, x: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian kernel exp(-||x - x_i||^2 / sigma^2); note no factor 2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = np.asarray(X_pert, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-np.einsum("ij,ij->i", diff, diff) / (sigma * sigma))


def weighted_least_squares(
    X: np.ndarray, y: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, float, bool]:
    """Weighted linear fit with intercept via jittered normal equations.

    Returns (coefficients, intercept, rank_deficient). The 1e-8 diagonal
    jitter keeps the solve well posed; the flag reports when the unjittered
    system was effectively singular, in which case the returned coefficients
    are the minimum-norm-ish jittered solution.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, d = X.shape
    if np.count_nonzero(w > 0) < d + 1:
        raise ValueError("need at least d+1 positively weighted rows")
    A = np.column_stack([X, np.ones(n)])
    Aw = A * w[:, None]
    G = A.T @ Aw
    b = Aw.T @ y
    eigs = np.linalg.eigvalsh(G)
    rank_deficient = bool(eigs[0] < 1e-10 * max(eigs[-1], 1.0))
    beta = np.linalg.solve(G + 1e-8 * np.eye(d + 1), b)
    return beta[:d], float(beta[d]), rank_deficient


def explain_instance(
    f,
    x: np.ndarray,
    surrogate: str,
    cfg: NeighborhoodConfig | None = None,
    surrogate_cfg: SurrogateConfig | None = None,
    feature_std: np.ndarray | float = 1.0,
) -> Explanation:
    """Run the full local-surrogate pipeline for one instance.

    f maps an m x d matrix to m values (regression) or m x C scores
    (classification); with scores the surrogate regresses on the column of
    the class f predicts at x. feature_std is the per-feature stddev of the
    training data in the units of x (1.0 when x is standardized).
    """
    if surrogate not in SURROGATES:
        raise ValueError(f"surrogate must be one of {SURROGATES}")
    cfg = cfg or NeighborhoodConfig()
    scfg = surrogate_cfg or SurrogateConfig()
    x = np.asarray(x, dtype=float)
    d = x.size

    X_pert = perturb(x, feature_std, cfg)
    f_out = np.asarray(f(X_pert), dtype=float)
    if f_out.ndim == 2:
        scores_at_x = np.asarray(f(x[None, :]), dtype=float)
        target_class = int(np.argmax(scores_at_x[0]))
        y = f_out[:, target_class]
    else:
        y = f_out
    sigma = cfg.resolved_width(d)
    w = proximity_weights(X_pert, x, sigma)

    flags: list[str] = []
    if np.all(y == y[0]):
        # nothing local to explain; fidelity is undefined rather than perfect
        flags.append("constant_blackbox")
        if surrogate in ("LR", "NDT"):
            return Explanation(
                vector=np.zeros(d),
                surrogate=surrogate,
                local_fidelity=float("nan"),
                instance=x.copy(),
                seed=cfg.seed,
                flags=tuple(flags),
            )

    if surrogate == "LR":
        coef, intercept, deficient = weighted_least_squares(X_pert, y, w)
        if deficient:
            flags.append("rank_deficient")
        vector = coef
        g_vals = X_pert @ coef + intercept
    else:
        dt = fit_weighted_cart(
            X_pert, y, w, max_depth=scfg.max_depth, task="regression"
        )
        if surrogate == "DT":
            if dt.n_leaves == 1:
                flags.append("single_leaf_tree")
            vector = tree_feature_importance(dt)
            g_vals = tree_predict(dt, X_pert)
        else:
            if dt.n_leaves == 1:
                # no split structure to refine; fall back to the DT explanation
                flags.append("single_leaf_tree")
                vector = tree_feature_importance(dt)
                g_vals = tree_predict(dt, X_pert)
            else:
                params = convert_dt_to_ndt(
                    dt, gamma1=scfg.gamma1, gamma2=scfg.gamma2, mode="soft"
                )
                result = ndt_finetune(
                    params,
                    X_pert,
                    y,
                    w,
                    FinetuneConfig(
                        learning_rate=scfg.learning_rate, epochs=scfg.epochs
                    ),
                )
                if result.diverged:
                    flags.append("finetune_diverged")
                vector = ndt_input_gradient(result.params, x)
                g_vals = ndt_forward(result.params, X_pert)

    return Explanation(
        vector=np.asarray(vector, dtype=float),
        surrogate=surrogate,
        local_fidelity=fidelity_r2(y, g_vals),
        instance=x.copy(),
        seed=cfg.seed,
        flags=tuple(flags),
    )


def explanation_to_dict(expl: Explanation) -> dict:
    fid = expl.local_fidelity
    return {
        "instance": expl.instance.tolist(),
        "surrogate": expl.surrogate,
        "vector": expl.vector.tolist(),
        "local_fidelity": None if np.isnan(fid) else float(fid),
        "seed": expl.seed,
        "flags": list(expl.flags),
    }


def explanation_to_json(expl: Explanation) -> str:
    return json.dumps(explanation_to_dict(expl))
