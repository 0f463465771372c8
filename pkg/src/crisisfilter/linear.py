"""Logistic-regression baseline trained by full-batch gradient descent."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    l2: float
    epochs: int  # epochs actually run
    step_size: float
    seed: int


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lr_loss(X: np.ndarray, y: np.ndarray, weights: np.ndarray, bias: float, l2: float) -> float:
    """Mean cross-entropy plus 0.5 * l2 * ||w||^2 (bias unpenalized)."""
    p = np.clip(_sigmoid(X @ weights + bias), 1e-12, 1.0 - 1e-12)
    ce = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(ce + 0.5 * l2 * float(weights @ weights))


def lr_gradient(
    X: np.ndarray, y: np.ndarray, weights: np.ndarray, bias: float, l2: float
) -> tuple[np.ndarray, float]:
    n = X.shape[0]
    r = _sigmoid(X @ weights + bias) - y
    return X.T @ r / n + l2 * weights, float(np.mean(r))


def lr_train(
    X,
    y,
    l2: float = 1e-4,
    epochs: int = 500,
    step_size: float = 0.1,
    seed: int = 0,
    tol: float = 1e-7,
) -> LogRegModel:
    """Deterministic full-batch descent from zero init.

    The cross-entropy part takes an explicit gradient step; the L2 penalty is
    applied through its exact proximal shrinkage w / (1 + step * l2), which
    keeps the iteration stable for arbitrarily large l2 (the stationary
    points are unchanged). Stops early once the full objective gradient norm
    falls below tol. The bias is not regularized, so in the large-l2 limit
    predictions shrink to the training base rate instead of 0.5.
    """
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise ValueError("training needs both classes present")
    n = X.shape[0]
    w = np.zeros(X.shape[1])
    b = 0.0
    run = 0
    for run in range(1, epochs + 1):
        r = _sigmoid(X @ w + b) - y
        gw_ce = X.T @ r / n
        gb = float(np.mean(r))
        grad_norm = float(np.sqrt(np.sum((gw_ce + l2 * w) ** 2) + gb * gb))
        if grad_norm < tol:
            run -= 1
            break
        w = (w - step_size * gw_ce) / (1.0 + step_size * l2)
        b -= step_size * gb
    return LogRegModel(weights=w, bias=b, l2=l2, epochs=run, step_size=step_size, seed=seed)


def lr_predict(model: LogRegModel, x) -> np.ndarray | float:
    """sigmoid(w . x + b), strictly inside (0, 1)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = arr[None, :] if single else arr
    if X.shape[1] != len(model.weights):
        raise ValueError(f"input width {X.shape[1]} != model width {len(model.weights)}")
    p = np.clip(_sigmoid(X @ model.weights + model.bias), 1e-15, 1.0 - 1e-15)
    return float(p[0]) if single else p


def save_model(model: LogRegModel, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("logregmodel v1\n")
        meta = {"l2": model.l2, "epochs": model.epochs, "step_size": model.step_size, "seed": model.seed}
        fh.write("meta " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(f"bias {model.bias!r}\n")
        fh.write("weights " + " ".join(repr(float(v)) for v in model.weights) + "\n")


def load_model(path: str | Path) -> LogRegModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        if fh.readline().strip() != "logregmodel v1":
            raise ValueError(f"{path}: unknown model format")
        meta = json.loads(fh.readline().split(" ", 1)[1])
        bias = float(fh.readline().split()[1])
        weights = np.array([float(v) for v in fh.readline().split()[1:]])
    return LogRegModel(weights=weights, bias=bias, **meta)
