"""Soft-margin SVM trained with simplified SMO, combined one-vs-all.

Class imbalance enters through per-sample box constraints
``0 <= alpha_i <= c * w[class(i)]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import HarError
from .fusion import compute_class_weights

log = logging.getLogger(__name__)

_ALPHA_EPS = 1e-7
_SV_EPS = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    kernel: str = "linear"
    c: float = 1.0
    gamma: Optional[float] = None  # rbf only; None means 1/d
    tol: float = 1e-3
    max_passes: int = 10
    max_sweeps: int = 500
    class_weighting: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise HarError(f"unknown kernel {self.kernel!r}; use 'linear' or 'rbf'")
        if self.c <= 0 or self.tol <= 0:
            raise HarError("c and tol must be > 0")
        if self.gamma is not None and self.gamma <= 0:
            raise HarError("gamma must be > 0")
        if self.max_passes < 1 or self.max_sweeps < 1:
            raise HarError("max_passes and max_sweeps must be ≥ 1")


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return a @ b.T
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class BinarySvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: str
    gamma: float
    alphas: np.ndarray
    upper: np.ndarray  # per-support-vector box bound C_i
    sweeps: int = 0
    converged: bool = True

    def decision_function(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if len(self.support_vectors) == 0:
            return np.full(len(x), self.bias)
        if x.shape[1] != self.support_vectors.shape[1]:
            raise HarError(f"feature dimension {x.shape[1]} != trained dimension {self.support_vectors.shape[1]}")
        return kernel_matrix(x, self.support_vectors, self.kernel, self.gamma) @ self.dual_coef + self.bias

    def dual_feasible(self, atol: float = 1e-12) -> bool:
        return bool(np.all(self.alphas >= -atol) and np.all(self.alphas <= self.upper + atol))


def _best_partner(i, ai, yi, ei, alpha, y, err, upper, k_row, diag):
    """Platt's second-choice heuristic: the partner that can move with the largest |E_i - E_j|.

    Returns -1 when no partner admits a step of at least _ALPHA_EPS.
    """
    ci = upper[i]
    same = y == yi
    lo = np.where(same, np.maximum(0.0, ai + alpha - ci), np.maximum(0.0, alpha - ai))
    hi = np.where(same, np.minimum(upper, ai + alpha), np.minimum(upper, ci - ai + alpha))
    eta = 2.0 * k_row - diag[i] - diag
    ok = (lo < hi) & (eta < 0.0)
    ok[i] = False
    if not ok.any():
        return -1
    safe_eta = np.where(ok, eta, -1.0)
    step = np.clip(alpha - y * (ei - err) / safe_eta, lo, hi) - alpha
    ok &= np.abs(step) >= _ALPHA_EPS
    if not ok.any():
        return -1
    return int(np.argmax(np.where(ok, np.abs(ei - err), -1.0)))


def _smo(k: np.ndarray, y: np.ndarray, upper: np.ndarray, cfg: SvmConfig, rng) -> tuple:
    """Simplified SMO over KKT violators.

    The partner of each violator is drawn at random first; when that pair
    cannot move, the second-choice heuristic picks one that can.
    """
    n = len(y)
    alpha = np.zeros(n)
    err = -y.astype(np.float64)  # f(x_i) - y_i with f = 0
    diag = np.diag(k).copy()
    tol = cfg.tol
    yl = y.tolist()
    ul = upper.tolist()
    state = {"b": 0.0}

    def take_step(i: int, j: int) -> bool:
        ai, aj = alpha[i], alpha[j]
        yi, yj = yl[i], yl[j]
        ei, ej = err[i], err[j]
        ci, cj = ul[i], ul[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(cj, ci - ai + aj)
        else:
            lo, hi = max(0.0, ai + aj - ci), min(cj, ai + aj)
        if lo >= hi:
            return False
        kij = k[i, j]
        eta = 2.0 * kij - diag[i] - diag[j]
        if eta >= 0.0:
            return False
        aj_new = min(hi, max(lo, aj - yj * (ei - ej) / eta))
        if abs(aj_new - aj) < _ALPHA_EPS:
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        dai, daj = ai_new - ai, aj_new - aj
        b = state["b"]
        b1 = b - ei - yi * dai * diag[i] - yj * daj * kij
        b2 = b - ej - yi * dai * kij - yj * daj * diag[j]
        if 0.0 < ai_new < ci:
            b_new = b1
        elif 0.0 < aj_new < cj:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        alpha[i], alpha[j] = ai_new, aj_new
        err[:] += (yi * dai) * k[:, i] + (yj * daj) * k[:, j] + (b_new - b)
        state["b"] = b_new
        return True

    passes = sweeps = 0
    while passes < cfg.max_passes and sweeps < cfg.max_sweeps:
        changed = 0
        for i in range(n):
            ai = alpha[i]
            r = yl[i] * err[i]
            if not ((r < -tol and ai < ul[i]) or (r > tol and ai > 0.0)):
                continue
            j = int(rng.integers(n - 1))
            if j >= i:
                j += 1
            if not take_step(i, j):
                j = _best_partner(i, ai, yl[i], err[i], alpha, y, err, upper, k[i], diag)
                if j < 0 or not take_step(i, j):
                    continue
            changed += 1
        sweeps += 1
        passes = passes + 1 if changed == 0 else 0
    converged = passes >= cfg.max_passes
    return alpha, state["b"], sweeps, converged


def train_binary(
    features,
    labels,
    config: SvmConfig = SvmConfig(),
    sample_weights=None,
    kernel_cache: Optional[np.ndarray] = None,
) -> BinarySvmModel:
    """Fit one binary model on labels in {-1, +1}.

    ``kernel_cache`` lets callers share one Gram matrix across the
    binary problems of a one-vs-all fit.
    """
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(y) != len(x):
        raise HarError("features and labels disagree on the row count")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise HarError("binary labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise HarError("binary SVM needs both classes present")
    gamma = config.gamma if config.gamma is not None else 1.0 / x.shape[1]
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    upper = config.c * w
    k = kernel_cache if kernel_cache is not None else kernel_matrix(x, x, config.kernel, gamma)
    rng = np.random.default_rng(config.seed)
    alpha, b, sweeps, converged = _smo(k, y, upper, config, rng)
    if not converged:
        log.warning("SMO stopped after %d sweeps without %d quiet passes", sweeps, config.max_passes)
    sv = alpha > _SV_EPS
    return BinarySvmModel(
        support_vectors=x[sv].copy(),
        dual_coef=alpha[sv] * y[sv],
        bias=float(b),
        kernel=config.kernel,
        gamma=gamma,
        alphas=alpha[sv].copy(),
        upper=upper[sv].copy(),
        sweeps=sweeps,
        converged=converged,
    )


@dataclass(frozen=True, eq=False)
class OneVsAllSvm:
    classes: tuple
    models: tuple
    class_weights: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.models[0].support_vectors.shape[1] if len(self.models[0].support_vectors) else -1

    def decision_function(self, x) -> np.ndarray:
        x = np.asarray(getattr(x, "values", x), dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if len(x) == 0:
            return np.zeros((0, len(self.classes)))
        return np.stack([m.decision_function(x) for m in self.models], axis=1)

    def dual_feasible(self) -> bool:
        return all(m.dual_feasible() for m in self.models)


def train_one_vs_all(features, labels, config: SvmConfig = SvmConfig(), class_weights=None) -> OneVsAllSvm:
    """One binary model per class present in ``labels``, sharing a Gram matrix."""
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise HarError("one-vs-all SVM needs at least 2 classes")
    if config.class_weighting:
        if class_weights is None:
            class_weights = compute_class_weights(labels)
        sample_w = np.array([class_weights[int(c)] for c in labels])
    else:
        class_weights = {c: 1.0 for c in classes}
        sample_w = np.ones(len(labels))
    gamma = config.gamma if config.gamma is not None else 1.0 / x.shape[1]
    gram = kernel_matrix(x, x, config.kernel, gamma)
    models = []
    for c in classes:
        y = np.where(labels == c, 1.0, -1.0)
        models.append(train_binary(x, y, config, sample_w, kernel_cache=gram))
    return OneVsAllSvm(classes, tuple(models), dict(class_weights))


def predict(model: OneVsAllSvm, features) -> np.ndarray:
    """Class with the largest decision value; ties go to the lowest class id."""
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(0 if x.size == 0 else 1, -1)
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    dims = {m.support_vectors.shape[1] for m in model.models if len(m.support_vectors)}
    if dims and x.shape[1] not in dims:
        raise HarError(f"feature dimension {x.shape[1]} does not match the trained dimension {dims.pop()}")
    scores = model.decision_function(x)
    return np.asarray(model.classes, dtype=np.int64)[np.argmax(scores, axis=1)]
