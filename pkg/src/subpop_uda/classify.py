"""L2-regularised logistic regression used for every nuisance model.

Features are standardised with the training mean and standard deviation; the
fitted weights live in the standardised space and the statistics are stored
with the model. The criterion is

    sum_i w_i * logloss_i / sum_i w_i  +  (lam / 2) * ||weights||^2

with the intercept left unpenalised. It is minimised with damped Newton
steps (Armijo backtracking), falling back to a gradient step whenever the
Hessian cannot be factorised reliably.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionError, FitError, NumericError

DEFAULT_LAMBDA = 1e-2
DEFAULT_CLAMP_EPS = 1e-6
GRAD_TOL = 1e-8
MAX_ITER = 500
_MAX_COND = 1e12


@dataclass(frozen=True, eq=False)
class ProbModel:
    weights: np.ndarray
    intercept: float
    lam: float = DEFAULT_LAMBDA
    clamp_eps: float = DEFAULT_CLAMP_EPS
    mean: np.ndarray = None
    scale: np.ndarray = None
    n_iter: int = 0
    converged: bool = True
    grad_norm: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        q = w.shape[0]
        mean = np.zeros(q) if self.mean is None else np.asarray(self.mean, dtype=np.float64).ravel()
        scale = np.ones(q) if self.scale is None else np.asarray(self.scale, dtype=np.float64).ravel()
        if mean.shape != (q,) or scale.shape != (q,):
            raise DimensionError("mean/scale must match the weight dimension")
        for name, arr in (("weights", w), ("mean", mean), ("scale", scale)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def q(self) -> int:
        return self.weights.shape[0]

    @property
    def coef_(self) -> np.ndarray:
        """Weights on the original (unstandardised) feature scale."""
        return self.weights / self.scale

    @property
    def intercept_(self) -> float:
        return self.intercept - float(np.dot(self.coef_, self.mean))

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.q:
            raise DimensionError(f"expected {self.q} features, got {X.shape[-1]}")
        return ((X - self.mean) / self.scale) @ self.weights + self.intercept

    def predict_proba(self, X):
        """Clamped sigmoid of the affine score; scalar for a single vector."""
        p = np.clip(expit(self.decision_function(X)), self.clamp_eps, 1.0 - self.clamp_eps)
        return float(p) if np.ndim(p) == 0 else p

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "clamp_eps": self.clamp_eps,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbModel":
        return cls(
            weights=d["weights"], intercept=d["intercept"], lam=d["lambda"],
            clamp_eps=d["clamp_eps"], mean=d["mean"], scale=d["scale"],
        )


def predict_proba(m: ProbModel, x):
    return m.predict_proba(x)


def _design(Z):
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def loss_and_gradient(params, X, y, lam, sample_weights=None):
    """Exact criterion and gradient for ``params = [weights..., intercept]``.

    ``X`` is used as given (no standardisation). Sample weights are
    normalised to sum to one, so a constant weight vector is equivalent to
    none.
    """
    params = np.asarray(params, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    w = np.full(n, 1.0 / n) if sample_weights is None else np.asarray(sample_weights, float) / np.sum(sample_weights)
    beta = params[:-1]
    s = X @ beta + params[-1]
    # log(1 + e^s) - y s
    loss = float(np.dot(w, np.logaddexp(0.0, s) - y * s)) + 0.5 * lam * float(beta @ beta)
    resid = w * (expit(s) - y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ resid + lam * beta
    grad[-1] = resid.sum()
    return loss, grad


def _hessian(params, X, w, lam):
    s = X @ params[:-1] + params[-1]
    p = expit(s)
    D = _design(X)
    H = (D * (w * p * (1.0 - p))[:, None]).T @ D
    H[np.diag_indices(X.shape[1])] += lam
    return H


def _check_inputs(X, y, sample_weights, name):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionError(f"features {X.shape} and labels {y.shape} do not align")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite feature value")
    if not np.all(np.isin(y, (0, 1))):
        raise FitError("labels must be binary", name)
    y = y.astype(np.float64)
    if sample_weights is None:
        if X.shape[0] < 2 or y.min() == y.max():
            raise FitError("need at least two samples covering both classes", name)
        w = None
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != y.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise FitError("sample weights must be finite, nonnegative and one per row", name)
        if w[y == 1].sum() <= 0 or w[y == 0].sum() <= 0:
            raise FitError("each class needs positive total weight", name)
    return X, y, w


def fit_logistic(X, y, lam=DEFAULT_LAMBDA, sample_weights=None, clamp_eps=DEFAULT_CLAMP_EPS,
                 name="", tol=GRAD_TOL, max_iter=MAX_ITER) -> ProbModel:
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X, y, sw = _check_inputs(X, y, sample_weights, name)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    n, q = Z.shape
    w = np.full(n, 1.0 / n) if sw is None else sw / sw.sum()

    theta = np.zeros(q + 1)
    loss, grad = loss_and_gradient(theta, Z, y, lam, w)
    it = 0
    while it < max_iter and np.max(np.abs(grad)) >= tol:
        it += 1
        H = _hessian(theta, Z, w, lam)
        try:
            if np.linalg.cond(H) > _MAX_COND:
                raise np.linalg.LinAlgError
            c = np.linalg.cholesky(H)
            step = -np.linalg.solve(c.T, np.linalg.solve(c, grad))
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if slope >= 0:
            step, slope = -grad, -float(grad @ grad)
        t = 1.0
        for _ in range(60):
            new_loss, new_grad = loss_and_gradient(theta + t * step, Z, y, lam, w)
            if new_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break  # no further decrease representable
        theta = theta + t * step
        loss, grad = new_loss, new_grad

    gnorm = float(np.max(np.abs(grad)))
    converged = gnorm < tol
    if not converged:
        warnings.warn(
            f"logistic fit{' ' + name if name else ''} stopped after {it} iterations "
            f"with gradient norm {gnorm:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return ProbModel(
        weights=theta[:-1], intercept=theta[-1], lam=lam, clamp_eps=clamp_eps,
        mean=mean, scale=scale, n_iter=it, converged=converged, grad_norm=gnorm, name=name,
    )
