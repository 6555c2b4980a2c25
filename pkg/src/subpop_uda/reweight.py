"""Target-risk estimation and reweighted fitting from labeled source rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import DEFAULT_LAMBDA, ProbModel, fit_logistic
from .core import MISSING, Dataset, select
from .errors import EstimationError, FitError
from .proportions import SourceProportions, TargetProportions

LOSSES = ("zero_one", "logistic")
_LOG_EPS = 1e-15


@dataclass(frozen=True)
class Loss:
    """Pointwise loss of a predicted probability against a label."""

    name: str = "zero_one"
    threshold: float = 0.5

    def __post_init__(self):
        if self.name not in LOSSES:
            raise ValueError(f"unknown loss {self.name!r}; choose from {LOSSES}")

    def __call__(self, p, y):
        p = np.asarray(p, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.name == "zero_one":
            return ((p > self.threshold).astype(np.float64) != y).astype(np.float64)
        p = np.clip(p, _LOG_EPS, 1.0 - _LOG_EPS)
        return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def as_loss(loss) -> Loss:
    return loss if isinstance(loss, Loss) else Loss(loss)


def _predict(h, X) -> np.ndarray:
    """``h`` is a model with ``predict_proba`` or a callable returning values in [0, 1]."""
    out = h.predict_proba(X) if hasattr(h, "predict_proba") else h(X)
    return np.atleast_1d(np.asarray(out, dtype=np.float64))


@dataclass(frozen=True)
class LabelWeights:
    w1: float
    w0: float

    def __call__(self, y):
        y = np.asarray(y)
        return np.where(y == 1, self.w1, self.w0)


def label_weights(sp: SourceProportions, tp: TargetProportions) -> LabelWeights:
    """Ratio pr(y | target, A=0) / pr(y | source, A=0) for y = 1, 0."""
    src0 = sp.alpha10 + sp.alpha00
    tgt0 = tp.beta10 + tp.beta00
    if sp.alpha10 <= 0 or sp.alpha00 <= 0 or tgt0 <= 0:
        raise EstimationError("label weights need alpha10, alpha00 and beta10 + beta00 positive")
    return LabelWeights(
        w1=tp.beta10 * src0 / (sp.alpha10 * tgt0),
        w0=tp.beta00 * src0 / (sp.alpha00 * tgt0),
    )


def _labeled(ds: Dataset, what: str) -> Dataset:
    if ds.n == 0:
        raise EstimationError(f"{what} is empty")
    if np.any(ds.y == MISSING):
        raise EstimationError(f"{what} must be labeled")
    return ds


def weighted_risk(h, loss, source_a0: Dataset, w: LabelWeights) -> float:
    """Plug-in estimate of the target ``a = 0`` risk from source ``a = 0`` rows."""
    ds = _labeled(source_a0, "source a=0 subset")
    losses = as_loss(loss)(_predict(h, ds.X), ds.y)
    return float(np.mean(losses * w(ds.y)))


def reweighted_erm(source_a0: Dataset, w: LabelWeights, lam: float = DEFAULT_LAMBDA) -> ProbModel:
    ds = _labeled(source_a0, "source a=0 subset")
    if w.w1 <= 0 or w.w0 <= 0:
        raise FitError("degenerate label weights (a class has zero weight)", "reweighted_erm")
    return fit_logistic(ds.X, ds.y, lam, sample_weights=w(ds.y), name="reweighted_erm")


def _a1_terms(h, loss, source_a1_y0: Dataset, target_a1: Dataset):
    loss = as_loss(loss)
    if target_a1.n == 0:
        raise EstimationError("target a=1 subset is empty")
    src = _labeled(source_a1_y0, "source (y=0, a=1) subset")
    first = float(np.mean(loss(_predict(h, target_a1.X), 1)))
    p = _predict(h, src.X)
    correction = float(np.mean(loss(p, 1) - loss(p, 0)))
    return first, correction


def risk_a1(h, loss, source_a1_y0: Dataset, target_a1: Dataset, tp: TargetProportions) -> float:
    """Target ``a = 1`` risk: loss against label 1, corrected by the share of y = 0 rows."""
    mass = tp.beta01 + tp.beta11
    if mass <= 0:
        raise EstimationError("beta01 + beta11 must be positive")
    first, correction = _a1_terms(h, loss, source_a1_y0, target_a1)
    return first - correction * tp.beta01 / mass


def risk_overall(h, loss, ds: Dataset, sp: SourceProportions, tp: TargetProportions) -> float:
    """Whole-target risk assembled from the ``a = 0`` and ``a = 1`` pieces."""
    w = label_weights(sp, tp)
    total = weighted_risk(h, loss, select(ds, r=1, a=0), w) * (tp.beta10 + tp.beta00)
    mass1 = tp.beta01 + tp.beta11
    if mass1 > 0:
        first, correction = _a1_terms(h, loss, select(ds, r=1, y=0, a=1), select(ds, r=0, a=1))
        total += first * mass1 - correction * tp.beta01
    return total


def risk_report(h, loss, ds: Dataset, sp: SourceProportions, tp: TargetProportions) -> dict:
    loss = as_loss(loss)
    w = label_weights(sp, tp)
    return {
        "risk_a0_weighted": weighted_risk(h, loss, select(ds, r=1, a=0), w),
        "risk_a1": risk_a1(h, loss, select(ds, r=1, y=0, a=1), select(ds, r=0, a=1), tp),
        "risk_overall": risk_overall(h, loss, ds, sp, tp),
        "weights": {"w1": w.w1, "w0": w.w0},
        "loss": loss.name,
    }
