"""Nuisance fitting and the target-domain prediction models.

Model names follow the usual notation:

* ``xi``, ``xi0``  -- pr(Y=1 | x, source) and pr(Y=1 | x, source, A=0)
* ``tau1``, ``tau0`` -- pr(A=1 | x) in the source and in the target
* ``kappa`` -- pr(source | x, A=1)
* ``eta1``, ``eta0``, ``eta`` -- pr(Y=1 | x, target, A=1), ... A=0, and overall
* ``xi1`` -- the naive source-domain counterpart of ``eta1``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import DEFAULT_LAMBDA, ProbModel, fit_logistic
from .core import Dataset, select
from .errors import FitError
from .proportions import ProportionReport, SourceProportions, TargetProportions

NUISANCE_NAMES = ("xi0", "xi", "tau0", "tau1", "kappa")


@dataclass(frozen=True, eq=False)
class NuisanceBundle:
    xi0: object
    xi: object
    tau0: object
    tau1: object
    kappa: object

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in NUISANCE_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "NuisanceBundle":
        return cls(**{name: ProbModel.from_dict(d[name]) for name in NUISANCE_NAMES})


def _fit(name, X, labels, lam):
    if X.shape[0] == 0:
        raise FitError("empty training subset", name)
    return fit_logistic(X, labels, lam, name=name)


def fit_nuisance(ds: Dataset, lam: float = DEFAULT_LAMBDA) -> NuisanceBundle:
    """Fit the five logistic nuisance models on their training subsets."""
    src = select(ds, r=1)
    src0 = select(src, a=0)
    tgt = select(ds, r=0)
    a1 = select(ds, a=1)
    # fit order decides which model is reported when several subsets are degenerate
    xi = _fit("xi", src.X, src.y, lam)
    xi0 = _fit("xi0", src0.X, src0.y, lam)
    kappa = _fit("kappa", a1.X, a1.r, lam)
    tau0 = _fit("tau0", tgt.X, tgt.a, lam)
    tau1 = _fit("tau1", src.X, src.a, lam)
    return NuisanceBundle(xi0=xi0, xi=xi, tau0=tau0, tau1=tau1, kappa=kappa)


def _out(v, single):
    return float(v[0]) if single else v


@dataclass(frozen=True, eq=False)
class TargetPredictor:
    """Naive and adapted predictors assembled from a nuisance bundle.

    All methods take a feature matrix (or one feature vector) and return
    probabilities. ``clamp=False`` exposes the raw closed-form values, which
    can leave [0, 1] under estimation error.
    """

    bundle: NuisanceBundle
    source: SourceProportions
    target: TargetProportions
    threshold: float = 0.5

    def _eval(self, name, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        p = np.atleast_1d(np.asarray(getattr(self.bundle, name).predict_proba(np.atleast_2d(X)), float))
        return p, single

    def nuisance(self, name, X):
        p, single = self._eval(name, X)
        return _out(p, single)

    def xi(self, X):
        return self.nuisance("xi", X)

    def xi0(self, X):
        return self.nuisance("xi0", X)

    def tau0(self, X):
        return self.nuisance("tau0", X)

    def tau1(self, X):
        return self.nuisance("tau1", X)

    def kappa(self, X):
        return self.nuisance("kappa", X)

    def xi1(self, X, clamp=True):
        xi, single = self._eval("xi", X)
        xi0, _ = self._eval("xi0", X)
        tau1, _ = self._eval("tau1", X)
        raw = (xi - xi0 * (1.0 - tau1)) / tau1
        return _out(np.clip(raw, 0.0, 1.0) if clamp else raw, single)

    def eta1(self, X, clamp=True):
        k, single = self._eval("kappa", X)
        sp, tp = self.source, self.target
        coef = (tp.beta01 / sp.alpha01) * ((1.0 - sp.pi) / sp.pi)
        raw = 1.0 - coef * k / (1.0 - k)
        return _out(np.clip(raw, 0.0, 1.0) if clamp else raw, single)

    def eta0(self, X):
        xi0, single = self._eval("xi0", X)
        r = self.target.beta10 / self.source.alpha10
        s = self.target.beta00 / self.source.alpha00
        num = r * xi0
        return _out(num / (num + s * (1.0 - xi0)), single)

    def eta(self, X, clamp=True):
        t0, single = self._eval("tau0", X)
        e1 = np.atleast_1d(self.eta1(X, clamp=clamp))
        e0 = np.atleast_1d(self.eta0(X))
        return _out(e1 * t0 + e0 * (1.0 - t0), single)

    def clamp_rate(self, name, X) -> float:
        """Share of rows whose raw ``eta1`` or ``xi1`` falls outside [0, 1]."""
        raw = np.atleast_1d(getattr(self, name)(X, clamp=False))
        if raw.size == 0:
            return 0.0
        return float(np.mean((raw < 0.0) | (raw > 1.0)))

    def label(self, p):
        return classify(p, self.threshold)

    def to_dict(self, report: ProportionReport = None) -> dict:
        report = report or ProportionReport(self.source, self.target, method="")
        return {
            "models": self.bundle.to_dict(),
            "proportions": report.to_dict(),
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetPredictor":
        rep = ProportionReport.from_dict(d["proportions"])
        return cls(NuisanceBundle.from_dict(d["models"]), rep.source, rep.target, d.get("threshold", 0.5))


def naive_xi1(tp: TargetPredictor, x):
    return tp.xi1(x)


def eta1(tp: TargetPredictor, x):
    return tp.eta1(x)


def eta0(tp: TargetPredictor, x):
    return tp.eta0(x)


def eta(tp: TargetPredictor, x):
    return tp.eta(x)


def classify(p, threshold=0.5):
    """1 where the probability strictly exceeds the threshold."""
    out = (np.asarray(p) > threshold).astype(np.int8)
    return int(out) if out.ndim == 0 else out


def oracle_predictor(spec, threshold=0.5) -> TargetPredictor:
    """Predictor built from the exact Gaussian nuisances and the true proportions."""
    from .synthgen import oracle_spec

    o = oracle_spec(spec)
    bundle = NuisanceBundle(xi0=o.xi0, xi=o.xi, tau0=o.tau0, tau1=o.tau1, kappa=o.kappa)
    return TargetPredictor(bundle, o.source, o.target, threshold)
