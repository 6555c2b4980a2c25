"""Finite-dimensional parameters: source cell shares, target cell shares.

Naming: ``alphaYA`` is pr(Y=y, A=a | source), ``betaYA`` is
pr(Y=y, A=a | target), ``pi`` is the source share of all rows, ``rho`` is
pr(A=0 | target) and ``b1`` is pr(Y=1 | source, A=0).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .core import CellCounts, Dataset, select
from .errors import EstimationError, IdentifiabilityError, NumericError

KL_MARGIN = 1e-4
KL_SCAN_POINTS = 256
KL_TOL = 1e-8
FLAT_TOL = 1e-12
MOMENT_MAX_COND = 1e8
DEFAULT_ANCHOR_QUANTILE = 0.01


class EstimationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SourceProportions:
    alpha10: float
    alpha01: float
    alpha00: float
    pi: float

    def __post_init__(self):
        vals = (self.alpha10, self.alpha01, self.alpha00, self.pi)
        if not all(0.0 < v < 1.0 for v in vals):
            raise EstimationError(f"source proportions must lie in (0, 1): {vals}")
        if abs(self.alpha10 + self.alpha01 + self.alpha00 - 1.0) > 1e-12:
            raise EstimationError("alpha10 + alpha01 + alpha00 must equal 1")


@dataclass(frozen=True)
class TargetProportions:
    beta11: float
    beta10: float
    beta01: float
    beta00: float
    rho: float
    b1: float

    def __post_init__(self):
        betas = (self.beta11, self.beta10, self.beta01, self.beta00)
        if min(betas) < 0.0:
            raise EstimationError(f"target proportions must be nonnegative: {betas}")
        if abs(sum(betas) - 1.0) > 1e-12:
            raise EstimationError(f"target proportions must sum to 1: {betas}")
        if abs(self.beta10 + self.beta00 - self.rho) > 1e-12:
            raise EstimationError("beta10 + beta00 must equal rho")

    @classmethod
    def from_blocks(cls, beta10, beta00, beta01, rho, b1) -> "TargetProportions":
        """Complete the simplex: ``beta11`` takes whatever ``a = 1`` mass remains.

        ``beta01`` is capped into ``[0, 1 - rho]`` first.
        """
        beta01 = min(max(float(beta01), 0.0), 1.0 - rho)
        beta11 = (1.0 - rho) - beta01
        return cls(beta11, beta10, beta01, beta00, rho, b1)


@dataclass
class ProportionReport:
    source: SourceProportions
    target: TargetProportions
    method: str
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {**asdict(self.source), **asdict(self.target)}
        d["method"] = self.method
        d["warnings"] = list(self.warnings)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ProportionReport":
        sp = SourceProportions(d["alpha10"], d["alpha01"], d["alpha00"], d["pi"])
        tp = TargetProportions(d["beta11"], d["beta10"], d["beta01"], d["beta00"], d["rho"], d["b1"])
        return cls(sp, tp, d.get("method", ""), list(d.get("warnings", [])))


def estimate_source_proportions(c: CellCounts) -> SourceProportions:
    if min(c.n110, c.n101, c.n100) <= 0:
        raise EstimationError("every source cell (1,0), (0,1), (0,0) needs at least one row")
    if c.n0 <= 0:
        raise EstimationError("no target rows")
    return SourceProportions(c.n110 / c.n1, c.n101 / c.n1, c.n100 / c.n1, c.n1 / c.n)


def estimate_rho_b1(c: CellCounts):
    if c.n0 <= 0:
        raise EstimationError("no target rows")
    if c.n110 + c.n100 <= 0:
        raise EstimationError("no source rows with a=0")
    return c.n0_dot0 / c.n0, c.n110 / (c.n110 + c.n100)


# -- KL distribution matching -----------------------------------------------

def _probs(model_or_values, ds: Optional[Dataset] = None) -> np.ndarray:
    if hasattr(model_or_values, "predict_proba"):
        return np.atleast_1d(np.asarray(model_or_values.predict_proba(ds.X), dtype=np.float64))
    return np.atleast_1d(np.asarray(model_or_values, dtype=np.float64))


def kl_objective(beta10, xi0_vals, b1, rho) -> float:
    """Mean log matching criterion over target ``a = 0`` rows."""
    xi0 = np.asarray(xi0_vals, dtype=np.float64)
    if xi0.size == 0:
        raise EstimationError("kl_objective needs at least one target a=0 row")
    val = kernels.kl_objective(beta10, xi0, b1, rho)
    if np.isnan(val):
        raise NumericError(f"log argument nonpositive at beta10={beta10}")
    return val


def maximize_kl(xi0_vals, b1, rho, margin=KL_MARGIN, scan_points=KL_SCAN_POINTS, tol=KL_TOL):
    """Coarse scan plus golden-section refinement; returns ``(beta10, warnings)``."""
    xi0 = np.ascontiguousarray(xi0_vals, dtype=np.float64)
    lo, hi = margin * rho, (1.0 - margin) * rho
    grid = np.linspace(lo, hi, scan_points)
    vals = kernels.kl_objective_grid(grid, xi0, b1, rho)
    if np.any(np.isnan(vals)):
        raise NumericError("log argument nonpositive on the search interval")
    if np.ptp(xi0) <= FLAT_TOL or np.ptp(vals) <= FLAT_TOL:
        msg = "matching objective is flat (xi0 carries no information); returning rho/2"
        return 0.5 * rho, [msg]
    k = int(np.argmax(vals))
    left = grid[max(k - 1, 0)]
    right = grid[min(k + 1, scan_points - 1)]
    beta, _ = kernels.kl_golden_max(xi0, b1, rho, left, right, tol)
    return beta, []


def estimate_beta_kl(xi0, target_a0: Dataset, b1, rho, margin=KL_MARGIN):
    """Maximise the KL matching criterion in ``beta10``; ``beta00 = rho - beta10``.

    ``xi0`` is either a fitted model (evaluated on ``target_a0``) or the
    precomputed probability vector. Returns ``(beta10, beta00, warnings)``.
    """
    if target_a0 is not None and target_a0.n == 0:
        raise EstimationError("no target rows with a=0")
    if not 0.0 < rho < 1.0:
        raise EstimationError(f"rho must lie in (0, 1), got {rho}")
    if not 0.0 < b1 < 1.0:
        raise EstimationError(f"b1 must lie in (0, 1), got {b1}")
    vals = _probs(xi0, target_a0)
    if vals.size == 0:
        raise EstimationError("no target rows with a=0")
    beta10, notes = maximize_kl(vals, b1, rho, margin=margin)
    for msg in notes:
        warnings.warn(msg, EstimationWarning, stacklevel=2)
    return beta10, rho - beta10, notes


# -- moment matching --------------------------------------------------------

MomentSpec = Union[None, int, Sequence[float], Callable[[np.ndarray], np.ndarray]]


def first_principal_direction(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    v = vt[0]
    # fix the sign so the direction is deterministic
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def moment_function(moments: MomentSpec, pooled_a0: Optional[np.ndarray] = None):
    """Build ``m(X) -> (n, 2)`` with a leading constant column.

    ``None`` uses the first principal direction of ``pooled_a0``; an ``int``
    selects one feature coordinate; a vector gives a projection direction; a
    callable is used as is.
    """
    if callable(moments):
        return moments
    if moments is None:
        if pooled_a0 is None:
            raise ValueError("default moments need the pooled a=0 features")
        direction = first_principal_direction(pooled_a0)
    elif isinstance(moments, (int, np.integer)):
        direction = int(moments)
    else:
        direction = np.asarray(moments, dtype=np.float64)

    def m(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        proj = X[:, direction] if isinstance(direction, int) else X @ direction
        return np.column_stack([np.ones(X.shape[0]), proj])

    return m


def solve_moment_system(m10, m00, m_target, rho, max_cond=MOMENT_MAX_COND):
    """Solve ``[m10, m00] beta = rho * m_target`` for ``(beta10, beta00)``.

    The result is clipped at zero and rescaled so the pair sums to ``rho``.
    Returns ``(beta10, beta00, warnings)``.
    """
    M = np.column_stack([np.asarray(m10, float), np.asarray(m00, float)])
    rhs = rho * np.asarray(m_target, dtype=np.float64)
    if M.shape[0] < 2:
        raise IdentifiabilityError("need at least two moments")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > max_cond:
        raise IdentifiabilityError(
            f"moment matrix is singular or ill-conditioned (cond={cond:.3g}); "
            "the (1,0) and (0,0) source cells are not distinguishable by these moments"
        )
    if M.shape[0] == 2:
        beta = np.linalg.solve(M, rhs)
    else:
        beta = np.linalg.lstsq(M, rhs, rcond=None)[0]
    notes = []
    if np.any(beta < 0):
        notes.append(f"negative moment solution {beta.tolist()} clipped to 0")
        beta = np.clip(beta, 0.0, None)
    total = beta.sum()
    if total <= 0:
        raise IdentifiabilityError("moment solution vanished after clipping")
    beta10 = float(beta[0] * rho / total)
    return beta10, rho - beta10, notes


def estimate_beta_moment(moments: MomentSpec, source: Dataset, target_a0: Dataset, rho):
    """Moment-matching alternative to :func:`estimate_beta_kl`."""
    s10 = select(source, r=1, y=1, a=0)
    s00 = select(source, r=1, y=0, a=0)
    if min(s10.n, s00.n, target_a0.n) == 0:
        raise EstimationError("moment matching needs source (1,0), (0,0) and target a=0 rows")
    m = moment_function(moments, np.vstack([s10.X, s00.X, target_a0.X]))
    beta10, beta00, notes = solve_moment_system(
        m(s10.X).mean(axis=0), m(s00.X).mean(axis=0), m(target_a0.X).mean(axis=0), rho
    )
    for msg in notes:
        warnings.warn(msg, EstimationWarning, stacklevel=2)
    return beta10, beta00, notes


# -- beta01 via the anchor-set rule -----------------------------------------

def estimate_beta01_anchor(kappa, target_a1: Dataset, alpha01, pi, rho,
                           quantile=DEFAULT_ANCHOR_QUANTILE):
    """Largest ``beta01`` keeping ``eta1 >= 0`` on all but a ``quantile`` share of rows.

    ``kappa`` is a model (evaluated on ``target_a1``) or a probability vector.
    The value is capped into ``[0, 1 - rho]``. Returns ``(beta01, beta11)``.
    """
    if target_a1 is not None and target_a1.n == 0:
        raise EstimationError("no target rows with a=1")
    if not 0.0 < alpha01 < 1.0 or not 0.0 < pi < 1.0:
        raise EstimationError("alpha01 and pi must lie in (0, 1)")
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    k = _probs(kappa, target_a1)
    if k.size == 0:
        raise EstimationError("no target rows with a=1")
    eps = getattr(kappa, "clamp_eps", 0.0)
    if eps > 0 and np.all((k <= eps * (1 + 1e-9)) | (k >= 1.0 - eps * (1 + 1e-9))):
        raise EstimationError("kappa is clamped on every target a=1 row")
    odds = (1.0 - k) / k
    q = float(np.quantile(odds, quantile, method="lower"))
    cap = 1.0 - rho
    beta01 = min(max(alpha01 * pi / (1.0 - pi) * q, 0.0), cap)
    return beta01, cap - beta01
