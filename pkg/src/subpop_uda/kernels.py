"""Hot loops of the proportion estimator.

Every kernel exists twice: a numba-compiled loop and a vectorised numpy
version. The module-level names dispatch to one of them according to
``subpop_uda._accel.USE_NUMBA``; both variants stay importable so tests and
benchmarks can compare them directly.

The KL matching objective for a candidate ``beta10`` is the sample mean of

    log( xi0 * beta10 / b1 + (1 - xi0) * (rho - beta10) / (1 - b1) )

over target rows with ``a = 0``. Non-positive log arguments yield ``nan``;
callers decide whether that is an error.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# upper bound on grid_points * n_samples held in memory by the numpy grid path
_NP_GRID_BLOCK = 4_000_000


# -- numpy ------------------------------------------------------------------

def _kl_objective_np(beta10, xi0, b1, rho):
    arg = xi0 * (beta10 / b1) + (1.0 - xi0) * ((rho - beta10) / (1.0 - b1))
    if np.any(arg <= 0.0):
        return math.nan
    return float(np.mean(np.log(arg)))


def _kl_objective_grid_np(betas, xi0, b1, rho):
    betas = np.asarray(betas, dtype=np.float64)
    u = xi0 / b1
    v = (1.0 - xi0) / (1.0 - b1)
    out = np.empty(betas.shape[0])
    step = max(1, _NP_GRID_BLOCK // max(1, xi0.shape[0]))
    for start in range(0, betas.shape[0], step):
        b = betas[start:start + step, None]
        arg = u[None, :] * b + v[None, :] * (rho - b)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.mean(np.log(arg), axis=1)
        vals[np.any(arg <= 0.0, axis=1)] = math.nan
        out[start:start + step] = vals
    return out


def _kl_golden_max_np(xi0, b1, rho, lo, hi, tol):
    f = lambda b: _kl_objective_np(b, xi0, b1, rho)
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    x = 0.5 * (lo + hi)
    return x, f(x)


# -- numba ------------------------------------------------------------------

@njit
def _kl_objective_nb(beta10, xi0, b1, rho):
    n = xi0.shape[0]
    c1 = beta10 / b1
    c0 = (rho - beta10) / (1.0 - b1)
    s = 0.0
    for i in range(n):
        arg = xi0[i] * c1 + (1.0 - xi0[i]) * c0
        if arg <= 0.0:
            return math.nan
        s += math.log(arg)
    return s / n


@njit
def _kl_objective_grid_nb(betas, xi0, b1, rho):
    out = np.empty(betas.shape[0])
    for j in range(betas.shape[0]):
        out[j] = _kl_objective_nb(betas[j], xi0, b1, rho)
    return out


@njit
def _kl_golden_max_nb(xi0, b1, rho, lo, hi, tol):
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1 = _kl_objective_nb(x1, xi0, b1, rho)
    f2 = _kl_objective_nb(x2, xi0, b1, rho)
    while hi - lo > tol:
        if f1 >= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = _kl_objective_nb(x1, xi0, b1, rho)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = _kl_objective_nb(x2, xi0, b1, rho)
    x = 0.5 * (lo + hi)
    return x, _kl_objective_nb(x, xi0, b1, rho)


IMPLEMENTATIONS = {
    "numpy": {
        "kl_objective": _kl_objective_np,
        "kl_objective_grid": _kl_objective_grid_np,
        "kl_golden_max": _kl_golden_max_np,
    },
    "numba": {
        "kl_objective": _kl_objective_nb,
        "kl_objective_grid": _kl_objective_grid_nb,
        "kl_golden_max": _kl_golden_max_nb,
    },
}

BACKEND = "numba" if USE_NUMBA else "numpy"
_impl = IMPLEMENTATIONS[BACKEND]


def _as_probs(xi0):
    return np.ascontiguousarray(xi0, dtype=np.float64)


def kl_objective(beta10, xi0, b1, rho):
    return float(_impl["kl_objective"](float(beta10), _as_probs(xi0), float(b1), float(rho)))


def kl_objective_grid(betas, xi0, b1, rho):
    betas = np.ascontiguousarray(betas, dtype=np.float64)
    return np.asarray(_impl["kl_objective_grid"](betas, _as_probs(xi0), float(b1), float(rho)))


def kl_golden_max(xi0, b1, rho, lo, hi, tol=1e-8):
    """Golden-section search for the maximiser of the (concave) objective on [lo, hi]."""
    x, fx = _impl["kl_golden_max"](_as_probs(xi0), float(b1), float(rho),
                                   float(lo), float(hi), float(tol))
    return float(x), float(fx)
