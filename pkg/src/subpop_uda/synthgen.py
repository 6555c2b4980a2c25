"""Synthetic four-cell Gaussian world, its closed-form oracle, and the pool partitioner.

Random streams
--------------
All randomness comes from PCG64 generators seeded with
``SeedSequence(seed, spawn_key=key)``:

* ``(d, 0)`` draws the cell of every row of domain ``d`` (1 = source, 0 = target);
* ``(d, 1 + k)`` draws the Gaussian features of domain ``d`` rows in cell ``CELLS[k]``;
* ``(2,)`` draws the per-row Bernoulli variates of :func:`partition_pool`.

Each stream is independent of the sample sizes of the others, so changing
``n0`` leaves the source rows untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, MISSING
from .errors import ConfigError, DataError
from .proportions import SourceProportions, TargetProportions

Cell = Tuple[int, int]  # (y, a)
CELLS: Tuple[Cell, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

DEFAULT_MEANS: Dict[Cell, Tuple[float, ...]] = {
    (0, 0): (1.0, 0.0, 0.0, 0.0),
    (0, 1): (0.0, 0.0, 1.0, 0.0),
    (1, 0): (0.0, 1.0, 0.0, 0.0),
    (1, 1): (0.0, 0.0, 0.0, 1.0),
}
DEFAULT_SOURCE_PROBS: Dict[Cell, float] = {(0, 0): 1 / 3, (0, 1): 1 / 3, (1, 0): 1 / 3, (1, 1): 0.0}
DEFAULT_TARGET_PROBS: Dict[Cell, float] = {c: 0.25 for c in CELLS}


def _stream(seed, *key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SyntheticSpec:
    """Identity-covariance Gaussian cells; cell probabilities default to the 1/3 and 1/4 design."""

    n1: int
    n0: int
    seed: int = 0
    means: Dict[Cell, Tuple[float, ...]] = field(default_factory=lambda: dict(DEFAULT_MEANS))
    source_probs: Dict[Cell, float] = field(default_factory=lambda: dict(DEFAULT_SOURCE_PROBS))
    target_probs: Dict[Cell, float] = field(default_factory=lambda: dict(DEFAULT_TARGET_PROBS))

    def __post_init__(self):
        if self.n1 <= 0 or self.n0 <= 0:
            raise ConfigError("n1 and n0 must be positive")
        if set(self.means) != set(CELLS):
            raise ConfigError("means must be given for all four (y, a) cells")
        dims = {len(m) for m in self.means.values()}
        if len(dims) != 1:
            raise ConfigError("all cell means must share one dimension")
        sp = {c: float(self.source_probs.get(c, 0.0)) for c in CELLS}
        tp = {c: float(self.target_probs.get(c, 0.0)) for c in CELLS}
        if sp[(1, 1)] != 0.0:
            raise ConfigError("the source must exclude the (y=1, a=1) cell")
        for name, probs in (("source_probs", sp), ("target_probs", tp)):
            if min(probs.values()) < 0 or abs(sum(probs.values()) - 1.0) > 1e-12:
                raise ConfigError(f"{name} must be a probability vector")
        object.__setattr__(self, "source_probs", sp)
        object.__setattr__(self, "target_probs", tp)

    @property
    def q(self) -> int:
        return len(self.means[(0, 0)])

    def mean(self, cell: Cell) -> np.ndarray:
        return np.asarray(self.means[cell], dtype=np.float64)


def _draw_domain(spec: SyntheticSpec, domain: int, n: int, probs: Dict[Cell, float]):
    p = np.array([probs[c] for c in CELLS])
    cells = _stream(spec.seed, domain, 0).choice(len(CELLS), size=n, p=p)
    X = np.empty((n, spec.q))
    for k, cell in enumerate(CELLS):
        idx = np.flatnonzero(cells == k)
        noise = _stream(spec.seed, domain, 1 + k).standard_normal((idx.size, spec.q))
        X[idx] = spec.mean(cell) + noise
    y = np.array([CELLS[k][0] for k in cells], dtype=np.int8)
    a = np.array([CELLS[k][1] for k in cells], dtype=np.int8)
    return X, y, a


def generate(spec: SyntheticSpec):
    """Draw ``n1`` source rows then ``n0`` target rows.

    Returns ``(dataset, truth)`` where ``truth`` maps each target row index to
    its hidden label.
    """
    Xs, ys, as_ = _draw_domain(spec, 1, spec.n1, spec.source_probs)
    Xt, yt, at = _draw_domain(spec, 0, spec.n0, spec.target_probs)
    ds = Dataset(
        np.vstack([Xs, Xt]),
        np.r_[np.ones(spec.n1, np.int8), np.zeros(spec.n0, np.int8)],
        np.r_[ys, np.full(spec.n0, MISSING, np.int8)],
        np.r_[as_, at],
    )
    truth = {spec.n1 + i: int(v) for i, v in enumerate(yt)}
    return ds, truth


# -- closed-form oracle -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleModel:
    """A conditional probability computed from Gaussian density ratios.

    ``num`` and ``den`` map cells to mixture weights; the probability is
    ``sum_num w_c phi_c(x) / sum_den w_c phi_c(x)``.
    """

    spec: SyntheticSpec
    num: Dict[Cell, float]
    den: Dict[Cell, float]
    name: str = ""
    clamp_eps: float = 1e-15

    def _log_mix(self, X, weights):
        cells = [c for c, w in weights.items() if w > 0]
        if not cells:
            return np.full(X.shape[0], -np.inf)
        terms = np.column_stack([
            np.log(weights[c]) - 0.5 * np.sum((X - self.spec.mean(c)) ** 2, axis=1) for c in cells
        ])
        return logsumexp(terms, axis=1)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        p = np.exp(self._log_mix(X, self.num) - self._log_mix(X, self.den))
        p = np.clip(p, self.clamp_eps, 1.0 - self.clamp_eps)
        return float(p[0]) if single else p


@dataclass(frozen=True, eq=False)
class OracleSet:
    xi0: OracleModel
    xi: OracleModel
    tau0: OracleModel
    tau1: OracleModel
    kappa: OracleModel
    eta0: OracleModel
    eta1: OracleModel
    eta: OracleModel
    source: SourceProportions
    target: TargetProportions


def oracle_spec(spec: SyntheticSpec) -> OracleSet:
    """Exact nuisance models and parameter blocks of the synthetic world.

    ``pi`` is the nominal source share ``n1 / (n1 + n0)``.
    """
    al = spec.source_probs
    be = spec.target_probs
    pi = spec.n1 / (spec.n1 + spec.n0)
    src = {c: al[c] for c in CELLS if c != (1, 1)}

    def model(name, num, den):
        return OracleModel(spec, num, den, name=name)

    kappa_den = {(0, 1): pi * al[(0, 1)] + (1 - pi) * be[(0, 1)], (1, 1): (1 - pi) * be[(1, 1)]}
    rho = be[(1, 0)] + be[(0, 0)]
    return OracleSet(
        xi0=model("xi0", {(1, 0): al[(1, 0)]}, {(1, 0): al[(1, 0)], (0, 0): al[(0, 0)]}),
        xi=model("xi", {(1, 0): al[(1, 0)]}, src),
        tau0=model("tau0", {(0, 1): be[(0, 1)], (1, 1): be[(1, 1)]}, dict(be)),
        tau1=model("tau1", {(0, 1): al[(0, 1)]}, src),
        kappa=model("kappa", {(0, 1): pi * al[(0, 1)]}, kappa_den),
        eta0=model("eta0", {(1, 0): be[(1, 0)]}, {(1, 0): be[(1, 0)], (0, 0): be[(0, 0)]}),
        eta1=model("eta1", {(1, 1): be[(1, 1)]}, {(1, 1): be[(1, 1)], (0, 1): be[(0, 1)]}),
        eta=model("eta", {(1, 1): be[(1, 1)], (1, 0): be[(1, 0)]}, dict(be)),
        source=SourceProportions(al[(1, 0)], al[(0, 1)], al[(0, 0)], pi),
        target=TargetProportions(
            be[(1, 1)], be[(1, 0)], be[(0, 1)], be[(0, 0)], rho,
            al[(1, 0)] / (al[(1, 0)] + al[(0, 0)]),
        ),
    )


# -- labeled-pool partitioner -----------------------------------------------

@dataclass(frozen=True)
class PartitionSpec:
    """Source allocation rates for the (0,1), (1,0) and (0,0) cells."""

    rate_a: float
    rate_b: float
    rate_c: float
    seed: int = 0

    def __post_init__(self):
        for name in ("rate_a", "rate_b", "rate_c"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie strictly inside (0, 1), got {v}")

    def rate(self, cell: Cell) -> float:
        return {(0, 1): self.rate_a, (1, 0): self.rate_b, (0, 0): self.rate_c, (1, 1): 0.0}[cell]


def pool_cell_sizes(pool: Dataset) -> Dict[Cell, int]:
    return {c: int(np.sum((pool.y == c[0]) & (pool.a == c[1]))) for c in CELLS}


def expected_source_sizes(cell_sizes: Dict[Cell, int], ps: PartitionSpec) -> Dict[Cell, float]:
    return {c: cell_sizes.get(c, 0) * ps.rate(c) for c in CELLS}


def partition_pool(pool: Dataset, ps: PartitionSpec):
    """Split a fully labeled pool into source and target rows.

    Every row keeps its position; source rows keep their labels, target rows
    lose them. Each row of cell (0,1), (1,0), (0,0) goes to the source with
    an independent Bernoulli draw at rate a, b, c; (1,1) rows always go to
    the target. Returns ``(dataset, truth)`` with truth keyed by row index.
    """
    if np.any(pool.y == MISSING):
        raise DataError("the pool must be fully labeled")
    sizes = pool_cell_sizes(pool)
    empty = [c for c, k in sizes.items() if k == 0]
    if empty:
        raise DataError(f"pool is missing cell(s) {empty}")
    u = _stream(ps.seed, 2).random(pool.n)
    rate = np.zeros(pool.n)
    for cell in CELLS:
        rate[(pool.y == cell[0]) & (pool.a == cell[1])] = ps.rate(cell)
    to_source = u < rate
    r = to_source.astype(np.int8)
    y = np.where(to_source, pool.y, MISSING).astype(np.int8)
    ds = Dataset(pool.X, r, y, pool.a)
    truth = {int(i): int(pool.y[i]) for i in np.flatnonzero(~to_source)}
    return ds, truth
